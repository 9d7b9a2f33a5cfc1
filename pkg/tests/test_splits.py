import pytest

from burnscar.splits import EventRecord, SplitManifest, split_by_event


def _events(n):
    return [EventRecord(event_id=f"ev{i:03d}", year=2020, burnt_area_ha=50.0 + i) for i in range(n)]


def test_proportional_sizes():
    m = split_by_event(_events(10), fractions=(0.6, 0.2, 0.2), seed=0)
    sizes = {s: sum(1 for v in m.assignments.values() if v == s) for s in ("train", "val", "test")}
    assert sizes == {"train": 6, "val": 2, "test": 2}
    assert m.counts["train"][0] == 6


def test_deterministic_for_seed():
    a = split_by_event(_events(20), seed=5)
    b = split_by_event(_events(20), seed=5)
    assert a.assignments == b.assignments
    c = split_by_event(_events(20), seed=6)
    assert c.assignments != a.assignments


def test_order_independent():
    evs = _events(12)
    a = split_by_event(evs, seed=3)
    b = split_by_event(list(reversed(evs)), seed=3)
    assert a.assignments == b.assignments


def test_partition_property():
    evs = _events(17)
    m = split_by_event(evs, fractions=(0.5, 0.25, 0.25), seed=1)
    assert set(m.assignments) == {e.event_id for e in evs}
    # every event in exactly one split
    assert all(v in ("train", "val", "test") for v in m.assignments.values())


def test_bad_fractions_rejected():
    with pytest.raises(ValueError):
        split_by_event(_events(10), fractions=(0.5, 0.3, 0.3), seed=0)


def test_too_few_events():
    with pytest.raises(ValueError):
        split_by_event(_events(2), seed=0)


def test_duplicate_event_ids():
    evs = _events(4)
    evs.append(EventRecord(event_id="ev000"))
    with pytest.raises(ValueError):
        split_by_event(evs, seed=0)


def test_manifest_roundtrip(tmp_path):
    m = split_by_event(_events(8), seed=2)
    path = tmp_path / "split.json"
    m.save(path)
    back = SplitManifest.load(path)
    assert back.assignments == m.assignments
    assert back.seed == m.seed
    assert back.counts == m.counts


def test_event_record_validation():
    with pytest.raises(ValueError):
        EventRecord(event_id="x", burnt_area_ha=-1.0)
    with pytest.raises(ValueError):
        EventRecord(event_id="x", split="holdout")
