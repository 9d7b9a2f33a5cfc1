"""Event-wise train/val/test splitting.

Patches from one wildfire event always land in the same split, so the
splits are spatially disjoint by construction.  Assignment is a seeded
shuffle of the event ids followed by a proportional cut.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SPLITS = ("train", "val", "test")


@dataclass
class EventRecord:
    event_id: str
    year: int = 0
    burnt_area_ha: float = 0.0
    split: str = "unassigned"

    def __post_init__(self):
        if self.burnt_area_ha < 0:
            raise ValueError("burnt_area_ha must be >= 0")
        if self.split not in SPLITS + ("unassigned",):
            raise ValueError(f"unknown split {self.split!r}")


@dataclass
class SplitManifest:
    assignments: dict  # event_id -> split
    seed: int
    counts: dict = field(default_factory=dict)  # split -> [n_events, n_patches]

    def split_of(self, event_id: str) -> str:
        return self.assignments.get(event_id, "unassigned")

    def to_dict(self) -> dict:
        return {
            "assignments": self.assignments,
            "seed": self.seed,
            "counts": self.counts,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplitManifest":
        return cls(
            assignments=dict(d["assignments"]),
            seed=int(d["seed"]),
            counts={k: list(v) for k, v in d.get("counts", {}).items()},
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path) -> "SplitManifest":
        return cls.from_dict(json.loads(Path(path).read_text()))


def split_by_event(
    events: list[EventRecord],
    fractions: tuple[float, float, float] = (0.6, 0.2, 0.2),
    seed: int = 0,
) -> SplitManifest:
    """Assign every event to train/val/test by seeded shuffle.

    Fractions must sum to 1; sizes are the rounded proportions with the
    remainder going to test.  Deterministic for a fixed seed regardless
    of input order.
    """
    if len(events) < 3:
        raise ValueError(f"need at least 3 events to split, got {len(events)}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions {fractions} do not sum to 1")
    ids = sorted(e.event_id for e in events)
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate event_id in input")
    order = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in order]

    n = len(ids)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    n_train = min(n_train, n)
    n_val = min(n_val, n - n_train)

    assignments = {}
    for k, eid in enumerate(shuffled):
        if k < n_train:
            assignments[eid] = "train"
        elif k < n_train + n_val:
            assignments[eid] = "val"
        else:
            assignments[eid] = "test"
    counts = {
        s: [sum(1 for v in assignments.values() if v == s), 0] for s in SPLITS
    }
    return SplitManifest(assignments=assignments, seed=seed, counts=counts)


def update_patch_counts(manifest: SplitManifest, patches) -> None:
    """Fill the per-split patch counts from a realized patch list."""
    tallies = {}
    for p in patches:
        tallies[manifest.split_of(p.event_id)] = (
            tallies.get(manifest.split_of(p.event_id), 0) + 1
        )
    for s, (n_ev, _) in list(manifest.counts.items()):
        manifest.counts[s] = [n_ev, tallies.get(s, 0)]
    for s, n in tallies.items():
        if s not in manifest.counts:
            n_ev = len({p.event_id for p in patches if manifest.split_of(p.event_id) == s})
            manifest.counts[s] = [n_ev, n]
