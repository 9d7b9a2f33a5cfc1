import numpy as np
import pytest

from burnscar.archive import write_archive
from burnscar.checkpoint import save_checkpoint
from burnscar.errors import CompatibilityError
from burnscar.evaluation import (
    evaluate_checkpoint,
    evaluate_checkpoints,
    evaluate_model,
    predict_sample,
)
from burnscar.model import ModelConfig, build_model
from burnscar.splits import SplitManifest

from conftest import TINY_CONFIG, make_sample


def _patches(n=4):
    return [
        make_sample(seed=i, positive=i % 2 == 0, patch_id=f"p{i}", event_id=f"e{i}")
        for i in range(n)
    ]


def test_labels_as_predictions_perfect():
    report = evaluate_model(None, _patches(), labels_as_predictions=True)
    assert report.precision == report.recall == report.f1 == report.iou == 1.0
    assert report.lr_f1 == 1.0
    assert report.n_events_detected == 2  # the two positive events
    assert report.n_patches == 4


def test_predict_sample_shapes():
    model = build_model(ModelConfig(**TINY_CONFIG), 0)
    p = _patches(1)[0]
    pred_hr, pred_lr = predict_sample(model, p)
    assert pred_hr.shape == p.label_hr.shape
    assert pred_lr.shape == p.label_lr.shape
    assert set(np.unique(pred_hr)) <= {0.0, 1.0}


def test_evaluate_model_smoke():
    model = build_model(ModelConfig(**TINY_CONFIG), 0)
    report = evaluate_model(model, _patches())
    assert report.n_patches == 4
    assert report.counts.total == 4 * 32 * 32
    assert report.metadata["threshold"] == 0.5


def test_incompatible_channels_rejected():
    model = build_model(ModelConfig(c1=6, c2=3, s=8, widths=(4,)), 0)
    with pytest.raises(CompatibilityError, match="channels"):
        evaluate_model(model, _patches())


def test_incompatible_scale_rejected():
    model = build_model(ModelConfig(c1=4, c2=3, s=4, widths=(4,), hr_depth=2), 0)
    with pytest.raises(CompatibilityError, match="scale"):
        evaluate_model(model, _patches())


def test_evaluate_checkpoint_roundtrip(tmp_path):
    patches = _patches()
    manifest = SplitManifest(assignments={p.event_id: "test" for p in patches}, seed=0)
    write_archive(patches, manifest, tmp_path / "arc")
    model = build_model(ModelConfig(**TINY_CONFIG), 0)
    save_checkpoint(tmp_path / "m.ckpt", model, seed=0, step=0)
    report = evaluate_checkpoint(tmp_path / "m.ckpt", tmp_path / "arc", split="test")
    assert report.n_patches == 4
    assert report.metadata["split"] == "test"
    assert report.metadata["dataset_hash"]
    # deterministic model + archive: repeated evaluation aggregates identically
    again = evaluate_checkpoint(tmp_path / "m.ckpt", tmp_path / "arc", split="test")
    assert again.counts == report.counts


def test_evaluate_checkpoints_summary(tmp_path):
    patches = _patches()
    manifest = SplitManifest(assignments={p.event_id: "test" for p in patches}, seed=0)
    write_archive(patches, manifest, tmp_path / "arc")
    paths = []
    for i in range(3):
        model = build_model(ModelConfig(**TINY_CONFIG), 0)  # same seed: identical
        path = tmp_path / f"m{i}.ckpt"
        save_checkpoint(path, model, seed=0, step=0)
        paths.append(path)
    reports, summary = evaluate_checkpoints(paths, tmp_path / "arc", split="test")
    assert len(reports) == 3
    for key, (mean, std) in summary.items():
        if mean is not None:
            assert std == pytest.approx(0.0), key


def test_empty_split_rejected(tmp_path):
    patches = _patches()
    manifest = SplitManifest(assignments={p.event_id: "train" for p in patches}, seed=0)
    write_archive(patches, manifest, tmp_path / "arc")
    with pytest.raises(CompatibilityError, match="empty"):
        evaluate_checkpoint(None, tmp_path / "arc", split="val", labels_as_predictions=True)
