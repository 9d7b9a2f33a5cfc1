"""Command-line interface.

Subcommands: synth, prepare, train, eval, predict, ablate, render.
Options resolve as CLI flag > config file (--config, TOML or JSON) >
built-in default, and every run writes its fully resolved configuration
next to its outputs before any long-running work starts.  The only
environment variable honored is BURNSCAR_OUTPUT_ROOT, which prefixes
relative output paths.

Exit codes: 0 success, 2 usage, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import tifffile

from .archive import read_archive, write_array, write_archive
from .augment import AugmentationConfig
from .errors import (
    AlignmentError,
    CompatibilityError,
    GenerationError,
    GradCheckError,
    IntegrityError,
    SchemaError,
    TrainingError,
)
from .evaluation import evaluate_checkpoint, evaluate_checkpoints, predict_sample
from .checkpoint import load_model
from .metrics import MetricsReport, _fmt_metric
from .model import ModelConfig
from .overlay import plot_ratio_histograms, render_overlay, write_ratio_csv
from .patches import QualityFlags, filter_patches, sample_negatives, tile_patches
from .raster import read_geotiff, resample_nearest, resample_nearest_array
from .splits import EventRecord, SplitManifest, split_by_event
from .synth import SYNTH_HR_BANDS, SceneSpec, make_dataset, spec_provenance
from .train import TrainConfig, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

ABLATION_ROWS = (
    ("siamese", False, False),
    ("pseudo_siamese", False, False),
    ("siamese", True, False),
    ("pseudo_siamese", True, False),
    ("siamese", False, True),
    ("pseudo_siamese", False, True),
    ("siamese", True, True),
    ("pseudo_siamese", True, True),
)


def _out_path(p) -> Path:
    root = os.environ.get("BURNSCAR_OUTPUT_ROOT")
    p = Path(p)
    if root and not p.is_absolute():
        return Path(root) / p
    return p


def _load_config_file(path) -> dict:
    path = Path(path)
    text = path.read_bytes()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib  # py311+
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(text.decode("utf-8"))
    return json.loads(text.decode("utf-8"))


# config-file spellings that differ from the flag names
_KEY_ALIASES = {"total_steps": "steps"}


def _merged(args, section_name: str, defaults: dict) -> dict:
    """flag > config-file section > default, for every key in defaults."""
    file_cfg = {}
    if getattr(args, "config", None):
        raw = _load_config_file(args.config).get(section_name, {})
        file_cfg = {_KEY_ALIASES.get(k, k): v for k, v in raw.items()}
    out = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        out[key] = flag if flag is not None else file_cfg.get(key, default)
    return out


def _write_run_config(out_dir: Path, command: str, resolved: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {"command": command, "resolved": resolved}
    (out_dir / "run_config.json").write_text(json.dumps(doc, indent=2, default=str))


def _parse_widths(value) -> tuple[int, ...]:
    if isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    return tuple(int(v) for v in str(value).split(",") if v.strip())


def _parse_fractions(value) -> tuple[float, float, float]:
    if isinstance(value, (list, tuple)):
        vals = [float(v) for v in value]
    else:
        vals = [float(v) for v in str(value).split(",") if v.strip()]
    if len(vals) != 3:
        raise ValueError(f"need 3 split fractions, got {vals}")
    return tuple(vals)


def _infer_model_config(patches, opts: dict) -> ModelConfig:
    p = patches[0]
    s = p.scale
    hr_depth = s.bit_length() - 1
    if 2**hr_depth != s:
        raise CompatibilityError(f"archive scale factor {s} is not a power of two")
    return ModelConfig(
        c1=p.hr_pre.shape[0],
        c2=p.lr_pre.shape[0],
        s=s,
        widths=_parse_widths(opts["widths"]),
        siamese_mode=opts["siamese_mode"],
        attn_lr=bool(opts["attn_lr"]),
        attn_hr=bool(opts["attn_hr"]),
        se_reduction=int(opts["se_reduction"]),
        hr_depth=hr_depth,
    )


def _train_config(opts: dict) -> TrainConfig:
    aug_spec = opts.get("aug")
    if opts["no_augment"] or aug_spec is False:
        aug = None
    elif isinstance(aug_spec, dict):
        aug = AugmentationConfig(
            p_hflip=float(aug_spec.get("p_hflip", 0.5)),
            p_vflip=float(aug_spec.get("p_vflip", 0.5)),
            p_rot=float(aug_spec.get("p_rot", 0.5)),
            rot_range_deg=tuple(aug_spec.get("rot_range_deg", (-15.0, 15.0))),
        )
    else:
        aug = AugmentationConfig()
    return TrainConfig(
        lr0=float(opts["lr0"]),
        total_steps=int(opts["steps"]),
        batch_size=int(opts["batch_size"]),
        seed=int(opts["seed"]),
        schedule=opts["schedule"],
        adam_betas=tuple(float(b) for b in opts["adam_betas"]),
        adam_eps=float(opts["adam_eps"]),
        checkpoint_every=int(opts["checkpoint_every"]),
        loss_weights=tuple(float(w) for w in opts["loss_weights"]),
        aug=aug,
    )


MODEL_DEFAULTS = {
    "widths": "32,64,128,256",
    "siamese_mode": "siamese",
    "attn_lr": True,
    "attn_hr": False,
    "se_reduction": 16,
}

TRAIN_DEFAULTS = {
    "steps": 100,
    "batch_size": 4,
    "lr0": 1e-4,
    "schedule": "linear_decay",
    "seed": 0,
    "checkpoint_every": 0,
    "no_augment": False,
    "adam_betas": (0.9, 0.999),
    "adam_eps": 1e-8,
    "loss_weights": (1.0, 1.0),
    "aug": None,
}


# ---------------------------------------------------------------- synth


def cmd_synth(args) -> int:
    opts = _merged(
        args,
        "synth",
        {
            "n_pos": 4,
            "n_neg": 4,
            "hr_size": 128,
            "scale": 8,
            "n_burns": 2,
            "size_class": "medium",
            "severity_lo": 0.5,
            "severity_hi": 1.0,
            "noise_sigma": 0.01,
            "seed": 0,
            "split": "train",
        },
    )
    out = _out_path(args.out)
    _write_run_config(out, "synth", opts)
    template = SceneSpec(
        seed=int(opts["seed"]),
        hr_size=int(opts["hr_size"]),
        s=int(opts["scale"]),
        n_burns=int(opts["n_burns"]),
        size_class_target=opts["size_class"],
        severity_range=(float(opts["severity_lo"]), float(opts["severity_hi"])),
        noise_sigma=float(opts["noise_sigma"]),
    )
    samples, specs = make_dataset(
        int(opts["n_pos"]), int(opts["n_neg"]), template, seed=int(opts["seed"])
    )
    manifest = SplitManifest(
        assignments={s.event_id: opts["split"] for s in samples}, seed=int(opts["seed"])
    )
    write_archive(samples, manifest, out)
    (out / "provenance.json").write_text(json.dumps(spec_provenance(specs), indent=2))
    n_pos = sum(1 for s in samples if s.is_positive)
    print(f"wrote {len(samples)} patches ({n_pos} positive) to {out}")
    return EXIT_OK


# -------------------------------------------------------------- prepare


def _read_scene_rasters(scene: dict, target_gsd: float, scale: int):
    hr = read_geotiff(scene["hr_pre"])
    label_gsd = float(scene.get("label_gsd_m", hr.gsd_m))
    if abs(hr.gsd_m - target_gsd) > 1e-9:
        hr = resample_nearest(hr, target_gsd)
    lr_gsd = target_gsd * scale
    lr_pre = read_geotiff(scene["lr_pre"])
    lr_post = read_geotiff(scene["lr_post"])
    if abs(lr_pre.gsd_m - lr_gsd) > 1e-9:
        lr_pre = resample_nearest(lr_pre, lr_gsd)
    if abs(lr_post.gsd_m - lr_gsd) > 1e-9:
        lr_post = resample_nearest(lr_post, lr_gsd)

    label = np.squeeze(tifffile.imread(scene["label"]))
    if label.ndim != 2:
        raise SchemaError(f"label raster {scene['label']} is not single-band")
    if abs(label_gsd - target_gsd) > 1e-9:
        label = resample_nearest_array(label, label_gsd, target_gsd)
    label = (label > 0.5).astype(np.float32)
    return hr, lr_pre, lr_post, label


def cmd_prepare(args) -> int:
    opts = _merged(
        args,
        "prepare",
        {
            "target_gsd": 60.0,
            "patch_size": 256,
            "scale": 8,
            "fractions": "0.6,0.2,0.2",
            "seed": 0,
            "min_area_ha": 25.0,
            "max_bad_fraction": 0.05,
            "neg_ratio": 1.0,
        },
    )
    out = _out_path(args.out)
    scenes_path = Path(args.scenes)
    scenes = json.loads(scenes_path.read_text())
    _write_run_config(out, "prepare", {**opts, "scenes": str(scenes_path)})

    size = int(opts["patch_size"])
    scale = int(opts["scale"])
    target_gsd = float(opts["target_gsd"])

    events = []
    all_patches = []
    base = scenes_path.parent
    for scene in scenes:
        scene = dict(scene)
        for key in ("hr_pre", "lr_pre", "lr_post", "label"):
            scene[key] = str((base / scene[key]) if not Path(scene[key]).is_absolute() else scene[key])
        events.append(
            EventRecord(
                event_id=scene["event_id"],
                year=int(scene.get("year", 0)),
                burnt_area_ha=float(scene.get("burnt_area_ha", 0.0)),
            )
        )
        hr, lr_pre, lr_post, label = _read_scene_rasters(scene, target_gsd, scale)
        all_patches.extend(
            tile_patches(hr, lr_pre, lr_post, label, size=size, s=scale,
                         event_id=scene["event_id"])
        )

    areas = {e.event_id: e.burnt_area_ha for e in events}
    filtered = filter_patches(
        all_patches,
        areas,
        min_burn_area_ha=float(opts["min_area_ha"]),
        quality=QualityFlags(max_lr_bad_fraction=float(opts["max_bad_fraction"])),
    )
    manifest = split_by_event(
        events, fractions=_parse_fractions(opts["fractions"]), seed=int(opts["seed"])
    )
    kept = []
    for k, split in enumerate(("train", "val", "test")):
        group = [p for p in filtered if manifest.split_of(p.event_id) == split]
        kept.extend(
            sample_negatives(group, ratio=float(opts["neg_ratio"]), seed=int(opts["seed"]) + k)
        )
    write_archive(kept, manifest, out)
    manifest.save(out / "split_manifest.json")
    for split in ("train", "val", "test"):
        n_ev, n_patch = manifest.counts.get(split, (0, 0))
        print(f"{split}: {n_ev} events, {n_patch} patches")
    print(f"archive written to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- train


def cmd_train(args) -> int:
    model_opts = _merged(args, "model", MODEL_DEFAULTS)
    train_opts = _merged(args, "train", TRAIN_DEFAULTS)
    out = _out_path(args.out)
    patches, _ = read_archive(args.archive, split=args.split)
    if not patches:
        raise CompatibilityError(f"split {args.split!r} of {args.archive} is empty")
    model_cfg = _infer_model_config(patches, model_opts)
    train_cfg = _train_config(train_opts)
    _write_run_config(
        out, "train",
        {"model": model_cfg.to_dict(), "train": train_cfg.to_dict(),
         "archive": str(args.archive), "split": args.split},
    )
    val_patches = None
    if args.val_split:
        val_patches, _ = read_archive(args.archive, split=args.val_split)
        val_patches = val_patches or None
    result = train(model_cfg, train_cfg, patches, out_dir=out, val_patches=val_patches)
    last = result.trace[-1]
    print(
        f"trained {train_cfg.total_steps} steps; final loss {last.loss:.4f} "
        f"(lr {last.loss_lr:.4f} + hr {last.loss_hr:.4f})"
    )
    print(f"checkpoint: {result.checkpoint_path}")
    if result.best_checkpoint_path:
        print(f"best (val F1 {result.best_val_f1:.4f}): {result.best_checkpoint_path}")
    return EXIT_OK


# ----------------------------------------------------------------- eval


def _fmt_mean_std(mean, std) -> str:
    if mean is None:
        return "n/a"
    scale = 100.0
    return f"{scale * mean:.2f} ± {scale * std:.2f}"


def cmd_eval(args) -> int:
    opts = _merged(
        args,
        "eval",
        {"threshold": 0.5, "ratio_convention": "cross", "multiscale_aggregate": "micro"},
    )
    out = _out_path(args.out)
    ckpts = args.checkpoint or []
    if not ckpts and not args.labels_as_predictions:
        raise CompatibilityError("need --checkpoint or --labels-as-predictions")
    _write_run_config(
        out, "eval",
        {**opts, "checkpoints": [str(c) for c in ckpts], "archive": str(args.archive),
         "split": args.split, "labels_as_predictions": args.labels_as_predictions},
    )
    common = dict(
        split=args.split,
        threshold=float(opts["threshold"]),
        ratio_convention=opts["ratio_convention"],
        multiscale_aggregate=opts["multiscale_aggregate"],
    )
    if args.labels_as_predictions or len(ckpts) == 1:
        ckpt = ckpts[0] if ckpts else None
        report = evaluate_checkpoint(
            ckpt, args.archive, labels_as_predictions=args.labels_as_predictions, **common
        )
        report.save_json(out / "report.json")
        table = report.format_table()
        (out / "report.txt").write_text(table + "\n")
        write_ratio_csv(report.per_event, out / "ratios.csv")
        plot_ratio_histograms(report.per_event, out / "ratio_hist.png")
        print(table)
    else:
        reports, summary = evaluate_checkpoints(ckpts, args.archive, **common)
        for i, r in enumerate(reports):
            r.save_json(out / f"report_{i}.json")
        (out / "summary.json").write_text(json.dumps(summary, indent=2))
        headers = ("Prec", "Rec", "F1", "IoU_S", "IoU_M", "IoU_L", "#Events")
        keys = list(MetricsReport.COLUMNS) + ["n_events_detected"]
        cells = []
        for key in keys:
            mean, std = summary[key]
            if key == "n_events_detected" and mean is not None:
                cells.append(f"{mean:.1f} ± {std:.1f}")
            else:
                cells.append(_fmt_mean_std(mean, std))
        widths = [max(len(h), len(c)) for h, c in zip(headers, cells)]
        table = (
            "  ".join(h.rjust(w) for h, w in zip(headers, widths))
            + "\n"
            + "  ".join(c.rjust(w) for c, w in zip(cells, widths))
        )
        (out / "report.txt").write_text(table + "\n")
        print(table)
    return EXIT_OK


# -------------------------------------------------------------- predict


def _save_mask_png(mask: np.ndarray, path) -> None:
    from PIL import Image

    Image.fromarray((np.asarray(mask) > 0.5).astype(np.uint8) * 255, mode="L").save(path)


def cmd_predict(args) -> int:
    out = _out_path(args.out)
    patches, _ = read_archive(args.archive, split=args.split)
    if not patches:
        raise CompatibilityError(f"split {args.split!r} of {args.archive} is empty")
    if args.patch_id:
        matches = [p for p in patches if p.patch_id == args.patch_id]
        if not matches:
            raise CompatibilityError(f"no patch {args.patch_id!r} in split {args.split!r}")
        patch = matches[0]
    else:
        patch = patches[args.index]
    _write_run_config(
        out, "predict",
        {"checkpoint": str(args.checkpoint), "archive": str(args.archive),
         "split": args.split, "patch_id": patch.patch_id, "threshold": args.threshold},
    )
    model, _ = load_model(args.checkpoint)
    pred_hr, pred_lr = predict_sample(model, patch, threshold=args.threshold)
    for name, mask in (("pred_hr", pred_hr), ("pred_lr", pred_lr)):
        write_array(out / f"{patch.patch_id}.{name}.arr", mask)
        _save_mask_png(mask, out / f"{patch.patch_id}.{name}.png")
    print(f"wrote HR and LR masks for {patch.patch_id} to {out}")
    return EXIT_OK


# --------------------------------------------------------------- render


def cmd_render(args) -> int:
    out = _out_path(args.out)
    patches, _ = read_archive(args.archive, split=args.split)
    if not patches:
        raise CompatibilityError(f"split {args.split!r} of {args.archive} is empty")
    if args.patch_id:
        patches = [p for p in patches if p.patch_id in set(args.patch_id)]
        if not patches:
            raise CompatibilityError("no matching patch ids")
    _write_run_config(
        out, "render",
        {"checkpoint": str(args.checkpoint) if args.checkpoint else None,
         "archive": str(args.archive), "split": args.split,
         "labels_as_predictions": args.labels_as_predictions},
    )
    model = None
    if not args.labels_as_predictions:
        if not args.checkpoint:
            raise CompatibilityError("need --checkpoint or --labels-as-predictions")
        model, _ = load_model(args.checkpoint)
    for p in patches:
        if args.labels_as_predictions:
            pred = p.label_hr
        else:
            pred, _ = predict_sample(model, p, threshold=args.threshold)
        bands = SYNTH_HR_BANDS if p.hr_pre.shape[0] == len(SYNTH_HR_BANDS) else None
        render_overlay(p.hr_pre, pred, p.label_hr, out / f"{p.patch_id}.png", bands=bands)
    print(f"rendered {len(patches)} overlays to {out}")
    return EXIT_OK


# --------------------------------------------------------------- ablate


def cmd_ablate(args) -> int:
    model_opts = _merged(args, "model", MODEL_DEFAULTS)
    train_opts = _merged(args, "train", TRAIN_DEFAULTS)
    out = _out_path(args.out)
    n_seeds = args.seeds
    patches, manifest = read_archive(args.archive, split=args.split)
    if not patches:
        raise CompatibilityError(f"split {args.split!r} of {args.archive} is empty")
    eval_split = args.eval_split
    if eval_split is None:
        test_n = manifest.counts.get("test", (0, 0))[1]
        eval_split = "test" if test_n else args.split
    _write_run_config(
        out, "ablate",
        {"model": model_opts, "train": train_opts, "seeds": n_seeds,
         "archive": str(args.archive), "split": args.split, "eval_split": eval_split},
    )

    rows = []
    for row_idx, (mode, attn_lr, attn_hr) in enumerate(ABLATION_ROWS):
        cell_reports = []
        failures = []
        for k in range(n_seeds):
            seed = int(train_opts["seed"]) + k
            try:
                cfg = _infer_model_config(
                    patches,
                    {**model_opts, "siamese_mode": mode, "attn_lr": attn_lr, "attn_hr": attn_hr},
                )
                tcfg = _train_config({**train_opts, "seed": seed})
                run_dir = out / f"row{row_idx}_seed{k}"
                result = train(cfg, tcfg, patches, out_dir=run_dir)
                report = evaluate_checkpoint(
                    result.checkpoint_path, args.archive, split=eval_split,
                    threshold=args.threshold,
                )
                cell_reports.append(report)
            except Exception as e:  # keep sweeping; mark the cell failed
                failures.append(f"seed {seed}: {e}")
        rows.append(
            {
                "siamese_mode": mode,
                "attn_lr": attn_lr,
                "attn_hr": attn_hr,
                "reports": cell_reports,
                "failures": failures,
            }
        )

    table_lines = _ablation_table(rows)
    (out / "ablation.txt").write_text("\n".join(table_lines) + "\n")
    _write_ablation_csv(rows, out / "ablation.csv")
    doc = []
    for row in rows:
        doc.append(
            {
                "siamese_mode": row["siamese_mode"],
                "attn_lr": row["attn_lr"],
                "attn_hr": row["attn_hr"],
                "n_runs": len(row["reports"]),
                "failures": row["failures"],
                "metrics": _row_summary(row),
            }
        )
    (out / "ablation.json").write_text(json.dumps(doc, indent=2))
    print("\n".join(table_lines))
    return EXIT_OK


_ABLATE_KEYS = list(MetricsReport.COLUMNS) + ["n_events_detected"]


def _row_summary(row) -> dict:
    from .metrics import summarize_reports

    if not row["reports"]:
        return {}
    summary = summarize_reports(row["reports"])
    return {k: {"mean": summary[k][0], "std": summary[k][1]} for k in _ABLATE_KEYS}


def _ablation_table(rows) -> list[str]:
    headers = ["Encoder", "A_LR", "A_HR", "Prec", "Rec", "F1",
               "IoU_S", "IoU_M", "IoU_L", "#Events"]
    body = []
    for row in rows:
        cells = [
            "S" if row["siamese_mode"] == "siamese" else "PS",
            "x" if row["attn_lr"] else "",
            "x" if row["attn_hr"] else "",
        ]
        if row["reports"]:
            summary = _row_summary(row)
            for key in _ABLATE_KEYS:
                mean = summary[key]["mean"]
                std = summary[key]["std"]
                if key == "n_events_detected" and mean is not None:
                    cells.append(f"{mean:.1f} ± {std:.1f}")
                else:
                    cells.append(_fmt_mean_std(mean, std))
        else:
            cells.extend(["failed"] * len(_ABLATE_KEYS))
        body.append(cells)
    widths = [
        max(len(headers[i]), *(len(r[i]) for r in body)) for i in range(len(headers))
    ]
    lines = ["  ".join(h.rjust(w) for h, w in zip(headers, widths))]
    for cells in body:
        lines.append("  ".join(c.rjust(w) for c, w in zip(cells, widths)))
    return lines


def _write_ablation_csv(rows, path) -> None:
    import csv

    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        header = ["siamese_mode", "attn_lr", "attn_hr"]
        for key in _ABLATE_KEYS:
            header.extend([f"{key}_mean", f"{key}_std"])
        header.append("n_failures")
        writer.writerow(header)
        for row in rows:
            cells = [row["siamese_mode"], int(row["attn_lr"]), int(row["attn_hr"])]
            summary = _row_summary(row)
            for key in _ABLATE_KEYS:
                if summary and summary[key]["mean"] is not None:
                    cells.extend([f"{summary[key]['mean']:.6g}", f"{summary[key]['std']:.6g}"])
                else:
                    cells.extend(["", ""])
            cells.append(len(row["failures"]))
            writer.writerow(cells)


# --------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="burnscar",
        description="Burn scar mapping from multi-resolution bitemporal satellite imagery.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="TOML or JSON config file")

    p = sub.add_parser("synth", help="generate a synthetic patch archive")
    add_common(p)
    p.add_argument("--out", required=True, help="archive output directory")
    p.add_argument("--n-pos", type=int, dest="n_pos")
    p.add_argument("--n-neg", type=int, dest="n_neg")
    p.add_argument("--hr-size", type=int, dest="hr_size")
    p.add_argument("--scale", type=int)
    p.add_argument("--n-burns", type=int, dest="n_burns")
    p.add_argument("--size-class", dest="size_class",
                   choices=("small", "medium", "large"))
    p.add_argument("--severity-lo", type=float, dest="severity_lo")
    p.add_argument("--severity-hi", type=float, dest="severity_hi")
    p.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    p.add_argument("--seed", type=int)
    p.add_argument("--split", choices=("train", "val", "test"))
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prepare", help="tile scene rasters into a patch archive")
    add_common(p)
    p.add_argument("--scenes", required=True, help="JSON list of scene records")
    p.add_argument("--out", required=True)
    p.add_argument("--target-gsd", type=float, dest="target_gsd")
    p.add_argument("--patch-size", type=int, dest="patch_size")
    p.add_argument("--scale", type=int)
    p.add_argument("--fractions", help="train,val,test e.g. 0.6,0.2,0.2")
    p.add_argument("--seed", type=int)
    p.add_argument("--min-area-ha", type=float, dest="min_area_ha")
    p.add_argument("--max-bad-fraction", type=float, dest="max_bad_fraction")
    p.add_argument("--neg-ratio", type=float, dest="neg_ratio")
    p.set_defaults(func=cmd_prepare)

    def add_model_flags(p):
        p.add_argument("--widths", help="encoder widths, e.g. 32,64,128,256")
        p.add_argument("--siamese-mode", dest="siamese_mode",
                       choices=("siamese", "pseudo_siamese"))
        p.add_argument("--attn-lr", dest="attn_lr", action=argparse.BooleanOptionalAction)
        p.add_argument("--attn-hr", dest="attn_hr", action=argparse.BooleanOptionalAction)
        p.add_argument("--se-reduction", type=int, dest="se_reduction")

    def add_train_flags(p):
        p.add_argument("--steps", type=int)
        p.add_argument("--batch-size", type=int, dest="batch_size")
        p.add_argument("--lr0", type=float)
        p.add_argument("--schedule", choices=("linear_decay", "constant"))
        p.add_argument("--seed", type=int)
        p.add_argument("--checkpoint-every", type=int, dest="checkpoint_every")
        p.add_argument("--no-augment", dest="no_augment", action="store_true", default=None)

    p = sub.add_parser("train", help="train a model on an archive split")
    add_common(p)
    p.add_argument("--archive", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--val-split", dest="val_split")
    add_model_flags(p)
    add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate checkpoints on an archive split")
    add_common(p)
    p.add_argument("--archive", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--checkpoint", action="append")
    p.add_argument("--threshold", type=float)
    p.add_argument("--ratio-convention", dest="ratio_convention",
                   choices=("cross", "rates"))
    p.add_argument("--multiscale-aggregate", dest="multiscale_aggregate",
                   choices=("micro", "macro"))
    p.add_argument("--labels-as-predictions", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="write HR and LR masks for one patch")
    add_common(p)
    p.add_argument("--archive", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--patch-id", dest="patch_id")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("render", help="render error overlays for a split")
    add_common(p)
    p.add_argument("--archive", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--split", default="test")
    p.add_argument("--patch-id", dest="patch_id", action="append")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--labels-as-predictions", action="store_true")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("ablate", help="run the 8-row architecture ablation sweep")
    add_common(p)
    p.add_argument("--archive", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--eval-split", dest="eval_split")
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--threshold", type=float, default=0.5)
    add_model_flags(p)
    add_train_flags(p)
    p.set_defaults(func=cmd_ablate)

    return parser


DATA_ERRORS = (
    SchemaError,
    AlignmentError,
    IntegrityError,
    CompatibilityError,
    FileNotFoundError,
    NotADirectoryError,
    IsADirectoryError,
    KeyError,
    ValueError,
    json.JSONDecodeError,
)
NUMERIC_ERRORS = (TrainingError, GenerationError, GradCheckError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NUMERIC_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except DATA_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
