"""Training loop: Adam, linear LR decay, deep-supervision loss.

The loop is fully seed-deterministic: data order, augmentation draws
and weight init all derive from the run seed, so two runs with the same
inputs produce identical loss traces on one platform.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .augment import AugmentationConfig, augment
from .checkpoint import save_checkpoint
from .errors import TrainingError
from .losses import compound_loss
from .metrics import confusion, prf_iou
from .model import ModelConfig, batch_tensors, build_model, predict

SCHEDULES = ("linear_decay", "constant")


@dataclass
class TrainConfig:
    lr0: float = 1e-4
    total_steps: int = 100
    batch_size: int = 4
    seed: int = 0
    schedule: str = "linear_decay"
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    aug: AugmentationConfig | None = field(default_factory=AugmentationConfig)
    checkpoint_every: int = 0  # 0: only the final checkpoint
    loss_weights: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.lr0 <= 0:
            raise ValueError("lr0 must be > 0")
        if self.total_steps < 1 or self.batch_size < 1:
            raise ValueError("total_steps and batch_size must be >= 1")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}")

    def to_dict(self) -> dict:
        d = {
            "lr0": self.lr0,
            "total_steps": self.total_steps,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "schedule": self.schedule,
            "adam_betas": list(self.adam_betas),
            "adam_eps": self.adam_eps,
            "checkpoint_every": self.checkpoint_every,
            "loss_weights": list(self.loss_weights),
            "aug": None,
        }
        if self.aug is not None:
            d["aug"] = {
                "p_hflip": self.aug.p_hflip,
                "p_vflip": self.aug.p_vflip,
                "p_rot": self.aug.p_rot,
                "rot_range_deg": list(self.aug.rot_range_deg),
            }
        return d


def linear_lr(step: int, cfg: TrainConfig) -> float:
    """Learning rate at a step: linear decay to zero or constant."""
    if not 0 <= step <= cfg.total_steps:
        raise ValueError(f"step {step} outside [0, {cfg.total_steps}]")
    if cfg.schedule == "constant":
        return cfg.lr0
    return cfg.lr0 * (1.0 - step / cfg.total_steps)


def optimizer_step(model, optimizer, lr: float) -> None:
    """Apply one Adam step after checking every gradient is finite."""
    for name, p in model.named_parameters():
        if p.grad is not None and not torch.isfinite(p.grad).all():
            raise TrainingError(f"non-finite gradient in {name}")
    for group in optimizer.param_groups:
        group["lr"] = lr
    optimizer.step()


@dataclass
class TraceRow:
    step: int
    lr: float
    loss: float
    loss_lr: float
    loss_hr: float
    wall_ms: float


def write_trace_csv(rows: list[TraceRow], path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "lr", "L", "L_lr", "L_hr", "wall_ms"])
        for r in rows:
            writer.writerow(
                [r.step, f"{r.lr:.10g}", f"{r.loss:.10g}", f"{r.loss_lr:.10g}",
                 f"{r.loss_hr:.10g}", f"{r.wall_ms:.3f}"]
            )


@dataclass
class TrainResult:
    model: object
    trace: list[TraceRow]
    checkpoint_path: Path | None = None
    best_checkpoint_path: Path | None = None
    best_val_f1: float | None = None


def _eval_f1(model, patches, threshold: float = 0.5) -> float | None:
    model.eval()
    total = None
    with torch.no_grad():
        for p in patches:
            hr, lp, lq, y_hr, _ = batch_tensors([p])
            out = model(hr, lp, lq)
            c = confusion(predict(out.y_hr_logits, threshold)[0, 0], p.label_hr)
            total = c if total is None else total + c
    model.train()
    return prf_iou(total)[2] if total is not None else None


def _find_bad_patch(model, samples, weights) -> str:
    with torch.no_grad():
        for s in samples:
            hr, lp, lq, y_hr, y_lr = batch_tensors([s])
            total, _, _ = compound_loss(model(hr, lp, lq), y_hr, y_lr, weights)
            if not torch.isfinite(total):
                return s.patch_id
    return samples[0].patch_id


def train(
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    patches: list,
    out_dir=None,
    val_patches: list | None = None,
) -> TrainResult:
    """Run the seeded training loop over an in-memory patch list.

    Writes trace.csv and checkpoints under out_dir when given; retains
    the best-validation-F1 checkpoint when val_patches are provided.
    """
    if not patches:
        raise ValueError("no training patches")
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    model = build_model(model_cfg, seed=train_cfg.seed)
    model.train()
    optimizer = torch.optim.Adam(
        model.parameters(),
        lr=train_cfg.lr0,
        betas=train_cfg.adam_betas,
        eps=train_cfg.adam_eps,
    )

    order_rng = np.random.default_rng([train_cfg.seed, 11])
    order: list[int] = []
    trace: list[TraceRow] = []
    best_f1 = None
    best_path = None

    for step in range(train_cfg.total_steps):
        idxs = []
        for _ in range(train_cfg.batch_size):
            if not order:
                order = list(order_rng.permutation(len(patches)))
            idxs.append(order.pop(0))
        samples = [patches[i] for i in idxs]
        if train_cfg.aug is not None:
            samples = [
                augment(s, np.random.default_rng([train_cfg.seed, 13, step, j]), train_cfg.aug)
                for j, s in enumerate(samples)
            ]

        t0 = time.perf_counter()
        hr, lp, lq, y_hr, y_lr = batch_tensors(samples)
        lr_now = linear_lr(step, train_cfg)
        out = model(hr, lp, lq)
        total, loss_lr, loss_hr = compound_loss(out, y_hr, y_lr, train_cfg.loss_weights)
        if not torch.isfinite(total):
            bad = _find_bad_patch(model, samples, train_cfg.loss_weights)
            raise TrainingError(f"non-finite loss at step {step} (patch {bad})")
        optimizer.zero_grad()
        total.backward()
        optimizer_step(model, optimizer, lr_now)
        wall_ms = (time.perf_counter() - t0) * 1e3

        trace.append(
            TraceRow(
                step=step,
                lr=lr_now,
                loss=float(total.detach()),
                loss_lr=float(loss_lr.detach()),
                loss_hr=float(loss_hr.detach()),
                wall_ms=wall_ms,
            )
        )

        is_last = step + 1 == train_cfg.total_steps
        periodic = train_cfg.checkpoint_every and (step + 1) % train_cfg.checkpoint_every == 0
        if out_dir is not None and (periodic or is_last):
            if periodic and not is_last:
                save_checkpoint(
                    out_dir / f"checkpoint_step{step + 1:06d}.ckpt",
                    model, seed=train_cfg.seed, step=step + 1, optimizer=optimizer,
                )
            if val_patches:
                f1 = _eval_f1(model, val_patches)
                if f1 is not None and (best_f1 is None or f1 > best_f1):
                    best_f1 = f1
                    best_path = out_dir / "checkpoint_best.ckpt"
                    save_checkpoint(
                        best_path, model, seed=train_cfg.seed, step=step + 1,
                        optimizer=optimizer, extra={"val_f1": f1},
                    )

    final_path = None
    if out_dir is not None:
        final_path = out_dir / "checkpoint_final.ckpt"
        save_checkpoint(
            final_path, model, seed=train_cfg.seed,
            step=train_cfg.total_steps, optimizer=optimizer,
        )
        write_trace_csv(trace, out_dir / "trace.csv")

    return TrainResult(
        model=model,
        trace=trace,
        checkpoint_path=final_path,
        best_checkpoint_path=best_path,
        best_val_f1=best_f1,
    )


def train_config_from_dict(d: dict) -> TrainConfig:
    """Build a TrainConfig from a plain dict (config files, CLI)."""
    d = dict(d)
    aug = d.pop("aug", "default")
    if aug is None:
        aug_cfg = None
    elif aug == "default":
        aug_cfg = AugmentationConfig()
    else:
        aug_cfg = AugmentationConfig(
            p_hflip=aug.get("p_hflip", 0.5),
            p_vflip=aug.get("p_vflip", 0.5),
            p_rot=aug.get("p_rot", 0.5),
            rot_range_deg=tuple(aug.get("rot_range_deg", (-15.0, 15.0))),
        )
    if "adam_betas" in d:
        d["adam_betas"] = tuple(d["adam_betas"])
    if "loss_weights" in d:
        d["loss_weights"] = tuple(d["loss_weights"])
    return TrainConfig(aug=aug_cfg, **d)
