"""Finite-difference verification of the analytic gradients.

Runs a tiny double-precision model, compares the backward pass of the
two-head loss against central differences on a stratified sample of
parameter coordinates (convs, norms, attention gates, heads), and
reports the worst relative error.  Parameters are nudged off their
structured init first so zero-gradient corners (e.g. the zeroed gate
output layers) do not mask disagreements.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from .errors import GradCheckError
from .losses import compound_loss
from .model import ModelConfig, build_model

# Relative error floor: gradient entries below this magnitude are
# compared absolutely at floor scale (|a - fd| / floor), so ordinary FD
# truncation noise on near-zero entries does not dominate the report.
# At the default 1e-5 tolerance this still demands 1e-8 absolute
# agreement on small entries; a wrong gradient of magnitude m shows an
# error of order m / floor, far above any sane tolerance.
REL_FLOOR = 1e-3

BLOCK_TYPES = ("conv", "norm", "se", "head")


def _block_type(name: str) -> str:
    if ".se." in name:
        return "se"
    if "head" in name:
        return "head"
    if ".gn" in name or ".skip.1." in name:
        return "norm"
    return "conv"


@dataclass
class CoordResult:
    name: str
    index: int
    analytic: float
    numeric: float
    rel_err: float


@dataclass
class GradCheckReport:
    max_rel_err: float
    tolerance: float
    n_checked: int
    group_counts: dict = field(default_factory=dict)
    worst: list = field(default_factory=list)  # CoordResult, sorted desc

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance


def _rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), REL_FLOOR)


def fd_check(
    loss_fn,
    named_params: list[tuple[str, torch.Tensor]],
    n_coords: int = 200,
    h: float = 1e-4,
    tolerance: float = 1e-5,
    seed: int = 0,
) -> GradCheckReport:
    """Compare analytic gradients with central differences.

    loss_fn must be a no-argument callable returning a scalar tensor of
    the current parameters.  Coordinates are sampled across the given
    tensors, stratified by block type so every kind of layer is covered.
    """
    loss = loss_fn()
    for _, p in named_params:
        if p.grad is not None:
            p.grad = None
    loss.backward()
    grads = {name: p.grad.detach().clone() for name, p in named_params}

    groups: dict[str, list[tuple[str, torch.Tensor]]] = {}
    for name, p in named_params:
        groups.setdefault(_block_type(name), []).append((name, p))

    gen = torch.Generator().manual_seed(seed)
    per_group = max(1, n_coords // len(groups))
    coords: list[tuple[str, torch.Tensor, int]] = []
    for _, members in sorted(groups.items()):
        for _ in range(per_group):
            name, p = members[int(torch.randint(len(members), (1,), generator=gen))]
            idx = int(torch.randint(p.numel(), (1,), generator=gen))
            coords.append((name, p, idx))
    while len(coords) < n_coords:
        name, p = named_params[int(torch.randint(len(named_params), (1,), generator=gen))]
        idx = int(torch.randint(p.numel(), (1,), generator=gen))
        coords.append((name, p, idx))

    results = []
    group_counts: dict[str, int] = {}
    with torch.no_grad():
        for name, p, idx in coords:
            flat = p.view(-1)
            old = flat[idx].item()
            flat[idx] = old + h
            f_plus = float(loss_fn())
            flat[idx] = old - h
            f_minus = float(loss_fn())
            flat[idx] = old
            numeric = (f_plus - f_minus) / (2.0 * h)
            analytic = float(grads[name].view(-1)[idx])
            results.append(
                CoordResult(name, idx, analytic, numeric, _rel_err(analytic, numeric))
            )
            group_counts[_block_type(name)] = group_counts.get(_block_type(name), 0) + 1

    results.sort(key=lambda r: r.rel_err, reverse=True)
    return GradCheckReport(
        max_rel_err=results[0].rel_err if results else 0.0,
        tolerance=tolerance,
        n_checked=len(results),
        group_counts=group_counts,
        worst=results[:10],
    )


def grad_check(
    config: ModelConfig,
    seed: int = 0,
    n_coords: int = 200,
    h: float = 1e-4,
    tolerance: float = 1e-5,
    hr_size: int = 32,
    strict: bool = True,
) -> GradCheckReport:
    """Gradient check of the full model at a tiny double-precision size."""
    model = build_model(config, seed=seed).double()
    gen = torch.Generator().manual_seed(seed + 1)
    with torch.no_grad():
        for p in model.parameters():
            p.add_(0.05 * torch.randn(p.shape, generator=gen, dtype=p.dtype))

    lr_size = hr_size // config.s
    hr = 0.25 + 0.2 * torch.randn((1, config.c1, hr_size, hr_size), generator=gen, dtype=torch.float64)
    lp = 0.25 + 0.2 * torch.randn((1, config.c2, lr_size, lr_size), generator=gen, dtype=torch.float64)
    lq = 0.25 + 0.2 * torch.randn((1, config.c2, lr_size, lr_size), generator=gen, dtype=torch.float64)
    y_hr = (torch.rand((1, 1, hr_size, hr_size), generator=gen, dtype=torch.float64) < 0.3).double()
    y_lr = (torch.rand((1, 1, lr_size, lr_size), generator=gen, dtype=torch.float64) < 0.3).double()

    def loss_fn():
        total, _, _ = compound_loss(model(hr, lp, lq), y_hr, y_lr)
        return total

    report = fd_check(
        loss_fn,
        list(model.named_parameters()),
        n_coords=n_coords,
        h=h,
        tolerance=tolerance,
        seed=seed + 2,
    )
    if strict and not report.passed:
        worst = ", ".join(
            f"{r.name}[{r.index}] rel={r.rel_err:.3g}" for r in report.worst[:5]
        )
        raise GradCheckError(
            f"max relative error {report.max_rel_err:.3g} exceeds {tolerance:g}: {worst}"
        )
    return report
