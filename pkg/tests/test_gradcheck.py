import pytest
import torch
from torch import nn

from burnscar.errors import GradCheckError
from burnscar.gradcheck import fd_check, grad_check
from burnscar.losses import bce
from burnscar.model import ModelConfig


def test_linear_model_near_exact():
    # single linear layer + BCE: FD truncation is the only error source
    torch.manual_seed(0)
    w = nn.Parameter(torch.randn(5, dtype=torch.float64) * 0.1)
    x = torch.randn(20, 5, dtype=torch.float64)
    y = (torch.rand(20, dtype=torch.float64) < 0.5).double()

    def loss_fn():
        return bce(y, torch.sigmoid(x @ w))

    report = fd_check(loss_fn, [("w", w)], n_coords=20, seed=1)
    assert report.max_rel_err < 1e-6


def test_tiny_config_passes():
    cfg = ModelConfig(widths=(4, 8), attn_lr=True, attn_hr=False)
    report = grad_check(cfg, seed=0, n_coords=120)
    assert report.passed
    assert report.max_rel_err < 1e-5
    assert report.n_checked >= 120


def test_se_paths_covered_when_attention_on():
    cfg = ModelConfig(widths=(4, 8), attn_lr=True, attn_hr=True)
    report = grad_check(cfg, seed=1, n_coords=80)
    assert report.group_counts.get("se", 0) > 0
    assert report.group_counts.get("conv", 0) > 0
    assert report.group_counts.get("norm", 0) > 0
    assert report.group_counts.get("head", 0) > 0


def test_no_se_group_without_attention():
    cfg = ModelConfig(widths=(4, 8), attn_lr=False, attn_hr=False)
    report = grad_check(cfg, seed=1, n_coords=60)
    assert report.group_counts.get("se", 0) == 0


class _ScaledGrad(torch.autograd.Function):
    """Forward identity whose backward lies by 10%."""

    @staticmethod
    def forward(ctx, x):
        return x

    @staticmethod
    def backward(ctx, g):
        return 1.1 * g


def test_detects_wrong_gradient():
    torch.manual_seed(2)
    w = nn.Parameter(torch.randn(6, dtype=torch.float64))
    x = torch.randn(12, 6, dtype=torch.float64)
    y = (torch.rand(12, dtype=torch.float64) < 0.5).double()

    def loss_fn():
        return bce(y, torch.sigmoid(x @ _ScaledGrad.apply(w)))

    report = fd_check(loss_fn, [("w", w)], n_coords=12, seed=0)
    # a 10% gradient error must dominate the report
    assert report.max_rel_err > 1e-2


def test_strict_mode_raises_above_tolerance():
    # an unreachable tolerance forces the failure path, which must name
    # the worst parameters
    cfg = ModelConfig(widths=(4, 8))
    with pytest.raises(GradCheckError, match="exceeds"):
        grad_check(cfg, seed=0, n_coords=30, tolerance=1e-14, strict=True)


def test_strict_grad_check_on_model_passes():
    # strict=True must not raise on a correct model
    cfg = ModelConfig(widths=(4, 8))
    report = grad_check(cfg, seed=2, n_coords=60, strict=True)
    assert report.passed
