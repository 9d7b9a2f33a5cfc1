"""The multi-resolution change-detection network.

Two branches run in parallel: a bitemporal change branch over the
low-resolution pre/post pair (twin residual encoders, optionally weight
sharing, feeding a decoder with channel attention) and a UNet branch
over the high-resolution pre-fire image.  The change branch emits an
auxiliary low-resolution logit map for deep supervision; its last
decoder features are injected into the UNet at its deepest grid, which
coincides with the native low-resolution grid because the UNet depth
matches log2 of the scale factor.  The UNet decoder then produces the
final high-resolution logits.

Normalization is group norm (batch-size independent) and activations
are SiLU throughout; both choices keep the forward pass smooth, which
the finite-difference gradient verification relies on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .errors import AlignmentError

SIAMESE_MODES = ("siamese", "pseudo_siamese")


@dataclass
class ModelConfig:
    c1: int = 13  # HR input channels
    c2: int = 7  # LR input channels
    s: int = 8  # HR/LR scale factor
    widths: tuple[int, ...] = (32, 64, 128, 256)
    siamese_mode: str = "siamese"
    attn_lr: bool = True  # channel attention in the change-branch decoder
    attn_hr: bool = False  # channel attention in the UNet decoder
    se_reduction: int = 16
    hr_depth: int = 3  # UNet downsampling stages; 2**hr_depth must equal s

    def __post_init__(self):
        self.widths = tuple(int(w) for w in self.widths)
        if not self.widths or any(w <= 0 for w in self.widths):
            raise ValueError(f"widths must be nonempty positive, got {self.widths}")
        if self.siamese_mode not in SIAMESE_MODES:
            raise ValueError(f"unknown siamese_mode {self.siamese_mode!r}")
        if self.hr_depth < 1:
            raise ValueError("hr_depth must be >= 1")
        if self.s != 2**self.hr_depth:
            raise ValueError(
                f"s={self.s} must equal 2**hr_depth (hr_depth={self.hr_depth})"
            )
        if self.c1 <= 0 or self.c2 <= 0 or self.se_reduction < 1:
            raise ValueError("c1, c2 and se_reduction must be positive")

    def to_dict(self) -> dict:
        return {
            "c1": self.c1,
            "c2": self.c2,
            "s": self.s,
            "widths": list(self.widths),
            "siamese_mode": self.siamese_mode,
            "attn_lr": self.attn_lr,
            "attn_hr": self.attn_hr,
            "se_reduction": self.se_reduction,
            "hr_depth": self.hr_depth,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**{**d, "widths": tuple(d.get("widths", (32, 64, 128, 256)))})

    def unet_widths(self) -> tuple[int, ...]:
        """Channel widths for the hr_depth+1 UNet stages.

        Reuses the configured widths, doubling the last entry to extend
        or truncating when the list is longer than needed.
        """
        ws = list(self.widths)
        while len(ws) < self.hr_depth + 1:
            ws.append(ws[-1] * 2)
        return tuple(ws[: self.hr_depth + 1])


@dataclass
class ModelOutputs:
    y_lr_logits: torch.Tensor  # (B, 1, H/s, W/s)
    y_hr_logits: torch.Tensor  # (B, 1, H, W)
    lr_decoder_features: torch.Tensor  # (B, F, H/s, W/s)


def _norm_groups(channels: int) -> int:
    # At least 2 channels per group: single-channel groups over small
    # grids normalize over too few values and behave erratically.
    for g in (8, 4, 2):
        if channels % g == 0 and channels // g >= 2:
            return g
    return 1


def _gn(channels: int) -> nn.GroupNorm:
    return nn.GroupNorm(_norm_groups(channels), channels)


class SqueezeExcite(nn.Module):
    """Channel attention: globally pooled stats drive per-channel gates.

    Two-layer bottleneck (channels -> channels/reduction -> channels)
    ending in a logistic gate that rescales each channel.  With the gate
    output layer at zero the gates are exactly 0.5.
    """

    def __init__(self, channels: int, reduction: int = 16):
        super().__init__()
        hidden = max(1, channels // reduction)
        self.fc1 = nn.Linear(channels, hidden)
        self.fc2 = nn.Linear(hidden, channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        w = x.mean(dim=(-2, -1))
        g = torch.sigmoid(self.fc2(F.silu(self.fc1(w))))
        return x * g[..., None, None]


class ConvBlock(nn.Module):
    """Two 3x3 convs with norm/activation, optional channel attention."""

    def __init__(self, c_in: int, c_out: int, se: bool = False, se_reduction: int = 16):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, padding=1)
        self.gn1 = _gn(c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.gn2 = _gn(c_out)
        self.se = SqueezeExcite(c_out, se_reduction) if se else None

    def body(self, x: torch.Tensor) -> torch.Tensor:
        x = F.silu(self.gn1(self.conv1(x)))
        return F.silu(self.gn2(self.conv2(x)))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.body(x)
        if self.se is not None:
            h = self.se(h)
        return h


class ResBlock(nn.Module):
    """Residual pair of 3x3 convs with a projection shortcut if needed."""

    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_out, 3, padding=1)
        self.gn1 = _gn(c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.gn2 = _gn(c_out)
        if c_in != c_out:
            self.skip = nn.Sequential(nn.Conv2d(c_in, c_out, 1), _gn(c_out))
        else:
            self.skip = nn.Identity()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = F.silu(self.gn1(self.conv1(x)))
        h = self.gn2(self.conv2(h))
        return F.silu(h + self.skip(x))


class Down(nn.Module):
    """Strided-conv 2x downsampling."""

    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.conv = nn.Conv2d(c_in, c_out, 3, stride=2, padding=1)
        self.gn = _gn(c_out)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return F.silu(self.gn(self.conv(x)))


class Up(nn.Module):
    """Nearest 2x upsampling followed by a 3x3 conv."""

    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.conv = nn.Conv2d(c_in, c_out, 3, padding=1)
        self.gn = _gn(c_out)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = F.interpolate(x, scale_factor=2, mode="nearest")
        return F.silu(self.gn(self.conv(x)))


class ResEncoder(nn.Module):
    """Residual encoder: one stage per width, 2x downsample in between."""

    def __init__(self, c_in: int, widths: Sequence[int]):
        super().__init__()
        stages = [ResBlock(c_in, widths[0])]
        for k in range(1, len(widths)):
            stages.append(
                nn.Sequential(Down(widths[k - 1], widths[k]), ResBlock(widths[k], widths[k]))
            )
        self.stages = nn.ModuleList(stages)

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        feats = []
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return feats


class CoarseChangeNet(nn.Module):
    """Bitemporal change detection over the low-resolution image pair.

    The pre and post images run through twin encoders (one weight set in
    siamese mode, independent copies in pseudo-siamese mode); per-stage
    features of both encoders are concatenated into the decoder, which
    returns low-resolution logits plus its last feature map for fusion
    into the high-resolution branch.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        ws = config.widths
        self.encoder_a = ResEncoder(config.c2, ws)
        if config.siamese_mode == "siamese":
            self.encoder_b = self.encoder_a  # shared storage
        else:
            self.encoder_b = ResEncoder(config.c2, ws)
        se = config.attn_lr
        red = config.se_reduction
        self.bottleneck = ConvBlock(2 * ws[-1], ws[-1], se=se, se_reduction=red)
        ups = []
        blocks = []
        for k in range(len(ws) - 2, -1, -1):
            ups.append(Up(ws[k + 1], ws[k]))
            blocks.append(ConvBlock(3 * ws[k], ws[k], se=se, se_reduction=red))
        self.ups = nn.ModuleList(ups)
        self.blocks = nn.ModuleList(blocks)
        self.head = nn.Conv2d(ws[0], 1, 1)

    @property
    def feature_channels(self) -> int:
        return self.config.widths[0]

    def forward(
        self, lr_pre: torch.Tensor, lr_post: torch.Tensor
    ) -> tuple[torch.Tensor, torch.Tensor]:
        squeeze = lr_pre.dim() == 3
        if squeeze:
            lr_pre, lr_post = lr_pre[None], lr_post[None]
        if lr_pre.shape != lr_post.shape:
            raise ValueError(
                f"lr_pre {tuple(lr_pre.shape)} and lr_post {tuple(lr_post.shape)} differ"
            )
        min_side = 2 ** (len(self.config.widths) - 1)
        if lr_pre.shape[-2] < min_side or lr_pre.shape[-1] < min_side:
            raise ValueError(
                f"LR grid {tuple(lr_pre.shape[-2:])} too small for "
                f"{len(self.config.widths)} encoder stages (needs >= {min_side})"
            )
        feats_a = self.encoder_a(lr_pre)
        feats_b = self.encoder_b(lr_post)
        x = self.bottleneck(torch.cat([feats_a[-1], feats_b[-1]], dim=1))
        n = len(self.config.widths)
        for i, (up, block) in enumerate(zip(self.ups, self.blocks)):
            k = n - 2 - i
            x = up(x)
            x = block(torch.cat([x, feats_a[k], feats_b[k]], dim=1))
        logits = self.head(x)
        if squeeze:
            return logits[0], x[0]
        return logits, x


class FusionUNet(nn.Module):
    """UNet over the high-resolution pre-fire image with deep fusion.

    The encoder descends hr_depth times to the native low-resolution
    grid, where the change-branch features are concatenated in; the
    decoder climbs back up with skip connections and emits the final
    high-resolution logits.
    """

    def __init__(self, config: ModelConfig, fusion_channels: int):
        super().__init__()
        self.config = config
        uw = config.unet_widths()
        self.encoder = ResEncoder(config.c1, uw)
        se = config.attn_hr
        red = config.se_reduction
        self.fuse = ConvBlock(uw[-1] + fusion_channels, uw[-1], se=se, se_reduction=red)
        ups = []
        blocks = []
        for k in range(len(uw) - 2, -1, -1):
            ups.append(Up(uw[k + 1], uw[k]))
            blocks.append(ConvBlock(2 * uw[k], uw[k], se=se, se_reduction=red))
        self.ups = nn.ModuleList(ups)
        self.blocks = nn.ModuleList(blocks)
        self.head = nn.Conv2d(uw[0], 1, 1)

    def forward(
        self, hr_pre: torch.Tensor, fusion_features: torch.Tensor
    ) -> torch.Tensor:
        squeeze = hr_pre.dim() == 3
        if squeeze:
            hr_pre, fusion_features = hr_pre[None], fusion_features[None]
        d = self.config.hr_depth
        h, w = hr_pre.shape[-2:]
        if h % (2**d) or w % (2**d):
            raise ValueError(f"HR grid {h}x{w} not divisible by 2**hr_depth={2**d}")
        expect = (h // 2**d, w // 2**d)
        if tuple(fusion_features.shape[-2:]) != expect:
            raise AlignmentError(
                f"fusion features on grid {tuple(fusion_features.shape[-2:])}, "
                f"expected deepest encoder grid {expect}"
            )
        feats = self.encoder(hr_pre)
        x = self.fuse(torch.cat([feats[-1], fusion_features], dim=1))
        n = len(feats)
        for i, (up, block) in enumerate(zip(self.ups, self.blocks)):
            k = n - 2 - i
            x = up(x)
            x = block(torch.cat([x, feats[k]], dim=1))
        logits = self.head(x)
        return logits[0] if squeeze else logits


class MultiResChangeNet(nn.Module):
    """Full model: change branch + fusion UNet with two logit heads."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.coarse = CoarseChangeNet(config)
        self.fine = FusionUNet(config, self.coarse.feature_channels)

    def forward(
        self, hr_pre: torch.Tensor, lr_pre: torch.Tensor, lr_post: torch.Tensor
    ) -> ModelOutputs:
        squeeze = hr_pre.dim() == 3
        if squeeze:
            hr_pre, lr_pre, lr_post = hr_pre[None], lr_pre[None], lr_post[None]
        cfg = self.config
        if hr_pre.shape[1] != cfg.c1:
            raise ValueError(f"hr_pre has {hr_pre.shape[1]} channels, config.c1={cfg.c1}")
        if lr_pre.shape[1] != cfg.c2:
            raise ValueError(f"lr_pre has {lr_pre.shape[1]} channels, config.c2={cfg.c2}")
        if (
            lr_pre.shape[-2] * cfg.s != hr_pre.shape[-2]
            or lr_pre.shape[-1] * cfg.s != hr_pre.shape[-1]
        ):
            raise AlignmentError(
                f"LR grid {tuple(lr_pre.shape[-2:])} times s={cfg.s} does not match "
                f"HR grid {tuple(hr_pre.shape[-2:])}"
            )
        lr_logits, lr_feats = self.coarse(lr_pre, lr_post)
        hr_logits = self.fine(hr_pre, lr_feats)
        if squeeze:
            lr_logits, hr_logits, lr_feats = lr_logits[0], hr_logits[0], lr_feats[0]
        return ModelOutputs(
            y_lr_logits=lr_logits, y_hr_logits=hr_logits, lr_decoder_features=lr_feats
        )


def init_weights(model: nn.Module, seed: int) -> None:
    """Seeded fan-in init: He-normal convs, zero biases, unit norms.

    Squeeze-excite gate output layers are zeroed afterwards so every
    gate starts at exactly 0.5.  Deterministic per seed: draws follow
    module registration order (shared siamese modules draw once).
    """
    g = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for m in model.modules():
            if isinstance(m, (nn.Conv2d, nn.Linear)):
                fan_in = m.weight.shape[1:].numel()
                m.weight.normal_(0.0, (2.0 / fan_in) ** 0.5, generator=g)
                if m.bias is not None:
                    m.bias.zero_()
            elif isinstance(m, nn.GroupNorm):
                m.weight.fill_(1.0)
                m.bias.zero_()
        for m in model.modules():
            if isinstance(m, SqueezeExcite):
                m.fc2.weight.zero_()
                m.fc2.bias.zero_()


def build_model(config: ModelConfig, seed: int = 0) -> MultiResChangeNet:
    model = MultiResChangeNet(config)
    init_weights(model, seed)
    return model


def count_params(config: ModelConfig) -> int:
    """Total trainable scalars (shared siamese encoders counted once)."""
    model = MultiResChangeNet(config)
    return sum(p.numel() for p in model.parameters())


def predict(logits, threshold: float = 0.5) -> np.ndarray:
    """Binarize logits: 1 where sigmoid(logit) >= threshold."""
    if isinstance(logits, torch.Tensor):
        logits = logits.detach().cpu().numpy()
    probs = 1.0 / (1.0 + np.exp(-np.asarray(logits, dtype=np.float64)))
    return (probs >= threshold).astype(np.float32)


def sample_tensors(sample, dtype=torch.float32):
    """PatchSample arrays as torch tensors (hr, lr_pre, lr_post, y_hr, y_lr)."""

    def to(a):
        return torch.as_tensor(np.ascontiguousarray(a), dtype=dtype)

    return (
        to(sample.hr_pre),
        to(sample.lr_pre),
        to(sample.lr_post),
        to(sample.label_hr)[None],
        to(sample.label_lr)[None],
    )


def batch_tensors(samples, dtype=torch.float32):
    """Stack a list of PatchSamples into batched model inputs/targets."""
    parts = [sample_tensors(s, dtype=dtype) for s in samples]
    return tuple(torch.stack([p[i] for p in parts]) for i in range(5))
