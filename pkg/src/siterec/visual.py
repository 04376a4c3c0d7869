"""Visual context extraction: convolutional feature pyramid over the
rendered site image plus exact bilinear-integration region pooling that
turns each node's pixel box into a fixed-size clue vector.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import torch
from torch import Tensor, nn

from .render import SiteImage

PYRAMID_STRIDES = (2, 4, 8, 16)
POOL_BINS = 7

Box = tuple[float, float, float, float]  # (x0, y0, x1, y1) pixels, y down


class FeaturePyramid(NamedTuple):
    levels: tuple[Tensor, ...]  # each (Z, C_l, H_l, W_l)
    strides: tuple[int, ...]


def image_tensor(image: SiteImage) -> Tensor:
    """SiteImage -> (2, R, R) float tensor."""
    return torch.from_numpy(image.data.copy())


def _hat_integral(t: Tensor) -> Tensor:
    """Antiderivative of the unit hat function: int_{-1}^{t} max(0, 1-|u|) du."""
    t = t.clamp(-1.0, 1.0)
    return torch.where(t < 0, 0.5 * (1 + t).square(), 1 - 0.5 * (1 - t).square())


def _axis_weights(lo: float, hi: float, n: int, bins: int, dtype, device) -> Tensor:
    """(bins, n) averaging weights: entry [i, r] is the average of pixel r's
    clamped hat basis over output bin i. Rows sum to 1 exactly."""
    edges = torch.linspace(lo, hi, bins + 1, dtype=dtype, device=device)
    a = edges[:-1].unsqueeze(1)
    b = edges[1:].unsqueeze(1)
    centers = torch.arange(n, dtype=dtype, device=device) + 0.5
    # Interior segment where the interpolant is a genuine hat combination.
    a_mid = a.clamp(min=0.5)
    b_mid = b.clamp(max=n - 0.5)
    mid = _hat_integral(b_mid - centers) - _hat_integral(a_mid - centers)
    weights = torch.where(b_mid > a_mid, mid, torch.zeros_like(mid))
    # Border segments use constant extension of the edge pixels.
    weights[:, 0] += (b.clamp(max=0.5) - a).clamp(min=0).squeeze(1)
    weights[:, n - 1] += (b - a.clamp(min=n - 0.5)).clamp(min=0).squeeze(1)
    return weights / (b - a)


def pool_region(level: Tensor, box: Box, stride: int, bins: int = POOL_BINS) -> Tensor:
    """Average the bilinear interpolant of `level` (C, H, W) over a bins x bins
    split of `box`, analytically (no sampling)."""
    x0, y0, x1, y1 = (v / stride for v in box)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate region: {box}")
    _, h, w = level.shape
    wu = _axis_weights(x0, x1, w, bins, level.dtype, level.device)
    wv = _axis_weights(y0, y1, h, bins, level.dtype, level.device)
    return torch.einsum("ih,chw,jw->cij", wv, level, wu)


def assign_level(box: Box, n_levels: int = 4) -> int:
    """Area-based pyramid level: larger regions read coarser levels."""
    side = math.sqrt(max((box[2] - box[0]) * (box[3] - box[1]), 1e-12))
    return int(min(max(math.floor(math.log2(side / 4.0) + 0.5), 0), n_levels - 1))


class VisualContext(nn.Module):
    """Bias-free conv pyramid (strides 2/4/8/16) with per-level region pooling
    and a Conv-BN-ReLU crop block projecting each node box to a clue vector.

    All convolutions and the projection are bias-free so an all-zero image
    yields an all-zero pyramid and all-zero clues.
    """

    def __init__(
        self,
        in_channels: int = 2,
        channels: Sequence[int] = (8, 16, 32, 64),
        crop_channels: int = 32,
        clue_dim: int = 128,
        seed: int = 0,
    ):
        super().__init__()
        self.channels = tuple(channels)
        self.clue_dim = clue_dim
        stages = []
        heads = []
        prev = in_channels
        for ch in self.channels:
            stages.append(
                nn.Sequential(
                    nn.Conv2d(prev, ch, 3, stride=2, padding=1, bias=False),
                    nn.ReLU(),
                    nn.Conv2d(ch, ch, 3, stride=1, padding=1, bias=False),
                    nn.ReLU(),
                )
            )
            heads.append(
                nn.Sequential(
                    nn.Conv2d(ch, crop_channels, 3, padding=1, bias=False),
                    nn.BatchNorm2d(crop_channels, track_running_stats=False),
                    nn.ReLU(),
                )
            )
            prev = ch
        self.stages = nn.ModuleList(stages)
        self.heads = nn.ModuleList(heads)
        self.project = nn.Linear(crop_channels * POOL_BINS * POOL_BINS, clue_dim, bias=False)
        self.strides = PYRAMID_STRIDES
        gen = torch.Generator().manual_seed(seed)
        self.reset_parameters(gen)

    def reset_parameters(self, gen: torch.Generator) -> None:
        """Uniform fan-in init for weights; norm layers at identity."""
        for m in self.modules():
            if isinstance(m, (nn.Conv2d, nn.Linear)):
                fan_in = m.weight.shape[1] * (m.weight[0, 0].numel() if m.weight.dim() > 2 else 1)
                bound = 1.0 / math.sqrt(fan_in)
                with torch.no_grad():
                    m.weight.uniform_(-bound, bound, generator=gen)
            elif isinstance(m, nn.BatchNorm2d):
                with torch.no_grad():
                    m.weight.fill_(1.0)
                    m.bias.zero_()

    def encode(self, images: Tensor) -> FeaturePyramid:
        """(Z, 2, R, R) -> four feature levels at strides 2, 4, 8, 16."""
        if images.shape[-1] % 16 or images.shape[-2] % 16:
            raise ValueError(f"resolution {tuple(images.shape[-2:])} not divisible by 16")
        levels = []
        x = images
        for stage in self.stages:
            x = stage(x)
            levels.append(x)
        return FeaturePyramid(levels=tuple(levels), strides=self.strides)

    def clues(self, pyramid: FeaturePyramid, sample: int, boxes: Sequence[Box]) -> Tensor:
        """Clue vectors (N, clue_dim) for one sample's node boxes."""
        if not boxes:
            ref = pyramid.levels[0]
            return torch.zeros(0, self.clue_dim, dtype=ref.dtype, device=ref.device)
        assignment = [assign_level(box, len(pyramid.levels)) for box in boxes]
        out: list[Tensor | None] = [None] * len(boxes)
        for lvl, (stride, head) in enumerate(zip(pyramid.strides, self.heads)):
            idx = [i for i, a in enumerate(assignment) if a == lvl]
            if not idx:
                continue
            patches = torch.stack(
                [pool_region(pyramid.levels[lvl][sample], boxes[i], stride) for i in idx]
            )
            flat = head(patches).flatten(1)
            projected = self.project(flat)
            for j, i in enumerate(idx):
                out[i] = projected[j]
        return torch.stack(out)

    def forward(self, image: Tensor, boxes: Sequence[Box]) -> Tensor:
        """Single image (2, R, R) + node boxes -> (N, clue_dim)."""
        return self.clues(self.encode(image.unsqueeze(0)), 0, boxes)
