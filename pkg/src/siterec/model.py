"""Graph generation network over relation graphs.

Pipeline per sample: connectivity rows + node attributes initialize node
states; states are fused with per-node visual clues and updated through R
rounds of edge-masked multi-head attentive message passing with a GRU cell;
the final states parameterize a mixture-of-categoricals distribution over the
new node's relation to every existing node (16 edge types + no-edge).

The new node starts at the zero state and is mutually connected to all
existing nodes through a synthetic edge carrying an all-zero attribute vector
with a dedicated unknown-flag bit set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np
import torch
from torch import Tensor, nn

from .visual import VisualContext

EDGE_CLASSES = 17  # 16 typed edges + no-edge (class 0)
EDGE_ATTR_DIM = 16 + 1 + 6 + 1  # type one-hot, distance, alignment bits, unknown flag
UNKNOWN_FLAG = EDGE_ATTR_DIM - 1


@dataclass(frozen=True)
class ModelConfig:
    node_dim: int = 128
    msg_dim: int = 32
    heads: int = 4
    rounds: int = 4
    mixtures: int = 10
    clue_dim: int = 128
    conn_channels: int = 32
    n_max: int = 128
    n_categories: int = 12
    visual_channels: tuple[int, ...] = (8, 16, 32, 64)
    crop_channels: int = 32

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "visual_channels":
                if len(value) != 4 or any(c < 1 for c in value):
                    raise ValueError("visual_channels must be four positive ints")
            elif value < 1:
                raise ValueError(f"{f.name} must be positive")

    @property
    def node_attr_dim(self) -> int:
        return self.n_categories + 4  # label one-hot + obb vector

    def to_doc(self) -> dict:
        doc = {f.name: getattr(self, f.name) for f in fields(self)}
        doc["visual_channels"] = list(self.visual_channels)
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "ModelConfig":
        kwargs = dict(doc)
        kwargs["visual_channels"] = tuple(kwargs["visual_channels"])
        return cls(**kwargs)


def fullscale_config() -> ModelConfig:
    return ModelConfig(
        node_dim=512,
        msg_dim=128,
        clue_dim=1024,
        n_max=443,
        n_categories=382,
        visual_channels=(32, 64, 128, 256),
        crop_channels=64,
    )


class PackedBatch(NamedTuple):
    """Flat-packed graphs: each sample contributes its existing nodes followed
    by one new node; edges reference packed node indices (receiver, sender)."""

    conn_rows: Tensor  # (N_exist, EDGE_CLASSES, n_max)
    node_attrs: Tensor  # (N_exist, node_attr_dim)
    edge_index: Tensor  # (2, E) int64
    edge_attrs: Tensor  # (E, EDGE_ATTR_DIM)
    node_sample: Tensor  # (N_total,) int64
    exist_mask: Tensor  # (N_total,) bool
    new_index: Tensor  # (Z,) int64
    targets: Tensor  # (N_exist,) int64 classes 0..16
    n_samples: int


class ModelOutput(NamedTuple):
    alpha: Tensor  # (Z, S)
    theta: Tensor  # (N_exist, S, EDGE_CLASSES)
    exist_sample: Tensor  # (N_exist,) sample id per existing node
    round_feats: Tensor  # (R, Z, clue_dim) projected per-round graph features


@dataclass(frozen=True)
class EdgeDistribution:
    """Mixture of per-node categoricals for one sample."""

    alpha: np.ndarray  # (S,)
    theta: np.ndarray  # (S, V, EDGE_CLASSES)

    def __post_init__(self):
        if self.alpha.ndim != 1 or self.theta.ndim != 3:
            raise ValueError("alpha must be (S,), theta (S, V, classes)")
        if self.theta.shape[0] != self.alpha.shape[0]:
            raise ValueError("mixture count mismatch between alpha and theta")


def _segment_softmax(scores: Tensor, segment: Tensor, n_segments: int) -> Tensor:
    mx = torch.full((n_segments,), -torch.inf, dtype=scores.dtype, device=scores.device)
    mx = mx.scatter_reduce(0, segment, scores.detach(), reduce="amax", include_self=False)
    ex = torch.exp(scores - mx[segment])
    denom = torch.zeros(n_segments, dtype=scores.dtype, device=scores.device)
    denom = denom.index_add(0, segment, ex)
    return ex / denom[segment]


def _segment_sum(values: Tensor, segment: Tensor, n_segments: int) -> Tensor:
    out = torch.zeros(n_segments, values.shape[-1], dtype=values.dtype, device=values.device)
    return out.index_add(0, segment, values)


def _mlp(d_in: int, d_hidden: int, d_out: int) -> nn.Sequential:
    return nn.Sequential(nn.Linear(d_in, d_hidden), nn.ReLU(), nn.Linear(d_hidden, d_out))


class LocationNet(nn.Module):
    def __init__(self, cfg: ModelConfig, seed: int = 0):
        super().__init__()
        self.cfg = cfg
        i, m, k = cfg.node_dim, cfg.msg_dim, cfg.heads
        pair = 2 * i + EDGE_ATTR_DIM
        self.visual = VisualContext(
            channels=cfg.visual_channels,
            crop_channels=cfg.crop_channels,
            clue_dim=cfg.clue_dim,
        )
        self.conn_conv = nn.Sequential(
            nn.Conv1d(EDGE_CLASSES, cfg.conn_channels, 5, padding=2, bias=False),
            nn.ReLU(),
            nn.Conv1d(cfg.conn_channels, cfg.conn_channels, 5, padding=2, bias=False),
            nn.ReLU(),
        )
        self.init_linear = nn.Linear(cfg.conn_channels + cfg.node_attr_dim, i)
        self.ctx = _mlp(i + cfg.clue_dim, i, i)
        self.msg = nn.ModuleList(
            nn.ModuleList(_mlp(pair, m, m) for _ in range(k)) for _ in range(cfg.rounds)
        )
        self.att = nn.ModuleList(
            nn.ModuleList(nn.Linear(pair, 1) for _ in range(k)) for _ in range(cfg.rounds)
        )
        self.gru = nn.ModuleList(nn.GRUCell(k * m, i) for _ in range(cfg.rounds))
        self.f_alpha = _mlp(2 * i, i, cfg.mixtures)
        self.f_theta = _mlp(2 * i, i, cfg.mixtures * EDGE_CLASSES)
        self.match_proj = nn.Linear(i, cfg.clue_dim, bias=False)
        self.reset_parameters(seed)

    def reset_parameters(self, seed: int) -> None:
        """Uniform fan-in weights, all biases zero; fixed seed for repeatability."""
        gen = torch.Generator().manual_seed(seed)
        for mod in self.modules():
            if isinstance(mod, (nn.Linear, nn.Conv1d, nn.Conv2d)):
                fan_in = mod.weight.shape[1] * (mod.weight[0, 0].numel() if mod.weight.dim() > 2 else 1)
                bound = 1.0 / math.sqrt(fan_in)
                with torch.no_grad():
                    mod.weight.uniform_(-bound, bound, generator=gen)
                    if mod.bias is not None:
                        mod.bias.zero_()
            elif isinstance(mod, nn.GRUCell):
                with torch.no_grad():
                    mod.weight_ih.uniform_(-1.0 / math.sqrt(mod.input_size), 1.0 / math.sqrt(mod.input_size), generator=gen)
                    mod.weight_hh.uniform_(-1.0 / math.sqrt(mod.hidden_size), 1.0 / math.sqrt(mod.hidden_size), generator=gen)
                    mod.bias_ih.zero_()
                    mod.bias_hh.zero_()
            elif isinstance(mod, nn.BatchNorm2d):
                with torch.no_grad():
                    mod.weight.fill_(1.0)
                    mod.bias.zero_()

    # ------------------------------------------------------------------
    # Stages

    def init_nodes(self, conn_rows: Tensor, node_attrs: Tensor) -> Tensor:
        """Existing-node states h^0 from connectivity rows + attributes."""
        if conn_rows.shape[-1] != self.cfg.n_max:
            raise ValueError(
                f"connectivity rows padded to {conn_rows.shape[-1]}, expected {self.cfg.n_max}"
            )
        emb = self.conn_conv(conn_rows).sum(dim=-1)
        return self.init_linear(torch.cat([emb, node_attrs], dim=-1))

    def fuse_context(self, h: Tensor, clues: Tensor) -> Tensor:
        if clues.shape[0] != h.shape[0]:
            raise ValueError(f"{clues.shape[0]} clues for {h.shape[0]} nodes")
        return self.ctx(torch.cat([h, clues], dim=-1))

    def message_round(
        self, r: int, h: Tensor, h_fused: Tensor, edge_index: Tensor, edge_attrs: Tensor
    ) -> Tensor:
        recv, send = edge_index[0], edge_index[1]
        x = torch.cat([h_fused[recv], h_fused[send], edge_attrs], dim=-1)
        aggregates = []
        for k in range(self.cfg.heads):
            msg = self.msg[r][k](x)
            score = torch.relu(self.att[r][k](x)).squeeze(-1)
            att = _segment_softmax(score, recv, h.shape[0])
            aggregates.append(_segment_sum(att.unsqueeze(-1) * msg, recv, h.shape[0]))
        return self.gru[r](torch.cat(aggregates, dim=-1), h)

    def forward(self, batch: PackedBatch, clues: Tensor) -> ModelOutput:
        n_total = batch.node_sample.shape[0]
        exist_sample = batch.node_sample[batch.exist_mask]
        h = torch.zeros(n_total, self.cfg.node_dim, dtype=clues.dtype, device=clues.device)
        h[batch.exist_mask] = self.init_nodes(batch.conn_rows, batch.node_attrs)
        round_feats = []
        for r in range(self.cfg.rounds):
            h_fused = self.fuse_context(h, clues)
            h = self.message_round(r, h, h_fused, batch.edge_index, batch.edge_attrs)
            mean = _segment_sum(h[batch.exist_mask], exist_sample, batch.n_samples)
            counts = torch.bincount(exist_sample, minlength=batch.n_samples).clamp(min=1)
            round_feats.append(self.match_proj(mean / counts.unsqueeze(-1).to(mean.dtype)))
        raw = torch.cat([h[batch.exist_mask], h[batch.new_index][exist_sample]], dim=-1)
        alpha = torch.softmax(
            _segment_sum(self.f_alpha(raw), exist_sample, batch.n_samples), dim=-1
        )
        theta = torch.sigmoid(self.f_theta(raw)).view(-1, self.cfg.mixtures, EDGE_CLASSES)
        theta = theta / theta.sum(dim=-1, keepdim=True)
        return ModelOutput(
            alpha=alpha,
            theta=theta,
            exist_sample=exist_sample,
            round_feats=torch.stack(round_feats),
        )

    def distribution(self, output: ModelOutput, sample: int = 0) -> EdgeDistribution:
        """Per-sample mixture: alpha (S,), theta (S, V, classes)."""
        mask = output.exist_sample == sample
        theta = output.theta[mask].detach().to(torch.float64).numpy()
        return EdgeDistribution(
            alpha=output.alpha[sample].detach().to(torch.float64).numpy(),
            theta=np.transpose(theta, (1, 0, 2)),
        )


def sample_edges(
    dist: EdgeDistribution, mode: str = "argmax", seed: int = 0
) -> tuple[list[tuple[int, int]], bool]:
    """Decode (existing-node index, edge-type label) picks; label 0 (no-edge)
    picks are dropped. Returns (edges, empty_flag)."""
    if mode == "argmax":
        s = int(np.argmax(dist.alpha))
        classes = np.argmax(dist.theta[s], axis=-1)
    elif mode == "sample":
        rng = np.random.default_rng(seed)
        s = int(rng.choice(dist.alpha.shape[0], p=dist.alpha / dist.alpha.sum()))
        theta = dist.theta[s]
        theta = theta / theta.sum(axis=-1, keepdims=True)
        classes = np.array(
            [rng.choice(EDGE_CLASSES, p=theta[j]) for j in range(theta.shape[0])]
        )
    else:
        raise ValueError(f"unknown decode mode: {mode}")
    edges = [(int(j), int(c)) for j, c in enumerate(classes) if c > 0]
    return edges, not edges
