"""Objective assembly, optimization loop, ablation variants, and evaluation."""

from __future__ import annotations

import copy
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import Tensor

from .heatmap import heatmap_from_labels
from .metrics import ScoreRow, score_pair
from .model import EdgeDistribution, LocationNet, ModelOutput, sample_edges
from .samples import TrainSample, pack_batch
from .visual import image_tensor

VARIANTS = ("full", "no_matching_loss", "graph_only")


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 8
    lr: float = 1e-4
    epochs: int = 20
    seed: int = 0
    gamma: float = 10.0
    variant: str = "full"
    patience: int = 5
    eps: float = 1e-12

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.variant == "full" and self.batch_size < 2:
            raise ValueError("the matching loss needs in-batch negatives (batch_size >= 2)")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")


# ---------------------------------------------------------------------------
# Losses


def nll_packed(output: ModelOutput, targets: Tensor, n_samples: int, eps: float = 1e-12) -> Tensor:
    """Batch negative log likelihood of the target rows under the mixture,
    summed over the batch; computed in log space."""
    s = output.theta.shape[1]
    log_theta = torch.log(output.theta.clamp_min(eps))
    picked = log_theta.gather(-1, targets.view(-1, 1, 1).expand(-1, s, 1)).squeeze(-1)
    per_sample = torch.zeros(n_samples, s, dtype=picked.dtype, device=picked.device)
    per_sample = per_sample.index_add(0, output.exist_sample, picked)
    log_mix = torch.logsumexp(torch.log(output.alpha.clamp_min(eps)) + per_sample, dim=-1)
    return -log_mix.sum()


def nll_loss(dist: EdgeDistribution, target_row: np.ndarray, eps: float = 1e-12) -> float:
    """Single-sample mixture NLL: -log sum_s alpha_s prod_j theta[s, j, t_j]."""
    theta = np.clip(dist.theta, eps, None)  # (S, V, C)
    v = theta.shape[1]
    per_mix = np.log(theta[:, np.arange(v), target_row]).sum(axis=1)
    stacked = np.log(np.clip(dist.alpha, eps, None)) + per_mix
    peak = stacked.max()
    return float(-(peak + math.log(np.exp(stacked - peak).sum())))


def _normalize_rows(x: Tensor) -> Tensor:
    return x / x.norm(dim=-1, keepdim=True).clamp_min(1e-12)


def matching_loss(graph_feats: Tensor, image_feats: Tensor, gamma: float = 10.0) -> Tensor:
    """Symmetric batch-softmax cosine matching loss summed over rounds.

    graph_feats: (R, Z, D) per-round pooled graph features;
    image_feats: (Z, D) pooled visual clues (constant across rounds).
    Zero-norm features contribute cosine 0.
    """
    img = _normalize_rows(image_feats)
    total = graph_feats.new_zeros(())
    for r in range(graph_feats.shape[0]):
        sim = gamma * (_normalize_rows(graph_feats[r]) @ img.T)  # rows: graphs, cols: images
        total = total - torch.log_softmax(sim, dim=1).diagonal().sum()
        total = total - torch.log_softmax(sim, dim=0).diagonal().sum()
    return total


# ---------------------------------------------------------------------------
# Clue assembly


def compute_clues(
    model: LocationNet, samples: list[TrainSample], variant: str, dtype=torch.float32
) -> tuple[Tensor, Tensor]:
    """Packed per-node clues (new nodes get zero rows) plus per-sample pooled
    image features. graph_only zeroes everything without touching the encoder."""
    clue_dim = model.cfg.clue_dim
    if variant == "graph_only":
        n_total = sum(s.n_nodes + 1 for s in samples)
        return torch.zeros(n_total, clue_dim, dtype=dtype), torch.zeros(len(samples), clue_dim, dtype=dtype)
    images = torch.stack([image_tensor(s.image) for s in samples]).to(dtype)
    pyramid = model.visual.encode(images)
    rows, feats = [], []
    for z, s in enumerate(samples):
        c = model.visual.clues(pyramid, z, [tuple(map(float, b)) for b in s.boxes_px])
        rows.append(torch.cat([c, torch.zeros(1, clue_dim, dtype=c.dtype)]))
        feats.append(c.mean(dim=0))
    return torch.cat(rows), torch.stack(feats)


# ---------------------------------------------------------------------------
# Optimization loop


@dataclass
class TrainResult:
    history: list[dict] = field(default_factory=list)
    best_val_nll: float = math.inf
    best_epoch: int = -1


def _epoch_nll(model: LocationNet, samples: list[TrainSample], cfg: TrainConfig) -> float:
    """Mean per-sample NLL without gradient tracking."""
    total = 0.0
    with torch.no_grad():
        for start in range(0, len(samples), cfg.batch_size):
            chunk = samples[start : start + cfg.batch_size]
            batch = pack_batch(chunk, model.cfg.n_max)
            clues, _ = compute_clues(model, chunk, cfg.variant)
            out = model(batch, clues)
            total += float(nll_packed(out, batch.targets, batch.n_samples, cfg.eps))
    return total / max(len(samples), 1)


def train(
    model: LocationNet,
    train_samples: list[TrainSample],
    val_samples: list[TrainSample],
    cfg: TrainConfig,
    log_path: str | Path | None = None,
) -> TrainResult:
    """Seeded single-threaded optimization with early stopping on validation
    NLL; the model is left holding the best-validation parameters."""
    if not train_samples:
        raise ValueError("no training samples")
    torch.set_num_threads(1)
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    result = TrainResult()
    best_state = None
    stale = 0
    log_file = open(log_path, "a") if log_path is not None else None
    try:
        for epoch in range(cfg.epochs):
            model.train()
            order = rng.permutation(len(train_samples))
            epoch_nll = 0.0
            epoch_match = 0.0
            started = time.monotonic()
            for step, start in enumerate(range(0, len(order), cfg.batch_size)):
                chunk = [train_samples[i] for i in order[start : start + cfg.batch_size]]
                batch = pack_batch(chunk, model.cfg.n_max)
                clues, image_feats = compute_clues(model, chunk, cfg.variant)
                out = model(batch, clues)
                nll = nll_packed(out, batch.targets, batch.n_samples, cfg.eps)
                loss = nll
                match = None
                if cfg.variant == "full" and len(chunk) >= 2:
                    match = matching_loss(out.round_feats, image_feats, cfg.gamma)
                    loss = loss + match
                if not torch.isfinite(loss):
                    raise TrainingDiverged(f"non-finite loss at epoch {epoch}, batch {step}")
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                epoch_nll += float(nll.detach())
                epoch_match += float(match.detach()) if match is not None else 0.0
            model.eval()
            record = {
                "epoch": epoch,
                "variant": cfg.variant,
                "seed": cfg.seed,
                "train_nll": epoch_nll / len(train_samples),
                "train_match": epoch_match / len(train_samples),
                "val_nll": _epoch_nll(model, val_samples, cfg) if val_samples else None,
                "seconds": round(time.monotonic() - started, 3),
            }
            result.history.append(record)
            if log_file is not None:
                log_file.write(json.dumps(record) + "\n")
                log_file.flush()
            val = record["val_nll"]
            if val is not None:
                if val < result.best_val_nll - 1e-9:
                    result.best_val_nll = val
                    result.best_epoch = epoch
                    best_state = copy.deepcopy(model.state_dict())
                    stale = 0
                else:
                    stale += 1
                    if stale > cfg.patience:
                        break
    finally:
        if log_file is not None:
            log_file.close()
    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return result


# ---------------------------------------------------------------------------
# Evaluation


def predict_row(model: LocationNet, sample: TrainSample, variant: str = "full") -> tuple[np.ndarray, bool]:
    """Argmax-decoded class row over the conditioning nodes."""
    batch = pack_batch([sample], model.cfg.n_max)
    clues, _ = compute_clues(model, [sample], variant)
    with torch.no_grad():
        out = model(batch, clues)
    dist = model.distribution(out, 0)
    edges, empty = sample_edges(dist, "argmax")
    row = np.zeros(sample.n_nodes, dtype=np.int64)
    for j, cls in edges:
        row[j] = cls
    return row, empty


def evaluate(model: LocationNet, samples: list[TrainSample], variant: str = "full") -> dict:
    """Mean heatmap metrics of argmax predictions against ground truth rows."""
    model.eval()
    rows: list[ScoreRow] = []
    empties = 0
    for sample in samples:
        pred_row, empty = predict_row(model, sample, variant)
        empties += int(empty)
        gt_hm, _ = heatmap_from_labels(
            sample.cond_graph.nodes, sample.target_row, sample.cond_scene,
            exact_distances=sample.target_dist,
        )
        pred_hm, _ = heatmap_from_labels(sample.cond_graph.nodes, pred_row, sample.cond_scene)
        rows.append(score_pair(gt_hm, pred_hm, sample.cond_scene))
    table = {
        name: float(np.mean([getattr(r, name) for r in rows])) if rows else 0.0
        for name in ("ar", "ap", "pr", "pp", "f1s_a", "f1s_p", "forbidden_overlap", "collision_overlap")
    }
    table["empty_predictions"] = empties
    table["samples"] = len(rows)
    return table
