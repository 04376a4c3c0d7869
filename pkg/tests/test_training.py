"""Tests for the losses (closed forms and consistency between the packed and
single-sample paths), the optimization loop, ablation variants, and the
evaluation report."""

import json
import math

import numpy as np
import pytest
import torch

from siterec.model import EDGE_CLASSES, EdgeDistribution, LocationNet, ModelOutput
from siterec.samples import pack_batch
from siterec.training import (
    TrainConfig,
    TrainingDiverged,
    VARIANTS,
    compute_clues,
    evaluate,
    matching_loss,
    nll_loss,
    nll_packed,
    predict_row,
    train,
)

from .test_model import TINY, _toy_samples


def _random_mixture(rng, n_mix, sizes):
    """Valid mixture parameters for a batch: alpha (Z, S) rows summing to one,
    theta (sum V_z, S, C) normalized over classes, plus random target rows."""
    alpha = rng.random((len(sizes), n_mix)) + 0.1
    alpha /= alpha.sum(axis=1, keepdims=True)
    n_exist = sum(sizes)
    theta = rng.random((n_exist, n_mix, EDGE_CLASSES)) + 0.05
    theta /= theta.sum(axis=-1, keepdims=True)
    exist_sample = np.repeat(np.arange(len(sizes)), sizes)
    targets = rng.integers(0, EDGE_CLASSES, size=n_exist)
    return alpha, theta, exist_sample, targets


def _output(alpha, theta, exist_sample):
    return ModelOutput(
        alpha=torch.from_numpy(alpha),
        theta=torch.from_numpy(theta),
        exist_sample=torch.from_numpy(exist_sample),
        round_feats=torch.zeros(1, alpha.shape[0], 2, dtype=torch.float64),
    )


def _distribution(alpha, theta, exist_sample, z):
    mask = exist_sample == z
    return EdgeDistribution(alpha=alpha[z], theta=np.transpose(theta[mask], (1, 0, 2)))


# ---------------------------------------------------------------------------
# Negative log likelihood


def test_nll_zero_when_targets_certain():
    rng = np.random.default_rng(0)
    alpha, theta, exist_sample, targets = _random_mixture(rng, 4, [3])
    theta[:] = 0.0
    theta[np.arange(3), :, targets] = 1.0
    assert nll_loss(_distribution(alpha, theta, exist_sample, 0), targets) == pytest.approx(0.0, abs=1e-9)
    out = _output(alpha, theta, exist_sample)
    assert float(nll_packed(out, torch.from_numpy(targets), 1)) == pytest.approx(0.0, abs=1e-9)


def test_nll_uniform_theta_closed_form():
    # Uniform class probabilities make every mixture component identical, so
    # two nodes cost exactly 2 ln(classes) regardless of the weights.
    rng = np.random.default_rng(1)
    alpha, theta, exist_sample, _ = _random_mixture(rng, 5, [2])
    theta[:] = 1.0 / EDGE_CLASSES
    expected = 2 * math.log(EDGE_CLASSES)
    for row in ([0, 0], [4, 16], [7, 1]):
        targets = np.array(row)
        assert nll_loss(_distribution(alpha, theta, exist_sample, 0), targets) == pytest.approx(expected, abs=1e-9)
        out = _output(alpha, theta, exist_sample)
        assert float(nll_packed(out, torch.from_numpy(targets), 1)) == pytest.approx(expected, abs=1e-9)


def test_nll_mixture_permutation_invariant():
    rng = np.random.default_rng(2)
    alpha, theta, exist_sample, targets = _random_mixture(rng, 6, [4])
    perm = rng.permutation(6)
    base = nll_loss(_distribution(alpha, theta, exist_sample, 0), targets)
    shuffled = nll_loss(
        _distribution(alpha[:, perm], theta[:, perm, :], exist_sample, 0), targets
    )
    assert shuffled == pytest.approx(base, abs=1e-12)


def test_nll_packed_matches_single_sample_sum():
    rng = np.random.default_rng(3)
    sizes = [2, 4, 3]
    alpha, theta, exist_sample, targets = _random_mixture(rng, 4, sizes)
    out = _output(alpha, theta, exist_sample)
    packed = float(nll_packed(out, torch.from_numpy(targets), len(sizes)))
    start = 0
    total = 0.0
    for z, v in enumerate(sizes):
        total += nll_loss(_distribution(alpha, theta, exist_sample, z), targets[start : start + v])
        start += v
    assert packed == pytest.approx(total, abs=1e-9)


# ---------------------------------------------------------------------------
# Matching loss


def test_matching_identical_features_closed_form():
    # All-equal features give uniform softmax rows: each of the two diagonal
    # entries costs ln 2 in both directions, so 4 ln 2 per round.
    feats = torch.ones(2, 3, dtype=torch.float64)
    for rounds in (1, 3):
        stacked = feats.expand(rounds, 2, 3)
        expected = rounds * 4 * math.log(2.0)
        assert float(matching_loss(stacked, feats)) == pytest.approx(expected, abs=1e-9)


def test_matching_orthogonal_pairs_vanish_at_high_gamma():
    graph = torch.eye(2, dtype=torch.float64).unsqueeze(0)
    image = torch.eye(2, dtype=torch.float64)
    assert float(matching_loss(graph, image, gamma=50.0)) == pytest.approx(0.0, abs=1e-9)


def test_matching_prefers_matched_pairs():
    graph = torch.eye(2, dtype=torch.float64).unsqueeze(0)
    image = torch.eye(2, dtype=torch.float64)
    matched = float(matching_loss(graph, image, gamma=5.0))
    swapped = float(matching_loss(graph, image.flip(0), gamma=5.0))
    assert matched < swapped


def test_matching_batch_permutation_invariant():
    rng = np.random.default_rng(4)
    graph = torch.from_numpy(rng.standard_normal((2, 5, 7)))
    image = torch.from_numpy(rng.standard_normal((5, 7)))
    base = float(matching_loss(graph, image))
    perm = torch.from_numpy(rng.permutation(5))
    permuted = float(matching_loss(graph[:, perm], image[perm]))
    assert permuted == pytest.approx(base, abs=1e-9)


# ---------------------------------------------------------------------------
# Config and clue assembly


def test_train_config_validation():
    with pytest.raises(ValueError, match="variant"):
        TrainConfig(variant="fancy")
    with pytest.raises(ValueError, match="negatives"):
        TrainConfig(variant="full", batch_size=1)
    with pytest.raises(ValueError, match="positive"):
        TrainConfig(variant="graph_only", epochs=0)
    assert TrainConfig(variant="no_matching_loss", batch_size=1).batch_size == 1
    assert set(VARIANTS) == {"full", "no_matching_loss", "graph_only"}


def test_compute_clues_shapes_and_variants():
    samples = _toy_samples()[:2]
    model = LocationNet(TINY, seed=0)
    n_total = sum(s.n_nodes + 1 for s in samples)

    zero_clues, zero_feats = compute_clues(model, samples, "graph_only")
    assert zero_clues.shape == (n_total, TINY.clue_dim)
    assert zero_feats.shape == (2, TINY.clue_dim)
    assert zero_clues.abs().sum().item() == 0.0 and zero_feats.abs().sum().item() == 0.0

    clues, feats = compute_clues(model, samples, "full")
    assert clues.shape == (n_total, TINY.clue_dim) and feats.shape == (2, TINY.clue_dim)
    assert clues.abs().sum().item() > 0.0
    # New-node rows carry no visual clue.
    offset = 0
    for s in samples:
        assert clues[offset + s.n_nodes].abs().sum().item() == 0.0
        offset += s.n_nodes + 1


# ---------------------------------------------------------------------------
# Optimization loop


def _split():
    samples = _toy_samples()
    return samples[:3], samples[3:]


def test_train_smoke_records_history(tmp_path):
    train_s, val_s = _split()
    model = LocationNet(TINY, seed=0)
    log = tmp_path / "metrics.jsonl"
    cfg = TrainConfig(batch_size=2, lr=1e-3, epochs=2, seed=0)
    result = train(model, train_s, val_s, cfg, log_path=log)
    assert len(result.history) == 2
    for rec in result.history:
        assert set(rec) == {"epoch", "variant", "seed", "train_nll", "train_match", "val_nll", "seconds"}
        assert rec["variant"] == "full"
        assert math.isfinite(rec["train_nll"]) and math.isfinite(rec["val_nll"])
    lines = [json.loads(line) for line in log.read_text().splitlines()]
    assert [r["epoch"] for r in lines] == [0, 1]
    assert result.best_epoch >= 0 and math.isfinite(result.best_val_nll)


def test_train_is_deterministic():
    train_s, val_s = _split()
    runs = []
    for _ in range(2):
        model = LocationNet(TINY, seed=1)
        cfg = TrainConfig(batch_size=2, lr=1e-3, epochs=2, seed=7)
        result = train(model, train_s, val_s, cfg)
        runs.append((result, model.state_dict()))
    hist_a = [{k: v for k, v in r.items() if k != "seconds"} for r in runs[0][0].history]
    hist_b = [{k: v for k, v in r.items() if k != "seconds"} for r in runs[1][0].history]
    assert hist_a == hist_b
    for key in runs[0][1]:
        assert torch.equal(runs[0][1][key], runs[1][1][key]), key


def test_graph_only_variant_skips_matching():
    train_s, val_s = _split()
    model = LocationNet(TINY, seed=0)
    cfg = TrainConfig(batch_size=2, lr=1e-3, epochs=1, seed=0, variant="graph_only")
    result = train(model, train_s, val_s, cfg)
    assert result.history[0]["train_match"] == 0.0


def test_full_variant_accumulates_matching():
    train_s, val_s = _split()
    model = LocationNet(TINY, seed=0)
    cfg = TrainConfig(batch_size=2, lr=1e-3, epochs=1, seed=0)
    result = train(model, train_s, val_s, cfg)
    assert result.history[0]["train_match"] > 0.0


def test_divergence_aborts_with_location():
    train_s, val_s = _split()
    model = LocationNet(TINY, seed=0)
    with torch.no_grad():
        model.f_alpha[0].weight[0, 0] = math.nan
    with pytest.raises(TrainingDiverged, match="epoch 0, batch 0"):
        train(model, train_s, val_s, TrainConfig(batch_size=2, epochs=1))


def test_train_requires_samples():
    with pytest.raises(ValueError, match="samples"):
        train(LocationNet(TINY, seed=0), [], [], TrainConfig())


def test_overfit_reduces_nll():
    samples = _toy_samples()[:3]
    model = LocationNet(TINY, seed=2)
    cfg = TrainConfig(batch_size=3, lr=5e-3, epochs=12, seed=0, patience=100)
    result = train(model, samples, samples, cfg)
    assert result.history[-1]["train_nll"] < result.history[0]["train_nll"]
    assert result.best_val_nll <= result.history[0]["val_nll"]


def test_best_state_is_restored():
    train_s, val_s = _split()
    model = LocationNet(TINY, seed=3)
    cfg = TrainConfig(batch_size=2, lr=5e-3, epochs=4, seed=0, patience=100)
    result = train(model, train_s, val_s, cfg)
    batch = pack_batch(val_s, TINY.n_max)
    clues, _ = compute_clues(model, val_s, "full")
    with torch.no_grad():
        out = model(batch, clues)
        val_nll = float(nll_packed(out, batch.targets, batch.n_samples)) / len(val_s)
    assert val_nll == pytest.approx(result.best_val_nll, abs=1e-5)


# ---------------------------------------------------------------------------
# Evaluation


def test_predict_row_shape_and_flag():
    samples = _toy_samples()
    model = LocationNet(TINY, seed=0)
    row, empty = predict_row(model, samples[0])
    assert row.shape == (samples[0].n_nodes,)
    assert row.dtype == np.int64
    assert ((row >= 0) & (row < EDGE_CLASSES)).all()
    assert empty == (not row.any())


def test_evaluate_report_structure():
    samples = _toy_samples()[:3]
    model = LocationNet(TINY, seed=0)
    report = evaluate(model, samples)
    keys = {
        "ar", "ap", "pr", "pp", "f1s_a", "f1s_p",
        "forbidden_overlap", "collision_overlap", "empty_predictions", "samples",
    }
    assert set(report) == keys
    assert report["samples"] == 3
    assert 0 <= report["empty_predictions"] <= 3
    for name in ("ar", "ap", "pr", "pp", "f1s_a", "f1s_p", "forbidden_overlap", "collision_overlap"):
        assert 0.0 <= report[name] <= 1.0


def test_evaluate_empty_sample_list():
    report = evaluate(LocationNet(TINY, seed=0), [])
    assert report["samples"] == 0 and report["empty_predictions"] == 0
