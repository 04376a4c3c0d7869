"""Train a small model on a synthetic dataset, save a checkpoint, and ask
it for a placement recommendation on a held-out scene.

Runs in a couple of minutes on one CPU core:

    python3 demos/train_and_recommend.py
"""
import tempfile
from pathlib import Path

from siterec.checkpoint import save_checkpoint
from siterec.heatmap import export_overlay_png
from siterec.infer import Recommender
from siterec.model import LocationNet, ModelConfig
from siterec.samples import make_samples
from siterec.synth import GeneratorConfig, generate_dataset
from siterec.training import TrainConfig, evaluate, train

OUT = Path(__file__).parent / "out"

# Small enough to train live in the demo but wired exactly like the
# full-scale model.
DEMO_MODEL = ModelConfig(
    node_dim=32,
    msg_dim=8,
    heads=2,
    rounds=2,
    mixtures=4,
    clue_dim=32,
    conn_channels=8,
    n_max=64,
    visual_channels=(4, 4, 8, 8),
    crop_channels=8,
)


def designated_samples(ds, split):
    out = []
    for i in ds.indices(split):
        rules = ds.load_rules(i)
        out.extend(
            make_samples(ds.load_scene(i), source=f"{split}/{i}", designated_unit_id=rules.unit_id)
        )
    return out


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        ds = generate_dataset(GeneratorConfig(), n=60, seed=0, out_dir=tmp)
        train_s = designated_samples(ds, "train")
        val_s = designated_samples(ds, "test")
        print(f"dataset: {len(train_s)} train / {len(val_s)} val samples")

        model = LocationNet(DEMO_MODEL, seed=0)
        cfg = TrainConfig(batch_size=4, lr=1e-3, epochs=15, seed=0, gamma=1.0, patience=100)
        result = train(model, train_s, val_s, cfg)
        first, last = result.history[0], result.history[-1]
        print(f"train NLL {first['train_nll']:.3f} -> {last['train_nll']:.3f} "
              f"over {len(result.history)} epochs; best val {result.best_val_nll:.3f} "
              f"at epoch {result.best_epoch}")

        report = evaluate(model, val_s)
        print("validation metrics: "
              + ", ".join(f"{k}={report[k]:.3f}" for k in ("f1s_a", "f1s_p", "forbidden_overlap")))

        OUT.mkdir(exist_ok=True)
        ckpt = OUT / "demo.ckpt"
        save_checkpoint(ckpt, model, ds.config.catalog(), extra={"variant": "full"})
        print(f"saved checkpoint to {ckpt}")

        # Recommend a location on a held-out scene with its designated
        # unit removed; the heatmap should point at the vacated region.
        engine = Recommender.from_checkpoint(ckpt)
        index = ds.indices("test")[0]
        scene = ds.load_scene(index)
        rules = ds.load_rules(index)
        partial = scene.without_unit(rules.unit_id)
        rec = engine.recommend(partial)
        print(f"\nscene {index}: removed unit {rules.unit_id}, "
              f"correct region {rules.correct_region}")
        print(f"recommendation: peak cell {rec.peak}, {len(rec.edges)} predicted edges, "
              f"forbidden overlap {rec.forbidden_overlap:.3f}, "
              f"latency {rec.latency_s * 1e3:.0f} ms")
        x0, y0, x1, y1 = rules.correct_region
        inside = x0 <= rec.peak[0] < x1 and y0 <= rec.peak[1] < y1
        print(f"peak inside the correct region: {inside}")

        export_overlay_png(rec.display, partial, OUT / "recommendation.png")
        print(f"wrote {OUT / 'recommendation.png'}")


if __name__ == "__main__":
    main()
