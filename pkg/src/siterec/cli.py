"""Command-line pipeline driver: data generation, graph extraction, rendering,
training, evaluation, one-shot recommendation, and the HTTP service."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .catalog import CatalogError, get_catalog
from .checkpoint import CheckpointError, load_checkpoint_auto, save_checkpoint
from .graph import build_graph, write_graph
from .heatmap import export_overlay_png, save_heatmap
from .infer import GraphTooLarge, Recommender, SceneRejected
from .model import ModelConfig
from .render import export_png, render_topdown, save_image
from .samples import make_samples
from .sceneio import SceneFormatError, dumps_canonical, read_scene
from .synth import GeneratorConfig, SynthDataset, generate_dataset
from .training import TrainConfig, TrainingDiverged, evaluate, train


class InputError(Exception):
    """Bad input file or value; the message names the offending path."""


def _read_json(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise InputError(f"{path}: file not found")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from exc


def _load_scene(path: str):
    try:
        return read_scene(path)
    except FileNotFoundError:
        raise InputError(f"{path}: file not found") from None
    except (SceneFormatError, CatalogError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _load_dataset(path: str) -> SynthDataset:
    try:
        return SynthDataset.load(path)
    except FileNotFoundError:
        raise InputError(f"{path}: no dataset manifest found") from None
    except (ValueError, KeyError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _load_recommender(path: str) -> Recommender:
    try:
        model, catalog, extra = load_checkpoint_auto(path)
    except CheckpointError as exc:
        raise InputError(str(exc) if str(path) in str(exc) else f"{path}: {exc}") from exc
    return Recommender(model, catalog, variant=str(extra.get("variant", "full")))


def _dataset_samples(dataset: SynthDataset, split: str, designated_only: bool):
    samples = []
    for index in dataset.indices(split):
        scene = dataset.load_scene(index)
        rules = dataset.load_rules(index)
        designated = rules.unit_id if designated_only else None
        samples.extend(
            make_samples(scene, source=f"{split}/{index:05d}", designated_unit_id=designated)
        )
    return samples


# ---------------------------------------------------------------------------
# Commands


def cmd_gen_data(args) -> int:
    config = GeneratorConfig.from_doc(_read_json(args.config)) if args.config else GeneratorConfig()
    dataset = generate_dataset(config, n=args.count, seed=args.seed, out_dir=args.out)
    print(f"wrote {len(dataset.entries)} scenes under {args.out}")
    return 0


def cmd_extract_graph(args) -> int:
    scene = _load_scene(args.scene)
    graph = build_graph(scene)
    write_graph(graph, args.out)
    print(f"{len(graph.nodes)} nodes, {len(graph.edges)} edges -> {args.out}")
    return 0


def cmd_render(args) -> int:
    scene = _load_scene(args.scene)
    image = render_topdown(scene, resolution=args.resolution)
    save_image(image, args.out)
    if args.png:
        export_png(image, args.png)
    print(f"rendered {args.resolution}x{args.resolution} -> {args.out}")
    return 0


def cmd_train(args) -> int:
    dataset = _load_dataset(args.data)
    overrides = _read_json(args.config) if args.config else {}
    cfg = TrainConfig(
        batch_size=int(overrides.get("batch_size", 8)),
        lr=float(overrides.get("lr", 1e-4)),
        epochs=args.epochs if args.epochs is not None else int(overrides.get("epochs", 20)),
        seed=args.seed,
        gamma=float(overrides.get("gamma", 10.0)),
        variant=args.variant,
        patience=int(overrides.get("patience", 5)),
    )
    model_cfg = (
        ModelConfig.from_doc(overrides["model"]) if "model" in overrides else ModelConfig()
    )
    from .model import LocationNet

    catalog = get_catalog(dataset.config.catalog_name)
    if model_cfg.n_categories != len(catalog):
        raise InputError(
            f"{args.data}: catalog has {len(catalog)} categories, model expects "
            f"{model_cfg.n_categories}"
        )
    train_samples = _dataset_samples(dataset, "train", args.designated_only)
    val_samples = _dataset_samples(dataset, "test", args.designated_only)
    if not train_samples:
        raise InputError(f"{args.data}: dataset yields no training samples")
    model = LocationNet(model_cfg, seed=args.seed)
    log_path = args.log if args.log else None
    try:
        result = train(model, train_samples, val_samples, cfg, log_path=log_path)
    except TrainingDiverged as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return 1
    save_checkpoint(args.out, model, catalog, extra={"variant": args.variant, "seed": args.seed})
    best = result.best_val_nll
    print(f"trained {len(result.history)} epochs, best val nll {best:.4f} -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    dataset = _load_dataset(args.data)
    engine = _load_recommender(args.checkpoint)
    samples = _dataset_samples(dataset, args.split, args.designated_only)
    if not samples:
        raise InputError(f"{args.data}: no samples in split {args.split!r}")
    table = evaluate(engine.model, samples, variant=engine.variant)
    doc = dumps_canonical({"format": "siterec.evaluation/1", "split": args.split, **table})
    if args.out:
        Path(args.out).write_text(doc, encoding="utf-8")
    print(doc, end="")
    return 0


def cmd_recommend(args) -> int:
    scene = _load_scene(args.scene)
    engine = _load_recommender(args.checkpoint)
    try:
        rec = engine.recommend(scene, mode=args.mode, seed=args.seed)
    except (SceneRejected, GraphTooLarge) as exc:
        raise InputError(f"{args.scene}: {exc}") from exc
    out = Path(args.out)
    save_heatmap(rec.heatmap, out.with_suffix(".npz"))
    export_overlay_png(rec.heatmap, scene, out.with_suffix(".png"))
    summary = {
        "edges": [{"node": j, "type": t} for j, t in rec.edges],
        "peak": list(rec.peak),
        "forbidden_overlap": rec.forbidden_overlap,
        "collision_overlap": rec.collision_overlap,
        "empty": rec.empty,
    }
    out.with_suffix(".json").write_text(dumps_canonical(summary), encoding="utf-8")
    print(f"peak {rec.peak}, {len(rec.edges)} edges -> {out.with_suffix('.npz')}")
    return 0


def cmd_serve(args) -> int:
    from .service import load_service_config, run_service

    try:
        config = load_service_config(args.config, checkpoint=args.checkpoint, port=args.port)
    except (FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        raise InputError(f"{args.config or 'service config'}: {exc}") from exc
    if not Path(config.checkpoint).exists():
        raise InputError(f"{config.checkpoint}: checkpoint not found")
    run_service(config)
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="siterec",
        description="Residential-layout location recommendation pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic scene dataset")
    p.add_argument("--config", help="generator config JSON")
    p.add_argument("--count", type=int, default=100, help="number of scenes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("extract-graph", help="extract the relation graph of a scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True, help="output graph JSON path")
    p.set_defaults(func=cmd_extract_graph)

    p = sub.add_parser("render", help="render a scene to the 2-channel float grid")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True, help="output float-grid path (.npz)")
    p.add_argument("--png", help="also write an 8-bit grayscale inspection PNG")
    p.add_argument("--resolution", type=int, default=128)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("train", help="train a model on a generated dataset")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--config", help="training/model config JSON")
    p.add_argument("--variant", default="full", help="full | no_matching_loss | graph_only")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--log", help="append JSONL metrics here")
    p.add_argument(
        "--designated-only",
        action="store_true",
        help="hold out only each scene's designated unit instead of every architectural unit",
    )
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--out", help="write the evaluation table JSON here")
    p.add_argument("--designated-only", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("recommend", help="recommend a location for a new unit")
    p.add_argument("--scene", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="output prefix (.npz/.png/.json)")
    p.add_argument("--mode", default="argmax", choices=["argmax", "sample"])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("serve", help="run the HTTP recommendation service")
    p.add_argument("--config", help="service config JSON")
    p.add_argument("--checkpoint", help="checkpoint path (overrides config)")
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
