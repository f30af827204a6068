"""Command-line umbrella for planning, datasets, campaigns, and serving."""

from __future__ import annotations

import json
import os
from dataclasses import replace
from pathlib import Path

import click

from . import __version__
from .dataset import DatasetStore, Split, balanced_split
from .detector import FileDetector, SyntheticDetector
from .evaluation import average_precision, f1_sweep, match_dataset, metrics_from_counts
from .loop import StrategyConfig, latest_checkpoint, run_campaign
from .service import (
    ReviewQueue,
    create_app,
    export_pending,
    import_verdicts,
)
from .sim import (
    SimulatedAnnotator,
    WorldSpec,
    build_world,
    compare_strategies,
    default_benchmark,
    make_store,
    write_trajectories,
)
from .viewplan import (
    FilePanoramaSource,
    PlanConfig,
    ViewConfig,
    load_roads_geojson,
    load_trees_json,
    plan_views,
    write_plan,
)


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Urban tree mapping: view planning, learning loops, evaluation."""


# ---------------------------------------------------------------------------
# view planning


@main.command("plan-views")
@click.option("--trees", "trees_path", required=True, type=click.Path(exists=True))
@click.option("--roads", "roads_path", required=True, type=click.Path(exists=True))
@click.option("--panoramas", "panoramas_path", required=True, type=click.Path(exists=True))
@click.option("--buffer-m", default=20.0, show_default=True)
@click.option("--max-dist-m", default=20.0, show_default=True)
@click.option("--fov", default=90.0, show_default=True)
@click.option("--pitch", default=0.0, show_default=True)
@click.option("--image-size", default="640x640", show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def plan_views_cmd(
    trees_path: str,
    roads_path: str,
    panoramas_path: str,
    buffer_m: float,
    max_dist_m: float,
    fov: float,
    pitch: float,
    image_size: str,
    out_dir: str,
) -> None:
    """Filter trees by road buffer and emit one view request per tree."""
    width, height = (int(v) for v in image_size.lower().split("x"))
    trees = load_trees_json(trees_path)
    roads = load_roads_geojson(roads_path)
    source = FilePanoramaSource.from_json(panoramas_path)
    config = PlanConfig(
        buffer_m=buffer_m,
        max_dist_m=max_dist_m,
        view=ViewConfig(pitch=pitch, fov=fov, image_width=width, image_height=height),
    )
    plan = plan_views(trees, roads, source, config)
    write_plan(plan, out_dir)
    click.echo(f"planned {len(plan.requests)} views, skipped {len(plan.skips)}")


# ---------------------------------------------------------------------------
# dataset


@main.command("split")
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
@click.option("--ratios", default="0.8,0.1,0.1", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def split_cmd(store_path: str, ratios: str, seed: int, out_path: str) -> None:
    """Reassign train/val/test splits balancing tree-count densities.

    Unlabeled pool images are left untouched.
    """
    store = DatasetStore.load(store_path)
    parsed = tuple(float(r) for r in ratios.split(","))
    eligible = [
        (rec, store.tree_count(rec.image_id))
        for rec in store.images.values()
        if rec.split != Split.UNLABELED_POOL
    ]
    assignment = balanced_split(eligible, parsed, seed=seed)
    for image_id, split in assignment.items():
        store.set_split(image_id, split)
    store.save(out_path)
    click.echo(f"assigned {len(assignment)} images across train/val/test")


@main.group("dataset")
def dataset_group() -> None:
    """Dataset inspection."""


@dataset_group.command("stats")
@click.option("--store", "store_path", required=True, type=click.Path(exists=True))
def dataset_stats_cmd(store_path: str) -> None:
    """Per-split tree-count histograms."""
    store = DatasetStore.load(store_path)
    stats: dict[str, dict[str, int]] = {}
    for split in Split:
        histogram: dict[str, int] = {}
        for image_id in store.images_in_split(split):
            count = str(store.tree_count(image_id))
            histogram[count] = histogram.get(count, 0) + 1
        stats[split.value] = dict(sorted(histogram.items(), key=lambda kv: int(kv[0])))
    click.echo(json.dumps(stats, indent=2))


# ---------------------------------------------------------------------------
# campaigns


def _load_campaign_spec(config_path: str | None) -> tuple[WorldSpec, StrategyConfig, float]:
    if config_path is None:
        spec, config = default_benchmark()
        return spec, config, 0.0
    data = json.loads(Path(config_path).read_text())
    spec = WorldSpec.from_dict(data.get("world", {}))
    config = StrategyConfig.from_dict(data["config"])
    return spec, config, data.get("annotator_miss_rate", 0.0)


def _campaign_pieces(config_path: str | None, strategy: str | None):
    spec, config, miss_rate = _load_campaign_spec(config_path)
    if strategy is not None:
        config = replace(config, strategy=strategy)
    world = build_world(spec)
    store = make_store(world)
    detector = SyntheticDetector(world)
    annotator = SimulatedAnnotator(world, miss_rate=miss_rate)
    return world, store, detector, annotator, config


@main.command("run-campaign")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--strategy", type=click.Choice(["ssl", "al", "hybrid"]))
@click.option("--checkpoint-dir", required=True, type=click.Path())
@click.option("--resume", is_flag=True, help="Continue from the last persisted round.")
def run_campaign_cmd(
    config_path: str | None, strategy: str | None, checkpoint_dir: str, resume: bool
) -> None:
    """Run a synthetic-detector campaign until plateau or round budget."""
    _, store, detector, annotator, config = _campaign_pieces(config_path, strategy)
    reports = run_campaign(
        store, detector, config, annotator=annotator,
        checkpoint_dir=checkpoint_dir, resume=resume,
    )
    for r in reports:
        click.echo(
            f"round {r.round}: P={r.precision:.3f} R={r.recall:.3f} F1={r.f1:.3f} "
            f"pseudo+={r.pseudo_added} human+={r.human_added}"
            + (" [stopped]" if r.stopped else "")
        )


@main.command("run-round")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--strategy", type=click.Choice(["ssl", "al", "hybrid"]))
@click.option("--checkpoint-dir", required=True, type=click.Path())
def run_round_cmd(config_path: str | None, strategy: str | None, checkpoint_dir: str) -> None:
    """Run exactly one more round, resuming from the checkpoint directory."""
    _, store, detector, annotator, config = _campaign_pieces(config_path, strategy)
    latest = latest_checkpoint(checkpoint_dir)
    next_round = 1
    if latest is not None:
        next_round = json.loads(latest.read_text())["round"] + 1
    if next_round > config.max_rounds:
        raise click.ClickException("campaign already at max_rounds")
    config = replace(config, max_rounds=next_round)
    reports = run_campaign(
        store, detector, config, annotator=annotator,
        checkpoint_dir=checkpoint_dir, resume=latest is not None,
    )
    r = reports[-1]
    click.echo(f"round {r.round}: P={r.precision:.3f} R={r.recall:.3f} F1={r.f1:.3f}")


# ---------------------------------------------------------------------------
# evaluation


def _load_boxes_jsonl(path: str) -> dict[str, list]:
    from .dataset import BBox

    out: dict[str, list] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            out.setdefault(rec["image_id"], []).append(
                BBox(rec["x"], rec["y"], rec["w"], rec["h"])
            )
    return out


@main.command("evaluate")
@click.option("--predictions", "pred_path", required=True, type=click.Path(exists=True))
@click.option("--truths", "truth_path", required=True, type=click.Path(exists=True))
@click.option("--iou", default=0.5, show_default=True)
@click.option("--sweep", is_flag=True, help="Also sweep confidence thresholds.")
@click.option("--out", "out_dir", required=True, type=click.Path())
def evaluate_cmd(
    pred_path: str, truth_path: str, iou: float, sweep: bool, out_dir: str
) -> None:
    """Score a predictions file against ground truth boxes."""
    detector = FileDetector.from_jsonl(pred_path)
    truths = _load_boxes_jsonl(truth_path)
    image_ids = sorted(set(truths) | set(detector._by_image))
    predictions = detector.detect(image_ids).by_image()

    tp, fp, fn = match_dataset(predictions, truths, iou)
    m = metrics_from_counts(tp, fp, fn)
    report = {
        "iou_threshold": iou,
        "tp": tp,
        "fp": fp,
        "fn": fn,
        "precision": m.precision,
        "recall": m.recall,
        "f1": m.f1,
        "ap": average_precision(predictions, truths, iou),
    }

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if sweep:
        result = f1_sweep(predictions, truths, iou_threshold=iou)
        report["best_threshold"] = result.best.threshold
        report["best_f1"] = result.best.f1
        with open(out / "sweep.csv", "w") as fh:
            fh.write("threshold,precision,recall,f1\n")
            for pt in result.points:
                fh.write(
                    f"{pt.threshold:.2f},{pt.precision:.6f},{pt.recall:.6f},{pt.f1:.6f}\n"
                )
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    click.echo(json.dumps(report, indent=2))


# ---------------------------------------------------------------------------
# simulation


@main.command("simulate")
@click.option("--world", "world_path", type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--annotator-miss-rate", default=0.0, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def simulate_cmd(
    world_path: str | None,
    config_path: str | None,
    annotator_miss_rate: float,
    out_dir: str,
) -> None:
    """Run all three strategies on one world and emit trajectories."""
    default_spec, default_config = default_benchmark()
    spec = (
        WorldSpec.from_dict(json.loads(Path(world_path).read_text()))
        if world_path
        else default_spec
    )
    config = (
        StrategyConfig.from_dict(json.loads(Path(config_path).read_text()))
        if config_path
        else default_config
    )
    world = build_world(spec)
    results = compare_strategies(
        world, config, out_dir=out_dir, annotator_miss_rate=annotator_miss_rate
    )
    for strategy, reports in sorted(results.items()):
        final = reports[-1]
        click.echo(
            f"{strategy}: rounds={len(reports)} final TP={final.tp} "
            f"FP={final.fp} FN={final.fn} F1={final.f1:.3f}"
        )
    write_trajectories(results, out_dir)


# ---------------------------------------------------------------------------
# service


def _data_dir(value: str | None) -> Path:
    return Path(value or os.environ.get("TREEMAPPER_DATA_DIR", "."))


@main.command("serve")
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--lease-seconds", default=300.0, show_default=True)
@click.option("--data-dir", default=None, help="Defaults to $TREEMAPPER_DATA_DIR or '.'")
def serve_cmd(port: int, host: str, lease_seconds: float, data_dir: str | None) -> None:
    """Serve the review queue and campaign status over HTTP."""
    import uvicorn

    root = _data_dir(data_dir)
    queue_path = root / "queue.json"
    queue = ReviewQueue.load(queue_path) if queue_path.exists() else ReviewQueue()
    queue.lease_seconds = lease_seconds
    image_uris = None
    store_path = root / "store.json"
    if store_path.exists():
        store = DatasetStore.load(store_path)
        image_uris = {rec.image_id: rec.uri for rec in store.images.values()}
    app = create_app(queue, reports_path=root, queue_path=queue_path, image_uris=image_uris)
    uvicorn.run(app, host=host, port=port)


@main.group("review")
def review_group() -> None:
    """File-based review fallback."""


@review_group.command("export")
@click.option("--data-dir", default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
def review_export_cmd(data_dir: str | None, out_path: str) -> None:
    """Write outstanding review items to a JSON file."""
    queue_path = _data_dir(data_dir) / "queue.json"
    queue = ReviewQueue.load(queue_path) if queue_path.exists() else ReviewQueue()
    count = export_pending(queue, out_path)
    click.echo(f"exported {count} review items")


@review_group.command("import")
@click.option("--data-dir", default=None)
@click.option("--verdicts", "verdicts_path", required=True, type=click.Path(exists=True))
def review_import_cmd(data_dir: str | None, verdicts_path: str) -> None:
    """Ingest verdicts from a JSON file into the queue."""
    queue_path = _data_dir(data_dir) / "queue.json"
    queue = ReviewQueue.load(queue_path) if queue_path.exists() else ReviewQueue()
    count = import_verdicts(queue, verdicts_path)
    queue.save(queue_path)
    click.echo(f"imported {count} verdicts")


if __name__ == "__main__":
    main()
