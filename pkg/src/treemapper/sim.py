"""Desk-scale reproduction harness for the three learning strategies.

Builds reproducible synthetic worlds, runs ssl/al/hybrid campaigns from
identical initial state and seed, and emits per-round trajectories
(counts, metrics, added samples) as CSV and JSON.
"""

from __future__ import annotations

import csv
import json
import zlib
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataset import (
    Annotation,
    BBox,
    DatasetStore,
    DomainTag,
    ImageRecord,
    Provenance,
    Split,
)
from .detector import (
    NoiseParams,
    SyntheticBox,
    SyntheticDetector,
    SyntheticFalsePositive,
    SyntheticWorld,
    WorldImage,
)
from ._kernels import iou_matrix
from .errors import ConfigError
from .loop import (
    ReviewItem,
    ReviewVerdict,
    RoundReport,
    StrategyConfig,
    run_campaign,
)

ROLE_SPLITS = {
    "seed_train": Split.TRAIN,
    "val": Split.VAL,
    "test": Split.TEST,
    "pool": Split.UNLABELED_POOL,
}


@dataclass(frozen=True)
class WorldSpec:
    """Recipe for a reproducible synthetic world."""

    n_seed_train: int = 40
    n_val: int = 20
    n_test: int = 120
    n_pool: int = 300
    boxes_min: int = 2
    boxes_max: int = 5
    difficulty: dict = field(
        default_factory=lambda: {"kind": "uniform", "low": 0.0, "high": 1.0}
    )
    # The initial labeled set skews easy, mirroring a conservative
    # starter model trained on obvious instances.
    seed_difficulty: dict = field(
        default_factory=lambda: {"kind": "uniform", "low": 0.0, "high": 0.45}
    )
    image_size: int = 640
    noise: NoiseParams = field(default_factory=NoiseParams)
    seed: int = 7

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "WorldSpec":
        d = dict(d)
        if "noise" in d and isinstance(d["noise"], dict):
            d["noise"] = NoiseParams(**d["noise"])
        return cls(**d)


def _sample_difficulty(dist: dict, rng: np.random.Generator) -> float:
    kind = dist.get("kind")
    if kind == "uniform":
        return float(rng.uniform(dist["low"], dist["high"]))
    if kind == "bimodal":
        values = dist["values"]
        weights = dist.get("weights", [1.0 / len(values)] * len(values))
        return float(values[rng.choice(len(values), p=np.asarray(weights) / sum(weights))])
    if kind == "beta":
        return float(rng.beta(dist["a"], dist["b"]))
    raise ConfigError(f"unknown difficulty distribution {kind!r}")


def _place_box(
    rng: np.random.Generator,
    size: int,
    existing: list[BBox],
    max_overlap: float,
    attempts: int = 50,
) -> BBox | None:
    for _ in range(attempts):
        w = int(rng.integers(40, 121))
        h = int(rng.integers(40, 121))
        x = float(rng.uniform(0, size - w))
        y = float(rng.uniform(0, size - h))
        box = BBox(x, y, float(w), float(h))
        if not existing:
            return box
        ious = iou_matrix(
            np.array([box.as_list()]), np.array([b.as_list() for b in existing])
        )
        if ious.max() < max_overlap:
            return box
    return None


def build_world(spec: WorldSpec) -> SyntheticWorld:
    """Construct the world, freezing every per-box random draw."""
    rng = np.random.default_rng(spec.seed)
    images: list[WorldImage] = []
    roles = [
        ("seed_train", spec.n_seed_train),
        ("val", spec.n_val),
        ("test", spec.n_test),
        ("pool", spec.n_pool),
    ]
    for role, count in roles:
        difficulty_dist = spec.seed_difficulty if role == "seed_train" else spec.difficulty
        for i in range(count):
            image_id = f"{role}_{i:04d}"
            n_boxes = int(rng.integers(spec.boxes_min, spec.boxes_max + 1))
            placed: list[BBox] = []
            boxes: list[SyntheticBox] = []
            for _ in range(n_boxes):
                bbox = _place_box(rng, spec.image_size, placed, max_overlap=0.3)
                if bbox is None:
                    continue
                placed.append(bbox)
                boxes.append(
                    SyntheticBox(
                        bbox=bbox,
                        difficulty=_sample_difficulty(difficulty_dist, rng),
                        u_miss=float(rng.uniform()),
                        conf_eps=float(rng.standard_normal()),
                        jitter=(float(rng.standard_normal()), float(rng.standard_normal())),
                    )
                )
            fp = None
            if rng.uniform() < spec.noise.fp_rate:
                fp_box = _place_box(rng, spec.image_size, placed, max_overlap=0.2)
                if fp_box is not None:
                    fp = SyntheticFalsePositive(
                        bbox=fp_box,
                        base_conf=float(np.clip(rng.normal(0.45, 0.15), 0.05, 0.95)),
                        u_keep=float(rng.uniform()),
                    )
            images.append(
                WorldImage(
                    image_id=image_id,
                    width=spec.image_size,
                    height=spec.image_size,
                    boxes=tuple(boxes),
                    false_positive=fp,
                    role=role,
                )
            )
    return SyntheticWorld(images=tuple(images), noise=spec.noise, seed=spec.seed)


def make_store(world: SyntheticWorld) -> DatasetStore:
    """Dataset store for a world: splits by role, ground truth where labeled."""
    store = DatasetStore()
    for image in world.images:
        store.add_image(
            ImageRecord(
                image_id=image.image_id,
                uri=f"synthetic://{image.image_id}",
                domain_tag=DomainTag.TARGET,
                split=ROLE_SPLITS[image.role],
                width=image.width,
                height=image.height,
            )
        )
    for image in world.images:
        if image.role == "pool":
            continue
        for box in image.boxes:
            store.add_annotation(
                Annotation(
                    image_id=image.image_id,
                    bbox=box.bbox,
                    provenance=Provenance.HUMAN,
                    round_added=0,
                )
            )
    return store


class SimulatedAnnotator:
    """Returns ground truth for reviewed images.

    With a nonzero miss rate some true boxes are overlooked, modeling
    annotator noise; by default the annotator is perfect. Always answers
    every item in the round it was asked.
    """

    def __init__(
        self,
        world: SyntheticWorld,
        miss_rate: float = 0.0,
        annotator_id: str = "sim",
        seed: int = 0,
    ) -> None:
        if not 0.0 <= miss_rate <= 1.0:
            raise ConfigError(f"annotator miss_rate {miss_rate} outside [0, 1]")
        self.world = world
        self.miss_rate = miss_rate
        self.annotator_id = annotator_id
        self.seed = seed

    def _keeps_box(self, image_id: str, index: int) -> bool:
        if self.miss_rate <= 0.0:
            return True
        key = [self.seed, zlib.crc32(image_id.encode()), index]
        return float(np.random.default_rng(key).uniform()) >= self.miss_rate

    def review(
        self, items: list[ReviewItem]
    ) -> tuple[list[ReviewVerdict], list[ReviewItem]]:
        verdicts = []
        for item in items:
            truth = self.world.boxes_for(item.image_id)
            kept = tuple(
                box for i, box in enumerate(truth) if self._keeps_box(item.image_id, i)
            )
            discarded = 0
            if item.proposed:
                if kept:
                    ious = iou_matrix(
                        np.array([d.bbox.as_list() for d in item.proposed]),
                        np.array([b.as_list() for b in kept]),
                    )
                    discarded = int((ious.max(axis=1) < 0.5).sum())
                else:
                    discarded = len(item.proposed)
            verdicts.append(
                ReviewVerdict(
                    image_id=item.image_id,
                    kept=kept,
                    discarded_count=discarded,
                    annotator_id=self.annotator_id,
                    round=item.round,
                )
            )
        return verdicts, []


# ---------------------------------------------------------------------------
# strategy comparison


def default_benchmark() -> tuple[WorldSpec, StrategyConfig]:
    """The canonical seeded setup used for dynamics verification."""
    spec = WorldSpec()
    config = StrategyConfig(
        strategy="hybrid",
        pool_sample_size=spec.n_pool,
        max_rounds=6,
        stop_delta_f1=0.0,
        seed=11,
    )
    return spec, config


def compare_strategies(
    world: SyntheticWorld,
    config: StrategyConfig,
    out_dir: str | Path | None = None,
    annotator_miss_rate: float = 0.0,
) -> dict[str, list[RoundReport]]:
    """Run all three strategies from identical initial state and seed."""
    results: dict[str, list[RoundReport]] = {}
    for strategy in ("ssl", "al", "hybrid"):
        store = make_store(world)
        detector = SyntheticDetector(world)
        annotator = SimulatedAnnotator(world, miss_rate=annotator_miss_rate)
        cfg = replace(config, strategy=strategy)
        results[strategy] = run_campaign(store, detector, cfg, annotator=annotator)
    if out_dir is not None:
        write_trajectories(results, out_dir)
    return results


def write_trajectories(
    results: dict[str, list[RoundReport]], out_dir: str | Path
) -> None:
    """Emit trajectories.csv plus reports.json (deterministic formatting)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trajectories.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "strategy", "round", "tp", "fp", "fn",
                "precision", "recall", "f1",
                "pseudo_added", "human_added", "stopped",
            ]
        )
        for strategy in sorted(results):
            for r in results[strategy]:
                writer.writerow(
                    [
                        strategy, r.round, r.tp, r.fp, r.fn,
                        f"{r.precision:.6f}", f"{r.recall:.6f}", f"{r.f1:.6f}",
                        r.pseudo_added, r.human_added, int(r.stopped),
                    ]
                )
    payload = {s: [r.to_dict() for r in rs] for s, rs in sorted(results.items())}
    (out / "reports.json").write_text(json.dumps(payload, indent=2) + "\n")
