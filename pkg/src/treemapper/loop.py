"""Iterative learning orchestration: semi-supervised, active, and hybrid.

One round is sample -> detect -> label/review -> merge -> retrain ->
evaluate. Rounds are atomic: any failure rolls the store and detector back
to their pre-round state. Campaigns checkpoint after every round and stop
when the F1 delta between consecutive rounds falls below the configured
threshold or the round budget runs out.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Protocol

import numpy as np

from .dataset import (
    Annotation,
    BBox,
    DatasetStore,
    Provenance,
    Split,
    merge_with_precedence,
)
from .detector import Detection, Detector
from .errors import ConfigError, PoolExhaustedError
from .evaluation import match_dataset, metrics_from_counts

STRATEGIES = ("ssl", "al", "hybrid")


@dataclass(frozen=True)
class StrategyConfig:
    strategy: str
    tau_accept: float = 0.8
    tau_flag: float = 0.5
    pool_sample_size: int = 100
    max_rounds: int = 10
    stop_delta_f1: float = 0.005
    eval_iou: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if not 0.0 < self.tau_flag < self.tau_accept <= 1.0:
            raise ConfigError(
                f"thresholds must satisfy 0 < tau_flag < tau_accept <= 1, "
                f"got flag={self.tau_flag}, accept={self.tau_accept}"
            )
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be >= 1")
        if self.pool_sample_size < 1:
            raise ConfigError("pool_sample_size must be >= 1")
        if not 0.0 < self.eval_iou <= 1.0:
            raise ConfigError("eval_iou must be in (0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "StrategyConfig":
        return cls(**d)


@dataclass(frozen=True)
class ReviewItem:
    image_id: str
    proposed: tuple[Detection, ...]
    reason: str = "low_confidence"
    round: int = 0

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "proposed": [
                {**{"x": d.bbox.x, "y": d.bbox.y, "w": d.bbox.w, "h": d.bbox.h},
                 "confidence": d.confidence}
                for d in self.proposed
            ],
            "reason": self.reason,
            "round": self.round,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReviewItem":
        return cls(
            image_id=d["image_id"],
            proposed=tuple(
                Detection(d["image_id"], BBox(p["x"], p["y"], p["w"], p["h"]), p["confidence"])
                for p in d["proposed"]
            ),
            reason=d.get("reason", "low_confidence"),
            round=d.get("round", 0),
        )


@dataclass(frozen=True)
class ReviewVerdict:
    image_id: str
    kept: tuple[BBox, ...]
    discarded_count: int
    annotator_id: str
    round: int

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "kept": [b.as_list() for b in self.kept],
            "discarded_count": self.discarded_count,
            "annotator_id": self.annotator_id,
            "round": self.round,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReviewVerdict":
        return cls(
            image_id=d["image_id"],
            kept=tuple(BBox(*b) for b in d["kept"]),
            discarded_count=d["discarded_count"],
            annotator_id=d["annotator_id"],
            round=d["round"],
        )


@dataclass(frozen=True)
class RoundReport:
    round: int
    strategy: str
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    pseudo_added: int
    human_added: int
    stopped: bool = False
    review_carried: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RoundReport":
        return cls(**d)


class Annotator(Protocol):
    """Supplies verdicts for review items; may leave some unanswered."""

    def review(
        self, items: list[ReviewItem]
    ) -> tuple[list[ReviewVerdict], list[ReviewItem]]: ...


# ---------------------------------------------------------------------------
# round plumbing


def training_annotations(store: DatasetStore) -> list[Annotation]:
    """All annotations on training-split images (the retrain input)."""
    return [
        a for a in store.annotations if store.images[a.image_id].split == Split.TRAIN
    ]


def _sample_pool(store: DatasetStore, config: StrategyConfig, round_index: int) -> list[str]:
    pool = sorted(store.images_in_split(Split.UNLABELED_POOL))
    if not pool:
        raise PoolExhaustedError("unlabeled pool is empty")
    k = min(config.pool_sample_size, len(pool))
    rng = np.random.default_rng([config.seed, round_index])
    chosen = rng.choice(len(pool), size=k, replace=False)
    return [pool[i] for i in sorted(chosen)]


def _evaluate(store: DatasetStore, detector: Detector, config: StrategyConfig):
    test_ids = sorted(store.images_in_split(Split.TEST))
    batch = detector.detect(test_ids)
    predictions = batch.by_image()
    truths = {i: [a.bbox for a in store.annotations_for(i)] for i in test_ids}
    return match_dataset(predictions, truths, config.eval_iou)


def _finish_round(
    store: DatasetStore,
    detector: Detector,
    config: StrategyConfig,
    round_index: int,
    new_annotations: list[Annotation],
    pseudo_added: int,
    human_added: int,
    review_carried: int = 0,
) -> RoundReport:
    store.append_round(new_annotations, round_index, config.strategy)
    detector.retrain(training_annotations(store))
    tp, fp, fn = _evaluate(store, detector, config)
    m = metrics_from_counts(tp, fp, fn)
    return RoundReport(
        round=round_index,
        strategy=config.strategy,
        tp=tp,
        fp=fp,
        fn=fn,
        precision=m.precision,
        recall=m.recall,
        f1=m.f1,
        pseudo_added=pseudo_added,
        human_added=human_added,
        review_carried=review_carried,
    )


def _atomic(store: DatasetStore, detector: Detector, body):
    """Run one round body with rollback-on-failure semantics."""
    store_snapshot = store.to_dict()
    detector_snapshot = copy.deepcopy(detector.state_dict())
    try:
        return body()
    except Exception:
        store.replace_from_dict(store_snapshot)
        detector.load_state_dict(detector_snapshot)
        raise


def _accept_pseudo(
    dets_by_image: dict[str, list[Detection]],
    sample: list[str],
    config: StrategyConfig,
    round_index: int,
) -> list[Annotation]:
    accepted = []
    for image_id in sample:
        for det in dets_by_image.get(image_id, []):
            if det.confidence > config.tau_accept:
                accepted.append(
                    Annotation(
                        image_id=image_id,
                        bbox=det.bbox,
                        provenance=Provenance.PSEUDO,
                        confidence=det.confidence,
                        round_added=round_index,
                    )
                )
    return accepted


def _flag_for_review(
    dets_by_image: dict[str, list[Detection]],
    sample: list[str],
    config: StrategyConfig,
    round_index: int,
) -> list[ReviewItem]:
    items = []
    for image_id in sample:
        dets = dets_by_image.get(image_id, [])
        if any(d.confidence < config.tau_flag for d in dets):
            items.append(
                ReviewItem(
                    image_id=image_id,
                    proposed=tuple(dets),
                    reason="low_confidence",
                    round=round_index,
                )
            )
    return items


def _verdict_annotations(verdicts: list[ReviewVerdict], round_index: int) -> list[Annotation]:
    return [
        Annotation(
            image_id=v.image_id,
            bbox=box,
            provenance=Provenance.HUMAN,
            round_added=round_index,
        )
        for v in verdicts
        for box in v.kept
    ]


# ---------------------------------------------------------------------------
# the three strategies


def ssl_round(
    store: DatasetStore, detector: Detector, config: StrategyConfig, round_index: int
) -> RoundReport:
    """Pseudo-label everything above tau_accept, retrain, evaluate.

    Sampled images that produce no accepted detection stay in the
    unlabeled pool for later rounds.
    """

    def body() -> RoundReport:
        sample = _sample_pool(store, config, round_index)
        dets_by_image = detector.detect(sample).by_image()
        pseudo = _accept_pseudo(dets_by_image, sample, config, round_index)
        return _finish_round(
            store, detector, config, round_index, pseudo,
            pseudo_added=len(pseudo), human_added=0,
        )

    return _atomic(store, detector, body)


def al_round(
    store: DatasetStore,
    detector: Detector,
    annotator: Annotator,
    config: StrategyConfig,
    round_index: int,
) -> RoundReport:
    """Flag images with any detection below tau_flag for human review.

    Whatever verdicts the annotator returns (including answers to items
    carried from earlier rounds) are appended as human annotations at this
    round's merge point; unanswered items are carried forward.
    """

    def body() -> RoundReport:
        sample = _sample_pool(store, config, round_index)
        dets_by_image = detector.detect(sample).by_image()
        items = _flag_for_review(dets_by_image, sample, config, round_index)
        verdicts, carried = annotator.review(items)
        human = _verdict_annotations(verdicts, round_index)
        return _finish_round(
            store, detector, config, round_index, human,
            pseudo_added=0, human_added=len(human), review_carried=len(carried),
        )

    return _atomic(store, detector, body)


def hybrid_round(
    store: DatasetStore,
    detector: Detector,
    annotator: Annotator,
    config: StrategyConfig,
    round_index: int,
) -> RoundReport:
    """Run both pathways on one sample; human annotations take precedence.

    An image can be pseudo-accepted and flagged in the same round; after
    verdicts arrive its pseudo boxes are dropped in favor of the human
    ones.
    """

    def body() -> RoundReport:
        sample = _sample_pool(store, config, round_index)
        dets_by_image = detector.detect(sample).by_image()
        pseudo = _accept_pseudo(dets_by_image, sample, config, round_index)
        items = _flag_for_review(dets_by_image, sample, config, round_index)
        verdicts, carried = annotator.review(items)
        human = _verdict_annotations(verdicts, round_index)
        merged = merge_with_precedence(human, pseudo)
        pseudo_added = sum(1 for a in merged if a.provenance is Provenance.PSEUDO)
        return _finish_round(
            store, detector, config, round_index, merged,
            pseudo_added=pseudo_added, human_added=len(human),
            review_carried=len(carried),
        )

    return _atomic(store, detector, body)


# ---------------------------------------------------------------------------
# campaign


def _checkpoint_path(checkpoint_dir: Path, round_index: int) -> Path:
    return checkpoint_dir / f"round_{round_index:03d}.json"


def _write_checkpoint(
    checkpoint_dir: Path,
    round_index: int,
    config: StrategyConfig,
    store: DatasetStore,
    detector: Detector,
    reports: list[RoundReport],
) -> None:
    checkpoint_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "round": round_index,
        "config": config.to_dict(),
        "store_hash": store.store_hash(),
        "reports": [r.to_dict() for r in reports],
        "store": store.to_dict(),
        "detector_state": detector.state_dict(),
    }
    path = _checkpoint_path(checkpoint_dir, round_index)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(payload, indent=2))
    os.replace(tmp, path)


def latest_checkpoint(checkpoint_dir: str | Path) -> Path | None:
    checkpoint_dir = Path(checkpoint_dir)
    if not checkpoint_dir.is_dir():
        return None
    rounds = sorted(checkpoint_dir.glob("round_*.json"))
    return rounds[-1] if rounds else None


def run_campaign(
    store: DatasetStore,
    detector: Detector,
    config: StrategyConfig,
    annotator: Annotator | None = None,
    checkpoint_dir: str | Path | None = None,
    resume: bool = False,
) -> list[RoundReport]:
    """Run rounds until the F1 plateau, the round budget, or pool exhaustion.

    The stop rule halts after round r >= 2 when |F1_r - F1_{r-1}| <
    stop_delta_f1. With a checkpoint directory the campaign persists full
    round state after every round and can be resumed from the last
    persisted round after an interruption.
    """
    if config.strategy in ("al", "hybrid") and annotator is None:
        raise ConfigError(f"strategy {config.strategy!r} requires an annotator")

    reports: list[RoundReport] = []
    start_round = 1
    checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None

    if resume:
        if checkpoint_dir is None:
            raise ConfigError("resume requires a checkpoint directory")
        latest = latest_checkpoint(checkpoint_dir)
        if latest is not None:
            data = json.loads(latest.read_text())
            # max_rounds is a budget, not campaign identity: resuming with
            # more (or fewer) rounds is allowed, nothing else may change.
            theirs = {k: v for k, v in data["config"].items() if k != "max_rounds"}
            ours = {k: v for k, v in config.to_dict().items() if k != "max_rounds"}
            if theirs != ours:
                raise ConfigError("checkpoint config does not match the requested config")
            store.replace_from_dict(data["store"])
            detector.load_state_dict(data["detector_state"])
            reports = [RoundReport.from_dict(r) for r in data["reports"]]
            start_round = data["round"] + 1
            if reports and reports[-1].stopped:
                return reports

    for round_index in range(start_round, config.max_rounds + 1):
        if not store.images_in_split(Split.UNLABELED_POOL):
            break
        if config.strategy == "ssl":
            report = ssl_round(store, detector, config, round_index)
        elif config.strategy == "al":
            report = al_round(store, detector, annotator, config, round_index)
        else:
            report = hybrid_round(store, detector, annotator, config, round_index)

        if len(reports) >= 1 and abs(report.f1 - reports[-1].f1) < config.stop_delta_f1:
            report = replace(report, stopped=True)
        reports.append(report)

        if checkpoint_dir is not None:
            _write_checkpoint(checkpoint_dir, round_index, config, store, detector, reports)
        if report.stopped:
            break
    return reports
