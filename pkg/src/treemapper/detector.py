"""Pluggable detection backends.

Three implementations share one interface: a file-backed lookup, a remote
HTTP client, and a parametric synthetic detector whose world model makes
loop dynamics reproducible at desk scale.

The synthetic detector draws every per-box random number once, at world
construction, so detection is a pure function of (world, learned state).
That keeps campaigns resumable and makes the across-round behavior of a
box change only when the learned state changes.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol

import numpy as np
import requests

from ._kernels import iou_matrix
from .dataset import Annotation, BBox, Provenance
from .errors import ConfigError, DetectorError, IntegrityError

N_DIFFICULTY_BINS = 10


@dataclass(frozen=True)
class Detection:
    image_id: str
    bbox: BBox
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise IntegrityError(f"confidence {self.confidence} outside [0, 1]")


@dataclass
class DetectionBatch:
    detections: list[Detection] = field(default_factory=list)
    errors: dict[str, str] = field(default_factory=dict)  # image_id -> reason

    def by_image(self) -> dict[str, list[Detection]]:
        out: dict[str, list[Detection]] = {}
        for det in self.detections:
            out.setdefault(det.image_id, []).append(det)
        return out


class Detector(Protocol):
    def detect(self, image_ids: list[str]) -> DetectionBatch: ...

    def retrain(self, annotations: list[Annotation]) -> None: ...

    def state_dict(self) -> dict: ...

    def load_state_dict(self, state: dict) -> None: ...


# ---------------------------------------------------------------------------
# file-backed


class FileDetector:
    """Pure lookup over a predictions file (JSON lines).

    Image ids never seen in the file are reported as per-image errors
    unless they are declared in known_images, in which case they simply
    have no detections.
    """

    def __init__(
        self,
        detections: Iterable[Detection] = (),
        known_images: Iterable[str] = (),
    ) -> None:
        self._by_image: dict[str, list[Detection]] = {}
        for det in detections:
            self._by_image.setdefault(det.image_id, []).append(det)
        self._known = set(known_images) | set(self._by_image)

    @classmethod
    def from_jsonl(cls, path: str | Path, known_images: Iterable[str] = ()) -> "FileDetector":
        dets = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                dets.append(
                    Detection(
                        image_id=rec["image_id"],
                        bbox=BBox(rec["x"], rec["y"], rec["w"], rec["h"]),
                        confidence=rec["confidence"],
                    )
                )
        return cls(dets, known_images)

    def detect(self, image_ids: list[str]) -> DetectionBatch:
        batch = DetectionBatch()
        for image_id in image_ids:
            if image_id not in self._known:
                batch.errors[image_id] = "unknown image"
                continue
            batch.detections.extend(self._by_image.get(image_id, []))
        return batch

    def retrain(self, annotations: list[Annotation]) -> None:
        pass  # static predictions

    def state_dict(self) -> dict:
        return {}

    def load_state_dict(self, state: dict) -> None:
        pass


# ---------------------------------------------------------------------------
# remote


def _env_float(name: str, default: float) -> float:
    raw = os.environ.get(name)
    return float(raw) if raw else default


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    return int(raw) if raw else default


class RemoteDetector:
    """Client for a minimal detection service.

    POST {base}/detect  {"image_ids": [...]}  ->  {"detections": [...], "errors": {...}}
    POST {base}/retrain {"annotations": [...]} -> 2xx

    Timeout and retry counts come from the constructor or the
    TREEMAPPER_DETECT_TIMEOUT / TREEMAPPER_DETECT_RETRIES environment
    variables.
    """

    def __init__(
        self,
        base_url: str,
        timeout: float | None = None,
        retries: int | None = None,
        session: requests.Session | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout if timeout is not None else _env_float("TREEMAPPER_DETECT_TIMEOUT", 10.0)
        self.retries = retries if retries is not None else _env_int("TREEMAPPER_DETECT_RETRIES", 2)
        self._session = session or requests.Session()

    def _post(self, path: str, payload: dict) -> dict:
        last_error: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                resp = self._session.post(
                    f"{self.base_url}{path}", json=payload, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code >= 500:
                last_error = DetectorError(f"{path} -> {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise DetectorError(f"{path} -> {resp.status_code}: {resp.text}")
            return resp.json() if resp.content else {}
        raise DetectorError(f"{path} failed after {self.retries + 1} attempts: {last_error}")

    def detect(self, image_ids: list[str]) -> DetectionBatch:
        data = self._post("/detect", {"image_ids": list(image_ids)})
        batch = DetectionBatch(errors=dict(data.get("errors", {})))
        for rec in data.get("detections", []):
            batch.detections.append(
                Detection(
                    image_id=rec["image_id"],
                    bbox=BBox(rec["x"], rec["y"], rec["w"], rec["h"]),
                    confidence=rec["confidence"],
                )
            )
        return batch

    def retrain(self, annotations: list[Annotation]) -> None:
        payload = {
            "annotations": [
                {
                    "image_id": a.image_id,
                    "bbox": a.bbox.as_list(),
                    "provenance": a.provenance.value,
                    "confidence": a.confidence,
                    "round_added": a.round_added,
                }
                for a in annotations
            ]
        }
        self._post("/retrain", payload)

    def state_dict(self) -> dict:
        return {}  # model state lives server-side

    def load_state_dict(self, state: dict) -> None:
        pass


# ---------------------------------------------------------------------------
# synthetic


@dataclass(frozen=True)
class NoiseParams:
    """Observation model of the synthetic detector.

    Base miss probability is miss_scale * difficulty; a learned per-bin
    bias lowers it (by miss_gain) and raises confidence (by conf_gain).
    Mean confidence is logistic in (1 - difficulty).
    """

    jitter_sigma_px: float = 2.0
    miss_scale: float = 0.55
    miss_gain: float = 1.4
    fp_rate: float = 0.5
    conf_slope: float = 8.0
    conf_offset: float = 0.5
    conf_noise: float = 0.03
    conf_gain: float = 0.25
    emit_floor: float = 0.02

    def __post_init__(self) -> None:
        for name in ("miss_scale", "fp_rate", "emit_floor"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name}={v} outside [0, 1]")
        if self.jitter_sigma_px < 0 or self.conf_noise < 0:
            raise ConfigError("noise magnitudes must be >= 0")


@dataclass(frozen=True)
class SyntheticBox:
    """One ground-truth tree with its frozen random draws."""

    bbox: BBox
    difficulty: float
    u_miss: float
    conf_eps: float
    jitter: tuple[float, float]


@dataclass(frozen=True)
class SyntheticFalsePositive:
    bbox: BBox
    base_conf: float
    u_keep: float


@dataclass(frozen=True)
class WorldImage:
    image_id: str
    width: int
    height: int
    boxes: tuple[SyntheticBox, ...]
    false_positive: SyntheticFalsePositive | None
    role: str  # seed_train | val | test | pool


@dataclass(frozen=True)
class SyntheticWorld:
    images: tuple[WorldImage, ...]
    noise: NoiseParams
    seed: int

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "_by_id", {img.image_id: img for img in self.images}
        )

    def image(self, image_id: str) -> WorldImage | None:
        return self._by_id.get(image_id)  # type: ignore[attr-defined]

    def boxes_for(self, image_id: str) -> list[BBox]:
        img = self.image(image_id)
        return [b.bbox for b in img.boxes] if img else []


@dataclass(frozen=True)
class LearningParams:
    """Effect sizes for the simulated retraining shift."""

    learn_rate: float = 0.002
    decay_rate: float = 0.04
    bias_cap: float = 0.5
    fp_learn: float = 0.002
    fossil_boost: float = 0.05
    match_min_iou: float = 0.3


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def difficulty_bin(d: float) -> int:
    return min(int(d * N_DIFFICULTY_BINS), N_DIFFICULTY_BINS - 1)


class SyntheticDetector:
    """Detector whose behavior drifts with what it has been trained on.

    Ground-truth boxes are detected unless missed (probability rising with
    difficulty); confidence is logistic in easiness. Retraining shifts a
    per-difficulty-bin bias: bins present in the training set get boosted
    in proportion to how often they appear, absent bins decay. That bias
    feeds back into both miss probability and confidence, which is the
    whole mechanism behind pseudo-labeling self-reinforcement.
    """

    def __init__(self, world: SyntheticWorld, learning: LearningParams | None = None) -> None:
        self.world = world
        self.learning = learning or LearningParams()
        self.bias = [0.0] * N_DIFFICULTY_BINS
        self.fp_keep = 1.0
        self.fp_suppressed: set[str] = set()
        self.fossil: dict[str, float] = {}
        self.version = 0

    # -- inference ---------------------------------------------------------

    def _emit_box(self, image: WorldImage, box: SyntheticBox) -> Detection | None:
        noise = self.world.noise
        b = difficulty_bin(box.difficulty)
        # Bias scales the base miss rate, so a noise-free world stays
        # noise-free no matter what the model has (un)learned.
        p_miss = noise.miss_scale * box.difficulty * (1.0 - noise.miss_gain * self.bias[b])
        p_miss = min(max(p_miss, 0.0), 1.0)
        if box.u_miss < p_miss:
            return None
        conf = (
            _sigmoid(noise.conf_slope * ((1.0 - box.difficulty) - noise.conf_offset))
            + noise.conf_gain * self.bias[b]
            + noise.conf_noise * box.conf_eps
        )
        conf = min(max(conf, 0.0), 1.0)
        if conf < noise.emit_floor:
            return None
        dx = box.jitter[0] * noise.jitter_sigma_px
        dy = box.jitter[1] * noise.jitter_sigma_px
        x = min(max(box.bbox.x + dx, 0.0), image.width - box.bbox.w)
        y = min(max(box.bbox.y + dy, 0.0), image.height - box.bbox.h)
        return Detection(image.image_id, BBox(x, y, box.bbox.w, box.bbox.h), conf)

    def detect(self, image_ids: list[str]) -> DetectionBatch:
        batch = DetectionBatch()
        for image_id in image_ids:
            image = self.world.image(image_id)
            if image is None:
                batch.errors[image_id] = "unknown image"
                continue
            for box in image.boxes:
                det = self._emit_box(image, box)
                if det is not None:
                    batch.detections.append(det)
            fp = image.false_positive
            if (
                fp is not None
                and image_id not in self.fp_suppressed
                and fp.u_keep < self.fp_keep
            ):
                conf = min(max(fp.base_conf + self.fossil.get(image_id, 0.0), 0.0), 1.0)
                if conf >= self.world.noise.emit_floor:
                    batch.detections.append(Detection(image_id, fp.bbox, conf))
        return batch

    # -- training ------------------------------------------------------------

    def retrain(self, annotations: list[Annotation]) -> None:
        """Shift behavior toward the (cumulative) training distribution."""
        if not annotations:
            return  # nothing learned, behavior unchanged

        counts = [0] * N_DIFFICULTY_BINS
        fossil: dict[str, float] = {}
        reviewed: set[str] = set()
        by_image: dict[str, list[Annotation]] = {}
        for ann in annotations:
            if self.world.image(ann.image_id) is None:
                raise IntegrityError(f"training annotation for unknown image {ann.image_id}")
            by_image.setdefault(ann.image_id, []).append(ann)

        for image_id, anns in by_image.items():
            image = self.world.image(image_id)
            assert image is not None
            gt = np.array(
                [b.bbox.as_list() for b in image.boxes], dtype=np.float64
            ).reshape(len(image.boxes), 4)
            ann_boxes = np.array(
                [a.bbox.as_list() for a in anns], dtype=np.float64
            ).reshape(len(anns), 4)
            ious = iou_matrix(ann_boxes, gt)
            for i, ann in enumerate(anns):
                if ann.provenance in (Provenance.HUMAN, Provenance.VERIFIED) and ann.round_added >= 1:
                    reviewed.add(image_id)
                matched = False
                if len(image.boxes) > 0:
                    j = int(np.argmax(ious[i]))
                    if ious[i, j] >= self.learning.match_min_iou:
                        counts[difficulty_bin(image.boxes[j].difficulty)] += 1
                        matched = True
                if (
                    not matched
                    and ann.provenance is Provenance.PSEUDO
                    and image.false_positive is not None
                ):
                    fp_iou = iou_matrix(
                        ann_boxes[i : i + 1],
                        np.array([image.false_positive.bbox.as_list()]),
                    )[0, 0]
                    if fp_iou >= self.learning.match_min_iou:
                        fossil[image_id] = self.learning.fossil_boost

        cap = self.learning.bias_cap
        for b in range(N_DIFFICULTY_BINS):
            if counts[b] > 0:
                self.bias[b] = min(self.bias[b] + self.learning.learn_rate * counts[b], cap)
            else:
                self.bias[b] = max(self.bias[b] - self.learning.decay_rate, -cap)

        self.fp_suppressed = reviewed
        self.fp_keep = (1.0 - self.learning.fp_learn) ** len(reviewed)
        self.fossil = fossil
        self.version += 1

    # -- checkpointing ---------------------------------------------------------

    def state_dict(self) -> dict:
        return {
            "bias": list(self.bias),
            "fp_keep": self.fp_keep,
            "fp_suppressed": sorted(self.fp_suppressed),
            "fossil": {k: self.fossil[k] for k in sorted(self.fossil)},
            "version": self.version,
        }

    def load_state_dict(self, state: dict) -> None:
        self.bias = list(state["bias"])
        self.fp_keep = state["fp_keep"]
        self.fp_suppressed = set(state["fp_suppressed"])
        self.fossil = dict(state["fossil"])
        self.version = state["version"]


def synthetic_retrain(detector: SyntheticDetector, annotations: list[Annotation]) -> None:
    """Apply the simulated retraining shift (single-writer operation)."""
    detector.retrain(annotations)
