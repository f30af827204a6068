"""Provenance-aware dataset store with balanced splits and round history.

Persists as COCO-style JSON (single category "tree") extended with
per-annotation provenance, the round each annotation was added, and the
per-round accounting that drives the added-samples reporting.
"""

from __future__ import annotations

import hashlib
import json
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

from .errors import IntegrityError, SequencingError

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: top-left corner plus extents, in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise IntegrityError(f"degenerate box extents ({self.w}, {self.h})")

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]


class Provenance(str, Enum):
    HUMAN = "human"
    PSEUDO = "pseudo"
    VERIFIED = "verified"


class Split(str, Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"
    UNLABELED_POOL = "unlabeled_pool"


class DomainTag(str, Enum):
    SOURCE = "source_domain"
    TARGET = "target_domain"


@dataclass(frozen=True)
class Annotation:
    image_id: str
    bbox: BBox
    provenance: Provenance
    confidence: float | None = None
    round_added: int = 0

    def __post_init__(self) -> None:
        if self.provenance is Provenance.PSEUDO:
            if self.confidence is None:
                raise IntegrityError("pseudo annotation requires a confidence")
            if not 0.0 <= self.confidence <= 1.0:
                raise IntegrityError(f"confidence {self.confidence} outside [0, 1]")
        elif self.confidence is not None:
            raise IntegrityError(
                f"{self.provenance.value} annotation must not carry a confidence"
            )
        if self.round_added < 0:
            raise IntegrityError("round_added must be >= 0")


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    uri: str
    domain_tag: DomainTag = DomainTag.TARGET
    split: Split = Split.UNLABELED_POOL
    width: int | None = None
    height: int | None = None


@dataclass
class RoundRecord:
    round_index: int
    strategy: str
    added: dict[str, int]  # provenance value -> count

    def to_dict(self) -> dict:
        return {"round": self.round_index, "strategy": self.strategy, "added": dict(self.added)}

    @classmethod
    def from_dict(cls, d: dict) -> "RoundRecord":
        return cls(d["round"], d["strategy"], dict(d["added"]))


class DatasetStore:
    """Images, annotations, split assignments and per-round history.

    Single-writer: all mutation goes through add_image / add_annotation /
    append_round on one owner. Snapshots for readers come from to_dict().
    """

    def __init__(self) -> None:
        self.images: dict[str, ImageRecord] = {}
        self.annotations: list[Annotation] = []
        self.round_history: list[RoundRecord] = []
        self._by_image: dict[str, list[Annotation]] = defaultdict(list)

    # -- basic mutation ------------------------------------------------

    def add_image(self, record: ImageRecord) -> None:
        if record.image_id in self.images:
            raise IntegrityError(f"duplicate image {record.image_id}")
        self.images[record.image_id] = record

    def add_annotation(self, ann: Annotation) -> None:
        image = self.images.get(ann.image_id)
        if image is None:
            raise IntegrityError(f"annotation references unknown image {ann.image_id}")
        if ann.provenance is Provenance.PSEUDO and image.split in (Split.VAL, Split.TEST):
            raise IntegrityError(
                f"pseudo annotation targets {image.split.value} image {ann.image_id}"
            )
        if image.width is not None and image.height is not None:
            b = ann.bbox
            if b.x < 0 or b.y < 0 or b.x + b.w > image.width or b.y + b.h > image.height:
                raise IntegrityError(f"box outside image bounds on {ann.image_id}")
        self.annotations.append(ann)
        self._by_image[ann.image_id].append(ann)

    def set_split(self, image_id: str, split: Split) -> None:
        self.images[image_id] = replace(self.images[image_id], split=split)

    # -- queries ---------------------------------------------------------

    def annotations_for(self, image_id: str) -> list[Annotation]:
        return list(self._by_image.get(image_id, []))

    def images_in_split(self, split: Split) -> list[str]:
        return [i for i, rec in self.images.items() if rec.split == split]

    def tree_count(self, image_id: str) -> int:
        return len(self._by_image.get(image_id, []))

    @property
    def last_round(self) -> int:
        return self.round_history[-1].round_index if self.round_history else 0

    def validate(self) -> None:
        """Raise IntegrityError if any store invariant is broken."""
        for ann in self.annotations:
            image = self.images.get(ann.image_id)
            if image is None:
                raise IntegrityError(f"dangling annotation for {ann.image_id}")
            if ann.provenance is Provenance.PSEUDO and image.split in (Split.VAL, Split.TEST):
                raise IntegrityError(f"pseudo annotation on {image.split.value} image")

    # -- round bookkeeping -----------------------------------------------

    def append_round(
        self,
        new_annotations: list[Annotation],
        round_index: int,
        strategy_tag: str,
        promote_to_train: bool = True,
    ) -> None:
        """Append one round's annotations and record the added counts.

        Annotations get round_added stamped with this round. Affected pool
        images are promoted to the training split so they join the next
        retrain.
        """
        if round_index != self.last_round + 1:
            raise SequencingError(
                f"round {round_index} does not follow round {self.last_round}"
            )
        for ann in new_annotations:
            image = self.images.get(ann.image_id)
            if image is None:
                raise IntegrityError(f"annotation references unknown image {ann.image_id}")
            if image.split in (Split.VAL, Split.TEST):
                raise IntegrityError(
                    f"round annotation targets {image.split.value} image {ann.image_id}"
                )

        counts: Counter[str] = Counter()
        for ann in new_annotations:
            stamped = replace(ann, round_added=round_index)
            self.add_annotation(stamped)
            counts[ann.provenance.value] += 1
            if promote_to_train and self.images[ann.image_id].split == Split.UNLABELED_POOL:
                self.set_split(ann.image_id, Split.TRAIN)

        self.round_history.append(
            RoundRecord(
                round_index,
                strategy_tag,
                {p.value: counts.get(p.value, 0) for p in Provenance},
            )
        )

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        images = [
            {
                "id": rec.image_id,
                "file_name": rec.uri,
                "domain_tag": rec.domain_tag.value,
                "split": rec.split.value,
                **({"width": rec.width} if rec.width is not None else {}),
                **({"height": rec.height} if rec.height is not None else {}),
            }
            for rec in self.images.values()
        ]
        annotations = []
        for i, ann in enumerate(self.annotations):
            entry = {
                "id": i + 1,
                "image_id": ann.image_id,
                "category_id": 1,
                "bbox": ann.bbox.as_list(),
                "area": ann.bbox.w * ann.bbox.h,
                "provenance": ann.provenance.value,
                "round_added": ann.round_added,
            }
            if ann.confidence is not None:
                entry["confidence"] = ann.confidence
            annotations.append(entry)
        return {
            "schema_version": SCHEMA_VERSION,
            "categories": [{"id": 1, "name": "tree"}],
            "images": images,
            "annotations": annotations,
            "round_history": [r.to_dict() for r in self.round_history],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetStore":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise IntegrityError(f"unsupported schema_version {data.get('schema_version')}")
        store = cls()
        for img in data["images"]:
            store.add_image(
                ImageRecord(
                    image_id=img["id"],
                    uri=img["file_name"],
                    domain_tag=DomainTag(img["domain_tag"]),
                    split=Split(img["split"]),
                    width=img.get("width"),
                    height=img.get("height"),
                )
            )
        for entry in data["annotations"]:
            x, y, w, h = entry["bbox"]
            store.add_annotation(
                Annotation(
                    image_id=entry["image_id"],
                    bbox=BBox(x, y, w, h),
                    provenance=Provenance(entry["provenance"]),
                    confidence=entry.get("confidence"),
                    round_added=entry["round_added"],
                )
            )
        store.round_history = [RoundRecord.from_dict(r) for r in data.get("round_history", [])]
        return store

    def replace_from_dict(self, data: dict) -> None:
        """Reset this store in place from a serialized snapshot."""
        other = DatasetStore.from_dict(data)
        self.images = other.images
        self.annotations = other.annotations
        self.round_history = other.round_history
        self._by_image = other._by_image

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.to_dict(), indent=2).encode()

    def store_hash(self) -> str:
        return hashlib.sha256(self.canonical_bytes()).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.canonical_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "DatasetStore":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def copy(self) -> "DatasetStore":
        return DatasetStore.from_dict(self.to_dict())


def balanced_split(
    images_with_counts: list[tuple[ImageRecord, int]],
    ratios: tuple[float, float, float],
    seed: int = 0,
) -> dict[str, Split]:
    """Stratified train/val/test assignment balancing tree-count densities.

    Images are bucketed by exact tree count; within each bucket the given
    ratios are realized with largest-remainder rounding, so every split's
    count histogram tracks the global one to within one image per bucket.
    Buckets with fewer images than there are splits merge into the next
    bucket up (the last one merges down) rather than erroring.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError("ratios must be three positive fractions")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios sum to {sum(ratios)}, expected 1")
    for _, count in images_with_counts:
        if count < 0:
            raise ValueError("tree counts must be >= 0")

    by_count: dict[int, list[ImageRecord]] = defaultdict(list)
    for rec, count in images_with_counts:
        by_count[count].append(rec)

    # Merge under-filled buckets upward so stratification stays meaningful.
    n_splits = 3
    buckets: list[list[ImageRecord]] = []
    carry: list[ImageRecord] = []
    for count in sorted(by_count):
        group = carry + by_count[count]
        if len(group) < n_splits:
            carry = group
        else:
            buckets.append(group)
            carry = []
    if carry:
        if buckets:
            buckets[-1].extend(carry)
        else:
            buckets.append(carry)

    rng = random.Random(seed)
    splits = (Split.TRAIN, Split.VAL, Split.TEST)
    assignment: dict[str, Split] = {}
    for group in buckets:
        ordered = sorted(group, key=lambda r: r.image_id)
        rng.shuffle(ordered)
        quotas = [len(ordered) * r for r in ratios]
        alloc = [int(q) for q in quotas]
        remainders = sorted(
            range(n_splits), key=lambda i: (quotas[i] - alloc[i], ratios[i]), reverse=True
        )
        short = len(ordered) - sum(alloc)
        for i in remainders[:short]:
            alloc[i] += 1
        pos = 0
        for split, n in zip(splits, alloc):
            for rec in ordered[pos : pos + n]:
                assignment[rec.image_id] = split
            pos += n
    return assignment


def merge_with_precedence(
    human_set: list[Annotation], pseudo_set: list[Annotation]
) -> list[Annotation]:
    """Union of the two sets where human annotations win per image.

    Every image that appears in the human set drops all of its pseudo
    annotations; disjoint images pass through untouched. Idempotent and
    order-independent in the pseudo argument.
    """
    human_images = {a.image_id for a in human_set}
    merged = list(human_set)
    merged.extend(a for a in pseudo_set if a.image_id not in human_images)
    return merged
