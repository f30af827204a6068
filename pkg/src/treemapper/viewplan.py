"""Satellite-to-ground handoff: road-buffer filtering and view synthesis.

Trees detected from satellite imagery are only worth a street-view request
if a camera can actually see them, so candidates are kept only within a
buffer of the road network, paired with the nearest panorama inside a
distance cutoff, and turned into one camera request headed straight at the
tree. Everything here is a pure function; planning parallelizes per tree
and outputs are sorted by tree id.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from ._kernels import min_dist_to_segments
from .errors import GeoDomainError, PanoramaSourceError
from .geo import Bearing, GeoPoint, UtmPoint, bearing, planar_distance, project_batch

DEFAULT_BUFFER_M = 20.0
DEFAULT_MAX_PAIR_DIST_M = 20.0


@dataclass(frozen=True)
class TreeCandidate:
    id: str
    location: GeoPoint
    source_confidence: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.source_confidence <= 1.0:
            raise ValueError(f"source_confidence {self.source_confidence} outside [0, 1]")


@dataclass(frozen=True)
class RoadNetwork:
    polylines: tuple[tuple[GeoPoint, ...], ...]

    def __post_init__(self) -> None:
        for line in self.polylines:
            if len(line) < 2:
                raise ValueError("road polyline needs at least 2 vertices")

    def segments(self) -> list[tuple[GeoPoint, GeoPoint]]:
        segs = []
        for line in self.polylines:
            segs.extend(zip(line[:-1], line[1:]))
        return segs


@dataclass(frozen=True)
class PanoramaMeta:
    pano_id: str
    location: GeoPoint
    capture_date: str | None = None


@dataclass(frozen=True)
class ViewConfig:
    pitch: float = 0.0
    fov: float = 90.0
    image_width: int = 640
    image_height: int = 640

    def __post_init__(self) -> None:
        if not 0.0 < self.fov <= 120.0:
            raise ValueError(f"fov {self.fov} outside (0, 120]")


@dataclass(frozen=True)
class ViewRequest:
    pano_id: str
    heading: Bearing
    target_tree_id: str
    pitch: float = 0.0
    fov: float = 90.0
    image_width: int = 640
    image_height: int = 640

    def __post_init__(self) -> None:
        if not 0.0 < self.fov <= 120.0:
            raise ValueError(f"fov {self.fov} outside (0, 120]")

    def to_dict(self) -> dict:
        return {
            "pano_id": self.pano_id,
            "heading": self.heading.degrees,
            "pitch": self.pitch,
            "fov": self.fov,
            "image_width": self.image_width,
            "image_height": self.image_height,
            "target_tree_id": self.target_tree_id,
        }


@dataclass(frozen=True)
class SkipEntry:
    tree_id: str
    reason: str  # outside_buffer | no_panorama_in_range
    detail: str = ""


@dataclass
class ViewPlan:
    requests: list[ViewRequest]
    skips: list[SkipEntry] = field(default_factory=list)


class PanoramaSource(Protocol):
    """Provider of panorama metadata near a location (thread-safe)."""

    def candidates(self, location: GeoPoint, radius_m: float) -> list[PanoramaMeta]: ...


class FilePanoramaSource:
    """Panorama metadata loaded from a JSON array fixture."""

    def __init__(self, panoramas: list[PanoramaMeta]) -> None:
        self._panoramas = list(panoramas)

    @classmethod
    def from_json(cls, path: str | Path) -> "FilePanoramaSource":
        records = json.loads(Path(path).read_text())
        return cls(
            [
                PanoramaMeta(
                    pano_id=rec["pano_id"],
                    location=GeoPoint(rec["lat"], rec["lon"]),
                    capture_date=rec.get("date"),
                )
                for rec in records
            ]
        )

    def candidates(self, location: GeoPoint, radius_m: float) -> list[PanoramaMeta]:
        if not self._panoramas:
            return []
        pts = [location] + [p.location for p in self._panoramas]
        e, n, _, _ = project_batch(pts)
        d = np.sqrt((e[1:] - e[0]) ** 2 + (n[1:] - n[0]) ** 2)
        return [p for p, dist in zip(self._panoramas, d) if dist <= radius_m]


def buffer_filter(
    trees: list[TreeCandidate], roads: RoadNetwork, buffer_m: float = DEFAULT_BUFFER_M
) -> list[TreeCandidate]:
    """Keep the trees within buffer_m of any road segment (order preserved)."""
    if buffer_m <= 0:
        raise ValueError(f"buffer_m {buffer_m} must be positive")
    if not roads.polylines:
        raise GeoDomainError("empty road network: buffer filter undefined")
    if not trees:
        return []

    segments = roads.segments()
    points = [t.location for t in trees]
    points += [a for a, _ in segments]
    points += [b for _, b in segments]
    e, n, _, _ = project_batch(points)

    n_trees = len(trees)
    n_segs = len(segments)
    dists = min_dist_to_segments(
        e[:n_trees],
        n[:n_trees],
        e[n_trees : n_trees + n_segs],
        n[n_trees : n_trees + n_segs],
        e[n_trees + n_segs :],
        n[n_trees + n_segs :],
    )
    return [t for t, d in zip(trees, dists) if d <= buffer_m]


def pair_panorama(
    tree: TreeCandidate,
    panoramas: list[PanoramaMeta],
    max_dist_m: float = DEFAULT_MAX_PAIR_DIST_M,
) -> tuple[PanoramaMeta, float] | None:
    """Nearest panorama by planar distance, or None beyond the cutoff."""
    if not panoramas:
        raise ValueError("pair_panorama requires a nonempty panorama list")
    pts = [tree.location] + [p.location for p in panoramas]
    e, n, _, _ = project_batch(pts)
    d = np.sqrt((e[1:] - e[0]) ** 2 + (n[1:] - n[0]) ** 2)
    best = int(np.argmin(d))
    if d[best] > max_dist_m:
        return None
    return panoramas[best], float(d[best])


def make_view_request(
    tree: TreeCandidate, pano: PanoramaMeta, view: ViewConfig | None = None
) -> ViewRequest:
    """Synthesize the camera request that faces the tree from the panorama."""
    view = view or ViewConfig()
    pts = [pano.location, tree.location]
    e, n, zone, hemisphere = project_batch(pts)
    pano_utm = UtmPoint(float(e[0]), float(n[0]), zone, hemisphere)
    tree_utm = UtmPoint(float(e[1]), float(n[1]), zone, hemisphere)
    heading = bearing(pano_utm, tree_utm)
    return ViewRequest(
        pano_id=pano.pano_id,
        heading=heading,
        target_tree_id=tree.id,
        pitch=view.pitch,
        fov=view.fov,
        image_width=view.image_width,
        image_height=view.image_height,
    )


@dataclass(frozen=True)
class PlanConfig:
    buffer_m: float = DEFAULT_BUFFER_M
    max_dist_m: float = DEFAULT_MAX_PAIR_DIST_M
    view: ViewConfig = field(default_factory=ViewConfig)


def plan_views(
    trees: list[TreeCandidate],
    roads: RoadNetwork,
    panorama_source: PanoramaSource,
    config: PlanConfig | None = None,
) -> ViewPlan:
    """Filter, pair and synthesize one view request per retained tree.

    Every input tree lands either in the request list or in the skip
    report, so request count + skip count always equals the input count.
    """
    config = config or PlanConfig()
    retained = buffer_filter(trees, roads, config.buffer_m)
    retained_ids = {t.id for t in retained}

    requests: list[ViewRequest] = []
    skips: list[SkipEntry] = [
        SkipEntry(t.id, "outside_buffer", f"farther than {config.buffer_m} m from any road")
        for t in trees
        if t.id not in retained_ids
    ]
    for tree in retained:
        try:
            panos = panorama_source.candidates(tree.location, config.max_dist_m)
        except Exception as exc:
            raise PanoramaSourceError(f"panorama lookup failed for tree {tree.id}: {exc}") from exc
        paired = pair_panorama(tree, panos, config.max_dist_m) if panos else None
        if paired is None:
            skips.append(
                SkipEntry(
                    tree.id,
                    "no_panorama_in_range",
                    f"no panorama within {config.max_dist_m} m",
                )
            )
            continue
        pano, _ = paired
        requests.append(make_view_request(tree, pano, config.view))

    requests.sort(key=lambda r: r.target_tree_id)
    skips.sort(key=lambda s: s.tree_id)
    return ViewPlan(requests, skips)


# ---------------------------------------------------------------------------
# file formats


def load_roads_geojson(path: str | Path) -> RoadNetwork:
    """Read LineString / MultiLineString geometry from a GeoJSON file."""
    data = json.loads(Path(path).read_text())
    polylines: list[tuple[GeoPoint, ...]] = []

    def consume_geometry(geom: dict) -> None:
        gtype = geom.get("type")
        if gtype == "LineString":
            polylines.append(tuple(GeoPoint(lat, lon) for lon, lat in geom["coordinates"]))
        elif gtype == "MultiLineString":
            for line in geom["coordinates"]:
                polylines.append(tuple(GeoPoint(lat, lon) for lon, lat in line))
        else:
            raise ValueError(f"unsupported geometry type {gtype!r} in road network")

    if data.get("type") == "FeatureCollection":
        for feature in data["features"]:
            consume_geometry(feature["geometry"])
    elif data.get("type") == "Feature":
        consume_geometry(data["geometry"])
    else:
        consume_geometry(data)
    return RoadNetwork(tuple(polylines))


def load_trees_json(path: str | Path) -> list[TreeCandidate]:
    records = json.loads(Path(path).read_text())
    return [
        TreeCandidate(
            id=str(rec["id"]),
            location=GeoPoint(rec["lat"], rec["lon"]),
            source_confidence=rec.get("confidence", 1.0),
        )
        for rec in records
    ]


def write_plan(plan: ViewPlan, out_dir: str | Path) -> None:
    """Write plan.jsonl (one request per line) and skip_report.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "plan.jsonl", "w") as fh:
        for req in plan.requests:
            fh.write(json.dumps(req.to_dict()) + "\n")
    report = {
        "planned": len(plan.requests),
        "skipped_count": len(plan.skips),
        "skipped": [
            {"tree_id": s.tree_id, "reason": s.reason, "detail": s.detail} for s in plan.skips
        ],
    }
    (out / "skip_report.json").write_text(json.dumps(report, indent=2) + "\n")
