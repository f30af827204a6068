"""Acceptance suite: every exit criterion, one test each, at its stated
tolerance. Each test prints a PASS line on success (run with -s to see them)."""

import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from oracles import brute_force_in_buffer, optimal_assignment_counts, textbook_utm
from treemapper.dataset import ImageRecord, Split, balanced_split
from treemapper.detector import SyntheticDetector
from treemapper.errors import DetectorError
from treemapper.evaluation import match, metrics_from_counts
from treemapper.geo import GeoPoint, UtmPoint, bearing, from_utm, planar_distance, to_utm
from treemapper.loop import run_campaign
from treemapper.sim import (
    SimulatedAnnotator,
    build_world,
    compare_strategies,
    default_benchmark,
    make_store,
)

# Frozen benchmark counts and the metric values they must reproduce.
REFERENCE_COUNTS = {
    "initial": (2836, 469, 955),
    "ssl_final": (2538, 369, 1253),
    "al_final": (3295, 316, 496),
    "hybrid_final": (3327, 303, 464),
}
REFERENCE_METRICS = {
    "initial": {"precision": 0.858, "recall": 0.748, "f1": 0.80},
    "ssl_final": {"recall": 0.67},
    "al_final": {"precision": 0.91, "recall": 0.87, "f1": 0.89},
    "hybrid_final": {"precision": 0.92, "recall": 0.88, "f1": 0.90},
}
REFERENCE_RELATIVE_CHANGES = {
    # (tp%, fn%, fp%) relative to the initial round
    "ssl_final": (-10.5, +31.2, -21.3),
    "al_final": (+16.2, -48.1, -32.6),
    "hybrid_final": (+17.3, -51.4, -35.4),
}


def test_metric_oracle_reproduction():
    start = time.perf_counter()
    for key, (tp, fp, fn) in REFERENCE_COUNTS.items():
        m = metrics_from_counts(tp, fp, fn)
        for name, expected in REFERENCE_METRICS[key].items():
            actual = getattr(m, name)
            assert abs(actual - expected) <= 0.005, (key, name, actual, expected)
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    print(f"\nPASS metric-oracle reproduction ({elapsed * 1000:.1f} ms)")


def test_relative_change_reproduction():
    tp0, fp0, fn0 = REFERENCE_COUNTS["initial"]
    for key, (d_tp, d_fn, d_fp) in REFERENCE_RELATIVE_CHANGES.items():
        tp, fp, fn = REFERENCE_COUNTS[key]
        assert abs(100.0 * (tp - tp0) / tp0 - d_tp) <= 0.1, key
        assert abs(100.0 * (fn - fn0) / fn0 - d_fn) <= 0.1, key
        assert abs(100.0 * (fp - fp0) / fp0 - d_fp) <= 0.1, key
    print("PASS relative-change reproduction")


def test_geometry_invariants_quantified():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    n = 10_000

    def pt(e, nn):
        return UtmPoint(float(e), float(nn), 11)

    e = rng.uniform(150000, 850000, (n, 3))
    no = rng.uniform(0, 9000000, (n, 3))
    shift_e = rng.uniform(-10000, 10000, n)
    shift_n = rng.uniform(-10000, 10000, n)

    for i in range(n):
        p = pt(e[i, 0], no[i, 0])
        q = pt(e[i, 1], no[i, 1])
        r = pt(e[i, 2], no[i, 2])

        d_pq = planar_distance(p, q)
        assert d_pq >= 0.0
        assert d_pq == planar_distance(q, p)
        assert planar_distance(p, r) <= d_pq + planar_distance(q, r) + 1e-6

        fwd = bearing(p, q).degrees
        back = bearing(q, p).degrees
        assert abs((fwd + 180.0) % 360.0 - back) % 360.0 <= 1e-9

        de, dn = shift_e[i], shift_n[i]
        if 150000 <= e[i, 0] + de <= 850000 and 150000 <= e[i, 1] + de <= 850000:
            if 0 <= no[i, 0] + dn <= 9000000 and 0 <= no[i, 1] + dn <= 9000000:
                p2 = pt(e[i, 0] + de, no[i, 0] + dn)
                q2 = pt(e[i, 1] + de, no[i, 1] + dn)
                assert abs(planar_distance(p2, q2) - d_pq) <= 1e-6
                assert abs(bearing(p2, q2).degrees - fwd) <= 1e-6

    rng2 = np.random.default_rng(77)
    for _ in range(1000):
        p = GeoPoint(float(rng2.uniform(-84, 84)), float(rng2.uniform(-180, 179.999)))
        back = from_utm(to_utm(p))
        assert abs(back.lat - p.lat) <= 1e-6
        assert abs(back.lon - p.lon) <= 1e-6

    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    print(f"PASS geometry invariants over 10^4 pairs + round trip ({elapsed:.2f} s)")


def test_view_planning_cutoff_and_buffer_oracle():
    from treemapper.viewplan import (
        FilePanoramaSource,
        PanoramaMeta,
        RoadNetwork,
        TreeCandidate,
        buffer_filter,
        plan_views,
    )

    anchor_e, anchor_n, zone = 400000.0, 3760000.0, 11

    def at(de, dn):
        return from_utm(UtmPoint(anchor_e + de, anchor_n + dn, zone))

    road_lines_utm = [
        [(-1000.0, 0.0), (0.0, 0.0), (1000.0, 30.0)],
        [(-800.0, 150.0), (900.0, 120.0)],
        [(0.0, -200.0), (0.0, 300.0)],
    ]
    roads = RoadNetwork(
        tuple(tuple(at(e_, n_) for e_, n_ in line) for line in road_lines_utm)
    )
    segments = [
        (ax, ay, bx, by)
        for line in road_lines_utm
        for (ax, ay), (bx, by) in zip(line[:-1], line[1:])
    ]

    rng = np.random.default_rng(31)
    offsets = [(float(rng.uniform(-1100, 1100)), float(rng.uniform(-300, 400)))
               for _ in range(1000)]
    trees = [TreeCandidate(f"t{i:04d}", at(de, dn)) for i, (de, dn) in enumerate(offsets)]

    kept = buffer_filter(trees, roads, buffer_m=20.0)
    kept_ids = [t.id for t in kept]
    oracle_ids = [
        t.id
        for t, (de, dn) in zip(trees, offsets)
        if brute_force_in_buffer((de, dn), segments, 20.0)
    ]
    assert kept_ids == oracle_ids  # exact agreement, order preserved

    pano_offsets = [(float(-1000 + 25 * k), float(rng.uniform(-10, 10))) for k in range(81)]
    panos = [PanoramaMeta(f"p{k:03d}", at(de, dn)) for k, (de, dn) in enumerate(pano_offsets)]
    plan = plan_views(trees, roads, FilePanoramaSource(panos))
    assert len(plan.requests) + len(plan.skips) == len(trees)

    pano_by_id = {p.pano_id: p for p in panos}
    tree_by_id = {t.id: t for t in trees}
    for req in plan.requests:
        d = planar_distance(
            to_utm(pano_by_id[req.pano_id].location, zone=zone),
            to_utm(tree_by_id[req.target_tree_id].location, zone=zone),
        )
        assert d <= 20.0 + 1e-6, (req.target_tree_id, d)
    print(
        f"PASS view-planning cutoff on 1000 trees "
        f"({len(plan.requests)} planned, {len(plan.skips)} skipped)"
    )


def test_matching_matches_exhaustive_assignment_oracle():
    from treemapper.dataset import BBox
    from treemapper.detector import Detection

    rng = np.random.default_rng(63)
    for case in range(50):
        n_truth = int(rng.integers(1, 6))
        truths, preds = [], []
        for j in range(n_truth):
            cx = 300.0 * j
            truths.append(BBox(cx, 0.0, 50, 50))
            for _ in range(int(rng.integers(0, 3))):
                preds.append(
                    Detection(
                        "img",
                        BBox(cx + float(rng.uniform(-10, 10)),
                             float(rng.uniform(-10, 10)), 50, 50),
                        float(rng.uniform(0.05, 1.0)),
                    )
                )
        for k in range(int(rng.integers(0, 4))):
            preds.append(
                Detection("img", BBox(9000.0 + 200 * k, 0.0, 50, 50),
                          float(rng.uniform(0.05, 1.0)))
            )
        preds = preds[:10]

        result = match(preds, truths, 0.5)
        oracle = optimal_assignment_counts(
            [p.bbox.as_list() for p in preds], [t.as_list() for t in truths], 0.5
        )
        assert (result.tp, result.fp, result.fn) == oracle, f"case {case}"
    print("PASS matching vs exhaustive assignment oracle (50 instances)")


def test_learning_dynamics_on_default_benchmark():
    start = time.perf_counter()
    spec, config = default_benchmark()
    world = build_world(spec)
    results = compare_strategies(world, config)
    ssl = results["ssl"]
    al = results["al"]
    hybrid = results["hybrid"]
    assert len(ssl) >= 5 and len(al) >= 5 and len(hybrid) >= 5

    # (a) pseudo-label self-training recall never recovers after round 2
    for a, b in zip(ssl[1:], ssl[2:]):
        assert b.recall <= a.recall + 1e-12, "ssl recall increased"
    # (b) review-driven recall never degrades with a perfect annotator
    for a, b in zip(al, al[1:]):
        assert b.recall >= a.recall - 1e-12, "al recall decreased"
    # (c) final true-positive ordering
    assert hybrid[-1].tp >= al[-1].tp >= ssl[-1].tp
    # (d) pseudo-label volume declines after its peak round
    pseudo = [r.pseudo_added for r in ssl]
    peak = pseudo.index(max(pseudo))
    for a, b in zip(pseudo[peak:], pseudo[peak + 1:]):
        assert b <= a, f"ssl pseudo_added rose after peak: {pseudo}"
    # (e) hybrid needs no more human labels than pure review, every round
    for h, a in zip(hybrid, al):
        assert h.human_added <= a.human_added, "hybrid used more human labels"

    elapsed = time.perf_counter() - start
    assert elapsed < 120.0
    print(f"PASS learning dynamics (a)-(e) on default benchmark ({elapsed:.1f} s)")


def test_stopping_rule_on_constructed_plateau():
    from test_loop import plateau_fixture
    from treemapper.loop import StrategyConfig

    store, det = plateau_fixture()
    config = StrategyConfig(
        "ssl", pool_sample_size=10, max_rounds=10, stop_delta_f1=0.005, seed=0
    )
    reports = run_campaign(store, det, config)
    assert len(reports) == 5, [r.f1 for r in reports]
    assert reports[-1].stopped
    assert abs(reports[4].f1 - reports[3].f1) < 0.005
    assert all(
        abs(b.f1 - a.f1) >= 0.005 for a, b in zip(reports[:3], reports[1:4])
    )
    print("PASS stopping rule: plateau at round 4 halts campaign at round 5")


def test_split_balance_on_500_image_fixture():
    rng = np.random.default_rng(4096)
    counts = [int(c) for c in rng.integers(0, 8, 500)]
    images = [
        (ImageRecord(f"img_{k:03d}", f"file:///{k}.jpg"), c)
        for k, c in enumerate(counts)
    ]
    ratios = (0.7, 0.15, 0.15)
    assignment = balanced_split(images, ratios, seed=8)
    assert len(assignment) == 500

    buckets: dict[int, dict[Split, int]] = {}
    sizes: dict[int, int] = {}
    for (rec, c) in images:
        buckets.setdefault(c, {s: 0 for s in (Split.TRAIN, Split.VAL, Split.TEST)})
        buckets[c][assignment[rec.image_id]] += 1
        sizes[c] = sizes.get(c, 0) + 1
    for c in buckets:
        for ratio, split in zip(ratios, (Split.TRAIN, Split.VAL, Split.TEST)):
            quota = ratio * sizes[c]
            got = buckets[c][split]
            assert abs(got - quota) < 1.0 + 1e-9, (c, split.value, got, quota)
    print("PASS split balance within one image of quota for every bucket")


class _CrashMidRound:
    """Delegates to a real detector, raising partway through one round."""

    def __init__(self, inner, fail_on_call: int):
        self.inner = inner
        self.calls = 0
        self.fail_on = fail_on_call

    def detect(self, image_ids):
        self.calls += 1
        if self.calls == self.fail_on:
            raise DetectorError("injected mid-round crash")
        return self.inner.detect(image_ids)

    def retrain(self, annotations):
        self.inner.retrain(annotations)

    def state_dict(self):
        return self.inner.state_dict()

    def load_state_dict(self, state):
        self.inner.load_state_dict(state)


def test_round_atomicity_and_resume_byte_identical(tmp_path):
    spec, config = default_benchmark()
    config = replace(config, max_rounds=4)
    world = build_world(spec)

    straight_dir = tmp_path / "straight"
    store_a = make_store(world)
    run_campaign(
        store_a, SyntheticDetector(world), config,
        annotator=SimulatedAnnotator(world), checkpoint_dir=straight_dir,
    )

    crash_dir = tmp_path / "crashed"
    store_b = make_store(world)
    # each round issues two detect calls (pool, then test): call 6 dies
    # in the middle of round 3
    flaky = _CrashMidRound(SyntheticDetector(world), fail_on_call=6)
    with pytest.raises(DetectorError):
        run_campaign(
            store_b, flaky, config,
            annotator=SimulatedAnnotator(world), checkpoint_dir=crash_dir,
        )
    assert store_b.last_round == 2  # aborted round left no trace

    store_c = make_store(world)
    reports = run_campaign(
        store_c, SyntheticDetector(world), config,
        annotator=SimulatedAnnotator(world), checkpoint_dir=crash_dir, resume=True,
    )
    assert store_c.canonical_bytes() == store_a.canonical_bytes()
    assert store_c.store_hash() == store_a.store_hash()
    assert len(reports) == 4

    final_a = json.loads((straight_dir / "round_004.json").read_text())
    final_c = json.loads((crash_dir / "round_004.json").read_text())
    assert final_a["store_hash"] == final_c["store_hash"]
    assert final_a["reports"] == final_c["reports"]
    print("PASS round atomicity: crash + resume is byte-identical to a clean run")
