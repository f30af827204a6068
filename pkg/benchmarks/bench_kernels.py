"""Compare the compiled kernels against the numpy fallback.

Run:  python benchmarks/bench_kernels.py [--quick]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from treemapper._kernels import pure

try:
    from treemapper._kernels import _ext as ext
except ImportError:
    ext = None


def timeit(fn, *args, repeats: int = 5) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = parser.parse_args()
    scale = 0.1 if args.quick else 1.0

    rng = np.random.default_rng(0)
    cases = []

    n_pts = int(200_000 * scale)
    lat = np.radians(rng.uniform(-84, 84, n_pts))
    dlon = np.radians(rng.uniform(-3, 3, n_pts))
    cases.append((f"tm_forward ({n_pts:,} pts)", "tm_forward", (lat, dlon)))

    x, y = pure.tm_forward(lat, dlon)
    cases.append((f"tm_inverse ({n_pts:,} pts)", "tm_inverse", (x, y)))

    n_trees, n_segs = int(2_000 * scale), int(5_000 * scale)
    seg_args = (
        rng.uniform(0, 1e5, n_trees), rng.uniform(0, 1e5, n_trees),
        rng.uniform(0, 1e5, n_segs), rng.uniform(0, 1e5, n_segs),
        rng.uniform(0, 1e5, n_segs), rng.uniform(0, 1e5, n_segs),
    )
    cases.append(
        (f"min_dist_to_segments ({n_trees:,} x {n_segs:,})", "min_dist_to_segments", seg_args)
    )

    n_boxes = int(600 * scale) or 10
    boxes_a = np.column_stack(
        [rng.uniform(0, 5000, n_boxes), rng.uniform(0, 5000, n_boxes),
         rng.uniform(20, 120, n_boxes), rng.uniform(20, 120, n_boxes)]
    )
    boxes_b = boxes_a + rng.normal(0, 4, boxes_a.shape)
    cases.append((f"iou_matrix ({n_boxes} x {n_boxes})", "iou_matrix", (boxes_a, boxes_b)))

    iou = pure.iou_matrix(boxes_a, boxes_b)
    order = rng.permutation(n_boxes).astype(np.int64)
    cases.append((f"greedy_assign ({n_boxes} preds)", "greedy_assign", (iou, order, 0.5)))

    print(f"{'kernel':45s} {'pure':>12s} {'ext':>12s} {'speedup':>9s}")
    for label, name, call_args in cases:
        t_pure = timeit(getattr(pure, name), *call_args)
        if ext is None:
            print(f"{label:45s} {t_pure * 1e3:10.2f}ms {'-':>12s} {'-':>9s}")
            continue
        t_ext = timeit(getattr(ext, name), *call_args)
        print(
            f"{label:45s} {t_pure * 1e3:10.2f}ms {t_ext * 1e3:10.2f}ms "
            f"{t_pure / t_ext:8.1f}x"
        )
    if ext is None:
        print("\ncompiled extension not available; showing fallback only")


if __name__ == "__main__":
    main()
