"""Independent reference implementations used only to cross-check results.

These deliberately share no code with the package: the projection oracle
is a different textbook series, distances are scalar brute force, and the
matching oracle solves the assignment problem exactly.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import linear_sum_assignment

WGS84_A = 6378137.0
WGS84_B = 6356752.314245179
K0 = 0.9996


def _arc_length_of_meridian(phi: float) -> float:
    n = (WGS84_A - WGS84_B) / (WGS84_A + WGS84_B)
    alpha = ((WGS84_A + WGS84_B) / 2.0) * (1.0 + n**2 / 4.0 + n**4 / 64.0)
    beta = -3.0 * n / 2.0 + 9.0 * n**3 / 16.0 - 3.0 * n**5 / 32.0
    gamma = 15.0 * n**2 / 16.0 - 15.0 * n**4 / 32.0
    delta = -35.0 * n**3 / 48.0 + 105.0 * n**5 / 256.0
    epsilon = 315.0 * n**4 / 512.0
    return alpha * (
        phi
        + beta * math.sin(2.0 * phi)
        + gamma * math.sin(4.0 * phi)
        + delta * math.sin(6.0 * phi)
        + epsilon * math.sin(8.0 * phi)
    )


def textbook_utm(lat_deg: float, lon_deg: float) -> tuple[float, float, int]:
    """Eighth-order series in the longitude offset (GPS textbook form)."""
    zone = int((lon_deg + 180.0) // 6) + 1
    lon0 = math.radians(zone * 6.0 - 183.0)
    phi = math.radians(lat_deg)
    lam = math.radians(lon_deg)

    ep2 = (WGS84_A**2 - WGS84_B**2) / WGS84_B**2
    nu2 = ep2 * math.cos(phi) ** 2
    big_n = WGS84_A**2 / (WGS84_B * math.sqrt(1 + nu2))
    t = math.tan(phi)
    t2 = t * t
    el = lam - lon0

    l3 = 1.0 - t2 + nu2
    l4 = 5.0 - t2 + 9 * nu2 + 4.0 * nu2 * nu2
    l5 = 5.0 - 18.0 * t2 + t2 * t2 + 14.0 * nu2 - 58.0 * t2 * nu2
    l6 = 61.0 - 58.0 * t2 + t2 * t2 + 270.0 * nu2 - 330.0 * t2 * nu2
    l7 = 61.0 - 479.0 * t2 + 179.0 * t2 * t2 - t2 * t2 * t2
    l8 = 1385.0 - 3111.0 * t2 + 543.0 * t2 * t2 - t2 * t2 * t2

    c = math.cos(phi)
    x = (
        big_n * c * el
        + big_n / 6.0 * c**3 * l3 * el**3
        + big_n / 120.0 * c**5 * l5 * el**5
        + big_n / 5040.0 * c**7 * l7 * el**7
    )
    y = (
        _arc_length_of_meridian(phi)
        + t / 2.0 * big_n * c**2 * el**2
        + t / 24.0 * big_n * c**4 * l4 * el**4
        + t / 720.0 * big_n * c**6 * l6 * el**6
        + t / 40320.0 * big_n * c**8 * l8 * el**8
    )
    easting = x * K0 + 500000.0
    northing = y * K0
    if northing < 0:
        northing += 10000000.0
    return easting, northing, zone


def point_segment_distance(
    px: float, py: float, ax: float, ay: float, bx: float, by: float
) -> float:
    """Scalar point-to-segment distance, written independently."""
    vx, vy = bx - ax, by - ay
    wx, wy = px - ax, py - ay
    seg_len2 = vx * vx + vy * vy
    if seg_len2 == 0.0:
        return math.hypot(wx, wy)
    t = (wx * vx + wy * vy) / seg_len2
    t = max(0.0, min(1.0, t))
    return math.hypot(px - (ax + t * vx), py - (ay + t * vy))


def brute_force_in_buffer(
    point_xy: tuple[float, float],
    segments: list[tuple[float, float, float, float]],
    buffer_m: float,
) -> bool:
    """Exhaustive scan over every segment."""
    px, py = point_xy
    return any(
        point_segment_distance(px, py, ax, ay, bx, by) <= buffer_m
        for ax, ay, bx, by in segments
    )


def iou_xywh(a: tuple[float, float, float, float], b: tuple[float, float, float, float]) -> float:
    ax1, ay1, aw, ah = a
    bx1, by1, bw, bh = b
    ix = min(ax1 + aw, bx1 + bw) - max(ax1, bx1)
    iy = min(ay1 + ah, by1 + bh) - max(ay1, by1)
    inter = ix * iy if ix > 0 and iy > 0 else 0.0
    return inter / (aw * ah + bw * bh - inter)


def optimal_assignment_counts(
    pred_boxes: list[tuple[float, float, float, float]],
    truth_boxes: list[tuple[float, float, float, float]],
    iou_threshold: float,
) -> tuple[int, int, int]:
    """(tp, fp, fn) of the maximum-cardinality feasible assignment."""
    n, m = len(pred_boxes), len(truth_boxes)
    if n == 0 or m == 0:
        return 0, n, m
    feasible = np.zeros((n, m))
    for i, p in enumerate(pred_boxes):
        for j, t in enumerate(truth_boxes):
            if iou_xywh(p, t) >= iou_threshold:
                feasible[i, j] = 1.0
    rows, cols = linear_sum_assignment(-feasible)
    tp = int(feasible[rows, cols].sum())
    return tp, n - tp, m - tp
