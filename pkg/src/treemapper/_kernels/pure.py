"""Pure numpy implementations of the hot kernels.

Fallback lane used when the compiled extension is unavailable (or disabled
via TREEMAPPER_PURE_KERNELS=1). Each function mirrors the corresponding
routine in _ext.pyx operation-for-operation so both lanes agree to within
floating-point rounding of the transcendental calls.
"""

from __future__ import annotations

import numpy as np

from .tm_constants import ALPHA, A_BAR, BETA, ECC

BACKEND_NAME = "pure"


def tm_forward(lat_rad: np.ndarray, dlon_rad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unscaled transverse Mercator forward mapping.

    `dlon_rad` is longitude relative to the central meridian. Returns the
    raw (x, y) in meters; UTM scale factor and false offsets are applied by
    the caller.
    """
    lat = np.asarray(lat_rad, dtype=np.float64)
    lam = np.asarray(dlon_rad, dtype=np.float64)

    t = np.tan(lat)
    sigma = np.sinh(ECC * np.arctanh(ECC * t / np.sqrt(1.0 + t * t)))
    tp = t * np.sqrt(1.0 + sigma * sigma) - sigma * np.sqrt(1.0 + t * t)
    cos_lam = np.cos(lam)
    xi_p = np.arctan2(tp, cos_lam)
    eta_p = np.arcsinh(np.sin(lam) / np.sqrt(tp * tp + cos_lam * cos_lam))

    xi = xi_p.copy()
    eta = eta_p.copy()
    for j in range(1, 7):
        a = ALPHA[j - 1]
        xi += a * np.sin(2.0 * j * xi_p) * np.cosh(2.0 * j * eta_p)
        eta += a * np.cos(2.0 * j * xi_p) * np.sinh(2.0 * j * eta_p)
    return A_BAR * eta, A_BAR * xi


def tm_inverse(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of tm_forward: raw TM (x, y) to (lat_rad, dlon_rad)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)

    xi = y / A_BAR
    eta = x / A_BAR
    xi_p = xi.copy()
    eta_p = eta.copy()
    for j in range(1, 7):
        b = BETA[j - 1]
        xi_p -= b * np.sin(2.0 * j * xi) * np.cosh(2.0 * j * eta)
        eta_p -= b * np.cos(2.0 * j * xi) * np.sinh(2.0 * j * eta)

    sinh_eta = np.sinh(eta_p)
    cos_xi = np.cos(xi_p)
    tp = np.sin(xi_p) / np.sqrt(sinh_eta * sinh_eta + cos_xi * cos_xi)

    # Newton iteration recovering tan(lat) from the conformal tangent.
    t = tp.copy()
    e2 = ECC * ECC
    for _ in range(6):
        sigma = np.sinh(ECC * np.arctanh(ECC * t / np.sqrt(1.0 + t * t)))
        f_t = t * np.sqrt(1.0 + sigma * sigma) - sigma * np.sqrt(1.0 + t * t) - tp
        df = (
            (np.sqrt((1.0 + sigma * sigma) * (1.0 + t * t)) - sigma * t)
            * (1.0 - e2)
            * np.sqrt(1.0 + t * t)
            / (1.0 + (1.0 - e2) * t * t)
        )
        t = t - f_t / df

    lat = np.arctan(t)
    dlon = np.arctan2(sinh_eta, cos_xi)
    return lat, dlon


def min_dist_to_segments(
    px: np.ndarray,
    py: np.ndarray,
    ax: np.ndarray,
    ay: np.ndarray,
    bx: np.ndarray,
    by: np.ndarray,
) -> np.ndarray:
    """Minimum Euclidean distance from each point to any segment (a, b)."""
    px = np.asarray(px, dtype=np.float64)[:, None]
    py = np.asarray(py, dtype=np.float64)[:, None]
    ax = np.asarray(ax, dtype=np.float64)[None, :]
    ay = np.asarray(ay, dtype=np.float64)[None, :]
    bx = np.asarray(bx, dtype=np.float64)[None, :]
    by = np.asarray(by, dtype=np.float64)[None, :]

    vx = bx - ax
    vy = by - ay
    wx = px - ax
    wy = py - ay
    seg_len2 = vx * vx + vy * vy
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(seg_len2 > 0.0, (wx * vx + wy * vy) / seg_len2, 0.0)
    t = np.clip(t, 0.0, 1.0)
    dx = wx - t * vx
    dy = wy - t * vy
    d2 = dx * dx + dy * dy
    return np.sqrt(d2.min(axis=1))


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU for boxes in (x, y, w, h) layout; shape (len(a), len(b))."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        return np.zeros((a.shape[0], b.shape[0]))

    ax1, ay1 = a[:, 0, None], a[:, 1, None]
    ax2, ay2 = ax1 + a[:, 2, None], ay1 + a[:, 3, None]
    bx1, by1 = b[None, :, 0], b[None, :, 1]
    bx2, by2 = bx1 + b[None, :, 2], by1 + b[None, :, 3]

    iw = np.minimum(ax2, bx2) - np.maximum(ax1, bx1)
    ih = np.minimum(ay2, by2) - np.maximum(ay1, by1)
    inter = np.where((iw > 0.0) & (ih > 0.0), iw * ih, 0.0)
    union = a[:, 2, None] * a[:, 3, None] + b[None, :, 2] * b[None, :, 3] - inter
    return inter / union


def greedy_assign(iou: np.ndarray, order: np.ndarray, threshold: float) -> np.ndarray:
    """One-to-one greedy matching over a precomputed IoU matrix.

    Predictions are visited in `order`; each takes the unmatched truth with
    the highest IoU >= threshold (ties to the lower truth index). Returns,
    per prediction row, the matched truth index or -1.
    """
    n_pred, n_truth = iou.shape
    assigned = np.full(n_pred, -1, dtype=np.int64)
    taken = np.zeros(n_truth, dtype=bool)
    for p in order:
        best_j = -1
        best_iou = 0.0
        row = iou[p]
        for j in range(n_truth):
            if taken[j]:
                continue
            v = row[j]
            if v >= threshold and v > best_iou:
                best_iou = v
                best_j = j
        if best_j >= 0:
            assigned[p] = best_j
            taken[best_j] = True
    return assigned
