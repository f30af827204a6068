# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: transverse Mercator series, segment distances, IoU.

Mirrors treemapper._kernels.pure operation-for-operation; see that module
for the reference semantics.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport (asinh, atan, atan2, atanh, cos, cosh, sin, sinh,
                        sqrt, tan)

from .tm_constants import ALPHA as _PY_ALPHA
from .tm_constants import A_BAR as _PY_A_BAR
from .tm_constants import BETA as _PY_BETA
from .tm_constants import ECC as _PY_ECC

cnp.import_array()

BACKEND_NAME = "ext"

cdef double _ALPHA[6]
cdef double _BETA[6]
cdef double _A_BAR = _PY_A_BAR
cdef double _ECC = _PY_ECC

for _i in range(6):
    _ALPHA[_i] = _PY_ALPHA[_i]
    _BETA[_i] = _PY_BETA[_i]


def tm_forward(lat_rad, dlon_rad):
    cdef double[::1] lat = np.ascontiguousarray(lat_rad, dtype=np.float64)
    cdef double[::1] lam = np.ascontiguousarray(dlon_rad, dtype=np.float64)
    cdef Py_ssize_t n = lat.shape[0]
    x_out = np.empty(n, dtype=np.float64)
    y_out = np.empty(n, dtype=np.float64)
    cdef double[::1] x = x_out
    cdef double[::1] y = y_out
    cdef Py_ssize_t i
    cdef int j
    cdef double t, sigma, tp, cos_lam, xi_p, eta_p, xi, eta
    for i in range(n):
        t = tan(lat[i])
        sigma = sinh(_ECC * atanh(_ECC * t / sqrt(1.0 + t * t)))
        tp = t * sqrt(1.0 + sigma * sigma) - sigma * sqrt(1.0 + t * t)
        cos_lam = cos(lam[i])
        xi_p = atan2(tp, cos_lam)
        eta_p = asinh(sin(lam[i]) / sqrt(tp * tp + cos_lam * cos_lam))
        xi = xi_p
        eta = eta_p
        for j in range(1, 7):
            xi += _ALPHA[j - 1] * sin(2.0 * j * xi_p) * cosh(2.0 * j * eta_p)
            eta += _ALPHA[j - 1] * cos(2.0 * j * xi_p) * sinh(2.0 * j * eta_p)
        x[i] = _A_BAR * eta
        y[i] = _A_BAR * xi
    return x_out, y_out


def tm_inverse(x_in, y_in):
    cdef double[::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef double[::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    lat_out = np.empty(n, dtype=np.float64)
    dlon_out = np.empty(n, dtype=np.float64)
    cdef double[::1] lat = lat_out
    cdef double[::1] dlon = dlon_out
    cdef Py_ssize_t i
    cdef int j, it
    cdef double xi, eta, xi_p, eta_p, sinh_eta, cos_xi, tp, t, sigma, f_t, df
    cdef double e2 = _ECC * _ECC
    for i in range(n):
        xi = y[i] / _A_BAR
        eta = x[i] / _A_BAR
        xi_p = xi
        eta_p = eta
        for j in range(1, 7):
            xi_p -= _BETA[j - 1] * sin(2.0 * j * xi) * cosh(2.0 * j * eta)
            eta_p -= _BETA[j - 1] * cos(2.0 * j * xi) * sinh(2.0 * j * eta)
        sinh_eta = sinh(eta_p)
        cos_xi = cos(xi_p)
        tp = sin(xi_p) / sqrt(sinh_eta * sinh_eta + cos_xi * cos_xi)
        t = tp
        for it in range(6):
            sigma = sinh(_ECC * atanh(_ECC * t / sqrt(1.0 + t * t)))
            f_t = t * sqrt(1.0 + sigma * sigma) - sigma * sqrt(1.0 + t * t) - tp
            df = (
                (sqrt((1.0 + sigma * sigma) * (1.0 + t * t)) - sigma * t)
                * (1.0 - e2) * sqrt(1.0 + t * t) / (1.0 + (1.0 - e2) * t * t)
            )
            t = t - f_t / df
        lat[i] = atan(t)
        dlon[i] = atan2(sinh_eta, cos_xi)
    return lat_out, dlon_out


def min_dist_to_segments(px_in, py_in, ax_in, ay_in, bx_in, by_in):
    cdef double[::1] px = np.ascontiguousarray(px_in, dtype=np.float64)
    cdef double[::1] py = np.ascontiguousarray(py_in, dtype=np.float64)
    cdef double[::1] ax = np.ascontiguousarray(ax_in, dtype=np.float64)
    cdef double[::1] ay = np.ascontiguousarray(ay_in, dtype=np.float64)
    cdef double[::1] bx = np.ascontiguousarray(bx_in, dtype=np.float64)
    cdef double[::1] by = np.ascontiguousarray(by_in, dtype=np.float64)
    cdef Py_ssize_t n_pts = px.shape[0]
    cdef Py_ssize_t n_seg = ax.shape[0]
    out = np.empty(n_pts, dtype=np.float64)
    cdef double[::1] d = out
    cdef Py_ssize_t i, s
    cdef double vx, vy, wx, wy, seg_len2, t, dx, dy, d2, best
    for i in range(n_pts):
        best = -1.0
        for s in range(n_seg):
            vx = bx[s] - ax[s]
            vy = by[s] - ay[s]
            wx = px[i] - ax[s]
            wy = py[i] - ay[s]
            seg_len2 = vx * vx + vy * vy
            if seg_len2 > 0.0:
                t = (wx * vx + wy * vy) / seg_len2
            else:
                t = 0.0
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            dx = wx - t * vx
            dy = wy - t * vy
            d2 = dx * dx + dy * dy
            if best < 0.0 or d2 < best:
                best = d2
        d[i] = sqrt(best)
    return out


def iou_matrix(a_in, b_in):
    a_arr = np.ascontiguousarray(a_in, dtype=np.float64)
    b_arr = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef Py_ssize_t n = a_arr.shape[0]
    cdef Py_ssize_t m = b_arr.shape[0]
    out = np.zeros((n, m), dtype=np.float64)
    if n == 0 or m == 0:
        return out
    cdef double[:, ::1] a = a_arr
    cdef double[:, ::1] b = b_arr
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    cdef double ax1, ay1, ax2, ay2, bx1, by1, bx2, by2, iw, ih, inter, union
    for i in range(n):
        ax1 = a[i, 0]
        ay1 = a[i, 1]
        ax2 = ax1 + a[i, 2]
        ay2 = ay1 + a[i, 3]
        for j in range(m):
            bx1 = b[j, 0]
            by1 = b[j, 1]
            bx2 = bx1 + b[j, 2]
            by2 = by1 + b[j, 3]
            iw = (ax2 if ax2 < bx2 else bx2) - (ax1 if ax1 > bx1 else bx1)
            ih = (ay2 if ay2 < by2 else by2) - (ay1 if ay1 > by1 else by1)
            if iw > 0.0 and ih > 0.0:
                inter = iw * ih
            else:
                inter = 0.0
            union = a[i, 2] * a[i, 3] + b[j, 2] * b[j, 3] - inter
            o[i, j] = inter / union
    return out


def greedy_assign(iou_in, order_in, double threshold):
    iou_arr = np.ascontiguousarray(iou_in, dtype=np.float64)
    cdef long long[::1] order = np.ascontiguousarray(order_in, dtype=np.int64)
    cdef Py_ssize_t n_pred = iou_arr.shape[0]
    cdef Py_ssize_t n_truth = iou_arr.shape[1]
    assigned_out = np.full(n_pred, -1, dtype=np.int64)
    cdef long long[::1] assigned = assigned_out
    taken_arr = np.zeros(n_truth, dtype=np.uint8)
    cdef unsigned char[::1] taken = taken_arr
    cdef double[:, ::1] iou = iou_arr
    cdef Py_ssize_t k, j, p
    cdef Py_ssize_t best_j
    cdef double best_iou, v
    for k in range(order.shape[0]):
        p = <Py_ssize_t> order[k]
        best_j = -1
        best_iou = 0.0
        for j in range(n_truth):
            if taken[j]:
                continue
            v = iou[p, j]
            if v >= threshold and v > best_iou:
                best_iou = v
                best_j = j
        if best_j >= 0:
            assigned[p] = best_j
            taken[best_j] = 1
    return assigned_out
