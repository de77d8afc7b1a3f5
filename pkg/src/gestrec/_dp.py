"""Compiled dynamic-programming cores for the elastic measures.

All functions take C-contiguous float64 arrays of shape (L, k). Batch drivers
parallelize over independent pairs only, so results are bit-identical for any
thread count.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

FAMILY_EUCLID = 0
FAMILY_DTW = 1
FAMILY_RDTW = 2

# Smallest positive normal float64: floor for per-cell alignment weights so a
# single extreme local cost cannot zero out every path through it.
_TINY = 2.2250738585072014e-308

# Power-of-two row rescaling keeps the coupled DP tables well inside float64
# range without perturbing mantissas (multiplying by 2**128 is exact).
_RESCALE_EXP = 128
_RESCALE_UP = 2.0**128
_RESCALE_TRIGGER = 2.0**-128

# Stored cells below the smallest normal float would continue as subnormals,
# whose microcoded arithmetic dominates runtime while contributing nothing
# (they sit >= 2**-894 below the working row scale); flush them to zero.
_FLUSH = 2.2250738585072014e-308

# Return value when the mathematically positive result underflows float64
# entirely: the smallest subnormal, keeping downstream logs finite.
_UNDERFLOW_FLOOR = 5e-324


@njit(cache=True)
def euclid_sq_pair(a, b):
    """Sum over aligned poses of squared Euclidean distance (equal lengths)."""
    acc = 0.0
    for i in range(a.shape[0]):
        for d in range(a.shape[1]):
            diff = a[i, d] - b[i, d]
            acc += diff * diff
    return acc


@njit(cache=True)
def _local_sq(a, b, p, q):
    acc = 0.0
    for d in range(a.shape[1]):
        diff = a[p, d] - b[q, d]
        acc += diff * diff
    return acc


@njit(cache=True)
def dtw_pair(a, b):
    """Dynamic time warping with squared-Euclidean local cost.

    Cell (p, q) adds its local cost to the min of the upper, diagonal and left
    neighbours; the first row and column accumulate along their axis.
    """
    la = a.shape[0]
    lb = b.shape[0]
    prev = np.empty(lb)
    curr = np.empty(lb)
    prev[0] = _local_sq(a, b, 0, 0)
    for q in range(1, lb):
        prev[q] = prev[q - 1] + _local_sq(a, b, 0, q)
    for p in range(1, la):
        curr[0] = prev[0] + _local_sq(a, b, p, 0)
        for q in range(1, lb):
            best = prev[q]
            if prev[q - 1] < best:
                best = prev[q - 1]
            if curr[q - 1] < best:
                best = curr[q - 1]
            curr[q] = best + _local_sq(a, b, p, q)
        tmp = prev
        prev = curr
        curr = tmp
    return prev[lb - 1]


@njit(cache=True)
def kdtw_pair(a, b, nu, corridor):
    """Regularized DTW: sum over alignment paths weighted by exp(-nu * cost).

    Two coupled recursions are carried: one over cross-alignments of the pair
    and one over self-alignments gated to the main diagonal. Both start from 1
    at the virtual origin, with zero borders elsewhere. ``corridor < 0``
    disables the band constraint (all alignment gates equal 1). The result is
    strictly positive; values that underflow float64 return the smallest
    subnormal instead of 0.
    """
    la = a.shape[0]
    lb = b.shape[0]
    # Self-alignment weights exp(-nu * d^2) along the (clamped) diagonal, so
    # unequal lengths remain exactly symmetric. Cross weights are computed per
    # cell below; memory stays O(L).
    dx = np.empty(la)
    for p in range(la):
        q = p if p < lb else lb - 1
        w = math.exp(-nu * _local_sq(a, b, p, q))
        dx[p] = w if w > _TINY else _TINY
    dy = np.empty(lb)
    for q in range(lb):
        p = q if q < la else la - 1
        w = math.exp(-nu * _local_sq(a, b, p, q))
        dy[q] = w if w > _TINY else _TINY

    kxy_prev = np.zeros(lb + 1)
    kxx_prev = np.zeros(lb + 1)
    kxy_prev[0] = 1.0
    kxx_prev[0] = 1.0
    kxy_curr = np.zeros(lb + 1)
    kxx_curr = np.zeros(lb + 1)
    third = 1.0 / 3.0
    exponent = 0
    for p in range(1, la + 1):
        kxy_curr[0] = 0.0
        kxx_curr[0] = 0.0
        for q in range(1, lb + 1):
            w = math.exp(-nu * _local_sq(a, b, p - 1, q - 1))
            loc = w if w > _TINY else _TINY
            h_up = 1.0
            h_diag = 1.0
            h_left = 1.0
            h_here = 1.0
            if corridor >= 0:
                if abs(p - 1 - q) > corridor:
                    h_up = 0.0
                if abs(p - q) > corridor:
                    h_diag = 0.0  # |(p-1)-(q-1)| == |p-q|
                    h_here = 0.0
                if abs(p - (q - 1)) > corridor:
                    h_left = 0.0
            v = (
                third
                * loc
                * (
                    h_up * kxy_prev[q]
                    + h_diag * kxy_prev[q - 1]
                    + h_left * kxy_curr[q - 1]
                )
            )
            kxy_curr[q] = v if v >= _FLUSH else 0.0
            t = h_up * kxx_prev[q] * dx[p - 1]
            if p == q:
                t += h_here * kxx_prev[q - 1] * loc
            t += h_left * kxx_curr[q - 1] * dy[q - 1]
            v = third * t
            kxx_curr[q] = v if v >= _FLUSH else 0.0
        rowmax = 0.0
        for q in range(lb + 1):
            if kxy_curr[q] > rowmax:
                rowmax = kxy_curr[q]
            if kxx_curr[q] > rowmax:
                rowmax = kxx_curr[q]
        if 0.0 < rowmax < _RESCALE_TRIGGER:
            for q in range(lb + 1):
                kxy_curr[q] *= _RESCALE_UP
                kxx_curr[q] *= _RESCALE_UP
            exponent -= _RESCALE_EXP
        tmp = kxy_prev
        kxy_prev = kxy_curr
        kxy_curr = tmp
        tmp = kxx_prev
        kxx_prev = kxx_curr
        kxx_curr = tmp
    total = kxy_prev[lb] + kxx_prev[lb]
    result = math.ldexp(total, exponent) if exponent != 0 else total
    if result <= 0.0:
        result = _UNDERFLOW_FLOOR
    return result


@njit(cache=True)
def _pair_value(a, b, family, nu, corridor):
    if family == FAMILY_EUCLID:
        return euclid_sq_pair(a, b)
    elif family == FAMILY_DTW:
        return dtw_pair(a, b)
    return kdtw_pair(a, b, nu, corridor)


@njit(cache=True, parallel=True)
def pairwise_values(X, ii, jj, family, nu, corridor):
    """Measure for each listed (ii[t], jj[t]) pair of rows of X (n, L, k)."""
    m = ii.shape[0]
    out = np.empty(m)
    for t in prange(m):
        out[t] = _pair_value(X[ii[t]], X[jj[t]], family, nu, corridor)
    return out


@njit(cache=True, parallel=True)
def cross_values(XT, XR, family, nu, corridor):
    """Rectangular |XT| x |XR| measure matrix."""
    nt = XT.shape[0]
    nr = XR.shape[0]
    out = np.empty((nt, nr))
    for t in prange(nt * nr):
        i = t // nr
        j = t - i * nr
        out[i, j] = _pair_value(XT[i], XR[j], family, nu, corridor)
    return out


def warmup() -> None:
    """Force compilation of every kernel on a trivial input."""
    a = np.zeros((2, 1))
    b = np.ones((3, 1))
    euclid_sq_pair(a, a)
    dtw_pair(a, b)
    kdtw_pair(a, b, 1.0, -1)
    kdtw_pair(a, b, 1.0, 1)
    x = np.zeros((2, 2, 1))
    idx = np.zeros(1, dtype=np.int64)
    for fam in (FAMILY_EUCLID, FAMILY_DTW, FAMILY_RDTW):
        pairwise_values(x, idx, idx, fam, 1.0, -1)
        cross_values(x, x, fam, 1.0, -1)
