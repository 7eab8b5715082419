# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; same contracts as ``_kernels_py``."""

from libc.math cimport pow, sqrt, fabs, INFINITY

cdef int MAX_BISECTIONS = 2200


def solve_pow_residual(double target, double scale, double power, double rtol=0.0):
    if target < 0.0 or scale <= 0.0 or power <= 0.0:
        raise ValueError("need target >= 0, scale > 0, power > 0")
    if target == 0.0:
        return 0.0, 0
    cdef double lo = 0.0
    cdef double cap = pow(target / scale, 1.0 / power)
    cdef double hi = target if target < cap else cap
    cdef double mid, r_lo, r_hi
    cdef int it = 0
    if hi == 0.0:
        return 0.0, 0
    with nogil:
        while it < MAX_BISECTIONS:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if hi - lo <= rtol * hi:
                break
            if mid + scale * pow(mid, power) > target:
                hi = mid
            else:
                lo = mid
            it += 1
    r_lo = fabs(lo + scale * pow(lo, power) - target)
    r_hi = fabs(hi + scale * pow(hi, power) - target)
    return (lo if r_lo <= r_hi else hi), it


def max_pair_slope(points, grads):
    cdef double[:, ::1] X = _as_2d(points)
    cdef double[:, ::1] G = _as_2d(grads)
    cdef Py_ssize_t m = X.shape[0], n = X.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double dx, dg, t, best = 0.0
    if G.shape[0] != m or G.shape[1] != n:
        raise ValueError("points and grads must have the same shape")
    with nogil:
        for i in range(m - 1):
            for j in range(i + 1, m):
                dx = 0.0
                dg = 0.0
                for c in range(n):
                    t = X[i, c] - X[j, c]
                    dx += t * t
                    t = G[i, c] - G[j, c]
                    dg += t * t
                if dx > 0.0:
                    t = sqrt(dg) / sqrt(dx)
                    if t > best:
                        best = t
    return best


def _as_2d(a):
    import numpy as np
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return arr
