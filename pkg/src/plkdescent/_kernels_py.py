"""Pure-Python versions of the numerical kernels.

These are the reference implementations; the Cython module ``_kernels`` must
agree with them to the last bit on the bisection kernel and to rounding on the
pair-slope scan.
"""

import math

import numpy as np

MAX_BISECTIONS = 2200


def solve_pow_residual(target, scale, power, rtol=0.0):
    """Solve ``u + scale * u**power = target`` for ``u >= 0``.

    The left-hand side is strictly increasing on ``[0, inf)`` so bisection on
    the bracket ``[0, min(target, (target/scale)**(1/power))]`` converges.
    Iteration stops once the bracket stops shrinking in floating point, or
    when ``hi - lo <= rtol * hi``.

    Returns
    -------
    u : float
    iterations : int
    """
    if target < 0.0 or scale <= 0.0 or power <= 0.0:
        raise ValueError("need target >= 0, scale > 0, power > 0")
    if target == 0.0:
        return 0.0, 0
    lo = 0.0
    try:
        cap = (target / scale) ** (1.0 / power)
    except OverflowError:
        cap = math.inf
    hi = min(target, cap)
    if hi == 0.0:
        return 0.0, 0
    it = 0
    while it < MAX_BISECTIONS:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if hi - lo <= rtol * hi:
            break
        if mid + scale * mid ** power > target:
            hi = mid
        else:
            lo = mid
        it += 1
    r_lo = abs(lo + scale * lo ** power - target)
    r_hi = abs(hi + scale * hi ** power - target)
    return (lo if r_lo <= r_hi else hi), it


def max_pair_slope(points, grads):
    """Largest ``|g_i - g_j| / |x_i - x_j|`` over all pairs with ``x_i != x_j``.

    ``points`` and ``grads`` are ``(m, n)`` arrays. Returns 0.0 when fewer than
    two distinct points are given.
    """
    X = np.ascontiguousarray(points, dtype=float)
    G = np.ascontiguousarray(grads, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if G.ndim == 1:
        G = G.reshape(-1, 1)
    if X.shape != G.shape:
        raise ValueError("points and grads must have the same shape")
    best = 0.0
    for i in range(X.shape[0] - 1):
        dx = np.sqrt(((X[i + 1:] - X[i]) ** 2).sum(axis=1))
        dg = np.sqrt(((G[i + 1:] - G[i]) ** 2).sum(axis=1))
        ok = dx > 0.0
        if ok.any():
            best = max(best, float((dg[ok] / dx[ok]).max()))
    return best
