"""Geometry of difference programs ``phi = g - h``.

Stationarity measures over the subdifferential of ``h``, a sampled lower
estimate of the gradient Lipschitz constant of ``g`` on the level component
of a point, the level-decrease inequality and the exponent/Lipschitz probe.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import DomainError, as_point
from .kernels import max_pair_slope
from .problems import Problem, dc_parts

# Two vertices tie for the largest distance when they agree to this relative tolerance.
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class LevelSampler:
    """Sampling settings for :func:`estimate_level_lipschitz`.

    ``levels`` is the depth of the geometric grid in 1-D and scales the
    point count in higher dimensions; raising it only adds samples.
    """

    radius_max: float = 1e6
    levels: int = 32
    n_pairs: int = 10_000
    seed: int = 0
    path_points: int = 16
    bisections: int = 80

    @classmethod
    def from_dict(cls, d: dict):
        return cls(**dict(d or {}))


def _grad_and_set(p: Problem, x):
    dc = dc_parts(p)
    x = as_point(x, p.dim)
    return np.asarray(dc.g_grad(x), dtype=float), dc.h_subdiff(x)


def sigma1(p: Problem, x):
    """Largest ``|grad g(x) - v|`` over ``v`` in the subdifferential of ``h``.

    The maximum of a convex function over a polytope sits at a vertex. Ties
    go to the lexicographically largest vertex. Returns ``(value, v1)``.
    """
    G, S = _grad_and_set(p, x)
    V = S.vertices
    norms = np.linalg.norm(G - V, axis=1)
    best = float(norms.max())
    tied = [i for i in range(V.shape[0]) if norms[i] >= best - TIE_RTOL * max(best, 1.0)]
    i = max(tied, key=lambda j: tuple(V[j]))
    return best, V[i].copy()


def sigma0(p: Problem, x) -> float:
    """Distance from ``grad g(x)`` to the subdifferential of ``h`` at ``x``."""
    G, S = _grad_and_set(p, x)
    return S.distance_to(G)


def steepest_direction(p: Problem, x) -> np.ndarray:
    """``grad g(x) - v1(x)``."""
    G, _ = _grad_and_set(p, x)
    return G - sigma1(p, x)[1]


def variational_gap(p: Problem, x) -> float:
    """``<G - v1, v1> - min_v <G - v1, v>``; zero when ``v1`` is a maximizer."""
    G, S = _grad_and_set(p, x)
    v1 = sigma1(p, x)[1]
    d = G - v1
    return float(d @ v1 - (S.vertices @ d).min())


# --------------------------------------------------------------------------
# level-set Lipschitz estimate

@dataclass(frozen=True)
class LipschitzEstimate:
    L_hat: float
    bounded: bool
    n_points: int
    extent: tuple = ()


def _dc_value(p: Problem):
    dc = dc_parts(p)
    return lambda x: dc.g_value(x) - dc.h_value(x)


def _scan_1d(f, x0, level, sign, cfg: LevelSampler):
    """Outermost point of the level interval in direction ``sign``."""
    h = 1e-3 * max(1.0, abs(x0))
    ok = x0
    while True:
        trial = x0 + sign * h
        if abs(trial - x0) > cfg.radius_max:
            return x0 + sign * cfg.radius_max, False
        if f(np.array([trial])) > level:
            break
        ok = trial
        h *= 2.0
    bad = trial
    for _ in range(cfg.bisections):
        mid = 0.5 * (ok + bad)
        if mid == ok or mid == bad:
            break
        if f(np.array([mid])) <= level:
            ok = mid
        else:
            bad = mid
    return ok, True


def level_interval(p: Problem, x0, cfg: LevelSampler = LevelSampler()):
    """Connected level interval ``{phi <= phi(x0)}`` around a scalar ``x0``."""
    f = _dc_value(p)
    x0 = float(as_point(x0, 1)[0])
    level = f(np.array([x0]))
    lo, ok_lo = _scan_1d(f, x0, level, -1.0, cfg)
    hi, ok_hi = _scan_1d(f, x0, level, 1.0, cfg)
    return lo, hi, ok_lo and ok_hi


def _pinned_grid(lo, hi, x0, anchor, levels):
    pts = {lo, hi, x0}
    if anchor is not None and lo <= anchor <= hi:
        pts.add(anchor)
        span = max(anchor - lo, hi - anchor)
        for j in range(levels):
            off = span * 0.5 ** j
            for c in (anchor - off, anchor + off):
                if lo <= c <= hi:
                    pts.add(c)
    return np.array(sorted(pts)).reshape(-1, 1)


def estimate_level_lipschitz(p: Problem, x0, cfg: LevelSampler = LevelSampler(),
                             anchor=None) -> LipschitzEstimate:
    """Lower estimate of the gradient Lipschitz constant of ``g`` on the level component of ``x0``.

    In 1-D the level interval is scanned outward and sampled on a geometric
    grid pinned at ``anchor`` (default: the known minimizer nearest ``x0``),
    where slopes peak. In higher dimensions points are drawn uniformly from
    a ball and kept when the segment from ``x0`` stays in the level set.
    """
    dc = dc_parts(p)
    x0 = as_point(x0, p.dim)
    if anchor is None:
        m = p.nearest_minimizer(x0)
        anchor = None if m is None else m
    if p.dim == 1:
        lo, hi, bounded = level_interval(p, x0, cfg)
        a = None if anchor is None else float(np.asarray(anchor).reshape(-1)[0])
        pts = _pinned_grid(lo, hi, float(x0[0]), a, cfg.levels)
        extent = (lo, hi)
    else:
        pts, bounded, radius = _sample_ball(p, x0, cfg)
        extent = (radius,)
    grads = np.array([dc.g_grad(x) for x in pts], dtype=float).reshape(pts.shape)
    return LipschitzEstimate(float(max_pair_slope(pts, grads)), bounded, int(pts.shape[0]),
                             tuple(float(e) for e in extent))


def _sample_ball(p, x0, cfg: LevelSampler):
    f = _dc_value(p)
    level = f(x0)
    n = p.dim
    rng = np.random.default_rng(cfg.seed)
    # Radius: the farthest level-set boundary along the axes.
    radius, bounded = 0.0, True
    for i in range(n):
        for s in (-1.0, 1.0):
            h = 1e-3 * max(1.0, float(np.abs(x0).max()))
            while True:
                if h > cfg.radius_max:
                    bounded = False
                    h = cfg.radius_max
                    break
                x = x0.copy()
                x[i] += s * h
                if f(x) > level:
                    break
                h *= 2.0
            radius = max(radius, h)
    n_points = int(math.ceil(math.sqrt(2.0 * cfg.n_pairs))) * max(1, cfg.levels // 32)
    pts = [np.array(x0)]
    ts = np.linspace(0.0, 1.0, cfg.path_points)
    for _ in range(n_points):
        u = rng.standard_normal(n)
        u /= np.linalg.norm(u)
        r = radius * rng.uniform() ** (1.0 / n)
        y = x0 + r * u
        if all(f(x0 + t * (y - x0)) <= level for t in ts):
            pts.append(y)
    return np.array(pts), bounded, radius


# --------------------------------------------------------------------------
# level-decrease inequality

@dataclass(frozen=True)
class LevelDecreaseRow:
    alpha: float
    lhs1: float
    lhs2: float
    rhs: float
    holds: bool

    @property
    def margins(self):
        return self.lhs1 - self.lhs2, self.lhs2 - self.rhs


@dataclass(frozen=True)
class LevelDecreaseResult:
    x0: np.ndarray
    xbar: np.ndarray
    sigma1: float
    d: np.ndarray
    L_hat: float
    rows: tuple
    refine_L: bool = False

    @property
    def min_margin(self) -> float:
        return min(min(r.margins) for r in self.rows)

    def to_json(self):
        return {
            "x0": list(self.x0), "xbar": list(self.xbar), "sigma1": self.sigma1,
            "d": list(self.d), "L_hat": self.L_hat, "refine_L": self.refine_L,
            "min_margin": self.min_margin,
            "rows": [{"alpha": r.alpha, "lhs1": r.lhs1, "lhs2": r.lhs2, "rhs": r.rhs,
                      "holds": r.holds} for r in self.rows],
        }


def verify_level_decrease(p: Problem, x0, xbar=None, alphas=None, L_hat: Optional[float] = None,
                          cfg: LevelSampler = LevelSampler(), tol: float = 1e-9,
                          n_alphas: int = 11) -> LevelDecreaseResult:
    """Check ``phi(x0) - phi(xbar) >= phi(x0) - phi(x0 - a d) >= a (2 - a L) s1^2 / 2``.

    ``d`` is the steepest direction at ``x0`` and ``s1`` its norm. By default
    ``alphas`` is an ``n_alphas``-point grid on ``[0, 1/L_hat]``.
    """
    x0 = as_point(x0, p.dim)
    if xbar is None:
        xbar = p.nearest_minimizer(x0)
        if xbar is None:
            raise DomainError(f"{p.id} has no known minimizer; pass xbar")
    xbar = as_point(xbar, p.dim)
    f = _dc_value(p)
    if L_hat is None:
        L_hat = estimate_level_lipschitz(p, x0, cfg).L_hat
    s1, _ = sigma1(p, x0)
    d = steepest_direction(p, x0)
    if alphas is None:
        top = 1.0 / L_hat if L_hat > 0 else 1.0
        alphas = np.linspace(0.0, top, n_alphas)
    f0, fbar = f(x0), f(xbar)
    rows = []
    for a in alphas:
        a = float(a)
        lhs1 = f0 - fbar
        lhs2 = f0 - f(x0 - a * d)
        rhs = 0.5 * a * (2.0 - a * L_hat) * s1 * s1
        rows.append(LevelDecreaseRow(a, lhs1, lhs2, rhs, bool(lhs1 >= lhs2 - tol and lhs2 >= rhs - tol)))
    refine = any(r.lhs2 < r.rhs - tol for r in rows)
    return LevelDecreaseResult(x0, xbar, s1, d, float(L_hat), tuple(rows), refine)


# --------------------------------------------------------------------------
# exponent / Lipschitz probe

PROBE_HEADER = ("r", "sigma0", "sigma1", "L_hat", "lhs", "rhs", "holds")


@dataclass(frozen=True)
class ProbeTable:
    rows: tuple
    q: float
    M: float
    slopes: dict
    failure_radius: Optional[float]
    crossover_radius: Optional[float]
    rhs_bounded: bool

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(PROBE_HEADER)
        for row in self.rows:
            w.writerow([repr(float(v)) for v in row[:6]] + [str(bool(row[6])).lower()])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"q": self.q, "M": self.M, "slopes": dict(self.slopes),
                "failure_radius": self.failure_radius,
                "crossover_radius": self.crossover_radius,
                "rhs_bounded": self.rhs_bounded,
                "all_hold": all(r[6] for r in self.rows)}


def _probe_row(p, xbar, u, r, q, M, cfg):
    x0 = xbar + r * u
    s0 = sigma0(p, x0)
    s1, _ = sigma1(p, x0)
    L = estimate_level_lipschitz(p, x0, cfg, anchor=xbar).L_hat
    lhs = M * s1 ** (2.0 * q - 1.0) if s1 > 0 else math.inf
    rhs = (2.0 * L) ** q
    return (float(r), s0, s1, L, lhs, rhs, bool(lhs <= rhs))


def _slope(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = (x > 0) & (y > 0) & np.isfinite(y)
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def exponent_lipschitz_probe(p: Problem, radii: Sequence[float], q: float, M: float,
                             xbar=None, direction=None,
                             cfg: LevelSampler = LevelSampler()) -> ProbeTable:
    """Tabulate ``M s1^(2q-1)`` against ``(2 L_hat)^q`` at ``x0 = xbar + r u``.

    A lower exponent ``q`` together with a level-bounded gradient Lipschitz
    constant forces the left side to stay below the right; a gradient-Lipschitz
    ``g`` keeps the right side bounded while the left side blows up as
    ``r -> 0``. The crossover radius is refined by bisection when the table
    changes from holding to failing.
    """
    if not 0 < q < 0.5:
        raise DomainError(f"q must lie in (0, 1/2), got {q}")
    if not M > 0:
        raise DomainError("M must be positive")
    if xbar is None:
        xbar = p.known_minimizer
        if xbar is None:
            raise DomainError(f"{p.id} has no known minimizer; pass xbar")
    xbar = np.asarray(as_point(xbar, p.dim), dtype=float)
    u = np.eye(p.dim)[0] if direction is None else np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    radii = sorted((float(r) for r in radii), reverse=True)
    rows = tuple(_probe_row(p, xbar, u, r, q, M, cfg) for r in radii)
    rs = [r[0] for r in rows]
    slopes = {"lhs": _slope(rs, [r[4] for r in rows]),
              "rhs": _slope(rs, [r[5] for r in rows]),
              "L_hat": _slope(rs, [r[3] for r in rows]),
              "sigma1": _slope(rs, [r[2] for r in rows])}
    failure = None
    for row in rows:
        if not row[6]:
            failure = row[0]
            break
    crossover = None
    for outer, inner in zip(rows, rows[1:]):
        if outer[6] and not inner[6]:
            lo, hi = inner[0], outer[0]
            for _ in range(cfg.bisections):
                mid = 0.5 * (lo + hi)
                if mid in (lo, hi):
                    break
                if _probe_row(p, xbar, u, mid, q, M, cfg)[6]:
                    hi = mid
                else:
                    lo = mid
            crossover = hi
            break
    rhs_bounded = slopes["rhs"] is not None and abs(slopes["rhs"]) < 0.05
    return ProbeTable(rows, float(q), float(M), slopes, failure, crossover, rhs_bounded)


@dataclass(frozen=True)
class GeometryProbeResult:
    x0: np.ndarray
    sigma0: float
    sigma1: float
    v1: np.ndarray
    d: np.ndarray
    L_hat: float
    L_bounded: bool
    level_decrease: LevelDecreaseResult
    est_check: tuple

    def to_json(self):
        return {
            "x0": list(self.x0), "sigma0": self.sigma0, "sigma1": self.sigma1,
            "v1": list(self.v1), "d": list(self.d), "L_hat": self.L_hat,
            "L_bounded": self.L_bounded, "level_decrease": self.level_decrease.to_json(),
            "est_check": dict(zip(("lhs", "rhs", "holds"), self.est_check)),
        }


def probe_point(p: Problem, x0, q: float, M: float, cfg: LevelSampler = LevelSampler(),
                xbar=None) -> GeometryProbeResult:
    """All geometry quantities at one starting point."""
    x0 = as_point(x0, p.dim)
    s0 = sigma0(p, x0)
    s1, v1 = sigma1(p, x0)
    est = estimate_level_lipschitz(p, x0, cfg)
    ld = verify_level_decrease(p, x0, xbar, L_hat=est.L_hat, cfg=cfg)
    lhs = M * s1 ** (2.0 * q - 1.0) if s1 > 0 else math.inf
    rhs = (2.0 * est.L_hat) ** q
    return GeometryProbeResult(x0, s0, s1, v1, steepest_direction(p, x0), est.L_hat,
                               est.bounded, ld, (lhs, rhs, bool(lhs <= rhs)))
