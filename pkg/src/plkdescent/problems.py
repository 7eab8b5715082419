"""Benchmark objectives with closed-form oracles.

Every built-in carries a value oracle, the limiting subdifferential in closed
form, a proximal map, its known minimizers and a known exponent PLK profile.
The DC problems also expose their decomposition ``phi = g - h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import lsq_linear

from .core import (CapabilityError, DimensionError, DomainError, PLKProfile,
                   SolverError, as_point)
from .kernels import solve_pow_residual

SET_KINDS = ("singleton", "interval_1d", "polytope", "discrete")


@dataclass(frozen=True, eq=False)
class SubgradientSet:
    """A finitely generated set of subgradients.

    ``polytope`` means the convex hull of its vertices; ``discrete`` is a
    finite, generally nonconvex set (limiting subdifferentials at concave
    kinks look like this).
    """

    kind: str
    data: object

    @classmethod
    def singleton(cls, v):
        return cls("singleton", as_point(v))

    @classmethod
    def interval(cls, lo, hi):
        if lo > hi:
            raise DomainError(f"interval needs lo <= hi, got [{lo}, {hi}]")
        return cls("interval_1d", (float(lo), float(hi)))

    @classmethod
    def polytope(cls, vertices):
        V = np.atleast_2d(np.asarray(vertices, dtype=float))
        if V.shape[0] < 1:
            raise DomainError("polytope needs at least one vertex")
        return cls("polytope", V)

    @classmethod
    def discrete(cls, points):
        P = np.atleast_2d(np.asarray(points, dtype=float))
        if P.shape[0] < 1:
            raise DomainError("discrete set needs at least one point")
        return cls("discrete", P)

    @property
    def dim(self) -> int:
        return 1 if self.kind == "interval_1d" else self.vertices.shape[1]

    @property
    def vertices(self) -> np.ndarray:
        if self.kind == "singleton":
            return self.data.reshape(1, -1)
        if self.kind == "interval_1d":
            lo, hi = self.data
            return np.array([[lo], [hi]]) if lo < hi else np.array([[lo]])
        return self.data

    def shift(self, v) -> "SubgradientSet":
        v = np.asarray(v, dtype=float).reshape(-1)
        if self.kind == "singleton":
            return SubgradientSet.singleton(self.data + v)
        if self.kind == "interval_1d":
            return SubgradientSet.interval(self.data[0] + v[0], self.data[1] + v[0])
        return SubgradientSet(self.kind, self.data + v)

    def nearest(self, p) -> np.ndarray:
        """Euclidean projection of ``p`` onto the set (nearest point if discrete)."""
        p = np.asarray(p, dtype=float).reshape(-1)
        if self.kind == "singleton":
            return self.data.copy()
        if self.kind == "interval_1d":
            lo, hi = self.data
            return np.array([min(max(p[0], lo), hi)])
        if self.kind == "discrete":
            d = np.linalg.norm(self.data - p, axis=1)
            return self.data[int(np.argmin(d))].copy()
        return _project_hull(self.data, p)

    def distance_to(self, p) -> float:
        p = np.asarray(p, dtype=float).reshape(-1)
        return float(np.linalg.norm(self.nearest(p) - p))

    def min_norm_element(self) -> np.ndarray:
        return self.nearest(np.zeros(self.dim))

    def contains(self, p, tol=1e-12) -> bool:
        return self.distance_to(p) <= tol


def _project_hull(V, p):
    m = V.shape[0]
    if m == 1:
        return V[0].copy()
    if m == 2:
        a, b = V
        ab = b - a
        denom = float(ab @ ab)
        t = 0.0 if denom == 0.0 else min(max(float((p - a) @ ab) / denom, 0.0), 1.0)
        return a + t * ab
    # Min-norm point of the shifted hull: with mu = argmin_{mu >= 0} |[Y^T; 1] mu - [0; 1]|,
    # the NNLS optimality conditions for mu / sum(mu) are exactly those of the projection.
    # BVLS rather than scipy's nnls, which returns non-optimal points on small inputs.
    Y = V - p
    A = np.vstack([Y.T, np.ones((1, m))])
    b = np.zeros(A.shape[0])
    b[-1] = 1.0
    mu = lsq_linear(A, b, bounds=(0.0, np.inf), method="bvls", tol=1e-15).x
    s = mu.sum()
    if s <= 0.0:
        return V[int(np.argmin(np.linalg.norm(Y, axis=1)))].copy()
    return p + (mu / s) @ Y


@dataclass(frozen=True)
class DCParts:
    """Decomposition ``phi = g - h`` with ``g`` differentiable and ``h`` convex."""

    g_value: Callable
    g_grad: Callable
    g_lipschitz: Optional[float]
    h_value: Callable
    h_subdiff: Callable
    rho: float
    solve_subproblem: Callable  # u -> argmin g(y) - <u, y>, i.e. grad g(y) = u


class Problem:
    """Base class for the built-in objectives."""

    kind = "abstract"
    dim = 1

    def params(self) -> dict:
        return {}

    @property
    def spec(self) -> dict:
        return {"kind": self.kind, **self.params()}

    @property
    def id(self) -> str:
        args = ",".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{self.kind}({args})"

    def __repr__(self):
        return self.id

    # oracles, overridden by subclasses
    def value(self, x) -> float:
        raise NotImplementedError

    def subgrad_set(self, x) -> SubgradientSet:
        raise NotImplementedError

    def prox(self, x, lam) -> np.ndarray:
        raise NotImplementedError

    @property
    def dc(self) -> Optional[DCParts]:
        return None

    @property
    def known_minimizers(self) -> tuple:
        return ()

    @property
    def known_minimizer(self):
        mins = self.known_minimizers
        return mins[0] if mins else None

    @property
    def known_plk(self) -> Optional[PLKProfile]:
        return None

    @property
    def differentiable(self) -> bool:
        return False

    def nearest_minimizer(self, x):
        mins = self.known_minimizers
        if not mins:
            return None
        x = np.asarray(x, dtype=float)
        return min(mins, key=lambda m: float(np.linalg.norm(m - x)))

    def gradient(self, x) -> np.ndarray:
        s = self.subgrad_set(x)
        if s.kind != "singleton":
            raise CapabilityError(f"{self.id} is not differentiable at {x}")
        return s.data

    def min_value(self) -> Optional[float]:
        m = self.known_minimizer
        return None if m is None else self.value(m)


# --------------------------------------------------------------------------
# built-ins

class PowAbs(Problem):
    """``|x|**(1 + alpha)`` on the real line; PLK exponent ``alpha/(1+alpha)``."""

    kind = "pow_abs"

    def __init__(self, alpha: float):
        if not alpha > 0:
            raise DomainError(f"alpha must be positive, got {alpha}")
        self.alpha = float(alpha)

    def params(self):
        return {"alpha": self.alpha}

    def value(self, x):
        return abs(float(x[0])) ** (1.0 + self.alpha)

    def _deriv(self, t):
        return math.copysign((1.0 + self.alpha) * abs(t) ** self.alpha, t) if t != 0 else 0.0

    def subgrad_set(self, x):
        return SubgradientSet.singleton([self._deriv(float(x[0]))])

    def prox(self, x, lam):
        t = float(x[0])
        u, _ = solve_pow_residual(abs(t), lam * (1.0 + self.alpha), self.alpha)
        return np.array([math.copysign(u, t)])

    @property
    def differentiable(self):
        return True

    @property
    def dc(self):
        a = self.alpha
        return DCParts(
            g_value=self.value,
            g_grad=lambda x: np.array([self._deriv(float(x[0]))]),
            g_lipschitz=2.0 if a == 1.0 else None,
            h_value=lambda x: 0.0,
            h_subdiff=lambda x: SubgradientSet.singleton([0.0]),
            rho=0.0,
            solve_subproblem=lambda u: np.array(
                [math.copysign((abs(float(u[0])) / (1.0 + a)) ** (1.0 / a), float(u[0]))]),
        )

    @property
    def known_minimizers(self):
        return (as_point([0.0]),)

    @property
    def known_plk(self):
        # phi'(gap) * |grad| = M exactly, so M = 1 is tight everywhere.
        return PLKProfile.exponent(1.0, self.alpha / (1.0 + self.alpha))


class PiecewisePlus(Problem):
    """``-x`` for ``x < 0`` and ``x**1.5`` for ``x >= 0``; kink at the minimizer."""

    kind = "piecewise_plus"

    def value(self, x):
        t = float(x[0])
        return -t if t < 0 else t ** 1.5

    def subgrad_set(self, x):
        t = float(x[0])
        if t < 0:
            return SubgradientSet.singleton([-1.0])
        if t == 0:
            return SubgradientSet.interval(-1.0, 0.0)
        return SubgradientSet.singleton([1.5 * math.sqrt(t)])

    def prox(self, x, lam):
        t = float(x[0])
        if t < -lam:
            return np.array([t + lam])
        if t <= 0:
            return np.array([0.0])
        u, _ = solve_pow_residual(t, 1.5 * lam, 0.5)
        return np.array([u])

    @property
    def known_minimizers(self):
        return (as_point([0.0]),)

    @property
    def known_plk(self):
        # Tight with M = 1 on the right branch; the left branch needs
        # |x| <= (2M/3)**3, which fixes the value window.
        return PLKProfile.exponent(1.0, 1.0 / 3.0, eta=8.0 / 27.0)


class Quadratic(Problem):
    """``c/2 * |x|^2`` in ``n`` dimensions."""

    kind = "quadratic"

    def __init__(self, c: float = 1.0, n: int = 1):
        if not c > 0:
            raise DomainError(f"c must be positive, got {c}")
        if int(n) < 1:
            raise DomainError("n must be >= 1")
        self.c = float(c)
        self.dim = int(n)

    def params(self):
        return {"c": self.c, "n": self.dim}

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.c * float(x @ x)

    def subgrad_set(self, x):
        return SubgradientSet.singleton(self.c * np.asarray(x, dtype=float))

    def prox(self, x, lam):
        return np.asarray(x, dtype=float) / (1.0 + lam * self.c)

    @property
    def differentiable(self):
        return True

    @property
    def dc(self):
        c = self.c
        n = self.dim
        return DCParts(
            g_value=self.value,
            g_grad=lambda x: c * np.asarray(x, dtype=float),
            g_lipschitz=c,
            h_value=lambda x: 0.0,
            h_subdiff=lambda x: SubgradientSet.singleton(np.zeros(n)),
            rho=0.0,
            solve_subproblem=lambda u: np.asarray(u, dtype=float) / c,
        )

    @property
    def known_minimizers(self):
        return (as_point(np.zeros(self.dim)),)

    @property
    def known_plk(self):
        return PLKProfile.exponent(math.sqrt(2.0 / self.c), 0.5)


class DCQuadratic(Problem):
    """``g = a_g/2 |x|^2``, ``h = a_h/2 |x|^2`` with ``a_g > a_h > 0``."""

    kind = "dc_quadratic"

    def __init__(self, a_g: float = 2.0, a_h: float = 1.0, n: int = 1):
        if not a_g > a_h > 0:
            raise DomainError(f"need a_g > a_h > 0, got a_g={a_g}, a_h={a_h}")
        self.a_g = float(a_g)
        self.a_h = float(a_h)
        self.dim = int(n)

    def params(self):
        return {"a_g": self.a_g, "a_h": self.a_h, "n": self.dim}

    @property
    def _c(self):
        return self.a_g - self.a_h

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.a_g * float(x @ x) - 0.5 * self.a_h * float(x @ x)

    def subgrad_set(self, x):
        return SubgradientSet.singleton(self._c * np.asarray(x, dtype=float))

    def prox(self, x, lam):
        return np.asarray(x, dtype=float) / (1.0 + lam * self._c)

    @property
    def differentiable(self):
        return True

    @property
    def dc(self):
        ag, ah = self.a_g, self.a_h
        return DCParts(
            g_value=lambda x: 0.5 * ag * float(np.dot(x, x)),
            g_grad=lambda x: ag * np.asarray(x, dtype=float),
            g_lipschitz=ag,
            h_value=lambda x: 0.5 * ah * float(np.dot(x, x)),
            h_subdiff=lambda x: SubgradientSet.singleton(ah * np.asarray(x, dtype=float)),
            rho=min(ag, ah),
            solve_subproblem=lambda u: np.asarray(u, dtype=float) / ag,
        )

    @property
    def known_minimizers(self):
        return (as_point(np.zeros(self.dim)),)

    @property
    def known_plk(self):
        return PLKProfile.exponent(math.sqrt(2.0 / self._c), 0.5)


class DCAbs(Problem):
    """``g = x^2 + rho/2 x^2``, ``h = c|x| + rho/2 x^2``, so ``phi = x^2 - c|x|``.

    Minimizers at ``+-c/2``; the origin is a concave kink where the limiting
    subdifferential is the two-point set ``{-c, c}``.
    """

    kind = "dc_abs"

    def __init__(self, c: float = 1.0, rho: float = 1.0):
        if not c > 0 or rho < 0:
            raise DomainError(f"need c > 0 and rho >= 0, got c={c}, rho={rho}")
        self.c = float(c)
        self.rho = float(rho)

    def params(self):
        return {"c": self.c, "rho": self.rho}

    def value(self, x):
        t = float(x[0])
        return t * t - self.c * abs(t)

    def subgrad_set(self, x):
        t = float(x[0])
        if t == 0:
            return SubgradientSet.discrete([[-self.c], [self.c]])
        return SubgradientSet.singleton([2.0 * t - math.copysign(self.c, t)])

    def prox(self, x, lam):
        # Nonconvex: compare the stationary points of both branches.
        t = float(x[0])
        cands = [0.0]
        up = (t + self.c * lam) / (1.0 + 2.0 * lam)
        if up > 0:
            cands.append(up)
        dn = (t - self.c * lam) / (1.0 + 2.0 * lam)
        if dn < 0:
            cands.append(dn)
        obj = [u * u - self.c * abs(u) + (u - t) ** 2 / (2.0 * lam) for u in cands]
        best = min(range(len(cands)), key=lambda i: (obj[i], -cands[i]))
        return np.array([cands[best]])

    @property
    def dc(self):
        c, rho = self.c, self.rho
        a = 2.0 + rho

        def h_sub(x):
            t = float(x[0])
            if t == 0:
                return SubgradientSet.interval(-c, c)
            return SubgradientSet.singleton([math.copysign(c, t) + rho * t])

        return DCParts(
            g_value=lambda x: 0.5 * a * float(x[0]) ** 2,
            g_grad=lambda x: np.array([a * float(x[0])]),
            g_lipschitz=a,
            h_value=lambda x: c * abs(float(x[0])) + 0.5 * rho * float(x[0]) ** 2,
            h_subdiff=h_sub,
            rho=rho,
            solve_subproblem=lambda u: np.asarray(u, dtype=float) / a,
        )

    @property
    def known_minimizers(self):
        return (as_point([0.5 * self.c]), as_point([-0.5 * self.c]))

    @property
    def known_plk(self):
        # gap = (|x| - c/2)^2 and |phi'| = 2||x| - c/2|: tight with M = 1
        # below the local maximum at the origin.
        return PLKProfile.exponent(1.0, 0.5, eta=0.25 * self.c ** 2)


BUILTINS = {
    "pow_abs": PowAbs,
    "piecewise_plus": PiecewisePlus,
    "quadratic": Quadratic,
    "dc_quadratic": DCQuadratic,
    "dc_abs": DCAbs,
}


def problem_from_spec(spec) -> Problem:
    """Build a problem from ``{"kind": ..., <params>}``."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise KeyError("problem.kind")
    kind = spec["kind"]
    if kind not in BUILTINS:
        raise KeyError(f"problem.kind (unknown kind {kind!r})")
    kwargs = {k: v for k, v in spec.items() if k != "kind"}
    try:
        return BUILTINS[kind](**kwargs)
    except TypeError as exc:
        raise KeyError(f"problem parameters for {kind!r}: {exc}") from None


# --------------------------------------------------------------------------
# oracle dispatch

def _check(p: Problem, x):
    x = as_point(x)
    if x.size != p.dim:
        raise DimensionError(f"{p.id} has dimension {p.dim}, got point of size {x.size}")
    return x


def evaluate(p: Problem, x) -> float:
    return p.value(_check(p, x))


def subgrad_dist(p: Problem, x) -> float:
    """``dist(0, d phi(x))`` for the closed-form limiting subdifferential."""
    x = _check(p, x)
    return p.subgrad_set(x).distance_to(np.zeros(p.dim))


def prox_residual(p: Problem, x, lam, u) -> float:
    """``dist(0, d phi(u) + (u - x)/lam)``."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    return p.subgrad_set(u).distance_to(-(u - x) / lam)


def prox_step(p: Problem, x, lam: float) -> np.ndarray:
    """Proximal point of ``x`` with parameter ``lam``."""
    x = _check(p, x)
    if not lam > 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    u = as_point(p.prox(x, lam))
    res = prox_residual(p, x, lam, u)
    scale = max(1.0, float(np.abs(x).max()) / lam)
    if res > 1e-10 * scale:
        raise SolverError(f"prox of {p.id} at {x} (lambda={lam}) left residual {res:.3e}; "
                          f"bracket [0, {float(np.abs(x).max())}]")
    return u


def dc_parts(p: Problem) -> DCParts:
    if p.dc is None:
        raise CapabilityError(f"{p.id} has no DC decomposition")
    return p.dc
