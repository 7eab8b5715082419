"""Descent algorithms that emit :class:`~plkdescent.core.Trajectory` objects.

All runs are deterministic given the problem, starting point, configuration
and seed. Stopping thresholds for "exact" termination are the fixed
``EXACT_STEP_TOL`` / ``EXACT_DIST_TOL`` from :mod:`plkdescent.core`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Union

import numpy as np

from .core import (EXACT_DIST_TOL, EXACT_STEP_TOL, CapabilityError, DomainError,
                   SolverError, Trajectory, as_point)
from .problems import Problem, dc_parts, evaluate, prox_step, subgrad_dist

ALGORITHMS = ("proximal", "dca", "bdca", "irg")


class LineSearchWarning(UserWarning):
    pass


def _known(d: dict, allowed, where):
    extra = set(d) - set(allowed)
    if extra:
        raise KeyError(f"{where}: unknown keys {sorted(extra)}")


@dataclass(frozen=True)
class ProximalConfig:
    """Proximal point settings.

    ``lambda_schedule`` is a constant or a per-iteration list; past the end of
    a list the last entry is reused. ``step_tol = 0`` disables the step test
    so a run always spends ``max_iters`` iterations unless it hits an exact
    fixed point with ``stop_on_exact``.
    """

    lambda_schedule: Union[float, tuple] = 1.0
    max_iters: int = 100
    step_tol: float = 0.0
    value_tol: float = 0.0
    stop_on_exact: bool = True

    def __post_init__(self):
        lams = self.lambdas
        if not all(lam > 0 and math.isfinite(lam) for lam in lams):
            raise DomainError("every lambda must be positive and finite")
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")
        if self.step_tol < 0 or self.value_tol < 0:
            raise DomainError("tolerances must be nonnegative")

    @property
    def lambdas(self) -> tuple:
        s = self.lambda_schedule
        return tuple(float(v) for v in s) if isinstance(s, (list, tuple)) else (float(s),)

    def lam(self, k: int) -> float:
        lams = self.lambdas
        return lams[min(k, len(lams) - 1)]

    @classmethod
    def from_dict(cls, d: dict):
        d = dict(d)
        d.pop("kind", None)
        _known(d, ("lambda", "lambda_schedule", "max_iters", "step_tol", "value_tol",
                   "stop_on_exact"), "algorithm")
        if "lambda" in d:
            d["lambda_schedule"] = d.pop("lambda")
        if isinstance(d.get("lambda_schedule"), list):
            d["lambda_schedule"] = tuple(d["lambda_schedule"])
        return cls(**d)

    def to_dict(self) -> dict:
        s = self.lambda_schedule
        return {"kind": "proximal", "lambda": list(s) if isinstance(s, tuple) else s,
                "max_iters": self.max_iters, "step_tol": self.step_tol,
                "value_tol": self.value_tol, "stop_on_exact": self.stop_on_exact}


@dataclass(frozen=True)
class BDCAConfig:
    """Boosted DC settings; ``lambda_bar = 0`` gives plain DCA."""

    alpha: float = 0.1
    lambda_bar: float = 1.0
    beta: float = 0.5
    max_backtracks: int = 60
    max_iters: int = 200
    step_tol: float = 1e-12

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError("alpha must be positive")
        if not 0 < self.beta < 1:
            raise DomainError("beta must lie in (0, 1)")
        if self.lambda_bar < 0:
            raise DomainError("lambda_bar must be nonnegative")
        if self.max_backtracks < 1 or self.max_iters < 1:
            raise DomainError("max_backtracks and max_iters must be >= 1")
        if self.step_tol < 0:
            raise DomainError("step_tol must be nonnegative")

    @classmethod
    def from_dict(cls, d: dict):
        d = dict(d)
        d.pop("kind", None)
        _known(d, [f.name for f in cls.__dataclass_fields__.values()], "algorithm")
        return cls(**d)

    def to_dict(self, kind="bdca") -> dict:
        return {"kind": kind, **asdict(self)}


@dataclass(frozen=True)
class IRGConfig:
    """Inexact gradient settings.

    ``stepsize_rule`` is ``"constant"`` (use ``t`` every step) or
    ``"backtracking"`` (start from ``t`` and halve until the decrease test
    with ``beta`` passes). ``nu`` bounds the relative gradient error.
    """

    stepsize_rule: str = "constant"
    t: float = 0.5
    beta: float = 0.5
    nu: float = 0.0
    max_iters: int = 200
    grad_tol: float = 1e-12
    step_tol: float = 0.0

    def __post_init__(self):
        if self.stepsize_rule not in ("constant", "backtracking"):
            raise DomainError(f"unknown stepsize rule {self.stepsize_rule!r}")
        if not self.t > 0 or not self.beta > 0:
            raise DomainError("t and beta must be positive")
        if not 0 <= self.nu < 1:
            raise DomainError("nu must lie in [0, 1)")
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")

    @classmethod
    def from_dict(cls, d: dict):
        d = dict(d)
        d.pop("kind", None)
        _known(d, [f.name for f in cls.__dataclass_fields__.values()], "algorithm")
        return cls(**d)

    def to_dict(self) -> dict:
        return {"kind": "irg", **asdict(self)}


def _reference(p: Problem, x_final):
    m = p.nearest_minimizer(x_final)
    if m is None:
        return x_final, "final_iterate", None
    return m, "known_minimizer", p.value(m)


def _finish(p, algo_spec, xs, vals, dists, wits, params, termination, flags=()):
    ref, src, ref_val = _reference(p, xs[-1])
    return Trajectory.from_iterates(
        p.id, _algo_id(algo_spec), xs, vals, dists=dists, witnesses=wits, params=params,
        termination=termination, reference_point=ref, reference_source=src,
        reference_value=ref_val, problem_spec=p.spec, algorithm_spec=algo_spec,
        flags=flags)


def _algo_id(spec: dict) -> str:
    kind = spec["kind"]
    rest = ",".join(f"{k}={spec[k]!r}" for k in sorted(spec) if k != "kind")
    return f"{kind}({rest})"


def run_proximal(p: Problem, x0, cfg: ProximalConfig = ProximalConfig()) -> Trajectory:
    """Proximal point iterations ``x+ = prox(x, lambda_k)``.

    The witness ``(x^k - x^{k+1}) / lambda_k`` lies in the subdifferential at
    ``x^{k+1}`` and is stored on record ``k + 1``.
    """
    x = as_point(x0, p.dim)
    xs, vals, dists, wits, params = [x], [evaluate(p, x)], [subgrad_dist(p, x)], [None], [{}]
    termination = "max_iters"
    for k in range(cfg.max_iters):
        lam = cfg.lam(k)
        try:
            x1 = prox_step(p, x, lam)
        except SolverError as exc:
            raise SolverError(f"iterate {k}: {exc}") from exc
        step = float(np.linalg.norm(x1 - x))
        params[k] = {"lambda": lam}
        if step == 0.0 and cfg.stop_on_exact:
            termination = "exact_stationary" if dists[k] <= EXACT_DIST_TOL else "converged_step_tol"
            break
        xs.append(x1)
        vals.append(evaluate(p, x1))
        dists.append(subgrad_dist(p, x1))
        wits.append((x - x1) / lam)
        params.append({})
        x = x1
        if cfg.stop_on_exact and step <= EXACT_STEP_TOL and dists[-1] <= EXACT_DIST_TOL:
            termination = "exact_stationary"
            break
        if cfg.step_tol > 0 and step <= cfg.step_tol:
            termination = "converged_step_tol"
            break
        if cfg.value_tol > 0 and abs(vals[-2] - vals[-1]) <= cfg.value_tol:
            termination = "value_flat"
            break
    return _finish(p, cfg.to_dict(), xs, vals, dists, wits, params, termination)


def run_bdca(p: Problem, x0, cfg: BDCAConfig = BDCAConfig(), *, kind: str = "bdca") -> Trajectory:
    """Boosted DC algorithm with backtracking along ``d = y - x``.

    ``u_k`` is the minimum-norm element of the subdifferential of ``h``. The
    witness ``grad g(x^k) - u_k`` is stored on record ``k``. Exhausting the
    backtracking budget falls back to the plain DCA step and is flagged.
    """
    dc = dc_parts(p)
    x = as_point(x0, p.dim)
    xs, vals, dists, wits, params = [x], [evaluate(p, x)], [subgrad_dist(p, x)], [None], [{}]
    flags = []
    termination = "max_iters"
    for k in range(cfg.max_iters):
        u = dc.h_subdiff(x).min_norm_element()
        y = np.asarray(dc.solve_subproblem(u), dtype=float)
        d = y - x
        dn = float(np.linalg.norm(d))
        wits[k] = as_point(np.asarray(dc.g_grad(x), dtype=float) - u)
        if dn <= cfg.step_tol:
            exact = dn <= EXACT_STEP_TOL and dists[k] <= EXACT_DIST_TOL
            termination = "exact_stationary" if exact else "converged_step_tol"
            break
        lam, bt, failed = cfg.lambda_bar, 0, False
        if lam > 0:
            fy = p.value(y)
            while p.value(y + lam * d) > fy - cfg.alpha * lam * lam * dn * dn:
                lam *= cfg.beta
                bt += 1
                if bt >= cfg.max_backtracks:
                    lam, failed = 0.0, True
                    flags.append(f"linesearch_failed@{k}")
                    break
        x1 = as_point(y + lam * d)
        params[k] = {"lambda": lam, "backtracks": bt, "linesearch_failed": int(failed)}
        if float(np.linalg.norm(x1 - x)) <= cfg.step_tol:
            termination = "converged_step_tol"
            break
        xs.append(x1)
        vals.append(evaluate(p, x1))
        dists.append(subgrad_dist(p, x1))
        wits.append(None)
        params.append({})
        x = x1
    else:
        # Witness for the final record, so (H3) ratios cover every step.
        u = dc.h_subdiff(x).min_norm_element()
        wits[-1] = as_point(np.asarray(dc.g_grad(x), dtype=float) - u)
    return _finish(p, cfg.to_dict(kind), xs, vals, dists, wits, params, termination, flags)


def run_dca(p: Problem, x0, cfg: Optional[BDCAConfig] = None) -> Trajectory:
    """Classical DCA: :func:`run_bdca` with the line search switched off."""
    cfg = cfg or BDCAConfig()
    d = asdict(cfg)
    d["lambda_bar"] = 0.0
    return run_bdca(p, x0, BDCAConfig(**d), kind="dca")


def _sphere(rng, n):
    v = rng.standard_normal(n)
    nv = float(np.linalg.norm(v))
    return v / nv if nv > 0 else np.eye(n)[0]


def run_irg(p: Problem, x0, cfg: IRGConfig = IRGConfig(), seed: int = 0) -> Trajectory:
    """Gradient steps along ``grad + e`` with ``|e| <= nu |grad|``.

    The error is ``nu * |grad| * s * u`` with ``u`` uniform on the sphere and
    ``s`` uniform on ``[0, 1]``, both drawn from ``default_rng(seed)``.
    """
    if not p.differentiable:
        raise CapabilityError(f"{p.id} is not differentiable; IRG needs a gradient")
    rng = np.random.default_rng(seed)
    x = as_point(x0, p.dim)
    g = p.gradient(x)
    gn = float(np.linalg.norm(g))
    xs, vals, dists, wits, params = [x], [evaluate(p, x)], [gn], [g], [{"grad_norm": gn}]
    termination = "max_iters"
    for k in range(cfg.max_iters):
        if gn <= cfg.grad_tol:
            termination = "exact_stationary" if gn <= EXACT_DIST_TOL else "converged_step_tol"
            break
        s = rng.uniform()
        e = cfg.nu * gn * s * _sphere(rng, p.dim)
        direction = g + e
        t, bt = cfg.t, 0
        fx = vals[-1]
        while True:
            x1 = x - t * direction
            step = float(np.linalg.norm(x1 - x))
            if cfg.stepsize_rule == "constant" or fx - p.value(x1) >= (cfg.beta / t) * step * step:
                break
            t *= 0.5
            bt += 1
            if t < 1e-12:
                raise SolverError(f"iterate {k}: stepsize underflow (t={t:.3e})")
        x1 = as_point(x1)
        params[k].update({"t": t, "backtracks": bt})
        if step == 0.0:
            termination = "converged_step_tol"
            break
        x = x1
        g = p.gradient(x)
        gn = float(np.linalg.norm(g))
        xs.append(x)
        vals.append(evaluate(p, x))
        dists.append(gn)
        wits.append(g)
        params.append({"grad_norm": gn})
        if cfg.step_tol > 0 and step <= cfg.step_tol:
            termination = "converged_step_tol"
            break
    return _finish(p, {**cfg.to_dict(), "seed": int(seed)}, xs, vals, dists, wits, params,
                   termination)


def run_algorithm(p: Problem, x0, algo: dict, seed: int = 0) -> Trajectory:
    """Dispatch on ``algo["kind"]`` with the remaining keys as configuration."""
    if not isinstance(algo, dict) or "kind" not in algo:
        raise KeyError("algorithm.kind")
    kind = algo["kind"]
    builders = {"proximal": ProximalConfig, "bdca": BDCAConfig, "dca": BDCAConfig,
                "irg": IRGConfig}
    if kind not in builders:
        raise KeyError(f"algorithm.kind (unknown kind {kind!r})")
    try:
        cfg = builders[kind].from_dict(algo)
    except TypeError as exc:
        raise KeyError(f"algorithm parameters for {kind!r}: {exc}") from None
    if kind == "proximal":
        return run_proximal(p, x0, cfg)
    if kind == "bdca":
        return run_bdca(p, x0, cfg)
    if kind == "dca":
        return run_dca(p, x0, cfg)
    return run_irg(p, x0, cfg, seed=seed)
