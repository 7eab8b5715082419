"""Post-hoc certification of descent conditions on finished trajectories.

Ratios are computed per step ``k -> k+1``. Steps with norm at or below
``ZERO_STEP`` are excluded from every ratio and reported separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ZERO_STEP, EXACT_DIST_TOL, DomainError, Trajectory, IterateRecord
from .problems import Problem, subgrad_dist

# A ratio sequence counts as divergent when its tail rises strictly over at
# least this many entries and grows by at least this factor.
DIVERGENCE_MIN_RUN = 4
DIVERGENCE_GROWTH = 1e6
# Tail fraction and slack used by the finite-sample (H4) proxy.
H4_TAIL = 0.25
H4_REL = 1e-3
# Value changes within this many ulps of the values cannot be resolved.
VALUE_RESOLUTION_ULPS = 8.0


@dataclass(frozen=True)
class ConditionResult:
    """Extremal constant and per-step ratios for one condition.

    ``constant`` is ``a_max`` for (H1) and ``b_min`` for (H2)/(H3). It is
    ``None`` when the ratios diverge (no finite constant certifies the run).
    """

    name: str
    constant: Optional[float]
    ratios: dict
    zero_steps: tuple = ()
    violations: tuple = ()
    divergent: bool = False
    observed_max: Optional[float] = None
    oracle_constant: Optional[float] = None
    oracle_ratios: dict = field(default_factory=dict)
    unresolved: tuple = ()

    def holds(self, c: float) -> bool:
        """Does the condition hold at every analysed step with constant ``c``?"""
        if self.name == "h1":
            return not self.violations and all(r >= c for r in self.ratios.values())
        return all(r <= c for r in self.ratios.values())


def _window(t: Trajectory, window):
    n_steps = len(t) - 1
    if window is None:
        return 0, n_steps
    start, stop = window
    stop = n_steps if stop is None else min(int(stop), n_steps)
    start = max(0, int(start))
    if start > stop:
        raise DomainError(f"empty window {window}")
    return start, stop


def _steps(t: Trajectory, lo, hi):
    """Yield ``(k, step_norm)`` for nonzero steps and collect zero steps."""
    good, zero = [], []
    for k in range(lo, hi):
        s = t.records[k].step_norm
        (zero if s <= ZERO_STEP else good).append((k, s))
    return good, tuple(k for k, _ in zero)


def certify_h1(t: Trajectory, window=None) -> ConditionResult:
    """Largest ``a`` with ``phi(x+) + a |x+ - x|^2 <= phi(x)`` on every step.

    Steps whose value change is lost in rounding of the values themselves are
    listed in ``unresolved`` and left out, like zero steps.
    """
    if len(t) < 2:
        raise DomainError("need at least two records")
    lo, hi = _window(t, window)
    good, zero = _steps(t, lo, hi)
    ratios, violations, unresolved = {}, [], []
    vals = t.values
    eps = np.finfo(float).eps
    for k, s in good:
        drop = vals[k] - vals[k + 1]
        if abs(drop) <= VALUE_RESOLUTION_ULPS * eps * max(abs(vals[k]), abs(vals[k + 1])):
            unresolved.append(k)
            continue
        if drop < 0:
            violations.append({"k": k, "condition": "h1", "reason": "value_increase"})
        ratios[k] = drop / (s * s)
    for k in zero:
        if vals[k + 1] > vals[k]:
            violations.append({"k": k, "condition": "h1", "reason": "value_increase"})
    if violations:
        a_max = 0.0
    else:
        a_max = min(ratios.values()) if ratios else math.inf
    return ConditionResult("h1", a_max, ratios, zero, tuple(violations),
                           observed_max=a_max, unresolved=tuple(unresolved))


def _is_divergent(ratios: dict) -> bool:
    vals = [ratios[k] for k in sorted(ratios)]
    if len(vals) < DIVERGENCE_MIN_RUN:
        return False
    tail = vals[len(vals) // 2:]
    if len(tail) < DIVERGENCE_MIN_RUN:
        tail = vals[-DIVERGENCE_MIN_RUN:]
    rising = all(b > a for a, b in zip(tail, tail[1:]))
    return rising and tail[0] > 0 and tail[-1] / tail[0] >= DIVERGENCE_GROWTH


def _oracle_dist(t: Trajectory, p: Optional[Problem], j: int) -> float:
    rec = t.records[j]
    if p is not None:
        return subgrad_dist(p, rec.x)
    if rec.subgrad_dist is None:
        raise DomainError(f"record {j} has no subgradient distance and no problem was given")
    return rec.subgrad_dist


def _relative_error(name: str, t: Trajectory, p, window, offset: int) -> ConditionResult:
    if len(t) < 2:
        raise DomainError("need at least two records")
    lo, hi = _window(t, window)
    good, zero = _steps(t, lo, hi)
    stored, oracle, violations = {}, {}, []
    for k, s in good:
        j = k + offset
        w = t.records[j].subgrad_witness
        od = _oracle_dist(t, p, j)
        oracle[k] = od / s
        if w is None:
            stored[k] = od / s
        else:
            stored[k] = float(np.linalg.norm(w)) / s
    for k in zero:
        if _oracle_dist(t, p, k + offset) > EXACT_DIST_TOL:
            violations.append({"k": k, "condition": name, "reason": "zero_step_nonstationary"})
    divergent = _is_divergent(stored)
    observed = max(stored.values()) if stored else 0.0
    o_max = max(oracle.values()) if oracle else 0.0
    return ConditionResult(
        name, None if divergent else observed, stored, zero, tuple(violations),
        divergent=divergent, observed_max=observed,
        oracle_constant=None if _is_divergent(oracle) else o_max, oracle_ratios=oracle)


def certify_h2(t: Trajectory, p: Optional[Problem] = None, window=None) -> ConditionResult:
    """Smallest ``b`` with ``|w^{k+1}| <= b |x^{k+1} - x^k|``.

    Uses the witness stored at the successor record when present, otherwise
    the minimum-norm subgradient distance. Both ratio sets are reported.
    """
    return _relative_error("h2", t, p, window, 1)


def certify_h3(t: Trajectory, p: Optional[Problem] = None, window=None) -> ConditionResult:
    """Smallest ``b`` with ``|w^k| <= b |x^{k+1} - x^k|`` (witness at the current iterate)."""
    return _relative_error("h3", t, p, window, 0)


def _padded(t: Trajectory, n: int = 10) -> Trajectory:
    """Repeat the final record of a short exactly-terminated run up to ``n`` records."""
    if t.termination != "exact_stationary" or len(t) >= n:
        return t
    last = t.records[-1]
    recs = list(t.records[:-1])
    recs.append(IterateRecord(last.k, last.x, last.value, last.subgrad_witness,
                              last.subgrad_dist, 0.0, last.step_params))
    for k in range(len(t), n):
        recs.append(IterateRecord(k, last.x, last.value, last.subgrad_witness,
                                  last.subgrad_dist, 0.0 if k < n - 1 else None, {}))
    return Trajectory(t.problem_id, t.algorithm_id, tuple(recs), t.termination,
                      t.reference_point, t.reference_source, t.reference_value,
                      t.problem_spec, t.algorithm_spec, t.flags)


def certify_h4(t: Trajectory, step_tol: Optional[float] = None,
               value_tol: Optional[float] = None) -> bool:
    """Finite-sample continuity proxy.

    The trailing quarter of iterates must be Cauchy (diameter within
    ``10 * step_tol`` or within ``1e-3`` of the whole run's diameter) and its
    values must sit within ``value_tol + 1e-3 * (value range)`` of the final
    value. Exactly terminated short runs are padded with their fixed point.
    """
    t = _padded(t)
    if len(t) < 10:
        return False
    if step_tol is None:
        step_tol = float(t.algorithm_spec.get("step_tol") or 1e-12)
    if value_tol is None:
        value_tol = float(t.algorithm_spec.get("value_tol") or 1e-12)
    xs, vals = t.xs, t.values
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(vals))):
        return False
    m = max(2, int(math.ceil(H4_TAIL * len(t))))
    tail = xs[-m:]
    tail_diam = _diameter(tail)
    full_diam = _diameter(xs)
    cauchy = tail_diam <= 10.0 * step_tol or tail_diam <= H4_REL * full_diam
    vrange = float(vals.max() - vals.min())
    settled = bool(np.all(np.abs(vals[-m:] - vals[-1]) <= value_tol + H4_REL * vrange))
    return bool(cauchy and settled)


def _diameter(xs: np.ndarray) -> float:
    diff = xs[:, None, :] - xs[None, :, :]
    return float(np.sqrt((diff ** 2).sum(axis=2)).max())


def check_summability(t: Trajectory):
    """Return ``(sum of step norms, tail-decay check)``.

    The check passes when the last quarter of steps sums to at most half of
    the quarter before it.
    """
    t = _padded(t)
    steps = t.step_norms
    total = float(steps.sum())
    if len(t) < 10:
        return total, False
    m = len(steps) // 4
    last = float(steps[-m:].sum())
    prev = float(steps[-2 * m:-m].sum())
    return total, bool(last <= 0.5 * prev)


def certify_descent_conditions_irg(t: Trajectory, value_eq_tol: float = 1e-14,
                                   step_eq_tol: float = 1e-14):
    """Primary constant ``sigma`` and the complementary implication.

    ``sigma`` is the smallest ``(phi_k - phi_{k+1}) / (|grad_k| |x_{k+1} - x_k|)``.
    Values count as equal when they agree to ``value_eq_tol`` relatively.
    """
    g = t.param("grad_norm")
    if len(t) and np.isnan(g[:-1]).any():
        raise DomainError("trajectory lacks gradient norms (grad_norm step parameter)")
    vals = t.values
    sigma = math.inf
    comp = True
    for k in range(len(t) - 1):
        s = t.records[k].step_norm
        drop = vals[k] - vals[k + 1]
        if s > ZERO_STEP and g[k] > 0:
            sigma = min(sigma, drop / (g[k] * s))
        scale = max(abs(vals[k]), abs(vals[k + 1]))
        if abs(drop) <= value_eq_tol * scale and s > step_eq_tol:
            comp = False
    return sigma, comp


def certify_irg_scheme(t: Trajectory):
    """Largest ``beta`` and smallest ``c`` for the stepsize-scaled IRG inequalities.

    ``phi_k - phi_{k+1} >= (beta / t_k) |x_{k+1} - x_k|^2`` and
    ``|grad_k| <= (c / t_k) |x_{k+1} - x_k|`` over every nonzero step.
    Returns ``(beta_max, c_min)``.
    """
    g = t.param("grad_norm")
    ts = t.param("t")
    if len(t) < 2 or np.isnan(g[:-1]).any() or np.isnan(ts[:-1]).any():
        raise DomainError("trajectory lacks stepsizes or gradient norms")
    vals = t.values
    beta, c = math.inf, 0.0
    for k in range(len(t) - 1):
        s = t.records[k].step_norm
        if s <= ZERO_STEP:
            continue
        beta = min(beta, ts[k] * (vals[k] - vals[k + 1]) / (s * s))
        c = max(c, ts[k] * g[k] / s)
    return beta, c


@dataclass(frozen=True)
class DescentCertificate:
    a_max: float
    b_min_h2: Optional[float]
    b_min_h3: Optional[float]
    h4_ok: bool
    sigma_primary: Optional[float]
    window: tuple
    violations: tuple
    per_k: tuple
    h1: ConditionResult = None
    h2: ConditionResult = None
    h3: ConditionResult = None
    irg_scheme: Optional[tuple] = None

    def to_json(self) -> dict:
        return {
            "a_max": self.a_max,
            "b_min_h2": self.b_min_h2,
            "b_min_h3": self.b_min_h3,
            "b_min_h2_oracle": self.h2.oracle_constant if self.h2 else None,
            "b_min_h3_oracle": self.h3.oracle_constant if self.h3 else None,
            "h3_divergent": bool(self.h3.divergent) if self.h3 else False,
            "h4_ok": self.h4_ok,
            "h1_unresolved": list(self.h1.unresolved) if self.h1 else [],
            "sigma_primary": self.sigma_primary,
            "irg_beta_max": self.irg_scheme[0] if self.irg_scheme else None,
            "irg_c_min": self.irg_scheme[1] if self.irg_scheme else None,
            "window": list(self.window),
            "violations": list(self.violations),
            "per_k": [dict(zip(("k", "h1_margin", "h2_ratio", "h3_ratio"), row))
                      for row in self.per_k],
        }


def certify(t: Trajectory, p: Optional[Problem] = None, window=None) -> DescentCertificate:
    """Run every applicable certifier and bundle the results."""
    lo, hi = _window(t, window)
    h1 = certify_h1(t, window)
    h2 = certify_h2(t, p, window)
    h3 = certify_h3(t, p, window)
    h4 = certify_h4(t)
    sigma, scheme = None, None
    if not np.isnan(t.param("grad_norm")[:-1]).any() and len(t) > 1:
        sigma = certify_descent_conditions_irg(t)[0]
        if not np.isnan(t.param("t")[:-1]).any():
            scheme = certify_irg_scheme(t)
    vals = t.values
    per_k = []
    for k in range(lo, hi):
        s = t.records[k].step_norm
        margin = None
        if math.isfinite(h1.constant):
            margin = float(vals[k] - vals[k + 1] - h1.constant * s * s)
        per_k.append((k, margin, h2.ratios.get(k), h3.ratios.get(k)))
    violations = h1.violations + h2.violations + h3.violations
    return DescentCertificate(h1.constant, h2.constant, h3.constant, h4, sigma,
                              (lo, hi), violations, tuple(per_k), h1, h2, h3, scheme)
