"""Sequence-level tools: comparison inequalities, rate classification,
PLK-exponent fitting, rate envelopes and the lower-exponent consistency probe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import GAP_FLOOR, ZERO_STEP, DomainError, PLKError, PLKProfile, Trajectory
from .kernels import solve_pow_residual
from .problems import Problem, subgrad_dist

SOURCES = ("value_gap", "iterate_distance", "synthetic")
CLASSES = ("finite_termination", "superlinear", "linear", "sublinear")

# Classification thresholds.
SUPERLINEAR_CUTOFF = 0.05
LINEAR_BAND = 0.05
LINEAR_RANGE = (0.05, 0.98)
SUBLINEAR_R2 = 0.99
SUBLINEAR_MEDIAN = 0.9
MIN_ENTRIES = 8
# Relative slack when comparing observed ratios with a linear-rate bound.
ENVELOPE_SLACK = 1e-9
DEFAULT_FIT_WINDOW = (1e-10, 1e-2)


class ClassificationError(PLKError, ValueError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class GapSequence:
    values: tuple
    source: str = "synthetic"

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if any(not v >= 0 for v in vals):
            raise DomainError("gap sequences must be nonnegative")
        if self.source not in SOURCES:
            raise DomainError(f"unknown source {self.source!r}")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @classmethod
    def from_trajectory(cls, t: Trajectory, source: str = "value_gap"):
        raw = t.gaps if source == "value_gap" else t.distances
        # Rounding can leave tiny negative gaps at the reference value.
        return cls(tuple(np.maximum(raw, 0.0)), source)


def _as_array(a) -> np.ndarray:
    if isinstance(a, GapSequence):
        return a.as_array()
    return np.asarray(a, dtype=float)


# --------------------------------------------------------------------------
# sequence oracles

def integral_comparison_check(a, q: float, k: int, l: int):
    """Compare ``sum_{j=k}^{k+l} (a_j - a_{j+1}) / a_j**q`` with
    ``(a_k**(1-q) - a_{k+l+1}**(1-q)) / (1 - q)``.

    Returns ``(lhs, rhs, holds)`` where ``holds`` allows ``1e-12`` slack.
    """
    if not (0 < q < 1 or 1 < q < 2):
        raise DomainError(f"q must lie in (0,1) or (1,2), got {q}")
    arr = _as_array(a)
    if k < 0 or l < 0 or k + l + 1 >= arr.size:
        raise DomainError("index range [k, k+l+1] outside the sequence")
    seg = arr[k:k + l + 2]
    if np.any(seg <= 0):
        raise DomainError("sequence must be positive on [k, k+l+1]")
    if np.any(np.diff(seg) > 0):
        raise DomainError("sequence must be nonincreasing on [k, k+l+1]")
    lhs = float(np.sum((seg[:-1] - seg[1:]) / seg[:-1] ** q))
    rhs = (seg[0] ** (1.0 - q) - seg[-1] ** (1.0 - q)) / (1.0 - q)
    return lhs, float(rhs), bool(lhs <= rhs + 1e-12)


def simulate_power_recurrence(a0: float, sigma: float, p: float, n: int) -> GapSequence:
    """Iterate ``a_{k+1} + sigma * a_{k+1}**p = a_k`` for ``n`` steps.

    Each step is a monotone scalar root solve, so the output is positive (until
    it underflows to zero) and decreasing.
    """
    if not a0 > 0 or not sigma > 0:
        raise DomainError("a0 and sigma must be positive")
    if not 0 < p < 1:
        raise DomainError("p must lie in (0, 1)")
    vals = [float(a0)]
    for _ in range(int(n)):
        nxt, _ = solve_pow_residual(vals[-1], sigma, p)
        vals.append(nxt)
    return GapSequence(tuple(vals), "synthetic")


def power_recurrence_residual(seq, sigma: float, p: float) -> np.ndarray:
    a = _as_array(seq)
    return np.abs(a[1:] + sigma * a[1:] ** p - a[:-1])


# --------------------------------------------------------------------------
# classification

@dataclass
class RateReport:
    classification: str
    params: dict
    diagnostics: dict = field(default_factory=dict)
    envelopes: list = field(default_factory=list)
    fit: Optional[dict] = None

    def to_json(self) -> dict:
        return {
            "classification": self.classification,
            "params": dict(self.params),
            "diagnostics": dict(self.diagnostics),
            "envelopes": list(self.envelopes),
            "fit": self.fit if self.fit is not None else {"q_hat": None, "M_hat": None, "r2": None},
        }


def _tail_len(m: int) -> int:
    return max(2, int(math.ceil(m / 4)))


def classify_rate(a, tol_zero: float = 0.0) -> RateReport:
    """Classify the decay of a nonnegative sequence.

    Entries that drop to ``tol_zero`` and stay there mean finite termination,
    unless the last positive entry was already below machine epsilon relative
    to the first entry; that is floating-point underflow and the sequence is
    truncated to its positive prefix before the ratio tests.
    """
    arr = _as_array(a)
    if arr.size < MIN_ENTRIES:
        raise DomainError(f"need at least {MIN_ENTRIES} entries, got {arr.size}")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise DomainError("entries must be finite and nonnegative")
    a0 = float(arr[0])
    small = arr <= tol_zero
    if small.any():
        first = int(np.argmax(small))
        if small[first:].all():
            if first == 0:
                return RateReport("finite_termination", {"k0": 0})
            prev = float(arr[first - 1])
            if prev > np.finfo(float).eps * a0:
                return RateReport("finite_termination", {"k0": first},
                                  {"last_positive": prev})
            arr = arr[:first]
    if arr.size < 3:
        raise ClassificationError("too few positive entries after truncation",
                                  {"positive_entries": int(arr.size)})
    ratios = arr[1:] / arr[:-1]
    tail = ratios[-_tail_len(ratios.size):]
    diag = {"n": int(arr.size), "tail_ratios": tail.tolist(),
            "tail_median": float(np.median(tail))}
    if np.all(np.diff(tail) < 0) and np.all(tail < SUPERLINEAR_CUTOFF):
        return RateReport("superlinear", {"tail_ratio": float(tail[-1])}, diag)
    rho = float(np.median(tail))
    if LINEAR_RANGE[0] < rho < LINEAR_RANGE[1] and np.all(np.abs(tail - rho) <= LINEAR_BAND):
        return RateReport("linear", {"rho": rho}, diag)
    half = arr[arr.size // 2:]
    idx = np.arange(arr.size // 2, arr.size) + 1.0
    if half.size >= 3 and np.all(half > 0):
        x, y = np.log(idx), np.log(half)
        slope, intercept = np.polyfit(x, y, 1)
        resid = y - (slope * x + intercept)
        ss = float(((y - y.mean()) ** 2).sum())
        r2 = 1.0 - float((resid ** 2).sum()) / ss if ss > 0 else 0.0
        diag.update({"loglog_slope": float(slope), "r2": r2})
        if (r2 >= SUBLINEAR_R2 and slope < 0 and rho > SUBLINEAR_MEDIAN
                and np.all(np.diff(tail) >= 0)):
            return RateReport("sublinear", {"s": float(-slope)}, diag)
    raise ClassificationError("tail matches no rate pattern", diag)


# --------------------------------------------------------------------------
# exponent fitting

@dataclass(frozen=True)
class PLKFit:
    q_hat: float
    M_hat: float
    r2: float
    n: int

    def to_json(self):
        return {"q_hat": self.q_hat, "M_hat": self.M_hat, "r2": self.r2, "n": self.n}


def fit_power_law(gaps, dists, window=DEFAULT_FIT_WINDOW, min_records: int = 6) -> PLKFit:
    """Least-squares fit of ``log dist = q log gap + log b`` over gaps in ``window``.

    ``M`` follows from ``b = 1 / (M (1 - q))``.
    """
    gaps = np.asarray(gaps, dtype=float)
    dists = np.asarray(dists, dtype=float)
    lo, hi = window
    sel = (gaps >= lo) & (gaps <= hi) & (dists > 0) & np.isfinite(dists)
    n = int(sel.sum())
    if n < min_records:
        raise DomainError(f"too few in-window records: {n} < {min_records} "
                          f"with gaps in [{lo}, {hi}]")
    x, y = np.log(gaps[sel]), np.log(dists[sel])
    q, logb = np.polyfit(x, y, 1)
    resid = y - (q * x + logb)
    ss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss if ss > 0 else 1.0
    b = math.exp(logb)
    M = 1.0 / (b * (1.0 - q)) if q < 1 else math.inf
    return PLKFit(float(q), float(M), r2, n)


def estimate_plk_exponent(t: Trajectory, p: Optional[Problem] = None,
                          window=DEFAULT_FIT_WINDOW, min_records: int = 6) -> PLKFit:
    """Fit the PLK exponent and constant from a trajectory's gaps and subgradient distances."""
    gaps = t.gaps
    if p is not None:
        dists = np.array([subgrad_dist(p, r.x) for r in t.records])
    else:
        dists = t.subgrad_dists
    return fit_power_law(gaps, dists, window, min_records)


# --------------------------------------------------------------------------
# envelopes

def _entry(theorem, bound_expr, fitted_const, max_violation, **extra):
    return {"theorem": theorem, "bound_expr": bound_expr, "fitted_const": fitted_const,
            "max_violation": max_violation, **extra}


def linear_factor(a: float, b: float, M: float) -> float:
    """``1 / (1 + 4a / (b^2 M^2))``, the value contraction bound at exponent 1/2."""
    return 1.0 / (1.0 + 4.0 * a / (b * b * M * M))


def _tail_start(n: int) -> int:
    return max(1, n // 4)


def envelope_check(t: Trajectory, profile: PLKProfile, cert, report: Optional[RateReport] = None):
    """Compare a run against the rate bound implied by its exponent.

    ``cert`` supplies ``a_max``, ``b_min_h2`` and ``b_min_h3``. At exponent
    1/2 the observed value ratios are checked against the linear factor; above
    1/2 the smallest polynomial constants are fitted over the tail; below 1/2
    the run is labelled finite or superlinear.
    """
    q, M = profile.q, profile.M
    gaps = np.maximum(t.gaps, 0.0)
    out = []
    if q == 0.5:
        a, b = cert.a_max, cert.b_min_h2
        if a is None or b is None or not a > 0 or not b > 0:
            raise DomainError("linear-rate envelope needs positive a_max and b_min_h2")
        bound = linear_factor(a, b, M)
        keep = gaps[:-1] > GAP_FLOOR
        ratios = gaps[1:][keep] / gaps[:-1][keep]
        worst = float(((ratios - bound) / bound).max()) if ratios.size else 0.0
        out.append(_entry(
            "value_linear_rate", "gap_{k+1} <= gap_k / (1 + 4a/(b^2 M^2))", bound, worst,
            violated=bool(worst > ENVELOPE_SLACK), a=a, b=b, M=M,
            alpha=4.0 * a / (b * b * M * M), alpha_single_M=4.0 * a / (b * b * M),
            observed_max_ratio=float(ratios.max()) if ratios.size else None))
        b3 = cert.b_min_h3
        if b3 is not None and b3 > 0:
            f3 = 1.0 - 4.0 * a / (b3 * b3 * M * M)
            worst3 = float((ratios - f3).max()) if ratios.size else 0.0
            out.append(_entry(
                "value_linear_rate_current_witness", "gap_{k+1} <= (1 - 4a/(b^2 M^2)) gap_k",
                f3, worst3, violated=bool(worst3 > ENVELOPE_SLACK), b=b3,
                factor_single_M=1.0 - 4.0 * a / (b3 * b3 * M)))
    elif 0.5 < q < 1.0:
        dists = t.distances
        for name, seq, expo in (
            ("value_polynomial_rate", gaps, 1.0 / (2.0 * q - 1.0)),
            ("iterate_polynomial_rate", dists, (1.0 - q) / (2.0 * q - 1.0)),
        ):
            k = np.arange(seq.size, dtype=float)
            s = _tail_start(seq.size)
            kk, vv = k[s:], seq[s:]
            const = float((vv * kk ** expo).max()) if vv.size else 0.0
            env = const * kk ** (-expo)
            with np.errstate(invalid="ignore", divide="ignore"):
                rel = np.where(env > 0, (vv - env) / env, 0.0)
            worst = float(rel.max()) if rel.size else 0.0
            out.append(_entry(name, f"C * k^(-{expo:.6g})", const, worst,
                              exponent=expo, tail_start=s,
                              asymptotic_const=float(vv[-1] * kk[-1] ** expo) if vv.size else None))
    else:
        if report is None and t.termination != "exact_stationary":
            try:
                report = classify_rate(GapSequence.from_trajectory(t))
            except (ClassificationError, DomainError) as exc:
                report = RateReport("unclassified", {"error": str(exc)})
        if t.termination == "exact_stationary":
            alt = "finite"
        elif report.classification == "finite_termination":
            alt = "finite"
        elif report.classification == "superlinear":
            alt = "superlinear"
        else:
            alt = "neither"
        out.append(_entry("lower_exponent_alternative", "finite or superlinear", None,
                          0.0 if alt != "neither" else 1.0, alternative=alt))
    return out


# --------------------------------------------------------------------------
# lower-exponent consistency probe

@dataclass(frozen=True)
class ProbeResult:
    applicable: bool
    beta: Optional[float]
    first_violation: Optional[int]
    reason: str = ""

    def to_json(self):
        return {"applicable": self.applicable, "beta": self.beta,
                "first_violation": self.first_violation, "reason": self.reason}


def lower_exponent_threshold(a: float, b: float, M: float, q: float) -> float:
    """``a / ((1-q)^2 M^2 b^2)``."""
    return a / ((1.0 - q) ** 2 * M * M * b * b)


def inconsistency_probe(t, q: float, cert=None, M: float = 1.0, *, a=None, b=None) -> ProbeResult:
    """Find the first index where ``gap_k**(1 - 2q)`` falls below the threshold.

    A run satisfying sufficient decrease, the current-iterate error bound and
    a lower-exponent PLK inequality with infinitely many nonzero steps keeps
    ``gap_k**(1-2q)`` above the threshold, so any violation shows the three
    cannot hold together. ``t`` is a trajectory, a :class:`GapSequence` or
    an array of gaps; ``a``/``b`` override the certificate.
    """
    if not 0 < q < 0.5:
        raise DomainError(f"q must lie in (0, 1/2), got {q}")
    if a is None:
        a = None if cert is None else cert.a_max
    if b is None:
        b = None if cert is None else cert.b_min_h3
    if a is None or not a > 0:
        return ProbeResult(False, None, None, "no positive sufficient-decrease constant")
    if b is None or not math.isfinite(b):
        return ProbeResult(False, None, None, "no finite current-iterate error constant")
    beta = lower_exponent_threshold(a, b, M, q)
    if isinstance(t, Trajectory):
        gaps = np.maximum(t.gaps, 0.0)
        # Only indices followed by a nonzero step are covered by the argument.
        moving = np.zeros(gaps.size, dtype=bool)
        moving[:-1] = t.step_norms > ZERO_STEP
    else:
        gaps = _as_array(t)
        moving = np.ones(gaps.size, dtype=bool)
    lhs = gaps ** (1.0 - 2.0 * q)
    hits = np.nonzero((lhs < beta) & moving)[0]
    if hits.size == 0:
        return ProbeResult(True, beta, None, "not observed")
    return ProbeResult(True, beta, int(hits[0]), "violation")
