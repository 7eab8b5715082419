"""Shared domain types, desingularizing functions and trajectory I/O."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np

# Value gaps below this are "at the reference value"; the derivative of the
# desingularizer blows up there and the window cannot be resolved.
GAP_FLOOR = 1e-14
# Exact (finite) termination thresholds used by every algorithm.
EXACT_STEP_TOL = 1e-14
EXACT_DIST_TOL = 1e-12
# Steps at or below this norm are treated as repeats by the monitors.
ZERO_STEP = 1e-16

SUBDIFF_KINDS = ("limiting", "symmetric", "clarke")
TERMINATIONS = ("converged_step_tol", "value_flat", "max_iters", "exact_stationary")


class PLKError(Exception):
    """Base class for errors raised by this package."""


class DomainError(PLKError, ValueError):
    pass


class WindowError(PLKError, ValueError):
    """Point lies outside the slab where the PLK inequality is asserted."""


class DimensionError(PLKError, ValueError):
    pass


class CapabilityError(PLKError, TypeError):
    """Problem lacks an oracle the operation needs (e.g. a DC decomposition)."""


class SolverError(PLKError, RuntimeError):
    pass


def as_point(x, dim: Optional[int] = None) -> np.ndarray:
    """Return ``x`` as a read-only 1-D float array, checking finiteness."""
    arr = np.array(x, dtype=float, ndmin=1)
    if arr.ndim != 1:
        raise DimensionError(f"point must be a flat vector, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionError("point must have dimension >= 1")
    if dim is not None and arr.size != dim:
        raise DimensionError(f"expected dimension {dim}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"point has non-finite coordinates: {arr}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DesingularizingFunction:
    """Exponent desingularizer ``t -> M * t**(1 - q)``."""

    M: float
    q: float

    def __post_init__(self):
        if not self.M > 0:
            raise DomainError(f"M must be positive, got {self.M}")
        if not 0.0 <= self.q < 1.0:
            raise DomainError(f"q must lie in [0, 1), got {self.q}")

    def __call__(self, t):
        return desingularizing_value(self, t)

    def derivative(self, t):
        return desingularizing_derivative(self, t)


def desingularizing_value(f: DesingularizingFunction, t: float) -> float:
    if t < 0:
        raise DomainError(f"desingularizer is defined on t >= 0, got {t}")
    if t == 0:
        return 0.0
    return f.M * t ** (1.0 - f.q)


def desingularizing_derivative(f: DesingularizingFunction, t: float) -> float:
    if t <= 0:
        raise DomainError(f"derivative needs t > 0, got {t}")
    return f.M * (1.0 - f.q) * t ** (-f.q)


@dataclass(frozen=True)
class PLKProfile:
    desingularizer: DesingularizingFunction
    eta: float = math.inf
    radius: float = math.inf
    subdiff_kind: str = "limiting"

    def __post_init__(self):
        if not self.eta > 0 or not self.radius > 0:
            raise DomainError("eta and radius must be positive")
        if self.subdiff_kind not in SUBDIFF_KINDS:
            raise DomainError(f"unknown subdifferential kind {self.subdiff_kind!r}")

    @classmethod
    def exponent(cls, M, q, eta=math.inf, radius=math.inf, subdiff_kind="limiting"):
        return cls(DesingularizingFunction(M, q), eta, radius, subdiff_kind)

    @property
    def M(self) -> float:
        return self.desingularizer.M

    @property
    def q(self) -> float:
        return self.desingularizer.q

    def to_json(self) -> dict:
        return {
            "M": self.M,
            "q": self.q,
            "eta": self.eta,
            "radius": self.radius,
            "subdiff_kind": self.subdiff_kind,
        }


def plk_residual(profile: PLKProfile, value_gap: float, subgrad_distance: float) -> float:
    """``phi'(gap) * dist - 1``; nonnegative means the inequality holds here."""
    if not (0.0 < value_gap < profile.eta):
        raise WindowError(f"gap {value_gap!r} outside (0, eta={profile.eta!r})")
    if value_gap < GAP_FLOOR:
        raise WindowError(f"gap {value_gap!r} below resolvable floor {GAP_FLOOR}")
    if subgrad_distance < 0:
        raise DomainError("subgradient distance must be nonnegative")
    return profile.desingularizer.derivative(value_gap) * subgrad_distance - 1.0


@dataclass(frozen=True, eq=False)
class IterateRecord:
    k: int
    x: np.ndarray
    value: float
    subgrad_witness: Optional[np.ndarray] = None
    subgrad_dist: Optional[float] = None
    step_norm: Optional[float] = None
    step_params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.step_norm is not None and self.step_norm < 0:
            raise DomainError("step_norm must be nonnegative")
        if self.subgrad_dist is not None and self.subgrad_dist < 0:
            raise DomainError("subgrad_dist must be nonnegative")


@dataclass(frozen=True, eq=False)
class Trajectory:
    problem_id: str
    algorithm_id: str
    records: tuple
    termination: str
    reference_point: Optional[np.ndarray] = None
    reference_source: str = "none"
    reference_value: Optional[float] = None
    problem_spec: Mapping[str, Any] = field(default_factory=dict)
    algorithm_spec: Mapping[str, Any] = field(default_factory=dict)
    flags: tuple = ()

    def __post_init__(self):
        if self.termination not in TERMINATIONS:
            raise DomainError(f"unknown termination {self.termination!r}")
        for i, rec in enumerate(self.records):
            if rec.k != i:
                raise DomainError("record indices must be 0, 1, 2, ... contiguous")

    @classmethod
    def from_iterates(cls, problem_id, algorithm_id, xs, values, *, dists=None,
                      witnesses=None, params=None, termination="max_iters",
                      reference_point=None, reference_source="none",
                      reference_value=None, problem_spec=None, algorithm_spec=None,
                      flags=()):
        """Assemble records, filling ``step_norm`` from consecutive iterates."""
        n = len(xs)
        pts = [as_point(x) for x in xs]
        dists = dists if dists is not None else [None] * n
        witnesses = witnesses if witnesses is not None else [None] * n
        params = params if params is not None else [{}] * n
        records = []
        for k in range(n):
            step = float(np.linalg.norm(pts[k + 1] - pts[k])) if k + 1 < n else None
            w = witnesses[k]
            records.append(IterateRecord(
                k=k,
                x=pts[k],
                value=float(values[k]),
                subgrad_witness=None if w is None else as_point(w),
                subgrad_dist=None if dists[k] is None else float(dists[k]),
                step_norm=step,
                step_params=dict(params[k]),
            ))
        if reference_point is not None:
            reference_point = as_point(reference_point)
        return cls(problem_id, algorithm_id, tuple(records), termination,
                   reference_point, reference_source,
                   None if reference_value is None else float(reference_value),
                   dict(problem_spec or {}), dict(algorithm_spec or {}), tuple(flags))

    def __len__(self):
        return len(self.records)

    @property
    def dim(self) -> int:
        return self.records[0].x.size

    @property
    def xs(self) -> np.ndarray:
        return np.array([r.x for r in self.records])

    @property
    def values(self) -> np.ndarray:
        return np.array([r.value for r in self.records])

    @property
    def step_norms(self) -> np.ndarray:
        """Step norms for k = 0..n-2 (the final record has none)."""
        return np.array([r.step_norm for r in self.records[:-1]], dtype=float)

    @property
    def subgrad_dists(self) -> np.ndarray:
        return np.array([np.nan if r.subgrad_dist is None else r.subgrad_dist
                         for r in self.records])

    @property
    def gaps(self) -> np.ndarray:
        ref = self.reference_value
        if ref is None:
            ref = self.records[-1].value
        return self.values - ref

    @property
    def distances(self) -> np.ndarray:
        """``|x^k - reference_point|`` (falls back to the final iterate)."""
        ref = self.reference_point if self.reference_point is not None else self.records[-1].x
        return np.linalg.norm(self.xs - ref, axis=1)

    def param(self, key, default=np.nan) -> np.ndarray:
        return np.array([r.step_params.get(key, default) for r in self.records], dtype=float)


# --------------------------------------------------------------------------
# serialization

def to_jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats into plain JSON."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps_json(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(obj))
    return path


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def trajectory_csv(t: Trajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k"] + [f"x_{i}" for i in range(t.dim)]
               + ["value", "gap", "step_norm", "subgrad_dist"])
    gaps = t.gaps
    for rec, gap in zip(t.records, gaps):
        w.writerow([rec.k] + [_fmt(c) for c in rec.x]
                   + [_fmt(rec.value), _fmt(gap), _fmt(rec.step_norm), _fmt(rec.subgrad_dist)])
    return buf.getvalue()


def trajectory_sidecar(t: Trajectory) -> dict:
    return {
        "problem_id": t.problem_id,
        "algorithm_id": t.algorithm_id,
        "termination": t.termination,
        "reference_point": None if t.reference_point is None else list(t.reference_point),
        "reference_source": t.reference_source,
        "reference_value": t.reference_value,
        "problem": dict(t.problem_spec),
        "algorithm": dict(t.algorithm_spec),
        "flags": list(t.flags),
        "records": [
            {
                "k": r.k,
                "step_params": dict(r.step_params),
                "subgrad_witness": None if r.subgrad_witness is None else list(r.subgrad_witness),
            }
            for r in t.records
        ],
    }


def write_trajectory(t: Trajectory, directory, stem: str = "traj"):
    """Write ``<stem>.csv`` and its ``<stem>.json`` sidecar; return both paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / f"{stem}.csv"
    csv_path.write_text(trajectory_csv(t))
    json_path = write_json(trajectory_sidecar(t), directory / f"{stem}.json")
    return csv_path, json_path


def _opt(s: str):
    return None if s == "" else float(s)


def read_trajectory(path) -> Trajectory:
    """Load a trajectory from its CSV (or sidecar) path."""
    path = Path(path)
    csv_path = path.with_suffix(".csv")
    json_path = path.with_suffix(".json")
    meta = json.loads(json_path.read_text())
    with csv_path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    n = sum(1 for h in header if h.startswith("x_"))
    if header[0] != "k" or header[1 + n:] != ["value", "gap", "step_norm", "subgrad_dist"]:
        raise DomainError(f"malformed trajectory header in {csv_path}")
    if len(body) != len(meta["records"]):
        raise DomainError("CSV and sidecar disagree on the number of records")
    records = []
    for i, (row, extra) in enumerate(zip(body, meta["records"])):
        w = extra.get("subgrad_witness")
        records.append(IterateRecord(
            k=int(row[0]),
            x=as_point([float(c) for c in row[1:1 + n]]),
            value=float(row[1 + n]),
            subgrad_witness=None if w is None else as_point(w),
            subgrad_dist=_opt(row[4 + n]),
            step_norm=_opt(row[3 + n]),
            step_params=extra.get("step_params", {}),
        ))
    ref = meta.get("reference_point")
    return Trajectory(
        problem_id=meta["problem_id"],
        algorithm_id=meta["algorithm_id"],
        records=tuple(records),
        termination=meta["termination"],
        reference_point=None if ref is None else as_point(ref),
        reference_source=meta.get("reference_source", "none"),
        reference_value=meta.get("reference_value"),
        problem_spec=meta.get("problem", {}),
        algorithm_spec=meta.get("algorithm", {}),
        flags=tuple(meta.get("flags", ())),
    )
