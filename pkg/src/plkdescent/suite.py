"""Acceptance battery.

Each criterion writes its artifacts under ``<out>/cNN`` and returns a
:class:`CriterionResult`. Artifacts never contain timings, so repeated runs
are byte-identical.
"""

from __future__ import annotations

import filecmp
import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import algorithms as alg
from . import geometry as geo
from . import monitors as mon
from . import rates
from .core import (EXACT_DIST_TOL, EXACT_STEP_TOL, PLKProfile, Trajectory, write_json,
                   write_trajectory)
from .problems import (DCAbs, DCQuadratic, PiecewisePlus, PowAbs, Quadratic, subgrad_dist)

SUITE_SEED = 20240601


@dataclass
class CriterionResult:
    id: int
    title: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_json(self):
        return {"id": self.id, "title": self.title, "passed": self.passed, "detail": self.detail}

    def line(self) -> str:
        return f"criterion {self.id:02d} {'PASS' if self.passed else 'FAIL'}  {self.title}"


CRITERIA: dict = {}


def criterion(cid: int, title: str):
    def deco(fn: Callable):
        CRITERIA[cid] = (title, fn)
        return fn
    return deco


def brute_prox_1d(f, x: float, lam: float, half_width: float = 2.0,
                  coarse: float = 1e-4, fine: float = 1e-8) -> float:
    """Grid-search proximal point: coarse grid, then a fine grid around the best node."""
    def obj(u):
        return np.array([f(np.array([v])) for v in u]) + (u - x) ** 2 / (2.0 * lam)
    grid = np.arange(x - half_width, x + half_width + coarse, coarse)
    grid = np.append(grid, 0.0)
    best = grid[int(np.argmin(obj(grid)))]
    grid2 = np.linspace(best - 2 * coarse, best + 2 * coarse, int(4 * coarse / fine) // 100 + 1)
    grid2 = np.append(grid2, [0.0, best])
    return float(grid2[int(np.argmin(obj(grid2)))])


def _save(t: Trajectory, out: Path, stem: str):
    write_trajectory(t, out, stem)


def _powabs_half_run():
    return alg.run_proximal(PowAbs(0.5), [1.0], alg.ProximalConfig(1.0, 60, 0.0, stop_on_exact=False))


@criterion(1, "proximal on |x|^1.5 never terminates before underflow; superlinear gaps")
def c01(out: Path) -> CriterionResult:
    t = _powabs_half_run()
    _save(t, out, "prox_powabs_0.5")
    gaps = np.maximum(t.gaps, 0.0)
    eps = np.finfo(float).eps
    exact_at = None
    for k in range(1, len(t)):
        if t.records[k - 1].step_norm <= EXACT_STEP_TOL and t.records[k].subgrad_dist <= EXACT_DIST_TOL:
            exact_at = k
            break
    no_early = exact_at is None or gaps[exact_at - 1] <= eps * gaps[0]
    rep = rates.classify_rate(rates.GapSequence.from_trajectory(t))
    ok = (len(t) == 61 and no_early and rep.classification == "superlinear"
          and rep.params["tail_ratio"] < 1e-3)
    detail = {"records": len(t), "first_exact_index": exact_at,
              "gap_before_exact": None if exact_at is None else float(gaps[exact_at - 1]),
              "classification": rep.classification, "params": rep.params}
    return CriterionResult(1, CRITERIA[1][0], bool(ok), detail)


@criterion(2, "proximal on the plus-type piecewise function terminates exactly in 4 steps")
def c02(out: Path) -> CriterionResult:
    p = PiecewisePlus()
    runs, ok = {}, True
    for lam in (0.3, 0.25):
        t = alg.run_proximal(p, [-1.0], alg.ProximalConfig(lam, 100))
        _save(t, out, f"prox_piecewise_{lam}")
        xs = t.xs[:, 0]
        steps = len(t) - 1
        brute = [brute_prox_1d(p.value, float(xs[k]), lam) for k in range(steps)]
        brute_ok = all(abs(b - float(xs[k + 1])) <= 1e-5 for k, b in enumerate(brute))
        linear_ok = all(abs(xs[k + 1] - xs[k] - lam) <= 1e-12 for k in range(steps - 1))
        this = (t.termination == "exact_stationary" and steps == 4 and xs[-1] == 0.0
                and brute_ok and linear_ok)
        ok &= this
        runs[str(lam)] = {"iterates": xs.tolist(), "termination": t.termination,
                          "steps": steps, "brute_force": brute, "passed": bool(this)}
    return CriterionResult(2, CRITERIA[2][0], bool(ok), runs)


@criterion(3, "linear rate at exponent 1/2: quadratic proximal ratio 0.25 within the bound")
def c03(out: Path) -> CriterionResult:
    p = Quadratic(1.0, 1)
    t = alg.run_proximal(p, [1.0], alg.ProximalConfig(1.0, 40))
    _save(t, out, "prox_quadratic")
    gaps = t.gaps
    ratios = gaps[1:] / gaps[:-1]
    cert = mon.certify(t, p)
    fit = rates.estimate_plk_exponent(t, p)
    env = rates.envelope_check(t, PLKProfile.exponent(fit.M_hat, 0.5), cert)[0]
    ok = (bool(np.all(np.abs(ratios - 0.25) <= 1e-10)) and abs(cert.a_max - 1.5) <= 1e-10
          and abs(cert.b_min_h2 - 1.0) <= 1e-10 and not env["violated"])
    detail = {"max_ratio_dev": float(np.abs(ratios - 0.25).max()), "a_max": cert.a_max,
              "b_min_h2": cert.b_min_h2, "M_fit": fit.M_hat, "envelope": env}
    return CriterionResult(3, CRITERIA[3][0], bool(ok), detail)


@criterion(4, "polynomial envelope at exponent 3/4: one constant dominates all tail gaps")
def c04(out: Path) -> CriterionResult:
    p = PowAbs(3.0)
    t = alg.run_proximal(p, [1.0], alg.ProximalConfig(1.0, 200))
    _save(t, out, "prox_powabs_3")
    cert = mon.certify(t, p)
    env = rates.envelope_check(t, p.known_plk, cert)
    val = [e for e in env if e["theorem"] == "value_polynomial_rate"][0]
    ok = len(t) == 201 and val["exponent"] == 2.0 and val["max_violation"] <= 0.0
    return CriterionResult(4, CRITERIA[4][0], bool(ok), {"envelopes": env})


@criterion(5, "PLK exponent recovery on proximal runs and exact power laws")
def c05(out: Path) -> CriterionResult:
    detail, ok = {"runs": {}, "synthetic": {}}, True
    for alpha, lam, iters in ((0.5, 0.01, 2000), (1.0, 1.0, 200), (3.0, 1.0, 200)):
        p = PowAbs(alpha)
        t = alg.run_proximal(p, [1.0], alg.ProximalConfig(lam, iters))
        _save(t, out, f"prox_powabs_{alpha}")
        fit = rates.estimate_plk_exponent(t, p)
        target = alpha / (1.0 + alpha)
        this = abs(fit.q_hat - target) <= 0.05
        ok &= this
        detail["runs"][str(alpha)] = {**fit.to_json(), "target": target, "passed": bool(this)}
    gaps = np.logspace(-2, -10, 25)
    for q in (0.25, 0.5, 0.75):
        dists = 1.7 * gaps ** q
        t = Trajectory.from_iterates("synthetic", "synthetic", [[g] for g in gaps], gaps,
                                     dists=dists, reference_value=0.0)
        fit = rates.estimate_plk_exponent(t)
        this = abs(fit.q_hat - q) <= 1e-6
        ok &= this
        detail["synthetic"][str(q)] = {**fit.to_json(), "passed": bool(this)}
    return CriterionResult(5, CRITERIA[5][0], bool(ok), detail)


def _random_decreasing(rng, n):
    a0 = 10.0 ** rng.uniform(-3, 3)
    factors = rng.uniform(0.05, 1.0, size=n - 1)
    return a0 * np.concatenate([[1.0], np.cumprod(factors)])


@criterion(6, "monotone-sum comparison inequality on 1000 random sequences per exponent")
def c06(out: Path) -> CriterionResult:
    rng = np.random.default_rng(SUITE_SEED)
    detail, ok = {}, True
    for q in (0.25, 0.75, 1.5):
        worst = math.inf
        for _ in range(1000):
            n = int(rng.integers(2, 40))
            a = _random_decreasing(rng, n)
            k = int(rng.integers(0, n - 1))
            l = int(rng.integers(0, n - 1 - k))
            lhs, rhs, _ = rates.integral_comparison_check(a, q, k, l)
            worst = min(worst, rhs - lhs)
        this = worst >= -1e-12
        ok &= this
        detail[str(q)] = {"min_margin": worst, "passed": bool(this)}
    write_json(detail, out / "margins.json")
    return CriterionResult(6, CRITERIA[6][0], bool(ok), detail)


@criterion(7, "power recurrence solutions satisfy the recurrence and decay superlinearly")
def c07(out: Path) -> CriterionResult:
    detail, ok = {}, True
    for a0 in (1.0, 0.5, 2.0):
        for sigma in (0.5, 1.0):
            for pw in (0.1, 0.3, 0.49):
                seq = rates.simulate_power_recurrence(a0, sigma, pw, 50)
                res = float(rates.power_recurrence_residual(seq, sigma, pw).max())
                cls = rates.classify_rate(seq).classification
                this = res <= 1e-12 and cls == "superlinear"
                ok &= this
                detail[f"{a0},{sigma},{pw}"] = {"residual": res, "classification": cls,
                                                "passed": bool(this)}
    write_json(detail, out / "recurrence.json")
    return CriterionResult(7, CRITERIA[7][0], bool(ok), detail)


BDCA_CFG = alg.BDCAConfig(alpha=0.1, lambda_bar=0.25, beta=0.5)


@criterion(8, "boosted DC runs meet the decrease and current-witness bounds")
def c08(out: Path) -> CriterionResult:
    detail, ok = {}, True
    cases = ((DCQuadratic(2.0, 1.0, 1), (-3.0, -1.0, 0.5, 2.0, 5.0), True),
             (DCAbs(1.0, 1.0), (-3.0, -0.7, 0.2, 1.5, 4.0), False))
    for p, starts, check_linear in cases:
        dc = p.dc
        for x0 in starts:
            t = alg.run_bdca(p, [x0], BDCA_CFG)
            _save(t, out, f"bdca_{p.kind}_{x0}")
            h1 = mon.certify_h1(t)
            h3 = mon.certify_h3(t, p)
            lams = t.param("lambda")
            worst = math.inf
            for k, r in h1.ratios.items():
                lam = lams[k]
                bound = (BDCA_CFG.alpha * lam * lam + dc.rho) / (1.0 + lam) ** 2
                worst = min(worst, r - bound)
            h1_ok = not h1.violations and worst >= -1e-12
            h3_ok = h3.constant is not None and h3.constant <= dc.g_lipschitz + 1e-9
            entry = {"records": len(t), "a_max": h1.constant, "min_h1_slack": worst,
                     "b_min_h3": h3.constant, "L": dc.g_lipschitz}
            this = h1_ok and h3_ok
            if check_linear:
                rep = rates.classify_rate(rates.GapSequence.from_trajectory(t))
                entry["classification"] = rep.classification
                entry["params"] = rep.params
                this = this and rep.classification == "linear"
            entry["passed"] = bool(this)
            ok &= this
            detail[f"{p.kind}@{x0}"] = entry
    return CriterionResult(8, CRITERIA[8][0], bool(ok), detail)


@criterion(9, "current-witness ratios diverge on the non-terminating proximal run")
def c09(out: Path) -> CriterionResult:
    p = PowAbs(0.5)
    t = _powabs_half_run()
    _save(t, out, "prox_powabs_0.5")
    h3 = mon.certify_h3(t, p, window=(0, 40))
    h2 = mon.certify_h2(t, p)
    ks = sorted(h3.ratios)
    vals = [h3.ratios[k] for k in ks]
    rising = all(b > a for a, b in zip(vals, vals[1:]))
    ok = (rising and max(vals) > 1e3 and h3.divergent and h3.constant is None
          and h2.constant is not None and h2.constant <= 1.0 + 1e-9)
    detail = {"h3_ratios": {str(k): v for k, v in zip(ks, vals)}, "h3_divergent": h3.divergent,
              "b_min_h2": h2.constant}
    return CriterionResult(9, CRITERIA[9][0], bool(ok), detail)


def crossover_index(g0: float, beta: float, q: float) -> int:
    """Smallest ``k`` with ``(g0 2^-k)^(1-2q) < beta``, in closed form."""
    kappa = math.log2(g0) - math.log2(beta) / (1.0 - 2.0 * q)
    return max(0, math.floor(kappa) + 1)


def _geometric_trajectory(g0: float, n: int = 40) -> Trajectory:
    gaps = g0 * 0.5 ** np.arange(n)
    return Trajectory.from_iterates("synthetic", "synthetic", [[g] for g in gaps], gaps,
                                    reference_value=0.0)


@criterion(10, "lower-exponent probe reports the closed-form crossover index")
def c10(out: Path) -> CriterionResult:
    detail, ok = {}, True
    for name, g0, a, b, M in (("unit", 1.0, 1.0, 1.0, 1.0), ("scaled", 1.0, 1.0, 1.0, 4.0),
                              ("large_start", 1e4, 1.0, 0.01, 1.0)):
        q = 0.25
        t = _geometric_trajectory(g0)
        res = rates.inconsistency_probe(t, q, M=M, a=a, b=b)
        expect = crossover_index(g0, rates.lower_exponent_threshold(a, b, M, q), q)
        this = res.applicable and res.first_violation == expect
        ok &= this
        detail[name] = {**res.to_json(), "expected": expect, "passed": bool(this)}
    write_json(detail, out / "probe.json")
    return CriterionResult(10, CRITERIA[10][0], bool(ok), detail)


@criterion(11, "level-decrease inequality on quadratics, with equality at the step 1/L")
def c11(out: Path) -> CriterionResult:
    r1 = geo.verify_level_decrease(Quadratic(1.0, 1), [1.0])
    last = r1.rows[-1]
    eq = (abs(last.alpha - 1.0 / r1.L_hat) <= 1e-15 and abs(last.lhs2 - last.rhs) <= 1e-10
          and abs(last.lhs1 - last.lhs2) <= 1e-10)
    r2 = geo.verify_level_decrease(DCQuadratic(2.0, 1.0, 1), [1.0], alphas=np.linspace(0, 0.5, 11))
    ok = r1.min_margin >= -1e-9 and eq and r2.min_margin >= -1e-9 and len(r2.rows) == 11
    detail = {"quadratic": r1.to_json(), "dc_quadratic": r2.to_json(), "equality": bool(eq)}
    write_json(detail, out / "level_decrease.json")
    return CriterionResult(11, CRITERIA[11][0], bool(ok), detail)


@criterion(12, "exponent/Lipschitz probe signatures for Lipschitz and non-Lipschitz gradients")
def c12(out: Path) -> CriterionResult:
    q1 = 0.25
    t1 = geo.exponent_lipschitz_probe(Quadratic(1.0, 1), [1.0, 0.5, 0.1, 1e-2, 1e-3, 1e-4], q1, 1.0)
    lhs = [r[4] for r in t1.rows]
    closed = 2.0 ** (q1 / (2.0 * q1 - 1.0))
    quad_ok = (t1.rhs_bounded and all(b > a for a, b in zip(lhs, lhs[1:]))
               and t1.failure_radius is not None and not t1.rows[-1][6]
               and t1.crossover_radius is not None and abs(t1.crossover_radius - closed) <= 1e-9)
    t2 = geo.exponent_lipschitz_probe(PowAbs(0.5), [1e-1, 1e-2, 1e-3, 1e-4], 1.0 / 3.0, 1.0)
    s = t2.slopes
    pow_ok = (abs(s["lhs"] - s["rhs"]) <= 0.05 and all(r[6] for r in t2.rows)
              and abs(s["L_hat"] + 0.5) <= 0.1)
    (out / "quadratic_probe.csv").parent.mkdir(parents=True, exist_ok=True)
    (out / "quadratic_probe.csv").write_text(t1.csv())
    (out / "powabs_probe.csv").write_text(t2.csv())
    detail = {"quadratic": {**t1.summary(), "closed_form_crossover": closed, "passed": bool(quad_ok)},
              "powabs": {**t2.summary(), "passed": bool(pow_ok)}}
    write_json(detail, out / "probe_summary.json")
    return CriterionResult(12, CRITERIA[12][0], bool(quad_ok and pow_ok), detail)


def convergent_runs():
    """Built-in runs expected to converge, keyed by a stable label."""
    tight = alg.ProximalConfig(1.0, 500, step_tol=1e-14)
    return {
        "prox_quadratic": (Quadratic(), alg.run_proximal(Quadratic(), [1.0], tight)),
        "prox_powabs_0.5": (PowAbs(0.5), alg.run_proximal(PowAbs(0.5), [1.0], tight)),
        "prox_powabs_1": (PowAbs(1.0), alg.run_proximal(PowAbs(1.0), [1.0], tight)),
        "prox_piecewise": (PiecewisePlus(),
                           alg.run_proximal(PiecewisePlus(), [-1.0], alg.ProximalConfig(0.3, 100))),
        "bdca_dc_quadratic": (DCQuadratic(), alg.run_bdca(DCQuadratic(), [2.0], BDCA_CFG)),
        "bdca_dc_abs": (DCAbs(), alg.run_bdca(DCAbs(), [2.0], BDCA_CFG)),
        "dca_dc_quadratic": (DCQuadratic(), alg.run_dca(DCQuadratic(), [2.0], BDCA_CFG)),
        "irg_quadratic": (Quadratic(), alg.run_irg(Quadratic(), [1.0], alg.IRGConfig(nu=0.1),
                                                   seed=SUITE_SEED)),
    }


@criterion(13, "convergent runs: summable steps, settled tails, stationary limits")
def c13(out: Path) -> CriterionResult:
    detail, ok = {}, True
    for name, (p, t) in convergent_runs().items():
        _save(t, out, name)
        total, tail_ok = mon.check_summability(t)
        h4 = mon.certify_h4(t)
        final = subgrad_dist(p, t.records[-1].x)
        this = tail_ok and h4 and final <= 1e-8
        ok &= this
        detail[name] = {"records": len(t), "step_sum": total, "tail_ok": tail_ok, "h4": h4,
                        "final_subgrad_dist": final, "passed": bool(this)}
    return CriterionResult(13, CRITERIA[13][0], bool(ok), detail)


def _tree(root: Path):
    return sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file())


@criterion(14, "repeated runs produce byte-identical artifacts")
def c14(out: Path) -> CriterionResult:
    with tempfile.TemporaryDirectory() as d1, tempfile.TemporaryDirectory() as d2:
        for root in (Path(d1), Path(d2)):
            for cid in range(1, 14):
                run_criterion(cid, root)
        f1, f2 = _tree(Path(d1)), _tree(Path(d2))
        same_names = f1 == f2
        mismatched = [str(f) for f in f1 if same_names
                      and not filecmp.cmp(Path(d1) / f, Path(d2) / f, shallow=False)]
        ok = same_names and not mismatched and len(f1) > 0
        detail = {"files": len(f1), "same_names": same_names, "mismatched": mismatched}
    return CriterionResult(14, CRITERIA[14][0], bool(ok), detail)


def run_criterion(cid: int, out) -> CriterionResult:
    """Run one criterion, writing its artifacts and ``result.json`` under ``out/cNN``."""
    title, fn = CRITERIA[cid]
    sub = Path(out) / f"c{cid:02d}"
    sub.mkdir(parents=True, exist_ok=True)
    try:
        res = fn(sub)
    except Exception as exc:  # a crash is a failed criterion, not a crashed suite
        res = CriterionResult(cid, title, False, {"error": f"{type(exc).__name__}: {exc}"})
    write_json(res.to_json(), sub / "result.json")
    return res


def run_suite(out, only=None, echo=None):
    """Run the battery; returns ``(results, timings)``. Timings stay out of the artifacts."""
    out = Path(out)
    ids = sorted(only) if only else sorted(CRITERIA)
    results, timings = [], {}
    for cid in ids:
        t0 = time.perf_counter()
        res = run_criterion(cid, out)
        timings[cid] = time.perf_counter() - t0
        results.append(res)
        if echo is not None:
            echo(f"{res.line()}  [{timings[cid]:.2f}s]")
    results.sort(key=lambda r: r.id)
    report = {"all_passed": all(r.passed for r in results),
              "criteria": [{"id": r.id, "title": r.title, "passed": r.passed} for r in results]}
    write_json(report, out / "suite.json")
    (out / "suite.txt").write_text("".join(r.line() + "\n" for r in results))
    return results, timings
