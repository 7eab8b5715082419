"""Command-line entry point.

Exit codes: 0 success, 1 acceptance failure, 2 input error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path

import numpy as np

from . import geometry as geo
from . import monitors as mon
from . import rates
from . import suite
from .algorithms import run_algorithm
from .core import DomainError, PLKProfile, SolverError, read_trajectory, write_json, write_trajectory
from .problems import problem_from_spec

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2, 3


class InputError(Exception):
    pass


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"cannot parse config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise InputError("config must be a JSON object")
    return cfg


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply ``a.b.c=value`` overrides; values are parsed as JSON when possible."""
    cfg = copy.deepcopy(cfg)
    for item in overrides or ():
        if "=" not in item:
            raise InputError(f"override must look like key.path=value, got {item!r}")
        path, raw = item.split("=", 1)
        keys = path.split(".")
        node = cfg
        for key in keys[:-1]:
            nxt = node.setdefault(key, {})
            if not isinstance(nxt, dict):
                raise InputError(f"override {path!r} walks through a non-object at {key!r}")
            node = nxt
        node[keys[-1]] = _parse_value(raw)
    return cfg


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise KeyError(key)
    return cfg[key]


def _config(args) -> dict:
    cfg = apply_overrides(_load_config(args.config), args.override)
    if args.seed is not None:
        cfg["rng_seed"] = args.seed
    return cfg


def _out_dir(args, cfg, default="out") -> Path:
    if args.out:
        return Path(args.out)
    return Path(cfg.get("output", {}).get("dir", default))


# --------------------------------------------------------------------------
# subcommands

def cmd_run(args) -> int:
    cfg = _config(args)
    problem_spec = _require(cfg, "problem")
    if not isinstance(problem_spec, dict) or "kind" not in problem_spec:
        raise KeyError("problem.kind")
    p = problem_from_spec(problem_spec)
    algo = _require(cfg, "algorithm")
    if isinstance(algo, str):
        algo = {"kind": algo}
    x0 = _require(cfg, "x0")
    t = run_algorithm(p, x0, algo, seed=int(cfg.get("rng_seed", 0)))
    out = _out_dir(args, cfg)
    stem = cfg.get("output", {}).get("stem", "traj")
    csv_path, json_path = write_trajectory(t, out, stem)
    print(f"wrote {csv_path} and {json_path} ({len(t)} records, {t.termination})")
    return EXIT_OK


def _load_traj(path):
    try:
        t = read_trajectory(path)
    except FileNotFoundError as exc:
        raise InputError(f"trajectory not found: {exc.filename}") from None
    except (KeyError, IndexError, json.JSONDecodeError, ValueError) as exc:
        raise InputError(f"malformed trajectory {path}: {exc}") from None
    p = None
    if t.problem_spec:
        p = problem_from_spec(dict(t.problem_spec))
    return t, p


def _parse_window(text):
    if text is None:
        return None
    lo, _, hi = text.partition(":")
    return int(lo or 0), (int(hi) if hi else None)


def cmd_monitor(args) -> int:
    t, p = _load_traj(args.trajectory)
    cert = mon.certify(t, p, _parse_window(args.window))
    out = Path(args.out) if args.out else Path(args.trajectory).parent
    path = write_json(cert.to_json(), out / "certificate.json")
    print(f"wrote {path}")
    return EXIT_OK


def _pad_exact(gaps, t):
    if t.termination == "exact_stationary" and gaps.size < rates.MIN_ENTRIES:
        # A stop at rounding level means the gap is zero from here on.
        last = gaps[-1] if gaps[-1] > np.finfo(float).eps * gaps[0] else 0.0
        gaps = np.concatenate([gaps, np.full(rates.MIN_ENTRIES - gaps.size, last)])
    return gaps


def cmd_rate(args) -> int:
    t, p = _load_traj(args.trajectory)
    gaps = _pad_exact(np.maximum(t.gaps, 0.0), t)
    report = rates.classify_rate(gaps, tol_zero=args.tol_zero)
    if args.q is not None:
        profile = PLKProfile.exponent(args.M if args.M is not None else 1.0, args.q)
    elif p is not None and p.known_plk is not None:
        profile = p.known_plk
        if args.M is not None:
            profile = PLKProfile.exponent(args.M, profile.q)
    else:
        profile = None
    fit = None
    try:
        fit = rates.estimate_plk_exponent(t, p, tuple(args.fit_window)).to_json()
    except DomainError as exc:
        report.diagnostics["fit_error"] = str(exc)
    report.fit = fit
    if profile is not None and len(t) > 1:
        cert = mon.certify(t, p)
        if profile.q == 0.5 and args.M is None and fit is not None:
            # Linear-rate bound uses the fitted constant unless M was given.
            profile = PLKProfile.exponent(fit["M_hat"], 0.5)
        try:
            report.envelopes = rates.envelope_check(t, profile, cert, report)
        except DomainError as exc:
            report.diagnostics["envelope_error"] = str(exc)
    out = Path(args.out) if args.out else Path(args.trajectory).parent
    path = write_json(report.to_json(), out / "rate.json")
    print(f"wrote {path} ({report.classification})")
    return EXIT_OK


def cmd_geometry(args) -> int:
    cfg = _config(args)
    p = problem_from_spec(_require(cfg, "problem"))
    g = dict(_require(cfg, "geometry"))
    sampler = geo.LevelSampler.from_dict({**g.get("sampler", {}),
                                          **({"seed": cfg["rng_seed"]} if "rng_seed" in cfg else {})})
    out = _out_dir(args, cfg)
    mode = g.get("mode", "probe")
    if mode == "probe":
        table = geo.exponent_lipschitz_probe(p, _require(g, "radii"), float(_require(g, "q")),
                                             float(g.get("M", 1.0)), xbar=g.get("xbar"),
                                             direction=g.get("direction"), cfg=sampler)
        out.mkdir(parents=True, exist_ok=True)
        (out / "probe.csv").write_text(table.csv())
        write_json(table.summary(), out / "probe.json")
        print(f"wrote {out / 'probe.csv'} and {out / 'probe.json'}")
    elif mode == "point":
        res = geo.probe_point(p, _require(g, "x0"), float(g.get("q", 0.25)),
                              float(g.get("M", 1.0)), sampler, xbar=g.get("xbar"))
        write_json(res.to_json(), out / "geometry.json")
        print(f"wrote {out / 'geometry.json'}")
    else:
        raise KeyError(f"geometry.mode (unknown mode {mode!r})")
    return EXIT_OK


def cmd_lemma(args) -> int:
    cfg = _config(args)
    spec = dict(_require(cfg, "lemma"))
    kind = _require(spec, "kind")
    out = _out_dir(args, cfg)
    if kind == "comparison":
        seq = _require(spec, "sequence")
        q, k, l = float(_require(spec, "q")), int(spec.get("k", 0)), int(spec.get("l", len(seq) - 2))
        lhs, rhs, holds = rates.integral_comparison_check(seq, q, k, l)
        doc = {"kind": kind, "q": q, "k": k, "l": l, "lhs": lhs, "rhs": rhs, "holds": holds}
    elif kind == "recurrence":
        a0, sigma, pw = float(_require(spec, "a0")), float(_require(spec, "sigma")), float(_require(spec, "p"))
        n = int(spec.get("n", 50))
        seq = rates.simulate_power_recurrence(a0, sigma, pw, n)
        try:
            cls = rates.classify_rate(seq).classification
        except (rates.ClassificationError, DomainError) as exc:
            cls = f"unclassified: {exc}"
        res = rates.power_recurrence_residual(seq, sigma, pw)
        doc = {"kind": kind, "a0": a0, "sigma": sigma, "p": pw, "n": n,
               "sequence": list(seq.values), "max_residual": float(res.max()) if res.size else 0.0,
               "classification": cls}
        out.mkdir(parents=True, exist_ok=True)
        (out / "recurrence.csv").write_text(
            "k,a\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(seq.values)))
    else:
        raise KeyError(f"lemma.kind (unknown kind {kind!r}; use comparison or recurrence)")
    path = write_json(doc, out / "lemma.json")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_suite(args) -> int:
    out = Path(args.out or "suite_out")
    only = None
    if args.only:
        only = [int(s) for s in args.only.split(",") if s.strip()]
        bad = [c for c in only if c not in suite.CRITERIA]
        if bad:
            raise InputError(f"unknown criterion ids: {bad}")
    results, _ = suite.run_suite(out, only, echo=print)
    failed = [r.id for r in results if not r.passed]
    if failed:
        print(f"FAILED criteria: {', '.join(str(i) for i in failed)}")
        return EXIT_FAIL
    print(f"all {len(results)} criteria passed; report in {out / 'suite.json'}")
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plkdescent",
                                     description="Descent-method experiments under PLK conditions.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="JSON configuration file")
            sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                            help="dotted-path override, repeatable")
            sp.add_argument("--seed", type=int, help="rng seed (overrides rng_seed)")
        sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("run", help="run an algorithm and write the trajectory")
    common(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("monitor", help="certify descent conditions on a trajectory")
    sp.add_argument("trajectory", help="trajectory CSV (its JSON sidecar must sit next to it)")
    sp.add_argument("--window", help="step window lo:hi")
    common(sp, config=False)
    sp.set_defaults(func=cmd_monitor)

    sp = sub.add_parser("rate", help="classify the rate and check envelopes")
    sp.add_argument("trajectory")
    sp.add_argument("--q", type=float, help="PLK exponent (default: the problem's known one)")
    sp.add_argument("--M", type=float, help="PLK constant")
    sp.add_argument("--tol-zero", type=float, default=0.0)
    sp.add_argument("--fit-window", type=float, nargs=2, default=list(rates.DEFAULT_FIT_WINDOW))
    common(sp, config=False)
    sp.set_defaults(func=cmd_rate)

    sp = sub.add_parser("geometry", help="stationarity measures and the exponent probe")
    common(sp)
    sp.set_defaults(func=cmd_geometry)

    sp = sub.add_parser("lemma", help="sequence oracles: comparison sum or power recurrence")
    common(sp)
    sp.set_defaults(func=cmd_lemma)

    sp = sub.add_parser("suite", help="run the acceptance battery")
    sp.add_argument("--only", help="comma-separated criterion ids")
    common(sp, config=False)
    sp.set_defaults(func=cmd_suite)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SolverError, rates.ClassificationError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyError as exc:
        print(f"input error: missing or invalid key {exc.args[0]}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, ValueError, TypeError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
