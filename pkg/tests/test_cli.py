import json
import subprocess
import sys

import pytest

from plkdescent import schemas
from plkdescent.cli import apply_overrides, InputError, main
from plkdescent.core import Trajectory, write_trajectory

jsonschema = pytest.importorskip("jsonschema")

QUAD_RUN = {"problem": {"kind": "quadratic"}, "algorithm": {"kind": "proximal", "lambda": 1.0,
                                                           "max_iters": 40},
            "x0": [1.0], "rng_seed": 0}


def validate(doc, schema):
    jsonschema.Draft202012Validator(schema).validate(doc)


def write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


@pytest.fixture
def run_dir(tmp_path):
    cfg = write_cfg(tmp_path, QUAD_RUN)
    out = tmp_path / "run"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    return out


def test_config_example_matches_schema():
    validate(QUAD_RUN, schemas.RUN_CONFIG)


def test_run_writes_trajectory_pair(run_dir):
    sidecar = json.loads((run_dir / "traj.json").read_text())
    validate(sidecar, schemas.TRAJECTORY_SIDECAR)
    assert sidecar["problem"]["kind"] == "quadratic"
    header = (run_dir / "traj.csv").read_text().splitlines()[0]
    assert header.startswith("k,")


def test_run_is_byte_identical_on_rerun(tmp_path):
    cfg = write_cfg(tmp_path, {**QUAD_RUN, "algorithm": {"kind": "irg", "t": 0.5, "max_iters": 30}})
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--config", cfg, "--out", str(a), "--seed", "7"]) == 0
    assert main(["run", "--config", cfg, "--out", str(b), "--seed", "7"]) == 0
    for name in ("traj.csv", "traj.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_override_changes_the_run(tmp_path):
    cfg = write_cfg(tmp_path, QUAD_RUN)
    out = tmp_path / "o"
    assert main(["run", "--config", cfg, "--out", str(out),
                 "--override", "algorithm.max_iters=3", "--override", "output.stem=short"]) == 0
    side = json.loads((out / "short.json").read_text())
    assert len(side["records"]) == 4
    assert side["termination"] == "max_iters"


def test_apply_overrides_parses_json_and_nests():
    cfg = apply_overrides({"a": {"b": 1}}, ["a.b=2.5", "a.c=[1, 2]", "d.e=text"])
    assert cfg == {"a": {"b": 2.5, "c": [1, 2]}, "d": {"e": "text"}}
    with pytest.raises(InputError):
        apply_overrides({"a": 1}, ["a.b=1"])
    with pytest.raises(InputError):
        apply_overrides({}, ["novalue"])


def test_monitor_and_rate_outputs_validate(run_dir):
    traj = str(run_dir / "traj.csv")
    assert main(["monitor", traj]) == 0
    cert = json.loads((run_dir / "certificate.json").read_text())
    validate(cert, schemas.CERTIFICATE)
    assert cert["a_max"] == pytest.approx(1.5)
    assert main(["rate", traj, "--out", str(run_dir / "r")]) == 0
    rep = json.loads((run_dir / "r" / "rate.json").read_text())
    validate(rep, schemas.RATE_REPORT)
    assert rep["classification"] == "linear"


def test_monitor_window(run_dir):
    assert main(["monitor", str(run_dir / "traj.csv"), "--window", "2:5"]) == 0
    cert = json.loads((run_dir / "certificate.json").read_text())
    assert [row["k"] for row in cert["per_k"]] == [2, 3, 4]


def test_geometry_probe_and_point(tmp_path):
    cfg = {"problem": {"kind": "pow_abs", "alpha": 0.5}, "rng_seed": 1,
           "geometry": {"mode": "probe", "radii": [0.1, 0.01, 0.001], "q": 1 / 3, "M": 1.0,
                        "sampler": {"levels": 16, "n_pairs": 500}}}
    out = tmp_path / "g"
    assert main(["geometry", "--config", write_cfg(tmp_path, cfg), "--out", str(out)]) == 0
    validate(json.loads((out / "probe.json").read_text()), schemas.PROBE_SUMMARY)
    assert (out / "probe.csv").read_text().startswith("r,sigma0,sigma1,L_hat,lhs,rhs,holds")

    cfg = {"problem": {"kind": "dc_quadratic", "a_g": 2.0, "a_h": 1.0},
           "geometry": {"mode": "point", "x0": [1.0], "sampler": {"levels": 16}}}
    assert main(["geometry", "--config", write_cfg(tmp_path, cfg, "p.json"), "--out", str(out)]) == 0
    validate(json.loads((out / "geometry.json").read_text()), schemas.GEOMETRY_POINT)


def test_lemma_comparison_and_recurrence(tmp_path):
    cfg = {"lemma": {"kind": "comparison", "sequence": [1.0, 0.5, 0.25, 0.125], "q": 0.25}}
    out = tmp_path / "l"
    assert main(["lemma", "--config", write_cfg(tmp_path, cfg), "--out", str(out)]) == 0
    doc = json.loads((out / "lemma.json").read_text())
    validate(doc, schemas.LEMMA_OUTPUT)
    assert doc["holds"] is True

    cfg = {"lemma": {"kind": "recurrence", "a0": 1.0, "sigma": 1.0, "p": 0.5, "n": 30}}
    assert main(["lemma", "--config", write_cfg(tmp_path, cfg, "r.json"), "--out", str(out)]) == 0
    doc = json.loads((out / "lemma.json").read_text())
    validate(doc, schemas.LEMMA_OUTPUT)
    assert doc["max_residual"] <= 1e-12
    assert (out / "recurrence.csv").read_text().startswith("k,a\n0,1.0\n")


def test_suite_subset(tmp_path):
    out = tmp_path / "s"
    assert main(["suite", "--only", "1,4", "--out", str(out)]) == 0
    validate(json.loads((out / "suite.json").read_text()), schemas.SUITE_REPORT)
    for cid in (1, 4):
        validate(json.loads((out / f"c{cid:02d}" / "result.json").read_text()),
                 schemas.CRITERION_RESULT)
    assert main(["suite", "--only", "99", "--out", str(out)]) == 2


@pytest.mark.parametrize("cfg", [
    {"algorithm": {"kind": "proximal"}, "x0": [1.0]},
    {"problem": {"kind": "nope"}, "algorithm": {"kind": "proximal"}, "x0": [1.0]},
    {"problem": {"kind": "quadratic"}, "algorithm": {"kind": "newton"}, "x0": [1.0]},
    {"problem": {"kind": "quadratic"}, "algorithm": {"kind": "proximal", "bogus": 1}, "x0": [1.0]},
    {"problem": {"kind": "quadratic"}, "algorithm": {"kind": "proximal"}, "x0": [1.0, 2.0]},
])
def test_bad_run_configs_exit_2(tmp_path, cfg, capsys):
    assert main(["run", "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path)]) == 2
    assert "input error" in capsys.readouterr().err


def test_missing_and_malformed_inputs_exit_2(tmp_path):
    assert main(["run", "--config", str(tmp_path / "absent.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["monitor", str(tmp_path / "absent.csv")]) == 2
    assert main(["lemma", "--config", write_cfg(tmp_path, {"lemma": {"kind": "other"}})]) == 2


def test_short_trajectory_rate_exits_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, QUAD_RUN)
    out = tmp_path / "short"
    assert main(["run", "--config", cfg, "--out", str(out),
                 "--override", "algorithm.max_iters=2"]) == 0
    assert main(["rate", str(out / "traj.csv")]) == 2
    assert "need at least" in capsys.readouterr().err


def test_unclassifiable_rate_exits_3(tmp_path, capsys):
    # gaps alternate between two decaying scales, matching no rate pattern
    vals = [1, .1, .5, .01, .4, .001, .3, 1e-4, .2, 1e-5, .1, 1e-6]
    t = Trajectory.from_iterates("synthetic", "synthetic", [[v] for v in vals], vals,
                                 reference_value=0.0, reference_source="known_minimizer",
                                 reference_point=[0.0])
    csv_path, _ = write_trajectory(t, tmp_path)
    assert main(["rate", str(csv_path)]) == 3
    assert "runtime error" in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "plkdescent.cli", "--help"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("run", "monitor", "rate", "geometry", "lemma", "suite"):
        assert cmd in out.stdout
