import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plkdescent import _kernels_py as ref
from plkdescent import kernels

compiled = pytest.importorskip("plkdescent._kernels", reason="compiled kernels not built")


def test_backend_prefers_compiled():
    assert kernels.BACKEND == "cython"


def test_env_var_forces_fallback():
    env = dict(os.environ, PLKDESCENT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import plkdescent; print(plkdescent.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_pow_residual_closed_form():
    # u + 1.5 sqrt(u) = 1 has sqrt(u) = 1/2
    for mod in (ref, compiled):
        u, its = mod.solve_pow_residual(1.0, 1.5, 0.5)
        assert u == 0.25 and its > 0


@pytest.mark.parametrize("args", [(-1.0, 1.0, 0.5), (1.0, 0.0, 0.5), (1.0, 1.0, 0.0)])
def test_pow_residual_domain(args):
    for mod in (ref, compiled):
        with pytest.raises(ValueError):
            mod.solve_pow_residual(*args)


def test_pow_residual_zero_target():
    for mod in (ref, compiled):
        assert mod.solve_pow_residual(0.0, 1.0, 0.5) == (0.0, 0)


@settings(max_examples=300, deadline=None)
@given(st.floats(0.0, 1e6), st.floats(1e-6, 1e3), st.floats(0.05, 4.0))
def test_pow_residual_backends_agree_bitwise(target, scale, power):
    a = ref.solve_pow_residual(target, scale, power)
    b = compiled.solve_pow_residual(target, scale, power)
    assert a == b
    u = a[0]
    assert u >= 0.0
    # the root lies within one float of u (up to rounding in evaluating the map)
    f = lambda v: v + scale * v ** power
    slack = 8 * np.finfo(float).eps * target
    assert f(np.nextafter(u, 0.0)) <= target + slack
    assert f(np.nextafter(u, np.inf)) >= target - slack


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 30), st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def test_pair_slope_backends_agree(m, n, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((m, n))
    G = rng.standard_normal((m, n))
    assert compiled.max_pair_slope(X, G) == pytest.approx(ref.max_pair_slope(X, G), rel=1e-14)


def test_pair_slope_linear_map():
    X = np.linspace(-1, 1, 7).reshape(-1, 1)
    for mod in (ref, compiled):
        assert mod.max_pair_slope(X, 3.0 * X) == pytest.approx(3.0)
        assert mod.max_pair_slope(X[:, 0], 3.0 * X[:, 0]) == pytest.approx(3.0)
        assert mod.max_pair_slope(np.zeros((3, 1)), np.ones((3, 1))) == 0.0


def test_pair_slope_shape_mismatch():
    for mod in (ref, compiled):
        with pytest.raises(ValueError):
            mod.max_pair_slope(np.zeros((3, 1)), np.zeros((3, 2)))
