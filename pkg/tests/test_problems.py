import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from plkdescent.core import CapabilityError, DimensionError, DomainError, SolverError
from plkdescent.problems import (BUILTINS, DCAbs, DCQuadratic, PiecewisePlus, PowAbs, Quadratic,
                                 SubgradientSet, dc_parts, evaluate, problem_from_spec,
                                 prox_residual, prox_step, subgrad_dist)


def grid_prox(p, x, lam, half=3.0, n=600001):
    """Independent oracle: dense grid search of the 1-D prox objective."""
    u = np.linspace(x - half, x + half, n)
    u = np.append(u, 0.0)
    obj = np.array([p.value(np.array([v])) for v in u]) + (u - x) ** 2 / (2 * lam)
    return float(u[int(np.argmin(obj))])


# --- value / subgradient oracles ------------------------------------------

@pytest.mark.parametrize("p, x, expected", [
    (PowAbs(0.5), [4.0], 8.0),
    (PiecewisePlus(), [-2.0], 2.0),
    (PiecewisePlus(), [4.0], 8.0),
    (Quadratic(1.0, 2), [3.0, 4.0], 12.5),
    (DCQuadratic(2.0, 1.0, 1), [2.0], 2.0),
    (DCAbs(1.0, 1.0), [0.5], -0.25),
])
def test_evaluate(p, x, expected):
    assert evaluate(p, x) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("p, x, expected", [
    (PiecewisePlus(), [0.0], 0.0),
    (PiecewisePlus(), [-1.0], 1.0),
    (PowAbs(0.5), [4.0], 3.0),
    (DCAbs(1.0, 1.0), [0.0], 1.0),
    (DCAbs(1.0, 1.0), [0.5], 0.0),
    (Quadratic(2.0, 2), [3.0, 4.0], 10.0),
])
def test_subgrad_dist(p, x, expected):
    assert subgrad_dist(p, x) == pytest.approx(expected, abs=1e-15)


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        evaluate(Quadratic(1.0, 2), [1.0])


def test_gradient_only_where_differentiable():
    with pytest.raises(CapabilityError):
        PiecewisePlus().gradient(np.array([0.0]))
    np.testing.assert_allclose(PowAbs(1.0).gradient(np.array([3.0])), [6.0])


# --- proximal maps ----------------------------------------------------------

@pytest.mark.parametrize("p, x, lam, expected", [
    (Quadratic(1.0, 1), [1.0], 1.0, 0.5),
    (PiecewisePlus(), [-1.0], 0.3, -0.7),
    (PiecewisePlus(), [-0.2], 0.3, 0.0),
    # u + 1.5 sqrt(u) = 1 gives sqrt(u) = 1/2
    (PowAbs(0.5), [1.0], 1.0, 0.25),
])
def test_prox_frozen(p, x, lam, expected):
    assert prox_step(p, x, lam)[0] == pytest.approx(expected, abs=1e-15)


def test_prox_second_iterate_powabs():
    # u + 1.5 sqrt(u) = 0.25 solved as a quadratic in sqrt(u)
    s = (-1.5 + math.sqrt(2.25 + 1.0)) / 2.0
    assert s * s == pytest.approx(0.02291827170, rel=1e-9)
    assert prox_step(PowAbs(0.5), [0.25], 1.0)[0] == pytest.approx(s * s, rel=1e-13)


@pytest.mark.parametrize("p, x, lam", [
    (PowAbs(0.5), 0.8, 0.7), (PowAbs(3.0), -1.3, 0.4), (PiecewisePlus(), 0.9, 0.5),
    (PiecewisePlus(), -0.1, 0.5), (DCAbs(1.0, 1.0), 0.05, 1.0), (DCAbs(1.0, 1.0), -2.0, 0.3),
])
def test_prox_matches_grid_oracle(p, x, lam):
    assert prox_step(p, [x], lam)[0] == pytest.approx(grid_prox(p, x, lam), abs=2e-5)


def test_prox_rejects_nonpositive_lambda():
    with pytest.raises(DomainError):
        prox_step(Quadratic(), [1.0], 0.0)


def test_prox_step_detects_bad_oracle():
    class Broken(Quadratic):
        def prox(self, x, lam):
            return np.asarray(x) + 1.0
    with pytest.raises(SolverError):
        prox_step(Broken(), [1.0], 1.0)


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([PowAbs(0.5), PowAbs(1.0), PowAbs(3.0), PiecewisePlus(), DCAbs(1.0, 1.0),
                        Quadratic(2.0), DCQuadratic(2.0, 1.0)]),
       st.floats(-50, 50), st.floats(1e-3, 10))
def test_prox_is_stationary_and_not_beaten(p, x, lam):
    u = prox_step(p, [x], lam)
    assert prox_residual(p, [x], lam, u) <= 1e-10 * max(1.0, abs(x) / lam)
    obj = lambda v: p.value(np.array([v])) + (v - x) ** 2 / (2 * lam)
    best = obj(float(u[0]))
    for v in (0.0, x, 0.5 * x, float(u[0]) * (1 + 1e-6) + 1e-9):
        assert best <= obj(v) + 1e-9 * (1 + abs(best))


# --- subgradient sets -------------------------------------------------------

def test_interval_projection_and_membership():
    s = SubgradientSet.interval(-1.0, 0.0)
    assert s.distance_to([0.5]) == 0.5
    assert s.contains([-0.3])
    np.testing.assert_array_equal(s.min_norm_element(), [0.0])
    with pytest.raises(DomainError):
        SubgradientSet.interval(1.0, 0.0)


def test_discrete_set_is_not_convexified():
    s = SubgradientSet.discrete([[-1.0], [1.0]])
    assert s.distance_to([0.0]) == 1.0
    assert not s.contains([0.0])


def test_polytope_projection_square():
    s = SubgradientSet.polytope([[0, 0], [1, 0], [0, 1], [1, 1]])
    np.testing.assert_allclose(s.nearest([2.0, 0.5]), [1.0, 0.5], atol=1e-9)
    assert s.distance_to([0.5, 0.5]) == pytest.approx(0.0, abs=1e-9)


def hull_dist_2d(V, p):
    """Independent oracle: 0 inside the hull, else the nearest vertex-pair segment."""
    V, p = np.asarray(V, float), np.asarray(p, float)
    m = len(V)
    res = linprog(np.zeros(m), A_eq=np.vstack([V.T, np.ones(m)]), b_eq=np.append(p, 1.0),
                  bounds=[(0, None)] * m, method="highs")
    if res.status == 0:
        return 0.0
    best = np.inf
    for i in range(m):
        for j in range(m):
            a, ab = V[i], V[j] - V[i]
            t = 0.0 if ab @ ab == 0 else np.clip((p - a) @ ab / (ab @ ab), 0, 1)
            best = min(best, float(np.linalg.norm(a + t * ab - p)))
    return best


coords = st.floats(-5, 5).map(lambda v: round(v, 3))


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(coords, coords), min_size=3, max_size=6),
       st.tuples(coords.map(lambda v: 1.6 * v), coords.map(lambda v: 1.6 * v)))
def test_polytope_projection_matches_oracle(verts, p):
    s = SubgradientSet.polytope(verts)
    near = s.nearest(p)
    assert s.distance_to(p) == pytest.approx(hull_dist_2d(verts, p), abs=1e-7)
    # the returned point lies in the hull
    assert hull_dist_2d(verts, near) <= 1e-7


def test_shift_moves_every_kind():
    for s in (SubgradientSet.singleton([1.0]), SubgradientSet.interval(0.0, 1.0),
              SubgradientSet.discrete([[0.0], [2.0]])):
        np.testing.assert_allclose(s.shift([1.0]).vertices, s.vertices + 1.0)


# --- DC decompositions and specs -----------------------------------------

@pytest.mark.parametrize("p", [DCQuadratic(2.0, 1.0, 1), DCAbs(1.0, 1.0), Quadratic(3.0, 1)])
def test_dc_split_reproduces_value(p):
    dc = dc_parts(p)
    for x in (-2.0, -0.3, 0.7, 1.9):
        xx = np.array([x])
        assert dc.g_value(xx) - dc.h_value(xx) == pytest.approx(p.value(xx), abs=1e-12)
        # the subproblem solution satisfies grad g(y) = u
        u = np.array([x])
        np.testing.assert_allclose(dc.g_grad(dc.solve_subproblem(u)), u, atol=1e-12)


def test_dc_missing():
    with pytest.raises(CapabilityError):
        dc_parts(PiecewisePlus())


def test_known_minimizers_are_stationary():
    for cls in BUILTINS.values():
        p = cls(0.5) if cls is PowAbs else cls()
        for m in p.known_minimizers:
            assert subgrad_dist(p, m) <= 1e-15


def test_problem_from_spec_roundtrip():
    for p in (PowAbs(0.5), PiecewisePlus(), Quadratic(2.0, 3), DCQuadratic(3.0, 1.0, 2), DCAbs(2.0, 0.5)):
        q = problem_from_spec(p.spec)
        assert q.id == p.id


@pytest.mark.parametrize("spec", [{}, {"kind": "nope"}, {"kind": "pow_abs", "beta": 1}, "pow_abs"])
def test_problem_from_spec_errors(spec):
    with pytest.raises(KeyError):
        problem_from_spec(spec)


@pytest.mark.parametrize("ctor", [lambda: PowAbs(0.0), lambda: Quadratic(-1.0),
                                  lambda: DCQuadratic(1.0, 2.0), lambda: DCAbs(0.0)])
def test_constructor_domains(ctor):
    with pytest.raises(DomainError):
        ctor()


@pytest.mark.parametrize("p, xs", [
    (PowAbs(0.5), np.linspace(-2, 2, 41)),
    (PowAbs(3.0), np.linspace(-2, 2, 41)),
    (PiecewisePlus(), np.linspace(-8 / 27, 2, 41)),
    (DCAbs(1.0, 1.0), np.linspace(0.05, 1.5, 30)),
])
def test_known_plk_holds(p, xs):
    prof = p.known_plk
    x_star = p.known_minimizer
    for x in xs:
        gap = p.value(np.array([x])) - p.value(x_star)
        if not 1e-12 < gap < prof.eta:
            continue
        d = subgrad_dist(p, [x])
        assert prof.M * (1 - prof.q) * gap ** (-prof.q) * d >= 1 - 1e-9
