import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plkdescent import geometry as geo
from plkdescent.core import CapabilityError, DomainError
from plkdescent.problems import DCAbs, DCQuadratic, PiecewisePlus, PowAbs, Quadratic

FAST = geo.LevelSampler(levels=24, n_pairs=2000)


def test_sigma_at_concave_kink_tie_breaks_up():
    # g = x^2, h = |x| at 0: grad g = 0, subdifferential [-1, 1]
    p = DCAbs(1.0, 0.0)
    s1, v1 = geo.sigma1(p, [0.0])
    assert s1 == 1.0 and v1.tolist() == [1.0]
    assert geo.sigma0(p, [0.0]) == 0.0
    assert geo.variational_gap(p, [0.0]) == pytest.approx(0.0, abs=1e-10)


def test_sigma_singleton_cases():
    p = DCAbs(1.0, 0.0)
    s1, v1 = geo.sigma1(p, [1.0])
    assert s1 == pytest.approx(1.0) and geo.sigma0(p, [1.0]) == pytest.approx(1.0)
    assert geo.sigma1(DCQuadratic(2.0, 1.0, 1), [1.0])[0] == pytest.approx(1.0)


def test_sigma0_outside_interval_is_endpoint_distance():
    # rho = 1: g = 1.5 x^2, h = |x| + x^2/2 at 0 -> grad g = 0, set [-1, 1] shifted by 0
    p = DCAbs(0.25, 1.0)
    assert geo.sigma0(p, [0.0]) == 0.0
    # g'(x) = 3x, h'(x) = 0.25 + x at x = 1: distance |3 - 1.25|
    assert geo.sigma0(p, [1.0]) == pytest.approx(1.75)


def test_steepest_direction_definition():
    p = DCAbs(1.0, 1.0)
    d = geo.steepest_direction(p, [0.0])
    assert d.tolist() == [-1.0]


def test_sigma_needs_dc():
    with pytest.raises(CapabilityError):
        geo.sigma1(PiecewisePlus(), [0.0])


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 3), st.floats(0.0, 2.0))
def test_sigma_order_and_vertex_optimality(x, c, rho):
    p = DCAbs(c, rho)
    s0 = geo.sigma0(p, [x])
    s1, _ = geo.sigma1(p, [x])
    assert s0 <= s1 + 1e-12
    assert abs(geo.variational_gap(p, [x])) <= 1e-10 * max(1.0, s1 * s1)


# --- level-set Lipschitz ----------------------------------------------------

def test_level_interval_quadratic():
    lo, hi, bounded = geo.level_interval(Quadratic(), [1.0])
    assert bounded
    assert lo == pytest.approx(-1.0, abs=1e-12) and hi == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("p, x0, L", [(Quadratic(1.0, 1), 0.7, 1.0), (DCQuadratic(2.0, 1.0, 1), 1.0, 2.0),
                                      (Quadratic(3.0, 1), -2.0, 3.0)])
def test_lipschitz_linear_gradient_exact(p, x0, L):
    est = geo.estimate_level_lipschitz(p, [x0], FAST)
    assert est.L_hat == pytest.approx(L, rel=1e-12)
    assert est.bounded


def test_lipschitz_powabs_half_pinned_pair():
    # the pair (0, x0) gives 1.5 sqrt(x0) / x0
    est = geo.estimate_level_lipschitz(PowAbs(0.5), [0.01], FAST)
    assert est.L_hat >= 1.5 * 0.01 ** -0.5 - 1e-9


def test_lipschitz_monotone_in_samples():
    p = PowAbs(0.5)
    prev = 0.0
    for levels in (4, 8, 16, 32):
        L = geo.estimate_level_lipschitz(p, [0.3], geo.LevelSampler(levels=levels)).L_hat
        assert L >= prev - 1e-12
        prev = L


def test_lipschitz_nd_quadratic():
    est = geo.estimate_level_lipschitz(DCQuadratic(2.0, 1.0, 2), [1.0, 0.5],
                                       geo.LevelSampler(n_pairs=800))
    assert est.L_hat == pytest.approx(2.0, rel=1e-9)
    assert est.n_points > 1


# --- level decrease ---------------------------------------------------------

def test_level_decrease_quadratic_equality_at_inverse_L():
    res = geo.verify_level_decrease(Quadratic(1.0, 1), [1.0])
    assert res.L_hat == pytest.approx(1.0)
    assert res.min_margin >= -1e-9
    last = res.rows[-1]
    assert last.alpha == pytest.approx(1.0)
    # at alpha = 1/L the step lands on the minimizer: all three sides equal 1/2
    assert last.lhs1 == pytest.approx(0.5) and last.lhs2 == pytest.approx(0.5)
    assert last.rhs == pytest.approx(0.5)


def test_level_decrease_grid_and_json():
    res = geo.verify_level_decrease(DCQuadratic(2.0, 1.0, 1), [1.0], alphas=np.linspace(0, 0.5, 11))
    assert len(res.rows) == 11 and all(r.holds for r in res.rows)
    js = res.to_json()
    assert set(js) >= {"rows", "L_hat", "min_margin"}
    assert not res.refine_L


def test_level_decrease_flags_underestimated_L():
    res = geo.verify_level_decrease(Quadratic(1.0, 1), [1.0], L_hat=0.25,
                                    alphas=[1.0, 2.0, 4.0])
    assert res.refine_L
    assert res.min_margin < 0


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(0.2, 4.0).filter(lambda v: abs(v - 1.0) > 1e-3))
def test_level_decrease_holds_with_exact_L(x0, ag):
    p = DCQuadratic(ag + 1.0, 1.0, 1)
    res = geo.verify_level_decrease(p, [x0], L_hat=ag + 1.0)
    assert res.min_margin >= -1e-9 * max(1.0, x0 * x0)


# --- exponent / Lipschitz probe --------------------------------------------

def test_probe_quadratic_signature():
    q = 0.25
    tab = geo.exponent_lipschitz_probe(Quadratic(1.0, 1), [1.0, 0.5, 0.1, 1e-2, 1e-3], q, 1.0, cfg=FAST)
    assert tab.rhs_bounded
    lhs = [r[4] for r in tab.rows]
    assert all(b > a for a, b in zip(lhs, lhs[1:]))
    assert tab.failure_radius == 0.5
    # M r^(2q-1) = sqrt(2) crosses (2L)^q = 2^q at r = 2^(q/(2q-1))
    assert tab.crossover_radius == pytest.approx(2 ** (q / (2 * q - 1)), abs=1e-9)


def test_probe_powabs_matching_slopes():
    tab = geo.exponent_lipschitz_probe(PowAbs(0.5), [1e-1, 1e-2, 1e-3, 1e-4], 1 / 3, 1.0, cfg=FAST)
    assert abs(tab.slopes["lhs"] - tab.slopes["rhs"]) <= 0.05
    assert tab.slopes["lhs"] == pytest.approx(-1 / 6, abs=0.02)
    assert tab.slopes["L_hat"] == pytest.approx(-0.5, abs=0.1)
    assert tab.summary()["all_hold"]


def test_probe_csv_format():
    tab = geo.exponent_lipschitz_probe(Quadratic(), [1.0, 0.1], 0.25, 1.0, cfg=FAST)
    lines = tab.csv().splitlines()
    assert lines[0] == "r,sigma0,sigma1,L_hat,lhs,rhs,holds"
    assert lines[1].endswith(",true") and lines[2].endswith(",false")


@pytest.mark.parametrize("q, M", [(0.5, 1.0), (0.0, 1.0), (0.25, 0.0)])
def test_probe_domain(q, M):
    with pytest.raises(DomainError):
        geo.exponent_lipschitz_probe(Quadratic(), [1.0], q, M)


def test_probe_point_bundle():
    res = geo.probe_point(DCQuadratic(2.0, 1.0, 1), [1.0], 0.25, 1.0, FAST)
    js = res.to_json()
    assert js["sigma0"] <= js["sigma1"]
    np.testing.assert_allclose(js["d"], [1.0])
    assert js["L_hat"] == pytest.approx(2.0)
    lhs, rhs, holds = res.est_check
    assert lhs == pytest.approx(1.0) and rhs == pytest.approx(4 ** 0.25) and holds
