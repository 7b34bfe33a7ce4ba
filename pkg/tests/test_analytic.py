import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lbstefan.analytic import (
    StefanCaseParams,
    erf,
    erfc,
    exact_theta,
    initial_time_for_front,
    interface_position,
    solve_lambda,
    stefan_residual,
)

TABLE1 = StefanCaseParams(Ste=0.2857, theta0=-0.5)


def bisect_lambda(params, lo=1e-8, hi=5.0):
    """Plain bisection on the Stefan condition, written with mpmath."""
    mpmath.mp.dps = 40
    Ste, th0 = mpmath.mpf(params.Ste), mpmath.mpf(params.theta0)

    def r(lam):
        return (
            mpmath.exp(-lam**2) / mpmath.erf(lam)
            + th0 * mpmath.exp(-lam**2) / mpmath.erfc(lam)
            - lam * mpmath.sqrt(mpmath.pi) / Ste
        )

    lo, hi = mpmath.mpf(lo), mpmath.mpf(hi)
    for _ in range(200):
        mid = (lo + hi) / 2
        if r(mid) > 0:
            lo = mid
        else:
            hi = mid
    return float((lo + hi) / 2)


# erf ----------------------------------------------------------------------------


def test_erf_basic_values():
    assert erf(0.0) == 0.0
    assert erfc(0.0) == 1.0


def test_erf_one_against_quadrature():
    mpmath.mp.dps = 30
    quad = 2 / mpmath.sqrt(mpmath.pi) * mpmath.quad(lambda s: mpmath.exp(-s * s), [0, 1])
    assert abs(float(quad) - 0.842700792949715) < 1e-15
    assert abs(erf(1.0) - float(quad)) < 1e-15


@pytest.mark.parametrize("z", np.linspace(-6, 6, 97))
def test_erf_accuracy(z):
    mpmath.mp.dps = 30
    assert abs(erf(z) - float(mpmath.erf(z))) <= 1e-14
    assert erf(-z) == -erf(z)


@pytest.mark.parametrize("z", [3.0, 6.0, 10.0, 20.0])
def test_erfc_large_argument_relative(z):
    mpmath.mp.dps = 40
    exact = float(mpmath.erfc(z))
    assert erfc(z) == pytest.approx(exact, rel=1e-13)


# lambda --------------------------------------------------------------------------


def test_lambda_table1_residual_and_oracle():
    sol = solve_lambda(TABLE1)
    assert abs(sol.residual) < 1e-12
    assert sol.lam == pytest.approx(bisect_lambda(TABLE1), abs=1e-12)
    assert sol.lam == pytest.approx(0.3142495621186, abs=1e-12)


def test_lambda_2d_parameters():
    params = StefanCaseParams(Ste=0.0521, theta0=-2.0)
    sol = solve_lambda(params)
    assert abs(sol.residual) < 1e-12
    assert sol.lam == pytest.approx(bisect_lambda(params), abs=1e-12)


def test_lambda_increases_with_ste():
    low = solve_lambda(StefanCaseParams(0.2857, -0.5)).lam
    high = solve_lambda(StefanCaseParams(0.6, -0.5)).lam
    assert high > low


@settings(max_examples=25, deadline=None)
@given(Ste=st.floats(0.01, 5.0), theta0=st.floats(-5.0, -0.01))
def test_lambda_residual_property(Ste, theta0):
    sol = solve_lambda(StefanCaseParams(Ste, theta0))
    assert sol.lam > 0
    assert abs(sol.residual) < 1e-12 * max(1.0, 1.0 / Ste)


def test_params_validation():
    with pytest.raises(ValueError):
        StefanCaseParams(Ste=-1, theta0=-0.5)
    with pytest.raises(ValueError):
        StefanCaseParams(Ste=0.3, theta0=0.5)


def test_no_bracket_raises(monkeypatch):
    import lbstefan.analytic as an

    monkeypatch.setattr(an, "LAMBDA_BRACKET", (2.0, 5.0))
    with pytest.raises(ValueError, match="no sign change"):
        an.solve_lambda(TABLE1)


# profiles ------------------------------------------------------------------------

SOL = solve_lambda(TABLE1)


def test_wall_value():
    assert exact_theta(SOL, 0.0, 0.01) == pytest.approx(1.0, abs=1e-15)


def test_interface_is_zero_and_continuous():
    t = 0.0128
    xf = interface_position(SOL, t)
    assert abs(exact_theta(SOL, xf, t)) < 1e-14
    h = 1e-12
    left, right = exact_theta(SOL, xf - h, t), exact_theta(SOL, xf + h, t)
    assert abs(left - right) < 1e-10


def test_far_field():
    t = 0.01
    assert exact_theta(SOL, 10 * math.sqrt(t), t) == pytest.approx(-0.5, abs=1e-10)


def test_flux_jump_matches_front_speed():
    t, h = 0.0128, 1e-6
    xf = interface_position(SOL, t)
    liquid = (exact_theta(SOL, xf - h, t) - exact_theta(SOL, xf - 3 * h, t)) / (2 * h)
    solid = (exact_theta(SOL, xf + 3 * h, t) - exact_theta(SOL, xf + h, t)) / (2 * h)
    # one-sided central differences stay inside each phase
    jump = -liquid + solid
    assert jump == pytest.approx(SOL.lam / (TABLE1.Ste * math.sqrt(t)), rel=1e-4)


@pytest.mark.parametrize("x", [0.02, 0.05, 0.12, 0.3])
def test_heat_equation_residual(x):
    t, h, k = 0.0128, 1e-4, 1e-4
    dt = (exact_theta(SOL, x, t + k) - exact_theta(SOL, x, t - k)) / (2 * k)
    dxx = (exact_theta(SOL, x + h, t) - 2 * exact_theta(SOL, x, t) + exact_theta(SOL, x - h, t)) / h**2
    assert abs(dt - dxx) < 1e-4 * max(1.0, abs(dt))


def test_exact_theta_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        exact_theta(SOL, 0.1, 0.0)


def test_interface_position_scaling():
    assert interface_position(SOL, 0.0) == 0.0
    assert interface_position(SOL, 4 * 0.003) == pytest.approx(2 * interface_position(SOL, 0.003), rel=1e-15)


def test_initial_time_for_front():
    t0 = initial_time_for_front(SOL, 0.01)
    assert t0 == pytest.approx((0.01 / (2 * SOL.lam)) ** 2, rel=1e-15)
    assert interface_position(SOL, t0) == pytest.approx(0.01, rel=1e-14)
    assert initial_time_for_front(SOL, 2 * SOL.lam) == pytest.approx(1.0, rel=1e-15)
    with pytest.raises(ValueError):
        initial_time_for_front(SOL, 0.0)


@pytest.mark.parametrize("x", [1e-4, 0.01, 0.3, 2.5])
def test_front_time_roundtrip(x):
    assert interface_position(SOL, initial_time_for_front(SOL, x)) == pytest.approx(x, rel=1e-14)


def test_residual_sign_at_bracket():
    assert stefan_residual(1e-8, TABLE1) > 0 > stefan_residual(5.0, TABLE1)
