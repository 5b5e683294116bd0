"""Start-up Couette series: boundary values, limits and frozen regression values."""
import math

import numpy as np
import pytest

from cvmd.analytic import (CouetteParams, couette_shear_stress, couette_velocity,
                           cv_momentum_history, time_average)

P = CouetteParams(mu=1.6, rho=0.8, L=20.52, U0=1.0, n_terms=1000)

# frozen from an independent term-by-term sum with 1e5 modes
U_MID_T10 = 0.10474902921993168
HIST_T1 = (0.6383076486422923, -0.6383076486422922, -4.3283548718329693e-17)


def _direct_velocity(y, t, p, nmax):
    s = p.U0 * y / p.L
    for n in range(1, nmax + 1):
        E = math.exp(-((n * math.pi / p.L) ** 2) * p.nu * t)
        s += 2 * p.U0 * (-1) ** n / (n * math.pi) * E * math.sin(n * math.pi * y / p.L)
    return s


@pytest.mark.parametrize("t", [0.0, 0.01, 1.0, 10.0, 1e4])
def test_boundary_values(t):
    assert couette_velocity(0.0, t, P) == pytest.approx(0.0, abs=1e-12)
    assert couette_velocity(P.L, t, P) == pytest.approx(P.U0, abs=1e-12)


def test_steady_limit():
    assert couette_velocity(P.L / 2, 1e5, P) == pytest.approx(0.5, abs=1e-6)
    y = np.linspace(0, P.L, 11)
    np.testing.assert_allclose(couette_shear_stress(y, 1e5, P), -0.07797, atol=5e-6)
    np.testing.assert_allclose(couette_shear_stress(y, 1e5, P), -1.6 / 20.52, rtol=1e-12)


def test_regression_pin_velocity():
    assert couette_velocity(P.L / 2, 10.0, P) == pytest.approx(U_MID_T10, abs=1e-12)
    assert _direct_velocity(P.L / 2, 10.0, P, 100_000) == pytest.approx(U_MID_T10, abs=1e-8)


def test_regression_pin_history():
    got = cv_momentum_history(1.0, P)
    np.testing.assert_allclose(got, HIST_T1, atol=1e-8)
    big = cv_momentum_history(1.0, CouetteParams(mu=1.6, rho=0.8, L=20.52, n_terms=100_000))
    np.testing.assert_allclose(got, big, atol=1e-8)


def test_stress_matches_velocity_gradient():
    y = np.linspace(1.0, P.L - 1.0, 9)
    h = 1e-4
    du = (couette_velocity(y + h, 10.0, P) - couette_velocity(y - h, 10.0, P)) / (2 * h)
    np.testing.assert_allclose(couette_shear_stress(y, 10.0, P), -P.mu * du, atol=1e-4)


@pytest.mark.parametrize("t", [0.5, 1.0, 10.0, 100.0])
def test_history_identity_and_wall_values(t):
    dPdt, top, bottom = cv_momentum_history(t, P)
    assert dPdt == pytest.approx(-(top - bottom), rel=1e-12, abs=1e-15)
    A = P.dx * P.dz
    assert top == pytest.approx(A * couette_shear_stress(P.L, t, P), rel=1e-12)
    assert bottom == pytest.approx(A * couette_shear_stress(0.0, t, P), rel=1e-12, abs=1e-15)


def test_history_steady_state():
    dPdt, top, bottom = cv_momentum_history(1e6, P)
    assert dPdt == pytest.approx(0.0, abs=1e-12)
    assert top == pytest.approx(bottom, rel=1e-12)


def test_total_momentum_rate_matches_profile():
    # d/dt of rho * integral u dy equals dPdt per unit area
    t, h = 5.0, 1e-3
    y = np.linspace(0, P.L, 4001)

    def mom(tt):
        u = couette_velocity(y, tt, P)
        return P.rho * np.sum(0.5 * (u[1:] + u[:-1]) * np.diff(y))

    rate = (mom(t + h) - mom(t - h)) / (2 * h)
    assert rate == pytest.approx(cv_momentum_history(t, P)[0], rel=1e-5)


def test_time_average_of_constant():
    val = time_average(couette_velocity, P.L / 2, 1e5, 1e5 + 1, P)
    assert val == pytest.approx(0.5, abs=1e-6)


def test_errors():
    with pytest.raises(ValueError):
        couette_velocity(-0.1, 1.0, P)
    with pytest.raises(ValueError):
        couette_velocity(P.L + 0.1, 1.0, P)
    with pytest.raises(ValueError):
        couette_velocity(1.0, -1.0, P)
    with pytest.raises(ValueError):
        cv_momentum_history(0.0, P)
    with pytest.raises(ValueError):
        CouetteParams(mu=0.0)
