import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from genpe.truncation import TruncationFunction, weight, weight_derivative, weight_mass

KNOTS = [(0, 2), (1, 1), (2, 0)]


def test_triangular_weight_value():
    assert weight(TruncationFunction.triangular(1.0), 0.25) == 0.75


@pytest.mark.parametrize("omega", [
    TruncationFunction.triangular(1.5),
    TruncationFunction.smooth_bump(1.5, peak=3.0),
    TruncationFunction.piecewise_linear([(0, 2), (0.5, 1), (1.5, 0)]),
])
def test_weight_vanishes_exactly_at_and_after_support(omega):
    assert weight(omega, omega.S) == 0.0
    assert np.all(omega.weight(np.array([omega.S, 2 * omega.S, 1e6])) == 0.0)


def test_smooth_bump_peak_at_origin():
    assert weight(TruncationFunction.smooth_bump(2.0, peak=3.5), 0.0) == 3.5


def test_triangular_derivative():
    omega = TruncationFunction.triangular(1.0)
    assert weight_derivative(omega, 0.5) == -1.0
    assert weight_derivative(omega, 2.0) == 0.0


def test_piecewise_linear_derivative_and_right_limit_at_knots():
    omega = TruncationFunction.piecewise_linear([(0, 3), (1, 1), (2, 0)])
    assert weight_derivative(omega, 0.5) == -2.0
    assert weight_derivative(omega, 1.5) == -1.0
    assert weight_derivative(omega, 1.0) == -1.0
    assert omega.derivative(1.0, side="left") == -2.0


def test_custom_knots_derivative_example():
    assert weight_derivative(TruncationFunction.piecewise_linear(KNOTS), 1.5) == -1.0


@pytest.mark.parametrize("S, mass", [(1.0, 0.5), (0.5, 0.125)])
def test_triangular_mass_closed_form(S, mass):
    assert weight_mass(TruncationFunction.triangular(S)) == mass


def test_custom_knots_mass():
    assert weight_mass(TruncationFunction.piecewise_linear(KNOTS)) == 2.0


def test_bump_derivative_matches_finite_difference():
    omega = TruncationFunction.smooth_bump(2.0, 1.5)
    tau = np.linspace(0.05, 1.9, 40)
    fd = (omega.weight(tau + 1e-6) - omega.weight(tau - 1e-6)) / 2e-6
    np.testing.assert_allclose(omega.derivative(tau), fd, atol=1e-6)


@given(st.lists(st.floats(0.01, 5), min_size=1, max_size=5), st.lists(st.floats(0.01, 5), min_size=5, max_size=5))
def test_piecewise_linear_mass_matches_quadrature(gaps, heights):
    taus = np.concatenate([[0.0], np.cumsum(gaps)])
    vals = list(heights[: len(gaps)]) + [0.0]
    omega = TruncationFunction.piecewise_linear(list(zip(taus, vals)))
    num = sum(integrate.quad(omega.weight, lo, hi, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
              for lo, hi in zip(taus[:-1], taus[1:]))
    assert omega.mass > 0
    assert abs(omega.mass - num) <= 1e-12 * max(1.0, omega.mass)


@given(st.floats(0.01, 10), st.floats(0, 30))
def test_weight_positive_iff_inside_support(S, tau):
    assert (weight(TruncationFunction.triangular(S), tau) > 0) == (tau < S)
    bump = weight(TruncationFunction.smooth_bump(S), tau)
    # The bump underflows to 0 only in the last 0.1% of its support.
    assert bump >= 0 and (bump > 0 or tau > 0.999 * S)


@pytest.mark.parametrize("omega", [
    TruncationFunction.triangular(2.0),
    TruncationFunction.smooth_bump(2.0),
    TruncationFunction.piecewise_linear([(0, 2), (0.3, 1.5), (2, 0)]),
])
def test_nonincreasing_kinds_have_nonpositive_derivative(omega, rng):
    assert omega.nonincreasing
    tau = rng.uniform(0, 3 * omega.S, 1000)
    tau = tau[~np.isin(tau, omega.breakpoints())]
    assert np.all(omega.derivative(tau) <= 0)


def test_increasing_knots_flag_not_nonincreasing():
    assert not TruncationFunction.piecewise_linear([(0, 1), (1, 2), (2, 0)]).nonincreasing


@pytest.mark.parametrize("bad", [
    dict(S=0.0),
    dict(S=-1.0),
    dict(S=1.0, kind="gaussian"),
    dict(S=1.0, kind="piecewise-linear", knots=((0, 1), (1, 0.5))),
    dict(S=1.0, kind="piecewise-linear", knots=((0.1, 1), (1, 0))),
])
def test_invalid_truncations_rejected(bad):
    with pytest.raises(ValueError):
        TruncationFunction(**bad)
