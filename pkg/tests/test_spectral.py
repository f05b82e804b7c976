import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from genpe.errors import NotSymmetric
from genpe.signal import ClosedFormSignal, QuadratureConfig, constant_signal
from genpe.spectral import (
    assemble_A,
    eig_bounds,
    extrema,
    integrated_A_direct,
    integrated_A_profile,
    spectral_extrema,
)
from genpe.truncation import TruncationFunction

ONE = constant_signal([[1.0]])
TRI1 = TruncationFunction.triangular(1.0)


@pytest.mark.parametrize("tau", [0.1, 0.5, 0.9])
def test_scalar_unit_signal_operator(tau):
    A = assemble_A(ONE, TRI1, 3.0, tau).matrix
    assert A[0, 0] == pytest.approx(tau + (1 - tau) * 2 * tau, abs=1e-14)


def test_scalar_operator_spot_value():
    assert assemble_A(ONE, TRI1, 0.0, 0.5).matrix[0, 0] == pytest.approx(1.0)


def test_operator_vanishes_at_zero_offset(intermittent):
    assert np.all(assemble_A(intermittent, TruncationFunction.triangular(0.5), 3.2, 0.0).matrix == 0)


@pytest.mark.parametrize("tau", [1.0, 1.7])
def test_operator_vanishes_beyond_support(tau):
    assert np.all(assemble_A(constant_signal(np.eye(2)), TRI1, 0.0, tau).matrix == 0)


@pytest.mark.parametrize("m, lo, hi", [
    (np.diag([0.3, 0.7]), 0.3, 0.7),
    ([[2.0, 1.0], [1.0, 2.0]], 1.0, 3.0),
    (np.zeros((2, 2)), 0.0, 0.0),
])
def test_extrema_examples(m, lo, hi):
    e = extrema(m)
    assert e.lo == pytest.approx(lo, abs=1e-12) and e.hi == pytest.approx(hi, abs=1e-12)
    assert abs(np.linalg.norm(e.vec_lo) - 1) <= 1e-12 and abs(np.linalg.norm(e.vec_hi) - 1) <= 1e-12


def test_extrema_rejects_asymmetric():
    with pytest.raises(NotSymmetric):
        extrema([[1.0, 2.0], [0.0, 1.0]])


@given(st.integers(1, 6), st.integers(0, 2**31))
def test_extrema_bracket_rayleigh_quotients(n, seed):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(n, n))
    M = B + B.T
    e = extrema(M)
    v = rng.normal(size=(100, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = np.einsum("ki,ij,kj->k", v, M, v)
    tol = 1e-10 * max(1.0, np.abs(M).max())
    assert np.all(r >= e.lo - tol) and np.all(r <= e.hi + tol)
    ref = np.linalg.eigvalsh(M)
    assert e.lo == pytest.approx(ref[0], abs=tol) and e.hi == pytest.approx(ref[-1], abs=tol)


@given(st.integers(1, 3), st.integers(0, 2**31))
def test_closed_form_bounds_agree_with_lapack(n, seed):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(5, n, n))
    M = B + np.swapaxes(B, 1, 2)
    lo, hi = eig_bounds(M)
    ref = np.linalg.eigvalsh(M)
    np.testing.assert_allclose(lo, ref[:, 0], atol=1e-12)
    np.testing.assert_allclose(hi, ref[:, -1], atol=1e-12)


def test_profile_scalar_unit_signal():
    assert integrated_A_profile(ONE, TRI1, 2.0)[0, 0] == pytest.approx(5 / 6, abs=1e-14)


def test_profile_zero_signal():
    assert np.all(integrated_A_profile(constant_signal(np.zeros((2, 2))), TRI1, 1.0) == 0)


def test_profile_intermittent_first_channel_idle(intermittent):
    M = integrated_A_profile(intermittent, TruncationFunction.triangular(0.5), 4.0)
    assert M[0, 0] == 0.0 and M[0, 1] == 0.0
    # Second channel sees P = 1 on the whole window.
    assert M[1, 1] == pytest.approx(0.5**2 / 2 + 0.5**3 / 3, abs=1e-14)


def test_direct_and_profile_agree_piecewise(intermittent, rng):
    omega = TruncationFunction.triangular(0.5)
    for t in rng.uniform(0, 40, 30):
        d = integrated_A_direct(intermittent, omega, t)
        p = integrated_A_profile(intermittent, omega, t)
        assert np.abs(d - p).max() <= 1e-9


def test_direct_and_profile_agree_smooth_within_step():
    sig = ClosedFormSignal(lambda t: np.array([[1 + math.sin(t), 0.3], [0.3, 1.0]]), 2)
    omega = TruncationFunction.smooth_bump(2.0)
    quad = QuadratureConfig(h=1e-2)
    for t in (0.0, 1.3, 7.7):
        d = integrated_A_direct(sig, omega, t, quad)
        p = integrated_A_profile(sig, omega, t, quad)
        assert np.abs(d - p).max() <= quad.h
        assert abs(np.trace(d) - np.trace(p)) <= quad.h


def test_scalar_operator_is_nonnegative():
    sig = ClosedFormSignal(lambda t: np.array([[1 / (1 + t)]]), 1)
    for t in (0.0, 5.0):
        for tau in np.linspace(0, 1, 11):
            assert assemble_A(sig, TRI1, t, tau).matrix[0, 0] >= 0


def test_spectral_extrema_fields(intermittent):
    e = spectral_extrema(intermittent, TruncationFunction.triangular(0.5), 2.75, 0.5)
    assert e.gamma_min == pytest.approx(0.25) and e.gamma_max == pytest.approx(0.25)
    assert e.lambda_min <= e.lambda_max
