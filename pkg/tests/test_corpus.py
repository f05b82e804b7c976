import math

import numpy as np
import pytest

from genpe.corpus import (
    SCENARIO_NAMES,
    a,
    builtin_scenario,
    builtin_scenarios,
    example_gamma_min,
    example_integral,
    example_signal,
)
from genpe.criteria import CriterionConfig, classical_pe
from genpe.errors import BadParameters, TauOutOfRange
from genpe.signal import cumulative, validate
from genpe.spectral import eig_bounds


def test_sequence():
    assert [a(n) for n in range(7)] == [0, 1, 3, 6, 10, 15, 21]
    assert all(a(n + 1) - (a(n) + 1) == n for n in range(1, 40))


@pytest.mark.parametrize("t, diag", [(3.2, [1, 0]), (2.0, [0, 1]), (0.5, [0, 1]), (1.5, [0, 1]),
                                     (6.0, [1, 0]), (7.0, [0, 1])])
def test_example_signal_values(intermittent, t, diag):
    np.testing.assert_array_equal(intermittent.evaluate(t), np.diag(diag))


def test_example_signal_trace_one(intermittent):
    t = np.linspace(0, a(25), 5001)
    P = intermittent.evaluate_many(t)
    np.testing.assert_array_equal(np.trace(P, axis1=1, axis2=2), 1.0)
    assert validate(intermittent, t).passed


def test_example_signal_covers_horizon():
    sig = example_signal(100)
    bps = sig.breakpoints_in(0, math.inf)
    assert a(13) + 1 in bps and a(14) not in bps


@pytest.mark.parametrize("nu, tau, expected", [(2.75, 0.5, 0.25), (1.0, 0.5, 0.0), (3.5, 0.5, 0.0),
                                               (3.9, 0.5, 0.1), (2.6, 0.8, 0.4), (15.8, 0.3, 0.1)])
def test_gamma_min_table(nu, tau, expected):
    assert example_gamma_min(nu, tau) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("tau", [0.0, 1.0, -0.2])
def test_gamma_min_tau_range(tau):
    with pytest.raises(TauOutOfRange):
        example_gamma_min(3.0, tau)


def test_gamma_min_matches_generic_pipeline(intermittent, rng):
    nu = rng.uniform(0, 120, 10_000)
    tau = rng.uniform(1e-3, 1 - 1e-3, 10_000)
    Q = intermittent.antiderivative(nu + tau) - intermittent.antiderivative(nu)
    generic = np.maximum(eig_bounds(Q)[0], 0.0)
    closed = np.array([example_gamma_min(v, s) for v, s in zip(nu, tau)])
    assert np.abs(generic - closed).max() <= 1e-9
    # Spot-check against the general cumulative path too.
    for v, s in zip(nu[:20], tau[:20]):
        m = cumulative(intermittent, v, s).matrix
        assert np.linalg.eigvalsh(m)[0] == pytest.approx(example_gamma_min(v, s), abs=1e-9)


@pytest.mark.parametrize("n, S, expected", [(2, 0.5, 0.125 / 6), (6, 0.5, 5 * 0.125 / 6)])
def test_example_integral(n, S, expected):
    assert example_integral(n, S) == pytest.approx(expected, rel=1e-15)


def test_example_integral_vanishing_window():
    assert example_integral(5, 1e-9) < 1e-26


@pytest.mark.parametrize("n, S", [(1, 0.5), (2.5, 0.5), (3, 0.0), (3, 1.0)])
def test_example_integral_bad_parameters(n, S):
    with pytest.raises(BadParameters):
        example_integral(n, S)


def test_builtin_scenarios_complete():
    names = [s.name for s in builtin_scenarios()]
    assert names == list(SCENARIO_NAMES)
    assert {"paper-example", "constant-identity", "slow-decay", "integrable-decay",
            "rotating-regressor", "zero"} <= set(names)
    with pytest.raises(BadParameters):
        builtin_scenario("nope")


@pytest.mark.parametrize("name", SCENARIO_NAMES)
def test_scenarios_are_valid(name):
    scn = builtin_scenario(name)
    assert scn.omega.S < scn.simulation.T
    assert validate(scn.signal, np.linspace(0, scn.simulation.T, 201)).passed
    assert scn.oracles


def test_constant_identity_window_integral():
    scn = builtin_scenario("constant-identity")
    np.testing.assert_allclose(cumulative(scn.signal, 7.0, 1.5).matrix, 1.5 * np.eye(2))


def test_rotating_regressor_full_period():
    scn = builtin_scenario("rotating-regressor")
    for t0 in (0.0, 1.234):
        q = cumulative(scn.signal, t0, 2 * math.pi).matrix
        np.testing.assert_allclose(q, math.pi * np.eye(2), atol=1e-5)


@pytest.mark.parametrize("delta", [0.5, 1.0, 5.0, 20.0, 23.5])
def test_classical_fails_on_example_for_any_window(delta):
    # The last gap below a_25 is 24 long.
    T = float(a(25))
    rep = classical_pe(example_signal(), CriterionConfig(criterion="classical-PE", S=0.5, horizon=T,
                                                         alpha=1e-6, delta=delta))
    assert not rep.holds
