import math
from dataclasses import replace

import numpy as np
import pytest

from genpe.corpus import SCENARIO_NAMES, a, builtin_scenario, example_signal
from genpe.criteria import (
    CriterionConfig,
    Verdict,
    classical_pe,
    gpe_lower,
    gpe_upper,
    power_fit,
    simple_corollary,
    tail_statistics,
    weighted_corollary,
)
from genpe.errors import BadParameters, GridTooCoarse, TruncationNotNonincreasing
from genpe.signal import ClosedFormSignal, constant_signal
from genpe.truncation import TruncationFunction

ONE = constant_signal([[1.0]])
ZERO = constant_signal(np.zeros((2, 2)))
TRI1 = TruncationFunction.triangular(1.0)


def scalar(fn):
    return ClosedFormSignal(lambda t: fn(np.asarray(t)).reshape(-1, 1, 1), 1, vectorized=True)


INTEGRABLE = scalar(lambda t: (1 + t) ** -2.0)
SLOW = scalar(lambda t: 1 / (1 + t))


def cfg(**kw):
    kw.setdefault("criterion", "GPE-theorem")
    kw.setdefault("S", 1.0)
    return CriterionConfig(**kw)


# --- lower branch ------------------------------------------------------------


def test_gpe_lower_unit_scalar_closed_form():
    cert = gpe_lower(ONE, TRI1, cfg(horizon=10.0, threshold=5.0))
    assert cert.integral == pytest.approx(10 * 5 / 6, rel=1e-12)
    assert cert.verdict is Verdict.STABLE_CERTIFIED
    assert cert.power_fit[1] == pytest.approx(1.0, abs=1e-6)
    assert cert.gronwall_rate == pytest.approx(cert.integral / 0.5)


def test_gpe_lower_zero_signal_inconclusive():
    cert = gpe_lower(ZERO, TRI1, cfg(horizon=10.0))
    assert cert.integral == 0.0 and cert.verdict is Verdict.INCONCLUSIVE


def test_gpe_lower_integrable_decay_plateaus():
    cert = gpe_lower(INTEGRABLE, TRI1, cfg(horizon=100.0))
    assert cert.verdict is Verdict.INCONCLUSIVE
    assert cert.integral < 1.0
    assert cert.integral - cert.value_at(50.0) < 0.02


def test_gpe_lower_grid_too_coarse():
    with pytest.raises(GridTooCoarse):
        gpe_lower(SLOW, TRI1, cfg(horizon=10.0, tau_step=0.25))


# --- upper branch ------------------------------------------------------------


def test_gpe_upper_integrable_decay_not_stable():
    cert = gpe_upper(INTEGRABLE, TRI1, cfg(horizon=200.0))
    assert cert.verdict is Verdict.NOT_STABLE_CERTIFIED
    assert cert.params["tail_tol"] == pytest.approx(1e-3 * 0.5)


def test_gpe_upper_unit_scalar_inconclusive():
    assert gpe_upper(ONE, TRI1, cfg(horizon=10.0)).verdict is Verdict.INCONCLUSIVE


def test_gpe_upper_zero_signal_not_stable():
    cert = gpe_upper(ZERO, TRI1, cfg(horizon=20.0))
    assert cert.integral == 0.0 and cert.verdict is Verdict.NOT_STABLE_CERTIFIED


def test_gpe_upper_slow_decay_inconclusive():
    # Increments decay like 1/t: not fast enough to call convergent.
    assert gpe_upper(SLOW, TRI1, cfg(horizon=1000.0)).verdict is Verdict.INCONCLUSIVE


# --- weighted ------------------------------------------------------------------


def test_weighted_unit_scalar_matches_closed_form():
    cert = weighted_corollary(ONE, TRI1, cfg(criterion="weighted-corollary", horizon=12.0))
    assert cert.integral == pytest.approx(12 * 5 / 6, rel=1e-12)


def test_weighted_zero_signal_inconclusive():
    cert = weighted_corollary(ZERO, TRI1, cfg(criterion="weighted-corollary", horizon=5.0))
    assert cert.integral == 0.0 and cert.verdict is Verdict.INCONCLUSIVE


def test_weighted_rejects_increasing_weight():
    omega = TruncationFunction.piecewise_linear([(0, 1), (0.5, 2), (1, 0)])
    with pytest.raises(TruncationNotNonincreasing):
        weighted_corollary(ONE, omega, cfg(criterion="weighted-corollary"))


def test_weighted_intermittent_grows_with_completed_intervals():
    S = 0.5
    omega = TruncationFunction.triangular(S)
    c = cfg(criterion="weighted-corollary", S=S, horizon=float(a(10) + 1),
            sample_times=tuple(float(a(n) + 1) for n in range(2, 11)))
    cert = weighted_corollary(example_signal(a(10) + 1), omega, c)
    per = np.diff([cert.value_at(a(n) + 1) for n in range(2, 11)])
    # Each excitation interval contributes the same amount.
    np.testing.assert_allclose(per, per[0], rtol=1e-6)
    assert per[0] > 0


@pytest.mark.parametrize("fn", [lambda t: 1 / (1 + t), lambda t: 1 + 0.5 * np.sin(t)])
def test_scalar_gpe_and_weighted_agree(fn):
    sig = scalar(fn)
    g = gpe_lower(sig, TRI1, cfg(horizon=30.0)).integral
    w = weighted_corollary(sig, TRI1, cfg(criterion="weighted-corollary", horizon=30.0)).integral
    assert g == pytest.approx(w, rel=1e-3)


# --- simple ----------------------------------------------------------------------


def test_simple_intermittent_at_n6(intermittent):
    t = float(a(6) + 1)
    cert = simple_corollary(intermittent, cfg(criterion="simple-corollary", S=0.5, horizon=t, sample_times=(t,)))
    assert cert.integral == pytest.approx(5 * 0.125 / 6, rel=1e-6)


def test_simple_slow_decay_matches_asymptotic():
    T = 1000.0
    cert = simple_corollary(SLOW, cfg(criterion="simple-corollary", horizon=T, threshold_efolds=5.0))
    assert cert.integral == pytest.approx(0.5 * math.log1p(T), rel=0.1)
    assert cert.verdict is Verdict.STABLE_CERTIFIED


def test_simple_zero_inconclusive():
    cert = simple_corollary(ZERO, cfg(criterion="simple-corollary", horizon=10.0))
    assert cert.integral == 0.0 and cert.verdict is Verdict.INCONCLUSIVE


def test_simple_accumulation_nondecreasing():
    sig = ClosedFormSignal(lambda t: np.array([[1 + np.cos(t), 0.2], [0.2, np.sin(t) ** 2]]), 2)
    cert = simple_corollary(sig, cfg(criterion="simple-corollary", horizon=20.0))
    assert np.all(np.diff(cert.values) >= 0)


# --- classical -----------------------------------------------------------------


def test_classical_identity_holds():
    rep = classical_pe(constant_signal(np.eye(2)), cfg(criterion="classical-PE", horizon=10.0, alpha=1.0, delta=1.0))
    assert rep.holds and rep.worst_eigenvalue == pytest.approx(1.0)


def test_classical_intermittent_fails():
    rep = classical_pe(example_signal(), cfg(criterion="classical-PE", S=0.5, horizon=float(a(25)),
                                            alpha=0.01, delta=1.0))
    assert not rep.holds and rep.worst_eigenvalue == 0.0


def test_classical_slow_decay_fails_with_closed_form_minimum():
    T = 1000.0
    rep = classical_pe(SLOW, cfg(criterion="classical-PE", horizon=T, alpha=0.01, delta=1.0))
    assert not rep.holds
    assert rep.worst_eigenvalue == pytest.approx(math.log((1 + T) / T), rel=1e-4)


def test_classical_upper_bound():
    rep = classical_pe(constant_signal(np.eye(2)),
                       cfg(criterion="classical-PE", horizon=10.0, alpha=1.0, delta=1.0, beta=0.9))
    assert rep.upper_bound_ok is False


@pytest.mark.parametrize("kw", [dict(alpha=0.0, delta=1.0), dict(alpha=1.0, delta=-1.0),
                                dict(alpha=1.0, delta=20.0), dict(alpha=1.0)])
def test_classical_bad_parameters(kw):
    with pytest.raises(BadParameters):
        classical_pe(ONE, cfg(criterion="classical-PE", horizon=10.0, **kw))


# --- config, fits and properties -------------------------------------------------


@pytest.mark.parametrize("kw", [dict(S=0.0), dict(horizon=-1.0), dict(tau_step=2.0), dict(nu_step=20.0),
                                dict(threshold=0.0), dict(criterion="nope"), dict(quadrature="simpson")])
def test_config_validation(kw):
    with pytest.raises(BadParameters):
        cfg(**{"horizon": 10.0, **kw})


def test_piecewise_exact_requires_piecewise_signal():
    with pytest.raises(BadParameters):
        simple_corollary(SLOW, cfg(criterion="simple-corollary", quadrature="piecewise-exact"))


def test_power_fit_recovers_exponent():
    t = np.linspace(0, 100, 201)
    c, p = power_fit(t, 3 * t**1.5)
    assert c == pytest.approx(3) and p == pytest.approx(1.5)


def test_tail_statistics_flat_and_decaying():
    t = np.linspace(0, 100, 1001)
    assert tail_statistics(t, np.ones_like(t))[1] == math.inf
    slope, r = tail_statistics(t, 1 - 1 / (1 + t))
    assert r == pytest.approx(2.0, abs=0.1) and slope > 0


@pytest.mark.parametrize("name", SCENARIO_NAMES)
def test_one_sided_verdicts(name):
    scn = builtin_scenario(name)
    for c in scn.criteria:
        if c.criterion == "GPE-theorem":
            assert gpe_lower(scn.signal, scn.omega, c).verdict is not Verdict.NOT_STABLE_CERTIFIED
            assert gpe_upper(scn.signal, scn.omega, c).verdict is not Verdict.STABLE_CERTIFIED
        if c.criterion == "simple-corollary":
            assert simple_corollary(scn.signal, c).verdict is not Verdict.NOT_STABLE_CERTIFIED


@pytest.mark.parametrize("name", [n for n in SCENARIO_NAMES if n != "paper-example"])
def test_grid_refinement_changes_integrals_by_under_two_percent(name):
    scn = builtin_scenario(name)
    runs = {
        "GPE-theorem": lambda c: gpe_lower(scn.signal, scn.omega, c),
        "weighted-corollary": lambda c: weighted_corollary(scn.signal, scn.omega, c),
        "simple-corollary": lambda c: simple_corollary(scn.signal, c),
    }
    for c in scn.criteria:
        if c.criterion in runs:
            coarse = runs[c.criterion](c).integral
            fine = runs[c.criterion](replace(c, nu_step=c.resolved_nu_step / 2,
                                             tau_step=c.resolved_tau_step / 2)).integral
            assert abs(coarse - fine) <= 0.02 * abs(fine) + 1e-12


def test_grid_refinement_intermittent_example():
    scn = builtin_scenario("paper-example")
    c = replace(scn.criteria[2], quadrature="grid")
    coarse = simple_corollary(scn.signal, c).integral
    fine = simple_corollary(scn.signal, replace(c, nu_step=c.resolved_nu_step / 2,
                                                tau_step=c.resolved_tau_step / 2)).integral
    assert abs(coarse - fine) <= 0.02 * fine


def test_threads_do_not_change_results():
    c = cfg(criterion="simple-corollary", horizon=200.0, nu_step=0.01)
    one = simple_corollary(SLOW, c)
    four = simple_corollary(SLOW, replace(c, threads=4))
    assert np.array_equal(one.values, four.values)


def test_certificate_report_fields():
    d = gpe_upper(ONE, TRI1, cfg(horizon=5.0)).as_dict()
    assert d["criterion"] == "GPE-theorem:upper"
    assert set(d) == {"criterion", "verdict", "I_T", "power_fit", "gronwall_rate", "params", "grid", "notes"}
