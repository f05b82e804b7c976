"""Built-in systems with closed-form reference values.

The intermittent example switches a 2x2 diagonal signal between the two
channels: channel 1 is excited on ``C = union_{n >= 2} [a_n, a_n + 1]`` with
``a_n = n (n + 1) / 2`` and channel 2 everywhere else. Gaps between
excitation intervals grow without bound, so no sliding window of fixed
length sees both channels uniformly, yet the state still decays.
"""
from __future__ import annotations

import math

import numpy as np

from .criteria import CriterionConfig
from .errors import BadParameters, TauOutOfRange
from .scenario import Scenario, SimulationSpec
from .signal import ClosedFormSignal, PiecewiseConstantSignal, RegressorSignal, constant_signal
from .truncation import TruncationFunction

EXCITED = np.diag([1.0, 0.0])
IDLE = np.diag([0.0, 1.0])


def a(n: int) -> int:
    """``a_0 = 0``, ``a_{n+1} = a_n + n + 1``."""
    if n < 0:
        raise BadParameters("n must be nonnegative")
    return n * (n + 1) // 2


def example_signal(horizon: float | None = None) -> PiecewiseConstantSignal:
    """``diag(Xi(t), 1 - Xi(t))`` with ``Xi`` the indicator of ``C``.

    Intervals are listed until one starts past ``horizon`` (default
    ``a_25``); the signal is exact on ``[0, a_N]`` for that first unlisted
    ``a_N``, and stays idle after it.
    """
    horizon = float(a(25) if horizon is None else horizon)
    bps, vals = [0.0], [IDLE]
    n = 2
    while a(n) <= horizon + 1:
        bps += [float(a(n)), float(a(n) + 1)]
        vals += [EXCITED, IDLE]
        n += 1
    return PiecewiseConstantSignal(bps, vals)


def example_gamma_min(nu: float, tau: float) -> float:
    """Smallest eigenvalue of ``Q(nu, tau)`` for the intermittent example.

    Nonzero only when the window ``[nu, nu + tau]`` straddles an end of some
    excitation interval, where it is a tent of height ``tau / 2``.
    """
    if not 0 < tau < 1:
        raise TauOutOfRange(f"tau must lie in (0, 1), got {tau}")
    # Window length below 1 and gaps of at least 2 mean one boundary at most.
    n = max(2, int((math.sqrt(8 * max(nu, 0.0) + 1) - 1) / 2))
    for k in (n - 1, n, n + 1):
        if k < 2:
            continue
        for edge in (a(k), a(k) + 1):
            if edge - tau <= nu <= edge - tau / 2:
                return tau - edge + nu
            if edge - tau / 2 <= nu <= edge:
                return edge - nu
    return 0.0


def example_integral(n: int, S: float) -> float:
    """``int_0^S int_0^t gamma_min`` for ``a_n + 1 <= t <= a_{n+1} - 1``: ``(n - 1) S^3 / 6``."""
    if int(n) != n or n < 2:
        raise BadParameters(f"n must be an integer >= 2, got {n}")
    if not 0 < S < 1:
        raise BadParameters(f"S must lie in (0, 1), got {S}")
    return (n - 1) * S**3 / 6


# --- built-in scenarios ------------------------------------------------------


def _criteria(S, T, efolds=10.0, delta=1.0, alpha=0.01, beta=None, sample_times=()):
    common = dict(S=S, horizon=T, threshold_efolds=efolds)
    return (
        CriterionConfig(criterion="GPE-theorem", **common),
        CriterionConfig(criterion="weighted-corollary", **common),
        CriterionConfig(criterion="simple-corollary", sample_times=tuple(sample_times), **common),
        CriterionConfig(criterion="classical-PE", S=S, horizon=T, alpha=alpha, delta=delta, beta=beta),
    )


def _scalar(fn, name):
    sig = ClosedFormSignal(lambda t: fn(np.asarray(t)).reshape(-1, 1, 1), 1, vectorized=True)
    return sig, {"kind": "closed-form", "dimension": 1, "expr": name}


def _intermittent_example() -> Scenario:
    S, T = 0.5, float(a(25))
    samples = [float(a(n) + 1) for n in range(2, 25)]
    return Scenario(
        name="paper-example",
        description="intermittent two-channel excitation on [a_n, a_n + 1]",
        signal=example_signal(T),
        signal_spec={"kind": "builtin", "name": "paper-example", "horizon": T},
        omega=TruncationFunction.triangular(S),
        criteria=_criteria(S, T, efolds=2.0, delta=1.0, alpha=0.01, sample_times=samples),
        simulation=SimulationSpec(x0=((1.0, 1.0),), T=T + S, method="pc-exact"),
        oracles={
            "S": S,
            "L_at_a_n_plus_1": {n: example_integral(n, S) for n in range(2, 25)},
            "x_at_4": [math.exp(-1.0), math.exp(-3.0)],
        },
    )


def _constant_identity() -> Scenario:
    S, T = 2.0, 50.0
    return Scenario(
        name="constant-identity",
        description="P(t) = I_2",
        signal=constant_signal(np.eye(2)),
        signal_spec={"kind": "constant", "matrix": [[1.0, 0.0], [0.0, 1.0]]},
        omega=TruncationFunction.triangular(S),
        criteria=_criteria(S, T, delta=1.0, alpha=1.0, beta=1.0),
        simulation=SimulationSpec(x0=((1.0, 1.0),), T=T + S, method="pc-exact"),
        oracles={
            "classical_worst_eigenvalue": 1.0,
            "L_T": T * S**2 / 2,
            "energy": "2 exp(-2 t)",
        },
    )


def _slow_decay() -> Scenario:
    S, T = 1.0, 1000.0
    sig, spec = _scalar(lambda t: 1.0 / (1.0 + t), "1/(1+t)")
    return Scenario(
        name="slow-decay",
        description="scalar p(t) = 1/(1+t): stable without classical excitation",
        signal=sig,
        signal_spec=spec,
        omega=TruncationFunction.triangular(S),
        criteria=_criteria(S, T, efolds=5.0, delta=1.0, alpha=0.01),
        simulation=SimulationSpec(x0=((1.0,),), T=T + S, method="rk4", step=0.01),
        oracles={
            "L_asymptotic": 0.5 * S**2 * math.log1p(T),
            "energy_T": (1.0 + T) ** -2,
            "classical_inf_Q": math.log((1.0 + T) / T),
        },
    )


def _integrable_decay() -> Scenario:
    S, T = 1.0, 200.0
    sig, spec = _scalar(lambda t: (1.0 + t) ** -2.0, "1/(1+t)^2")
    return Scenario(
        name="integrable-decay",
        description="scalar p(t) = 1/(1+t)^2: the state converges to a nonzero limit",
        signal=sig,
        signal_spec=spec,
        omega=TruncationFunction.triangular(S),
        criteria=_criteria(S, T, delta=1.0, alpha=0.01),
        simulation=SimulationSpec(x0=((1.0,),), T=T + S, method="rk4"),
        oracles={
            "limit_energy_ratio": math.exp(-2.0),
            "energy_T": math.exp(-2.0 * (1.0 - 1.0 / (1.0 + T))),
        },
    )


def _rotating_regressor() -> Scenario:
    S, T = 4.0, 60.0
    sig = RegressorSignal(lambda t: np.stack([np.cos(t), np.sin(t)], axis=-1), 2, vectorized=True)
    slack = 0.01
    return Scenario(
        name="rotating-regressor",
        description="P = phi phi^T with phi(t) = (cos t, sin t)",
        signal=sig,
        signal_spec={"kind": "regressor", "dimension": 2, "expr": "[cos(t), sin(t)]"},
        omega=TruncationFunction.triangular(S),
        criteria=_criteria(S, T, delta=math.pi, alpha=math.pi / 2 * (1 - slack),
                           beta=math.pi / 2 * (1 + slack)),
        simulation=SimulationSpec(x0=((1.0, 1.0),), T=T + S, method="rk4"),
        oracles={
            "Q_pi": (math.pi / 2) * np.eye(2),
            "Q_2pi": math.pi * np.eye(2),
        },
    )


def _zero() -> Scenario:
    S, T = 1.0, 20.0
    return Scenario(
        name="zero",
        description="P(t) = 0: nothing decays",
        signal=constant_signal(np.zeros((2, 2))),
        signal_spec={"kind": "constant", "matrix": [[0.0, 0.0], [0.0, 0.0]]},
        omega=TruncationFunction.triangular(S),
        criteria=_criteria(S, T, delta=1.0, alpha=1.0),
        simulation=SimulationSpec(x0=((1.0, -2.0),), T=T + S, method="pc-exact"),
        oracles={"I_T": 0.0, "energy": 5.0},
    )


_BUILDERS = {
    "paper-example": _intermittent_example,
    "constant-identity": _constant_identity,
    "slow-decay": _slow_decay,
    "integrable-decay": _integrable_decay,
    "rotating-regressor": _rotating_regressor,
    "zero": _zero,
}

SCENARIO_NAMES = tuple(_BUILDERS)


def builtin_scenario(name: str) -> Scenario:
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise BadParameters(f"unknown scenario {name!r}; built-ins are {', '.join(SCENARIO_NAMES)}") from None


def builtin_scenarios() -> list[Scenario]:
    return [build() for build in _BUILDERS.values()]
