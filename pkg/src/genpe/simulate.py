"""Trajectories of ``x' = -P(t) x`` and checks against them.

Three integrators are available:

``pc-exact``
    Piecewise-constant signals only. Each segment's matrix is diagonalized
    once and every grid time inside the segment is reached directly with
    ``V exp(-Lambda dt) V^T``, so no error accumulates along the segment.
``rk4``
    Classical fourth-order Runge-Kutta on a fixed grid.
``picard``
    Successive approximation ``y_k = x0 - int P y_{k-1}`` in short windows.

The weak-form residual and the two exponential envelopes derived from the
excitation integrals are checked on finished trajectories.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadParameters,
    HorizonMismatch,
    NonContractive,
    OutOfDomain,
    StepInvalid,
    SupportExceedsHorizon,
)
from .signal import MatrixSignal, PiecewiseConstantSignal
from .spectral import eig_bounds

MONO_TOL = 1e-9
ENV_TOL = 1e-8
METHODS = ("pc-exact", "rk4", "picard")
PICARD_WINDOW_BUDGET = 0.5


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    energies: np.ndarray
    method: str
    step: float
    sup_distances: tuple[float, ...] = ()

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def max_energy_increase(self) -> float:
        if self.energies.size < 2:
            return 0.0
        return float(max(0.0, np.diff(self.energies).max()))

    def energies_monotone(self, mono_tol: float = MONO_TOL) -> bool:
        return self.max_energy_increase <= mono_tol

    def energy_at(self, t) -> np.ndarray | float:
        return np.interp(t, self.times, self.energies)

    def state_at(self, t: float) -> np.ndarray:
        return np.array([np.interp(t, self.times, self.states[:, j]) for j in range(self.states.shape[1])])

    def to_csv(self, path, max_rows: int | None = None) -> None:
        idx = np.arange(self.times.size)
        if max_rows is not None and idx.size > max_rows:
            idx = np.unique(np.round(np.linspace(0, idx.size - 1, max_rows)).astype(int))
        n = self.states.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t"] + [f"x{j + 1}" for j in range(n)] + ["energy"])
            for i in idx:
                w.writerow([_fmt(self.times[i])] + [_fmt(v) for v in self.states[i]] + [_fmt(self.energies[i])])


def _fmt(v: float) -> str:
    return format(float(v), ".12g")


def _make_trajectory(times, states, method, step, sup=()) -> Trajectory:
    states = np.asarray(states, dtype=float)
    return Trajectory(np.asarray(times, dtype=float), states, np.einsum("ij,ij->i", states, states),
                      method, float(step), tuple(float(s) for s in sup))


def _check_inputs(signal: MatrixSignal, x0, T: float, step) -> np.ndarray:
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (signal.dimension,):
        raise BadParameters(f"x0 has shape {x0.shape}, expected ({signal.dimension},)")
    if step is not None and not step > 0:
        raise StepInvalid(f"step must be positive, got {step}")
    if not T > 0:
        raise BadParameters(f"horizon must be positive, got {T}")
    if signal.start > 0 or signal.end < T:
        raise OutOfDomain(f"signal is defined on [{signal.start}, {signal.end}], need [0, {T}]")
    return x0


def _grid(T: float, step: float, extra=()) -> np.ndarray:
    n = max(1, math.ceil(T / step - 1e-9))
    pts = np.concatenate([np.linspace(0.0, T, n + 1), np.asarray(extra, dtype=float).ravel()])
    pts = np.unique(pts[(pts >= 0) & (pts <= T)])
    # Drop points closer than rounding noise to a neighbour.
    keep = np.concatenate([[True], np.diff(pts) > 1e-12 * max(1.0, T)])
    pts = pts[keep]
    pts[-1] = T
    return pts


def _pc_exact(signal: PiecewiseConstantSignal, x0, times) -> np.ndarray:
    states = np.empty((times.size, x0.size))
    seg = signal._segment(times)
    # A grid time on a breakpoint belongs to the segment that ends there.
    on_bp = np.isin(times, signal.breakpoints)
    seg_end = np.where(on_bp, seg - 1, seg)
    x = x0.copy()
    t_prev = times[0]
    states[0] = x0
    i = 1
    while i < times.size:
        s = max(int(seg_end[i]), 0)
        j = i
        while j + 1 < times.size and seg_end[j + 1] == s:
            j += 1
        lam, V = np.linalg.eigh(signal.values[s])
        dt = times[i:j + 1] - t_prev
        coeff = V.T @ x
        block = (np.exp(-np.outer(dt, lam)) * coeff) @ V.T
        states[i:j + 1] = block
        x, t_prev = block[-1].copy(), times[j]
        i = j + 1
    return states


def _rk4(signal: MatrixSignal, x0, times) -> np.ndarray:
    h = np.diff(times)
    t0 = times[:-1]
    n = x0.size
    if isinstance(signal, PiecewiseConstantSignal):
        # The grid holds every breakpoint, so each step sees one segment.
        P0, P1 = _interval_matrices(signal, times)
        Pm = P0
    else:
        P = signal.evaluate_many(np.concatenate([t0, t0 + 0.5 * h, times[1:]]))
        P0, Pm, P1 = P[: h.size], P[h.size: 2 * h.size], P[2 * h.size:]
    eye = np.eye(n)
    hh = h[:, None, None]
    # For a linear field one RK4 step is x -> M x with M a matrix polynomial.
    K1 = -P0
    K2 = -Pm @ (eye + 0.5 * hh * K1)
    K3 = -Pm @ (eye + 0.5 * hh * K2)
    K4 = -P1 @ (eye + hh * K3)
    M = eye + hh / 6.0 * (K1 + 2.0 * K2 + 2.0 * K3 + K4)
    states = np.empty((times.size, n))
    states[0] = x = x0
    for i in range(h.size):
        x = M[i] @ x
        states[i + 1] = x
    return states


def integrate(
    signal: MatrixSignal,
    x0,
    T: float,
    method: str = "auto",
    step: float | None = None,
    t_eval=(),
    S: float | None = None,
    picard_iterations: int = 12,
) -> Trajectory:
    """Integrate ``x' = -P(t) x`` from ``x(0) = x0`` to ``T``.

    ``method="auto"`` picks ``pc-exact`` for piecewise-constant signals and
    ``rk4`` otherwise. Default steps are ``S/256`` (``pc-exact``, capped by
    the shortest segment) and ``1e-3 * S`` (``rk4``) with ``S = 1`` when not
    given. ``t_eval`` times are added to the grid so that states there are
    computed, not interpolated. Energy monotonicity is recorded on the
    result, never enforced.
    """
    x0 = _check_inputs(signal, x0, T, step)
    if method == "auto":
        method = "pc-exact" if isinstance(signal, PiecewiseConstantSignal) else "rk4"
    if method not in METHODS:
        raise BadParameters(f"unknown method {method!r}; expected one of {METHODS}")
    S = 1.0 if S is None else float(S)
    bps = ()
    if isinstance(signal, PiecewiseConstantSignal):
        bps = signal.breakpoints_in(0.0, T)
    if method == "pc-exact":
        if not isinstance(signal, PiecewiseConstantSignal):
            raise BadParameters("pc-exact needs a piecewise-constant signal")
        if step is None:
            edges = np.concatenate([[0.0], bps, [T]])
            step = min(float(np.diff(edges).min()), S / 256)
        times = _grid(T, step, np.concatenate([bps, np.ravel(t_eval)]))
        return _make_trajectory(times, _pc_exact(signal, x0, times), method, step)
    if method == "rk4":
        step = 1e-3 * S if step is None else step
        times = _grid(T, step, np.concatenate([np.asarray(bps, dtype=float), np.ravel(t_eval)]))
        return _make_trajectory(times, _rk4(signal, x0, times), method, step)
    step = 1e-3 * S if step is None else step
    return picard_iterate(signal, x0, T, step, picard_iterations, t_eval=t_eval)


# --- Picard iteration --------------------------------------------------------


def _interval_matrices(signal: MatrixSignal, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Matrices at the two ends of each grid interval, as one-sided values.

    Piecewise-constant signals are constant on each interval (the grid holds
    every breakpoint), so the interval midpoint supplies both ends.
    """
    if isinstance(signal, PiecewiseConstantSignal):
        mid = signal.evaluate_many(0.5 * (times[1:] + times[:-1]))
        return mid, mid
    P = signal.evaluate_many(times)
    return P[:-1], P[1:]


def _windows(lmax_int: np.ndarray, budget: float) -> list[tuple[int, int]]:
    """Split grid indices so that each window's ``int lambda_max`` stays within ``budget``."""
    out, start = [], 0
    for i in range(1, lmax_int.size):
        if lmax_int[i] - lmax_int[start] > budget and i - 1 > start:
            out.append((start, i - 1))
            start = i - 1
    out.append((start, lmax_int.size - 1))
    return out


def picard_iterate(
    signal: MatrixSignal,
    x0,
    T: float,
    step: float,
    iterations: int,
    window: float | str = "auto",
    t_eval=(),
) -> Trajectory:
    """Picard iterates ``y_k(t) = x0 - int_0^t P y_{k-1}`` with ``y_0 = x0``.

    The integral term uses the trapezoid rule on a uniform grid. With
    ``window="auto"`` the horizon is cut into windows over which
    ``int lambda_max(P) <= 0.5``, each restarted from the end of the last, so
    the iteration contracts by at least a half per sweep. A numeric
    ``window`` fixes the window length instead and raises
    :class:`NonContractive` when some window's integral exceeds 1.

    ``sup_distances[k-1]`` is the largest sup-norm gap between ``y_k`` and
    ``y_{k-1}`` over all windows.
    """
    x0 = _check_inputs(signal, x0, T, step)
    if iterations < 1:
        raise BadParameters("need at least one Picard iteration")
    bps = signal.breakpoints_in(0.0, T) if isinstance(signal, PiecewiseConstantSignal) else ()
    times = _grid(T, step, np.concatenate([np.asarray(bps, dtype=float), np.ravel(t_eval)]))
    Pl, Pr = _interval_matrices(signal, times)
    lam = 0.5 * (eig_bounds(Pl)[1] + eig_bounds(Pr)[1]) * np.diff(times)
    lmax_int = np.concatenate([[0.0], np.cumsum(np.maximum(lam, 0.0))])
    if window == "auto":
        spans = _windows(lmax_int, PICARD_WINDOW_BUDGET)
    else:
        length = float(window)
        if not length > 0:
            raise StepInvalid("window must be positive")
        cuts = np.searchsorted(times, np.arange(0.0, T, length), side="left")
        cuts = np.unique(np.concatenate([cuts, [times.size - 1]]))
        spans = list(zip(cuts[:-1].tolist(), cuts[1:].tolist()))
        worst = max(lmax_int[b] - lmax_int[a] for a, b in spans)
        if worst > 1.0:
            raise NonContractive(
                f"a window of length {length} has int lambda_max = {worst:.3g} > 1; shrink the window"
            )
    states = np.empty((times.size, x0.size))
    states[0] = x0
    sup = np.zeros(iterations)
    x_start = x0
    for a, b in spans:
        dt = np.diff(times[a:b + 1])[:, None]
        pl, pr = Pl[a:b], Pr[a:b]
        y = np.broadcast_to(x_start, (b - a + 1, x0.size)).copy()
        for k in range(iterations):
            f = 0.5 * dt * (np.einsum("mij,mj->mi", pl, y[:-1]) + np.einsum("mij,mj->mi", pr, y[1:]))
            new = np.empty_like(y)
            new[0] = x_start
            new[1:] = x_start - np.cumsum(f, axis=0)
            sup[k] = max(sup[k], float(np.abs(new - y).max()))
            y = new
        states[a:b + 1] = y
        x_start = y[-1]
    return _make_trajectory(times, states, "picard", step, sup)


# --- weak formulation --------------------------------------------------------


@dataclass(frozen=True)
class BumpTestFunction:
    """``phi(t) = c (t - a)^2 (b - t)^2 e_j`` on ``[a, b]``, zero elsewhere.

    ``c`` normalizes the peak to 1. A bump with ``a < 0`` does not vanish at
    ``t = 0`` and so exercises the initial-value term of the weak form.
    """

    a: float
    b: float
    j: int

    @property
    def c(self) -> float:
        return 16.0 / (self.b - self.a) ** 4

    def value(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= self.a) & (t <= self.b)
        return np.where(inside, self.c * (t - self.a) ** 2 * (self.b - t) ** 2, 0.0)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= self.a) & (t <= self.b)
        u, v = t - self.a, self.b - t
        return np.where(inside, self.c * 2.0 * u * v * (v - u), 0.0)


def bump_family(T: float, dimension: int, count: int = 20, seed: int = 0,
                min_width: float | None = None) -> list[BumpTestFunction]:
    """``count`` random bumps supported in ``(-T, T]``, one coordinate each.

    Endpoints lie on a lattice of spacing ``T/200``; supports are at least
    ``min_width`` (default ``T/10``) wide. Every fourth bump is centred at
    the origin so that ``phi(0) != 0``.
    """
    if not T > 0 or count < 1:
        raise BadParameters("need T > 0 and count >= 1")
    rng = np.random.default_rng(seed)
    lattice = T / 200
    width = T / 10 if min_width is None else float(min_width)
    k_min = max(1, math.ceil(width / lattice - 1e-9))
    out = []
    for i in range(count):
        j = int(rng.integers(dimension))
        if i % 4 == 3:
            half = lattice * int(rng.integers(max(1, k_min // 2), 101))
            out.append(BumpTestFunction(-half, half, j))
            continue
        ka = int(rng.integers(0, 200 - k_min + 1))
        kb = int(rng.integers(ka + k_min, 201))
        out.append(BumpTestFunction(ka * lattice, kb * lattice, j))
    return out


_GAUSS3_X = 0.5 + 0.5 * np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)])
_GAUSS3_W = np.array([5.0, 8.0, 5.0]) / 18.0


def weak_residual(trajectory: Trajectory, signal: MatrixSignal, family=None, *,
                  count: int = 20, seed: int = 0) -> float:
    """Largest residual of the weak identity over a family of test functions.

    For each ``phi`` the residual is::

        | -int <phi', x> - <phi(0), x0> + int <phi, P x> |

    where ``x`` is the piecewise-linear interpolant of the trajectory. The
    first integral is exact for that interpolant (three-point Gauss on each
    grid interval clipped to the support); the second uses the trapezoid
    rule. Either way the residual is second order in the step, and it
    vanishes when ``x`` is constant. ``family`` defaults to
    :func:`bump_family` with ``count`` and ``seed``.
    """
    T = trajectory.horizon
    if family is None:
        family = bump_family(T, signal.dimension, count, seed)
    ts, xs = trajectory.times, trajectory.states
    Pl, Pr = _interval_matrices(signal, ts)
    Pxl = np.einsum("mij,mj->mi", Pl, xs[:-1])
    Pxr = np.einsum("mij,mj->mi", Pr, xs[1:])
    dt = np.diff(ts)
    worst = 0.0
    for phi in family:
        if phi.b > T + 1e-12 or phi.b <= phi.a:
            raise SupportExceedsHorizon(f"test function support [{phi.a}, {phi.b}] not inside [0, {T}]")
        j = phi.j
        lo = np.clip(ts[:-1], phi.a, phi.b)
        hi = np.clip(ts[1:], phi.a, phi.b)
        nodes = lo[:, None] + (hi - lo)[:, None] * _GAUSS3_X
        frac = (nodes - ts[:-1, None]) / dt[:, None]
        x_lin = xs[:-1, j, None] + (xs[1:, j] - xs[:-1, j])[:, None] * frac
        lhs = -float(np.sum((hi - lo) * ((phi.derivative(nodes) * x_lin) @ _GAUSS3_W)))
        v = phi.value(ts)
        rhs_int = float(np.sum(0.5 * dt * (v[:-1] * Pxl[:, j] + v[1:] * Pxr[:, j])))
        res = abs(lhs - float(phi.value(0.0)) * xs[0, j] + rhs_int)
        worst = max(worst, res)
    return worst


# --- exponential envelopes ---------------------------------------------------


@dataclass
class EnvelopeReport:
    upper_ok: bool
    lower_ok: bool | None
    worst_margin: float
    worst_upper_margin: float
    worst_upper_t: float
    worst_lower_margin: float | None
    worst_lower_t: float | None
    env_tol: float
    checked: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "upper_ok": self.upper_ok,
            "lower_ok": self.lower_ok,
            "worst_margin": self.worst_margin,
            "worst_upper_margin": self.worst_upper_margin,
            "worst_upper_t": self.worst_upper_t,
            "worst_lower_margin": self.worst_lower_margin,
            "worst_lower_t": self.worst_lower_t,
            "env_tol": self.env_tol,
            "checked": dict(self.checked),
        }


def _energy_on(traj: Trajectory, ts: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(traj.times, ts)
    idx = np.clip(idx, 0, traj.times.size - 1)
    exact = np.abs(traj.times[idx] - ts) <= 1e-12 * max(1.0, traj.horizon)
    return np.where(exact, traj.energies[idx], np.interp(ts, traj.times, traj.energies))


def gronwall_check(trajectory: Trajectory, lower_cert, omega, upper_cert=None,
                   env_tol: float = ENV_TOL) -> EnvelopeReport:
    """Compare a trajectory's energy with the two exponential envelopes.

    Upper, at every growth sample ``t`` of ``lower_cert``::

        E(t + S) <= E(0) exp(-I(t) / m) + env_tol * E(0)

    Lower, for samples ``t >= S`` of ``upper_cert`` (when given)::

        E(t) >= E(S) exp(-J(t) / m) - env_tol * E(0)

    ``m`` is the weight mass and margins are reported relative to ``E(0)``,
    positive when the envelope holds.
    """
    S = omega.S
    T = trajectory.horizon
    e0 = float(trajectory.energies[0])
    scale = e0 if e0 > 0 else 1.0
    t_u = np.asarray(lower_cert.times, dtype=float)
    if t_u[-1] + S > T * (1 + 1e-12) + 1e-12:
        raise HorizonMismatch(
            f"certificate samples reach {t_u[-1]}; trajectory must cover {t_u[-1] + S}, got {T}"
        )
    m = lower_cert.weight_mass
    bound_u = e0 * np.exp(-np.asarray(lower_cert.values) / m)
    margin_u = (bound_u - _energy_on(trajectory, t_u + S)) / scale
    iu = int(np.argmin(margin_u))
    upper_ok = bool(margin_u[iu] >= -env_tol)
    lower_ok = worst_l = worst_lt = None
    checked = {"upper": int(t_u.size)}
    worst = float(margin_u[iu])
    if upper_cert is not None:
        t_l = np.asarray(upper_cert.times, dtype=float)
        sel = (t_l >= S) & (t_l <= T * (1 + 1e-12))
        if upper_cert.times[-1] > T * (1 + 1e-12) + 1e-12:
            raise HorizonMismatch(f"upper certificate reaches {upper_cert.times[-1]} past trajectory end {T}")
        t_l = t_l[sel]
        checked["lower"] = int(t_l.size)
        if t_l.size:
            eS = float(_energy_on(trajectory, np.array([S]))[0])
            bound_l = eS * np.exp(-np.asarray(upper_cert.values)[sel] / upper_cert.weight_mass)
            margin_l = (_energy_on(trajectory, t_l) - bound_l) / scale
            il = int(np.argmin(margin_l))
            worst_l, worst_lt = float(margin_l[il]), float(t_l[il])
            lower_ok = bool(worst_l >= -env_tol)
            worst = min(worst, worst_l)
        else:
            lower_ok = True
    return EnvelopeReport(upper_ok, lower_ok, worst, float(margin_u[iu]), float(t_u[iu]),
                          worst_l, worst_lt, env_tol, checked)
