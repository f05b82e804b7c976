"""Finite-horizon stability certificates from excitation double integrals.

Every criterion accumulates a double integral

    I(t) = int_0^t int_0^S g(nu, tau) dtau dnu

for an integrand ``g`` built from the excitation operator or the windowed
integral, and turns the growth of ``I`` on ``[0, T]`` into a verdict:

* lower branches (divergence implies stability) certify when ``I(T)`` passes
  a threshold and a power-law fit over the last half still grows;
* upper branches (convergence implies non-stability) certify when the tail of
  ``I`` has flattened and its increments decay faster than ``1/t``.

Anything else is :attr:`Verdict.INCONCLUSIVE`.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

import numpy as np

from ._quadrature import adaptive_gauss, cumulative_trapezoid, merge_edges, trapezoid
from .errors import BadParameters, GridTooCoarse, TruncationNotNonincreasing
from .signal import MatrixSignal, PiecewiseConstantSignal, excitation_grid
from .spectral import a_operator, eig_bounds
from .truncation import TruncationFunction

CRITERIA = ("GPE-theorem", "weighted-corollary", "simple-corollary", "classical-PE")
MIN_TAU_SAMPLES = 8
_CHUNK_FLOATS = 2_000_000


class Verdict(str, Enum):
    STABLE_CERTIFIED = "STABLE_CERTIFIED"
    NOT_STABLE_CERTIFIED = "NOT_STABLE_CERTIFIED"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class CriterionConfig:
    """Parameters of one criterion evaluation.

    ``threshold`` is the divergence threshold; when unset it is
    ``threshold_efolds * weight_mass``. ``tail_tol`` is the largest mean slope
    of the accumulated integral over the last half of the horizon that still
    counts as converged; when unset it is ``1e-3 * weight_mass``.

    ``quadrature`` selects the double-integral path: ``"grid"`` is the
    iterated trapezoid rule, ``"piecewise-exact"`` is breakpoint-aware
    adaptive Gauss quadrature (piecewise-constant signals only), and
    ``"auto"`` picks the latter whenever it applies.
    """

    criterion: str = "GPE-theorem"
    S: float = 1.0
    horizon: float = 10.0
    nu_step: float | None = None
    tau_step: float | None = None
    threshold: float | None = None
    threshold_efolds: float = 10.0
    growth_cutoff: float = 0.1
    tail_tol: float | None = None
    decay_cutoff: float = 1.1
    alpha: float | None = None
    delta: float | None = None
    beta: float | None = None
    quadrature: str = "auto"
    samples: int = 129
    sample_times: tuple[float, ...] = ()
    threads: int = 1

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise BadParameters(f"unknown criterion {self.criterion!r}; expected one of {CRITERIA}")
        if not self.S > 0:
            raise BadParameters(f"S must be positive, got {self.S}")
        if not self.horizon > 0:
            raise BadParameters(f"horizon must be positive, got {self.horizon}")
        if not 0 < self.resolved_tau_step <= self.S:
            raise BadParameters("tau_step must lie in (0, S]")
        if not 0 < self.resolved_nu_step <= self.horizon:
            raise BadParameters("nu_step must lie in (0, horizon]")
        if self.threshold is not None and not self.threshold > 0:
            raise BadParameters("threshold must be positive")
        if not self.threshold_efolds > 0:
            raise BadParameters("threshold_efolds must be positive")
        if self.tail_tol is not None and not self.tail_tol > 0:
            raise BadParameters("tail_tol must be positive")
        if self.quadrature not in ("auto", "grid", "piecewise-exact"):
            raise BadParameters(f"unknown quadrature {self.quadrature!r}")
        if self.samples < 3:
            raise BadParameters("need at least three growth samples")

    @property
    def resolved_tau_step(self) -> float:
        return self.tau_step if self.tau_step is not None else self.S / 64

    @property
    def resolved_nu_step(self) -> float:
        if self.nu_step is not None:
            return self.nu_step
        return min(self.S / 16, self.horizon)

    def threshold_for(self, mass: float) -> float:
        return self.threshold if self.threshold is not None else self.threshold_efolds * mass

    def tail_tol_for(self, mass: float) -> float:
        return self.tail_tol if self.tail_tol is not None else 1e-3 * mass

    def as_dict(self) -> dict:
        d = {
            "S": self.S,
            "horizon": self.horizon,
            "nu_step": self.resolved_nu_step,
            "tau_step": self.resolved_tau_step,
            "threshold": self.threshold,
            "threshold_efolds": self.threshold_efolds,
            "growth_cutoff": self.growth_cutoff,
            "tail_tol": self.tail_tol,
            "decay_cutoff": self.decay_cutoff,
            "quadrature": self.quadrature,
        }
        for k in ("alpha", "delta", "beta"):
            if getattr(self, k) is not None:
                d[k] = getattr(self, k)
        return d


@dataclass
class StabilityCertificate:
    criterion: str
    branch: str
    verdict: Verdict
    integral: float
    times: np.ndarray
    values: np.ndarray
    power_fit: tuple[float, float]
    weight_mass: float
    params: dict
    grid: dict
    notes: list[str] = field(default_factory=list)

    @property
    def gronwall_rate(self) -> float:
        return self.integral / self.weight_mass

    def value_at(self, t) -> np.ndarray:
        return np.interp(t, self.times, self.values)

    def growth_rows(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.values.tolist()))

    def as_dict(self) -> dict:
        c, p = self.power_fit
        name = self.criterion if self.branch == "lower" else f"{self.criterion}:upper"
        return {
            "criterion": name,
            "verdict": self.verdict.value,
            "I_T": self.integral,
            "power_fit": {"c": c, "p": p},
            "gronwall_rate": self.gronwall_rate,
            "params": self.params,
            "grid": self.grid,
            "notes": list(self.notes),
        }


@dataclass
class ClassicalReport:
    holds: bool
    worst_t: float
    worst_eigenvalue: float
    max_eigenvalue: float
    upper_bound_ok: bool | None
    params: dict
    notes: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "criterion": "classical-PE",
            "holds": self.holds,
            "worst_t": self.worst_t,
            "worst_eigenvalue": self.worst_eigenvalue,
            "max_eigenvalue": self.max_eigenvalue,
            "upper_bound_ok": self.upper_bound_ok,
            "params": self.params,
            "notes": list(self.notes),
        }


# --- integrands --------------------------------------------------------------
# Each kernel maps (Q, P_end, w, dw) with batch dims to a real array of the batch shape.

Kernel = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def _gamma_min(Q):
    return np.maximum(eig_bounds(Q)[0], 0.0)


def _gamma_max(Q):
    return np.maximum(eig_bounds(Q)[1], 0.0)



KERNELS: dict[tuple[str, str], Kernel] = {
    ("GPE-theorem", "lower"): lambda Q, P, w, dw: eig_bounds(a_operator(Q, P, w, dw))[0],
    ("GPE-theorem", "upper"): lambda Q, P, w, dw: eig_bounds(a_operator(Q, P, w, dw))[1],
    ("weighted-corollary", "lower"): lambda Q, P, w, dw: -np.asarray(dw) * (_gamma_min(Q) + _gamma_min(Q) ** 2),
    ("weighted-corollary", "upper"): lambda Q, P, w, dw: -np.asarray(dw) * (_gamma_max(Q) + _gamma_max(Q) ** 2),
    ("simple-corollary", "lower"): lambda Q, P, w, dw: _gamma_min(Q),
}


# --- double integral engines ---------------------------------------------------


def _use_exact(signal: MatrixSignal, cfg: CriterionConfig) -> bool:
    if cfg.quadrature == "grid":
        return False
    if cfg.quadrature == "piecewise-exact":
        if not isinstance(signal, PiecewiseConstantSignal):
            raise BadParameters("piecewise-exact quadrature needs a piecewise-constant signal")
        return True
    return isinstance(signal, PiecewiseConstantSignal)


def _grid_series(signal, omega, kernel, cfg):
    T, S = cfg.horizon, omega.S
    n_nu = max(1, math.ceil(T / cfg.resolved_nu_step - 1e-9))
    n_tau = max(1, math.ceil(S / cfg.resolved_tau_step - 1e-9))
    if n_tau + 1 < MIN_TAU_SAMPLES:
        raise GridTooCoarse(f"only {n_tau + 1} tau samples in [0, S]; need at least {MIN_TAU_SAMPLES}")
    nu = np.linspace(0.0, T, n_nu + 1)
    tau = np.linspace(0.0, S, n_tau + 1)
    w = np.asarray(omega.weight(tau), dtype=float)
    dw = np.array(omega.derivative(tau), dtype=float)
    dw[-1] = omega.derivative(S, side="left")
    n = signal.dimension
    chunk = max(1, _CHUNK_FLOATS // ((n_tau + 1) * n * n))
    starts = list(range(0, nu.size, chunk))

    def work(i0):
        Q, P = excitation_grid(signal, nu[i0:i0 + chunk], tau)
        return trapezoid(kernel(Q, P, w, dw), tau, axis=1)

    if cfg.threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            parts = list(pool.map(work, starts))
    else:
        parts = [work(i0) for i0 in starts]
    inner = np.concatenate(parts)
    values = cumulative_trapezoid(inner, nu)
    grid = {
        "path": "grid",
        "nu_points": int(nu.size),
        "tau_points": int(tau.size),
        "nu_step": float(nu[1] - nu[0]),
        "tau_step": float(tau[1] - tau[0]),
    }
    return nu, values, grid


def _exact_series(signal: PiecewiseConstantSignal, omega, kernel, cfg):
    T, S = cfg.horizon, omega.S
    times = np.unique(np.concatenate([
        np.linspace(0.0, T, cfg.samples),
        [0.5 * T],
        np.asarray([t for t in cfg.sample_times if 0 <= t <= T], dtype=float),
    ]))
    bps = signal.breakpoints_in(0.0, T + S)
    # Structural kinks of the tau-profile: weight knots and breakpoint offsets.
    refs = np.concatenate([[0.0, T], np.asarray(cfg.sample_times, dtype=float), bps])
    tau_kinks = np.concatenate([omega.breakpoints(), (bps[:, None] - refs[None, :]).ravel()])
    tau_edges = merge_edges(tau_kinks, 0.0, S)
    stats = {"inner_calls": 0, "converged": True}

    def inner(tau: float) -> np.ndarray:
        w = omega.weight(tau)
        dw = omega.derivative(tau)
        edges = merge_edges(np.concatenate([times, bps, bps - tau]), 0.0, T)

        def g(nu):
            Q = signal.antiderivative(nu + tau) - signal.antiderivative(nu)
            Q = 0.5 * (Q + np.swapaxes(Q, -1, -2))
            P = signal.evaluate_many(nu + tau)
            return kernel(Q, P, w, dw)

        vals, ok = adaptive_gauss(g, edges, rtol=1e-11)
        stats["inner_calls"] += 1
        stats["converged"] &= ok
        cum = np.concatenate([[0.0], np.cumsum(vals)])
        return np.interp(times, edges, cum)

    def outer(taus):
        return np.array([inner(float(t)) for t in taus])

    # Uniform growth samples add tau-kinks that are not split on; only the
    # horizon and explicitly requested times drive refinement.
    priority = np.flatnonzero(np.isin(times, np.concatenate([[T], cfg.sample_times])))
    vals, ok = adaptive_gauss(outer, tau_edges, rtol=1e-9, order=6, check=priority)
    values = vals.sum(axis=0)
    grid = {
        "path": "piecewise-exact",
        "samples": int(times.size),
        "tau_pieces": int(tau_edges.size - 1),
        "inner_integrals": stats["inner_calls"],
        "converged": bool(ok and stats["converged"]),
    }
    return times, values, grid


def _series(signal, omega, kernel, cfg):
    if _use_exact(signal, cfg):
        return _exact_series(signal, omega, kernel, cfg)
    return _grid_series(signal, omega, kernel, cfg)


def _thin(times, values, count, keep=()):
    """Subsample to about ``count`` points, always keeping ``T/2`` and ``keep``."""
    if times.size <= count:
        return times, values
    idx = np.unique(np.round(np.linspace(0, times.size - 1, count)).astype(int))
    mid = int(np.argmin(np.abs(times - 0.5 * times[-1])))
    extra = np.flatnonzero(np.isin(times, np.asarray(keep, dtype=float)))
    idx = np.union1d(idx, np.concatenate([[mid], extra]).astype(int))
    return times[idx], values[idx]


# --- verdict logic -----------------------------------------------------------------


def power_fit(times: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Least-squares ``I(t) ~ c t^p`` over samples in the last half of the horizon.

    Returns ``(0, 0)`` when fewer than two samples there are positive.
    """
    T = times[-1]
    sel = (times >= 0.5 * T) & (times > 0) & (values > 0)
    if np.count_nonzero(sel) < 2:
        return 0.0, 0.0
    lt, lv = np.log(times[sel]), np.log(values[sel])
    p, logc = np.polyfit(lt, lv, 1)
    return float(math.exp(logc)), float(p)


def tail_statistics(times: np.ndarray, values: np.ndarray, pieces: int = 8) -> tuple[float, float]:
    """Mean slope of ``I`` over ``[T/2, T]`` and the decay exponent of its increments.

    The exponent ``r`` fits increments over ``pieces`` equal sub-intervals to
    ``rate ~ t^-r``; it is ``inf`` when every increment vanishes and ``nan``
    when some increment is not positive.
    """
    T = times[-1]
    knots = np.linspace(0.5 * T, T, pieces + 1)
    vals = np.interp(knots, times, values)
    slope = float((vals[-1] - vals[0]) / (0.5 * T))
    inc = np.diff(vals)
    scale = max(1.0, float(np.abs(values).max()))
    if np.all(np.abs(inc) <= 1e-13 * scale):
        return slope, math.inf
    if np.any(inc <= 0):
        return slope, math.nan
    mids = 0.5 * (knots[1:] + knots[:-1])
    r = -np.polyfit(np.log(mids), np.log(inc), 1)[0]
    return slope, float(r)


def _certificate(criterion, branch, times, values, grid, mass, cfg, notes) -> StabilityCertificate:
    fit = power_fit(times, values)
    I_T = float(values[-1])
    params = cfg.as_dict()
    params["weight_mass"] = mass
    notes = list(notes)
    if branch == "lower":
        theta = cfg.threshold_for(mass)
        params["threshold"] = theta
        ok = I_T >= theta and fit[1] > cfg.growth_cutoff
        verdict = Verdict.STABLE_CERTIFIED if ok else Verdict.INCONCLUSIVE
        notes.append(
            f"divergence test: I(T)={I_T:.6g} vs threshold {theta:.6g}; "
            f"growth exponent p={fit[1]:.4g} vs cutoff {cfg.growth_cutoff}"
        )
    else:
        eps = cfg.tail_tol_for(mass)
        params["tail_tol"] = eps
        slope, r = tail_statistics(times, values)
        flat = math.isinf(r)
        ok = slope <= eps and (flat or (not math.isnan(r) and r >= cfg.decay_cutoff))
        verdict = Verdict.NOT_STABLE_CERTIFIED if ok else Verdict.INCONCLUSIVE
        notes.append(
            f"convergence heuristic: mean tail slope {slope:.6g} vs tail_tol {eps:.6g}; "
            f"increment decay exponent {r:.4g} vs cutoff {cfg.decay_cutoff}"
        )
    t_out, v_out = _thin(times, values, max(cfg.samples, 3), cfg.sample_times)
    return StabilityCertificate(
        criterion=criterion,
        branch=branch,
        verdict=verdict,
        integral=I_T,
        times=t_out,
        values=v_out,
        power_fit=fit,
        weight_mass=mass,
        params=params,
        grid=grid,
        notes=notes,
    )


def _run(signal, omega, cfg, criterion, branch, notes=()):
    if cfg.S != omega.S:
        cfg = replace(cfg, S=omega.S)
    kernel = KERNELS[(criterion, branch)]
    times, values, grid = _series(signal, omega, kernel, cfg)
    return _certificate(criterion, branch, times, values, grid, omega.mass, cfg, notes)


def gpe_lower(signal: MatrixSignal, omega: TruncationFunction, cfg: CriterionConfig) -> StabilityCertificate:
    """Sufficiency branch: divergence of the integrated minimal eigenvalue of ``A``.

    ``I(t)`` is accumulated signed; for ``n >= 2`` the minimal eigenvalue may
    be negative. Never returns ``NOT_STABLE_CERTIFIED``.
    """
    return _run(signal, omega, cfg, "GPE-theorem", "lower")


def gpe_upper(signal: MatrixSignal, omega: TruncationFunction, cfg: CriterionConfig) -> StabilityCertificate:
    """Necessity branch: a convergent integrated maximal eigenvalue of ``A``.

    Convergence is judged by :func:`tail_statistics`, a heuristic. Never
    returns ``STABLE_CERTIFIED``.
    """
    return _run(
        signal, omega, cfg, "GPE-theorem", "upper",
        notes=["finite-horizon convergence is a heuristic, not a proof of boundedness"],
    )


def weighted_corollary(
    signal: MatrixSignal,
    omega: TruncationFunction,
    cfg: CriterionConfig,
    branch: str = "lower",
) -> StabilityCertificate:
    """``-int int omega'(tau) (gamma + gamma^2)`` with extreme eigenvalues of ``Q``.

    ``branch="lower"`` uses the minimal eigenvalue and tests divergence;
    ``branch="upper"`` uses the maximal one and tests convergence.
    """
    if not omega.nonincreasing:
        raise TruncationNotNonincreasing("the weighted criterion needs a nonincreasing truncation weight")
    if branch not in ("lower", "upper"):
        raise ValueError("branch must be 'lower' or 'upper'")
    return _run(signal, omega, cfg, "weighted-corollary", branch)


def simple_corollary(signal: MatrixSignal, cfg: CriterionConfig) -> StabilityCertificate:
    """Triangular-weight criterion: divergence of ``int int gamma_min``."""
    omega = TruncationFunction.triangular(cfg.S)
    cert = _run(signal, omega, cfg, "simple-corollary", "lower")
    scale = max(1.0, float(np.abs(cert.values).max()))
    assert np.all(np.diff(cert.values) >= -1e-12 * scale), "L(t) must be nondecreasing"
    return cert


def classical_pe(signal: MatrixSignal, cfg: CriterionConfig) -> ClassicalReport:
    """Sliding-window test ``int_t^{t+delta} P >= alpha I`` for ``t`` in ``[0, T - delta]``.

    For piecewise-constant signals the window minimum is attained at a grid
    point or where the window meets a breakpoint, and those times are added to
    the grid, so the reported worst eigenvalue is exact.
    """
    a, d, T = cfg.alpha, cfg.delta, cfg.horizon
    if a is None or d is None or not a > 0 or not d > 0:
        raise BadParameters("classical check needs alpha > 0 and delta > 0")
    if d > T:
        raise BadParameters(f"delta={d} exceeds the horizon {T}")
    span = T - d
    n_t = max(1, math.ceil(span / cfg.resolved_nu_step - 1e-9)) if span > 0 else 0
    ts = np.linspace(0.0, span, n_t + 1)
    if isinstance(signal, PiecewiseConstantSignal):
        bps = signal.breakpoints_in(-math.inf, T)
        ts = np.unique(np.concatenate([ts, bps[(bps >= 0) & (bps <= span)],
                                       (bps - d)[(bps - d >= 0) & (bps - d <= span)]]))
        Q = signal.antiderivative(ts + d) - signal.antiderivative(ts)
        Q = 0.5 * (Q + np.swapaxes(Q, -1, -2))
    else:
        n_tau = max(MIN_TAU_SAMPLES - 1, math.ceil(d / cfg.resolved_tau_step - 1e-9))
        tau = np.linspace(0.0, d, n_tau + 1)
        n = signal.dimension
        chunk = max(1, _CHUNK_FLOATS // (tau.size * n * n))
        Q = np.concatenate([excitation_grid(signal, ts[i:i + chunk], tau)[0][:, -1]
                            for i in range(0, ts.size, chunk)])
    lo, hi = eig_bounds(Q)
    i = int(np.argmin(lo))
    holds = bool(lo[i] >= a)
    upper_ok = None if cfg.beta is None else bool(hi.max() <= cfg.beta)
    notes = []
    if holds:
        notes.append(
            f"window bound holds; for any S > delta the triangular-weight integral "
            f"satisfies L(t) >= (S - {d:g}) * {a:g} * t"
        )
    else:
        notes.append(f"window bound fails at t={ts[i]:.6g}: min eigenvalue {lo[i]:.6g} < alpha={a:g}")
    params = {"alpha": a, "delta": d, "horizon": T, "t_points": int(ts.size)}
    if cfg.beta is not None:
        params["beta"] = cfg.beta
    return ClassicalReport(holds, float(ts[i]), float(lo[i]), float(hi.max()), upper_ok, params, notes)
