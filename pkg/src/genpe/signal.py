"""Time-varying symmetric PSD matrix signals and their windowed integrals.

A signal ``P(t)`` drives the system ``x' = -P(t) x``. Four representations are
supported:

* :class:`PiecewiseConstantSignal`: breakpoints and one constant matrix per
  segment, integrated exactly.
* :class:`SampledSignal`: samples on a time grid with zero-order hold or
  linear interpolation.
* :class:`ClosedFormSignal`: any callable ``t -> (n, n)`` matrix.
* :class:`RegressorSignal`: ``P(t) = phi(t) phi(t)^T`` for a vector regressor.

The windowed integral ``Q(t, tau) = int_0^tau P(t + s) ds`` is computed by
:func:`cumulative`.
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ._quadrature import cumulative_trapezoid
from .errors import (
    OutOfDomain,
    ParseError,
    QuadratureStepInvalid,
    ValidationFailure,
)

SYM_TOL = 1e-9
PSD_TOL = 1e-9

_INTERPOLATIONS = ("hold", "linear")


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


def _eig_bounds(mats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    from .spectral import eig_bounds

    return eig_bounds(mats)


class MatrixSignal:
    """Common interface of every signal kind.

    Subclasses implement :meth:`_eval` on a 1-D array of times that is already
    known to be inside the domain.
    """

    kind: str = ""
    dimension: int
    start: float
    end: float
    sym_tol: float
    psd_tol: float

    def _eval(self, ts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check_domain(self, ts: np.ndarray) -> None:
        if ts.size == 0:
            return
        lo, hi = float(ts.min()), float(ts.max())
        if lo < self.start or hi > self.end or not (math.isfinite(lo) and math.isfinite(hi)):
            raise OutOfDomain(
                f"{self.kind} signal is defined on [{self.start}, {self.end}]; "
                f"got times in [{lo}, {hi}]"
            )

    def evaluate_many(self, ts, check: bool = False) -> np.ndarray:
        """Evaluate ``P`` at an array of times, returning shape ``(m, n, n)``.

        With ``check=True`` every matrix is tested for symmetry and
        positive semidefiniteness.
        """
        ts = np.asarray(ts, dtype=float).ravel()
        self._check_domain(ts)
        mats = self._eval(ts)
        if check:
            _check_matrices(mats, ts, self.sym_tol, self.psd_tol)
        return mats

    def evaluate(self, t: float) -> np.ndarray:
        return self.evaluate_many([t], check=True)[0]

    def __call__(self, t: float) -> np.ndarray:
        return self.evaluate(t)


def _check_matrices(mats, ts, sym_tol, psd_tol) -> None:
    defect = np.abs(mats - np.swapaxes(mats, -1, -2)).max(axis=(-1, -2))
    bad = np.flatnonzero(defect > sym_tol)
    if bad.size:
        i = bad[0]
        raise ValidationFailure(
            f"P({ts[i]}) is not symmetric: defect {defect[i]:.3g} > {sym_tol}"
        )
    lo, _ = _eig_bounds(0.5 * (mats + np.swapaxes(mats, -1, -2)))
    bad = np.flatnonzero(lo < -psd_tol)
    if bad.size:
        i = bad[0]
        raise ValidationFailure(
            f"P({ts[i]}) is not positive semidefinite: min eigenvalue {lo[i]:.3g}"
        )


@dataclass(frozen=True, eq=False)
class PiecewiseConstantSignal(MatrixSignal):
    """``P(t) = values[i]`` on ``[breakpoints[i], breakpoints[i+1])``.

    The last segment extends to ``end`` (infinite by default). Segments are
    right-continuous, so a breakpoint takes the value of the segment it opens.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    end: float = math.inf
    sym_tol: float = SYM_TOL
    psd_tol: float = PSD_TOL
    kind = "piecewise-constant"

    def __post_init__(self):
        b = _readonly(self.breakpoints).ravel()
        v = _readonly(self.values)
        if v.ndim == 1:
            v = _readonly(v.reshape(-1, 1, 1))
        if v.ndim != 3 or v.shape[1] != v.shape[2]:
            raise ValueError("values must have shape (segments, n, n)")
        if b.size != v.shape[0] or b.size == 0:
            raise ValueError("need exactly one breakpoint per segment value")
        if np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if not self.end > b[-1]:
            raise ValueError("end must lie after the last breakpoint")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)
        # Running integral of P at each breakpoint, for exact accumulation.
        seg = np.diff(b)[:, None, None] * v[:-1]
        cum = np.zeros_like(v)
        np.cumsum(seg, axis=0, out=cum[1:])
        cum.flags.writeable = False
        object.__setattr__(self, "_cum", cum)

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    @property
    def start(self) -> float:
        return float(self.breakpoints[0])

    def _segment(self, ts: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.breakpoints, ts, side="right") - 1
        return np.clip(idx, 0, self.breakpoints.size - 1)

    def _eval(self, ts):
        return self.values[self._segment(ts)]

    def antiderivative(self, ts) -> np.ndarray:
        """Exact ``int_start^t P`` at each time, shape ``(m, n, n)``."""
        ts = np.asarray(ts, dtype=float).ravel()
        self._check_domain(ts)
        idx = self._segment(ts)
        dt = (ts - self.breakpoints[idx])[:, None, None]
        return self._cum[idx] + dt * self.values[idx]

    def breakpoints_in(self, lo: float, hi: float) -> np.ndarray:
        b = self.breakpoints
        return b[(b > lo) & (b < hi)]


@dataclass(frozen=True, eq=False)
class SampledSignal(MatrixSignal):
    """Matrix samples on an increasing time grid.

    ``interpolation="hold"`` keeps each sample until the next one, which keeps
    every value PSD whenever the samples are. ``"linear"`` interpolates
    entrywise, which also preserves PSD by convexity.
    """

    times: np.ndarray
    samples: np.ndarray
    interpolation: str = "hold"
    sym_tol: float = SYM_TOL
    psd_tol: float = PSD_TOL
    kind = "sampled-grid"

    def __post_init__(self):
        t = _readonly(self.times).ravel()
        s = _readonly(self.samples)
        if s.ndim == 1:
            s = _readonly(s.reshape(-1, 1, 1))
        if s.ndim != 3 or s.shape[1] != s.shape[2] or s.shape[0] != t.size:
            raise ValueError("samples must have shape (len(times), n, n)")
        if t.size < 2 or np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing (at least two)")
        if self.interpolation not in _INTERPOLATIONS:
            raise ValueError(f"interpolation must be one of {_INTERPOLATIONS}")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "samples", s)

    @property
    def dimension(self) -> int:
        return self.samples.shape[1]

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    def _eval(self, ts):
        idx = np.clip(np.searchsorted(self.times, ts, side="right") - 1, 0, self.times.size - 1)
        if self.interpolation == "hold":
            return self.samples[idx]
        idx = np.minimum(idx, self.times.size - 2)
        t0, t1 = self.times[idx], self.times[idx + 1]
        frac = ((ts - t0) / (t1 - t0))[:, None, None]
        return (1.0 - frac) * self.samples[idx] + frac * self.samples[idx + 1]


@dataclass(frozen=True, eq=False)
class ClosedFormSignal(MatrixSignal):
    """``P(t)`` given by a callable.

    If ``vectorized`` is true the callable receives a 1-D array of times and
    must return shape ``(m, n, n)``; otherwise it is called once per time.
    """

    fn: Callable
    dimension: int
    start: float = 0.0
    end: float = math.inf
    vectorized: bool = False
    sym_tol: float = SYM_TOL
    psd_tol: float = PSD_TOL
    kind = "closed-form"

    def _eval(self, ts):
        n = self.dimension
        if self.vectorized:
            out = np.asarray(self.fn(ts), dtype=float)
        else:
            out = np.array([np.asarray(self.fn(float(t)), dtype=float) for t in ts])
        return out.reshape(ts.size, n, n)


@dataclass(frozen=True, eq=False)
class RegressorSignal(MatrixSignal):
    """``P(t) = phi(t) phi(t)^T``; symmetric and PSD by construction."""

    phi: Callable
    dimension: int
    start: float = 0.0
    end: float = math.inf
    vectorized: bool = False
    sym_tol: float = SYM_TOL
    psd_tol: float = PSD_TOL
    kind = "regressor-outer-product"

    def regressor(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float).ravel()
        self._check_domain(ts)
        if self.vectorized:
            out = np.asarray(self.phi(ts), dtype=float)
        else:
            out = np.array([np.asarray(self.phi(float(t)), dtype=float) for t in ts])
        return out.reshape(ts.size, self.dimension)

    def _eval(self, ts):
        v = self.regressor(ts)
        return v[:, :, None] * v[:, None, :]


def constant_signal(matrix, start: float = 0.0) -> PiecewiseConstantSignal:
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    return PiecewiseConstantSignal([start], m[None])


# --- windowed integral -----------------------------------------------------


@dataclass(frozen=True)
class QuadratureConfig:
    """Step and rule for integrating non-piecewise-constant signals.

    ``h=None`` means ``window / 512`` where ``window`` is the integration
    length (the truncation support ``S`` in the criteria code).
    """

    h: float | None = None
    rule: str = "trapezoid"

    def __post_init__(self):
        if self.h is not None and not self.h > 0:
            raise QuadratureStepInvalid(f"quadrature step must be positive, got {self.h}")
        if self.rule not in ("trapezoid", "midpoint"):
            raise ValueError("rule must be 'trapezoid' or 'midpoint'")

    def step_for(self, window: float) -> float:
        return self.h if self.h is not None else window / 512.0


@dataclass(frozen=True)
class CumulativeExcitation:
    t: float
    tau: float
    matrix: np.ndarray


def _quadrature_integral(signal: MatrixSignal, t: float, tau: float, quad: QuadratureConfig) -> np.ndarray:
    h = quad.step_for(tau)
    panels = max(1, math.ceil(tau / h - 1e-9))
    if quad.rule == "midpoint":
        dt = tau / panels
        nodes = t + dt * (np.arange(panels) + 0.5)
        return signal.evaluate_many(nodes).sum(axis=0) * dt
    nodes = np.linspace(t, t + tau, panels + 1)
    vals = signal.evaluate_many(nodes)
    return cumulative_trapezoid(vals, nodes)[-1]


def cumulative(
    signal: MatrixSignal,
    t: float,
    tau: float,
    quad: QuadratureConfig | None = None,
) -> CumulativeExcitation:
    """``Q(t, tau) = int_0^tau P(t + s) ds``.

    Piecewise-constant signals are accumulated exactly from their
    breakpoints; every other kind uses the composite rule in ``quad``.
    """
    quad = quad or QuadratureConfig()
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    n = signal.dimension
    if tau == 0:
        signal.evaluate_many([t])
        return CumulativeExcitation(t, 0.0, np.zeros((n, n)))
    if isinstance(signal, PiecewiseConstantSignal):
        F = signal.antiderivative([t, t + tau])
        m = F[1] - F[0]
    else:
        m = _quadrature_integral(signal, t, tau, quad)
    m = 0.5 * (m + m.T)
    return CumulativeExcitation(float(t), float(tau), m)


def excitation_grid(signal: MatrixSignal, nu: np.ndarray, tau: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``Q(nu_i, tau_k)`` and ``P(nu_i + tau_k)`` on a tensor grid.

    ``tau`` must start at zero. Returns two arrays of shape
    ``(len(nu), len(tau), n, n)``. Non-piecewise-constant signals use the
    trapezoid rule on the ``tau`` grid itself.
    """
    nu = np.asarray(nu, dtype=float)
    tau = np.asarray(tau, dtype=float)
    n = signal.dimension
    ts = nu[:, None] + tau[None, :]
    P = signal.evaluate_many(ts.ravel()).reshape(nu.size, tau.size, n, n)
    if isinstance(signal, PiecewiseConstantSignal):
        F = signal.antiderivative(ts.ravel()).reshape(nu.size, tau.size, n, n)
        Q = F - F[:, :1]
    else:
        Q = cumulative_trapezoid(P, tau, axis=1)
    Q = 0.5 * (Q + np.swapaxes(Q, -1, -2))
    return Q, P


# --- validation ------------------------------------------------------------


@dataclass(frozen=True)
class SignalValidation:
    passed: bool
    max_symmetry_defect: float
    min_eigenvalue: float
    worst_symmetry_time: float
    worst_eigenvalue_time: float
    sym_tol: float
    psd_tol: float
    failures: tuple[str, ...] = field(default_factory=tuple)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "max_symmetry_defect": self.max_symmetry_defect,
            "min_eigenvalue": self.min_eigenvalue,
            "worst_symmetry_time": self.worst_symmetry_time,
            "worst_eigenvalue_time": self.worst_eigenvalue_time,
            "sym_tol": self.sym_tol,
            "psd_tol": self.psd_tol,
            "failures": list(self.failures),
        }


def validate(signal: MatrixSignal, grid: Sequence[float]) -> SignalValidation:
    """Check symmetry and positive semidefiniteness of ``P`` on a time grid.

    Never raises for bad matrices; the report carries the failures.
    """
    ts = np.asarray(grid, dtype=float).ravel()
    if ts.size == 0:
        raise ValueError("validation grid is empty")
    mats = signal.evaluate_many(ts)
    defect = np.abs(mats - np.swapaxes(mats, -1, -2)).max(axis=(-1, -2))
    lo, _ = _eig_bounds(0.5 * (mats + np.swapaxes(mats, -1, -2)))
    i_sym, i_eig = int(np.argmax(defect)), int(np.argmin(lo))
    failures = []
    if defect[i_sym] > signal.sym_tol:
        failures.append(f"symmetry defect {defect[i_sym]:.3g} at t={ts[i_sym]:g}")
    if lo[i_eig] < -signal.psd_tol:
        failures.append(f"negative eigenvalue {lo[i_eig]:.3g} at t={ts[i_eig]:g}")
    return SignalValidation(
        passed=not failures,
        max_symmetry_defect=float(defect[i_sym]),
        min_eigenvalue=float(lo[i_eig]),
        worst_symmetry_time=float(ts[i_sym]),
        worst_eigenvalue_time=float(ts[i_eig]),
        sym_tol=signal.sym_tol,
        psd_tol=signal.psd_tol,
        failures=tuple(failures),
    )


# --- CSV -------------------------------------------------------------------

_COLUMN = re.compile(r"^p(\d+)_?(\d+)$")


def _upper_columns(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i, n)]


def read_sampled_csv(path, interpolation: str = "hold") -> SampledSignal:
    """Load a sampled signal from ``t,p11,p12,...,pnn`` CSV.

    Only upper-triangle columns (``i <= j``) are allowed, in row-major order;
    the lower triangle is filled by symmetry. ``p1_10`` style names are
    accepted for dimensions above nine.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "t":
        raise ParseError(f"{path}:1: first column must be 't'")
    cols = []
    for name in header[1:]:
        m = _COLUMN.match(name)
        if not m:
            raise ParseError(f"{path}:1: bad column name {name!r}")
        i, j = int(m.group(1)) - 1, int(m.group(2)) - 1
        if i > j:
            raise ParseError(f"{path}:1: lower-triangle column {name!r} is not allowed")
        cols.append((i, j))
    k = len(cols)
    n = int(round((math.sqrt(8 * k + 1) - 1) / 2))
    if n * (n + 1) // 2 != k or cols != _upper_columns(n):
        raise ParseError(f"{path}:1: columns must be the row-major upper triangle of an n x n matrix")
    times, mats = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != k + 1:
            raise ParseError(f"{path}:{lineno}: expected {k + 1} fields, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
        m = np.zeros((n, n))
        for (i, j), v in zip(cols, vals[1:]):
            m[i, j] = m[j, i] = v
        times.append(vals[0])
        mats.append(m)
    try:
        return SampledSignal(np.array(times), np.array(mats), interpolation=interpolation)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None


def write_sampled_csv(path, times, matrices) -> None:
    mats = np.asarray(matrices, dtype=float)
    n = mats.shape[1]
    cols = _upper_columns(n)
    sep = "" if n < 10 else "_"
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"p{i + 1}{sep}{j + 1}" for i, j in cols])
        for t, m in zip(times, mats):
            w.writerow([repr(float(t))] + [repr(float(m[i, j])) for i, j in cols])
