"""The excitation operator ``A(t, tau)`` and extreme eigenvalues.

For a truncation weight ``omega`` and windowed integral ``Q(t, tau)``::

    A(t, tau) = -omega'(tau) Q + omega(tau) (P(t+tau) Q + Q P(t+tau))

where the second term is the product-rule derivative of ``Q**2`` in ``tau``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._quadrature import gauss_panels, merge_edges, trapezoid
from .errors import NotSymmetric
from .signal import (
    SYM_TOL,
    MatrixSignal,
    PiecewiseConstantSignal,
    QuadratureConfig,
    cumulative,
    excitation_grid,
)
from .truncation import TruncationFunction

EIG_TOL = 1e-10


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def eig_bounds(mats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Smallest and largest eigenvalue of a stack of symmetric matrices.

    Closed forms for ``n <= 2``; LAPACK ``eigvalsh`` otherwise.
    """
    mats = np.asarray(mats, dtype=float)
    n = mats.shape[-1]
    if n == 1:
        v = mats[..., 0, 0]
        return v, v.copy()
    if n == 2:
        a, b, d = mats[..., 0, 0], mats[..., 0, 1], mats[..., 1, 1]
        mean = 0.5 * (a + d)
        rad = np.hypot(0.5 * (a - d), b)
        return mean - rad, mean + rad
    w = np.linalg.eigvalsh(mats)
    return w[..., 0], w[..., -1]


class Extrema(NamedTuple):
    lo: float
    hi: float
    vec_lo: np.ndarray
    vec_hi: np.ndarray


def extrema(matrix, sym_tol: float = SYM_TOL) -> Extrema:
    """Minimum and maximum eigenvalue of a symmetric matrix with unit eigenvectors."""
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    defect = float(np.abs(m - m.T).max()) if m.size else 0.0
    if defect > sym_tol:
        raise NotSymmetric(f"matrix is not symmetric: defect {defect:.3g} > {sym_tol}")
    w, v = np.linalg.eigh(_sym(m))
    lo, hi = v[:, 0], v[:, -1]
    return Extrema(float(w[0]), float(w[-1]), lo / np.linalg.norm(lo), hi / np.linalg.norm(hi))


def a_operator(Q: np.ndarray, P_end: np.ndarray, w, dw) -> np.ndarray:
    """Batched ``-dw Q + w (P Q + Q P)``; ``w`` and ``dw`` broadcast over the batch."""
    w = np.asarray(w, dtype=float)[..., None, None]
    dw = np.asarray(dw, dtype=float)[..., None, None]
    PQ = P_end @ Q
    return _sym(-dw * Q + w * (PQ + np.swapaxes(PQ, -1, -2)))


@dataclass(frozen=True)
class ExcitationOperator:
    t: float
    tau: float
    matrix: np.ndarray


@dataclass(frozen=True)
class SpectralExtrema:
    lambda_min: float
    lambda_max: float
    gamma_min: float
    gamma_max: float
    eigvec_min: np.ndarray
    eigvec_max: np.ndarray


def assemble_A(
    signal: MatrixSignal,
    omega: TruncationFunction,
    t: float,
    tau: float,
    quad: QuadratureConfig | None = None,
) -> ExcitationOperator:
    Q = cumulative(signal, t, tau, quad).matrix
    P = signal.evaluate(t + tau)
    A = a_operator(Q, P, omega.weight(tau), omega.derivative(tau))
    return ExcitationOperator(float(t), float(tau), A)


def spectral_extrema(
    signal: MatrixSignal,
    omega: TruncationFunction,
    t: float,
    tau: float,
    quad: QuadratureConfig | None = None,
) -> SpectralExtrema:
    Q = cumulative(signal, t, tau, quad).matrix
    A = assemble_A(signal, omega, t, tau, quad).matrix
    ea, eq = extrema(A), extrema(Q)
    return SpectralExtrema(ea.lo, ea.hi, max(eq.lo, 0.0), eq.hi, eq.vec_lo, eq.vec_hi)


def _tau_pieces(signal: MatrixSignal, omega: TruncationFunction, t: float) -> np.ndarray:
    """Edges of ``[0, S]`` between which the integrands are polynomial in tau."""
    S = omega.S
    pts = list(omega.breakpoints())
    if isinstance(signal, PiecewiseConstantSignal):
        pts.extend(signal.breakpoints_in(t, t + S) - t)
    return merge_edges(pts, 0.0, S)


def _exact_profile(signal, omega, t, integrand) -> np.ndarray:
    edges = _tau_pieces(signal, omega, t)
    S = omega.S

    def f(taus):
        F = signal.antiderivative(t + taus)
        Q = _sym(F - signal.antiderivative([t])[0])
        P = signal.evaluate_many(t + taus)
        return integrand(Q, P, taus)

    # Piece integrands are at most quadratic for piecewise-linear weights.
    order = 3 if omega.kind != "smooth-bump" else 20
    return gauss_panels(f, edges, order=order).sum(axis=0) if S > 0 else 0.0


def _grid_profile(signal, omega, t, quad, integrand) -> np.ndarray:
    S = omega.S
    h = quad.step_for(S)
    panels = max(1, int(np.ceil(S / h - 1e-9)))
    taus = np.linspace(0.0, S, panels + 1)
    Q, P = excitation_grid(signal, np.array([t]), taus)
    vals = integrand(Q[0], P[0], taus)
    return trapezoid(vals, taus)


def _a_integrand(omega):
    def g(Q, P, taus):
        dw = omega.derivative(taus)
        if taus.size and taus[-1] == omega.S:
            dw = np.array(dw, dtype=float)
            dw[-1] = omega.derivative(omega.S, side="left")
        return a_operator(Q, P, omega.weight(taus), dw)

    return g


def _profile_integrand(omega):
    def g(Q, P, taus):
        dw = np.array(omega.derivative(taus), dtype=float)
        if taus.size and taus[-1] == omega.S:
            dw[-1] = omega.derivative(omega.S, side="left")
        return -dw[:, None, None] * (Q + Q @ Q)

    return g


def integrated_A_direct(
    signal: MatrixSignal,
    omega: TruncationFunction,
    t: float,
    quad: QuadratureConfig | None = None,
) -> np.ndarray:
    """``int_0^S A(t, tau) dtau`` by quadrature of the assembled operator.

    Piecewise-constant signals are integrated piece by piece with a Gauss
    rule that is exact for the polynomial pieces; other kinds use the
    trapezoid rule with step ``quad.h``.
    """
    quad = quad or QuadratureConfig()
    if isinstance(signal, PiecewiseConstantSignal):
        return _sym(_exact_profile(signal, omega, t, _a_integrand(omega)))
    return _sym(_grid_profile(signal, omega, t, quad, _a_integrand(omega)))


def integrated_A_profile(
    signal: MatrixSignal,
    omega: TruncationFunction,
    t: float,
    quad: QuadratureConfig | None = None,
) -> np.ndarray:
    """``-int_0^S omega'(tau) (Q + Q^2) dtau``, the integrated-by-parts form.

    Equal to :func:`integrated_A_direct` up to quadrature error; the two are
    computed independently so each can check the other.
    """
    quad = quad or QuadratureConfig()
    if isinstance(signal, PiecewiseConstantSignal):
        return _sym(_exact_profile(signal, omega, t, _profile_integrand(omega)))
    return _sym(_grid_profile(signal, omega, t, quad, _profile_integrand(omega)))
