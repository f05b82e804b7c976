"""Truncation weights ``omega_S``: positive on ``[0, S)``, zero from ``S`` on."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate

KINDS = ("triangular", "smooth-bump", "piecewise-linear")


@dataclass(frozen=True)
class TruncationFunction:
    """Weight function of support ``[0, S)``.

    Kinds
    -----
    ``triangular``
        ``S - tau`` on ``[0, S)``.
    ``smooth-bump``
        ``peak * exp(-tau**2 / (S**2 - tau**2))``; infinitely smooth at ``S``.
    ``piecewise-linear``
        Linear interpolation between ``knots``, a sequence of ``(tau, value)``
        pairs starting at ``tau = 0`` and ending at ``(S, 0)``.

    Derivatives at knots are right-hand limits. Everything is vectorized over
    ``tau``.
    """

    S: float
    kind: str = "triangular"
    knots: tuple[tuple[float, float], ...] = ()
    peak: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown truncation kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "piecewise-linear":
            knots = tuple((float(a), float(b)) for a, b in self.knots)
            if len(knots) < 2:
                raise ValueError("piecewise-linear truncation needs at least two knots")
            taus = np.array([k[0] for k in knots])
            vals = np.array([k[1] for k in knots])
            if taus[0] != 0.0 or np.any(np.diff(taus) <= 0):
                raise ValueError("knots must start at tau=0 and be strictly increasing")
            if vals[-1] != 0.0 or np.any(vals[:-1] <= 0):
                raise ValueError("knot values must be positive before the last knot, which must be 0")
            object.__setattr__(self, "knots", knots)
            object.__setattr__(self, "S", float(taus[-1]))
        if not self.S > 0:
            raise ValueError(f"S must be positive, got {self.S}")
        if self.kind == "smooth-bump" and not self.peak > 0:
            raise ValueError("bump peak must be positive")

    @classmethod
    def triangular(cls, S: float) -> "TruncationFunction":
        return cls(S=float(S))

    @classmethod
    def piecewise_linear(cls, knots) -> "TruncationFunction":
        knots = tuple(knots)
        return cls(S=float(knots[-1][0]), kind="piecewise-linear", knots=knots)

    @classmethod
    def smooth_bump(cls, S: float, peak: float = 1.0) -> "TruncationFunction":
        return cls(S=float(S), kind="smooth-bump", peak=float(peak))

    @cached_property
    def _knot_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array([k[0] for k in self.knots]), np.array([k[1] for k in self.knots]))

    @property
    def nonincreasing(self) -> bool:
        if self.kind == "piecewise-linear":
            return bool(np.all(np.diff(self._knot_arrays[1]) <= 0))
        return True

    def breakpoints(self) -> np.ndarray:
        """Points in ``(0, S]`` where the derivative may jump."""
        if self.kind == "piecewise-linear":
            return self._knot_arrays[0][1:].copy()
        return np.array([self.S])

    def weight(self, tau):
        t = np.asarray(tau, dtype=float)
        inside = (t >= 0) & (t < self.S)
        if self.kind == "triangular":
            out = np.where(inside, self.S - t, 0.0)
        elif self.kind == "smooth-bump":
            tc = np.where(inside, t, 0.0)
            out = np.where(inside, self.peak * np.exp(-tc**2 / (self.S**2 - tc**2)), 0.0)
        else:
            kt, kv = self._knot_arrays
            out = np.where(inside, np.interp(t, kt, kv), 0.0)
        return out if out.ndim else float(out)

    def derivative(self, tau, side: str = "right"):
        """Almost-everywhere derivative; right-hand limit at knots by default.

        ``side="left"`` gives left-hand limits, which is what a quadrature
        rule wants at the right end of an interval.
        """
        t = np.asarray(tau, dtype=float)
        inside = (t < self.S) if side == "right" else (t <= self.S)
        inside = inside & ((t >= 0) if side == "right" else (t > 0))
        if self.kind == "triangular":
            out = np.where(inside, -1.0, 0.0)
        elif self.kind == "smooth-bump":
            tc = np.where(inside & (t < self.S), t, 0.0)
            gap = self.S**2 - tc**2
            w = self.peak * np.exp(-tc**2 / gap)
            out = np.where(inside & (t < self.S), w * (-2.0 * tc * self.S**2 / gap**2), 0.0)
        else:
            kt, kv = self._knot_arrays
            slopes = np.diff(kv) / np.diff(kt)
            if side == "right":
                idx = np.searchsorted(kt, t, side="right") - 1
            else:
                idx = np.searchsorted(kt, t, side="left") - 1
            idx = np.clip(idx, 0, slopes.size - 1)
            out = np.where(inside, slopes[idx], 0.0)
        return out if out.ndim else float(out)

    @cached_property
    def mass(self) -> float:
        """``int_0^S omega``; closed form except for the bump."""
        if self.kind == "triangular":
            return 0.5 * self.S**2
        if self.kind == "piecewise-linear":
            kt, kv = self._knot_arrays
            return float(np.sum(0.5 * np.diff(kt) * (kv[1:] + kv[:-1])))
        val, _ = integrate.quad(lambda s: self.weight(s), 0.0, self.S, epsabs=1e-14, epsrel=1e-13)
        return float(val)

    def as_dict(self) -> dict:
        d = {"kind": self.kind, "S": self.S}
        if self.kind == "piecewise-linear":
            d["knots"] = [list(k) for k in self.knots]
        if self.kind == "smooth-bump":
            d["peak"] = self.peak
        return d


def weight(omega: TruncationFunction, tau):
    return omega.weight(tau)


def weight_derivative(omega: TruncationFunction, tau):
    return omega.derivative(tau)


def weight_mass(omega: TruncationFunction) -> float:
    return omega.mass

