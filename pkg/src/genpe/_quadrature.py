"""Quadrature helpers: composite trapezoid and panel-adaptive Gauss-Legendre."""
from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


@lru_cache(maxsize=None)
def _lagrange_denominators(order: int) -> np.ndarray:
    x, _ = gauss_legendre(order)
    d = x[:, None] - x[None, :]
    np.fill_diagonal(d, 1.0)
    out = d.prod(axis=1)
    out.flags.writeable = False
    return out


def _lagrange_weights(order: int, y: np.ndarray) -> np.ndarray:
    """Weights taking Gauss-node values to the interpolant at reference points ``y``.

    ``y`` must avoid the nodes; returns shape ``y.shape + (order,)``.
    """
    x, _ = gauss_legendre(order)
    diff = y[..., None] - x
    return diff.prod(axis=-1, keepdims=True) / diff / _lagrange_denominators(order)


def trapezoid(y: np.ndarray, x: np.ndarray, axis: int = 0) -> np.ndarray:
    y = np.moveaxis(np.asarray(y, dtype=float), axis, 0)
    dx = np.diff(np.asarray(x, dtype=float))
    dx = dx.reshape(dx.shape + (1,) * (y.ndim - 1))
    return np.sum(0.5 * dx * (y[1:] + y[:-1]), axis=0)


def cumulative_trapezoid(y: np.ndarray, x: np.ndarray, axis: int = 0) -> np.ndarray:
    """Running trapezoid integral along ``axis``; the first entry is zero."""
    y = np.moveaxis(np.asarray(y, dtype=float), axis, 0)
    dx = np.diff(np.asarray(x, dtype=float))
    dx = dx.reshape(dx.shape + (1,) * (y.ndim - 1))
    out = np.zeros_like(y)
    np.cumsum(0.5 * dx * (y[1:] + y[:-1]), axis=0, out=out[1:])
    return np.moveaxis(out, 0, axis)


def gauss_panels(
    f: Callable[[np.ndarray], np.ndarray],
    edges: np.ndarray,
    order: int = 5,
) -> np.ndarray:
    """Fixed Gauss-Legendre rule on every interval between consecutive edges."""
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_legendre(order)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo))[:, None] + half[:, None] * x[None, :]
    vals = np.asarray(f(nodes.ravel()))
    vals = vals.reshape((lo.size, order) + vals.shape[1:])
    wshape = (1, order) + (1,) * (vals.ndim - 2)
    hshape = (lo.size,) + (1,) * (vals.ndim - 2)
    return np.sum(vals * w.reshape(wshape), axis=1) * half.reshape(hshape)


_PROBE_OFFSET = 1e-9


def adaptive_gauss(
    f: Callable[[np.ndarray], np.ndarray],
    edges: np.ndarray,
    *,
    rtol: float = 1e-11,
    atol: float = 1e-15,
    order: int = 8,
    max_depth: int = 60,
    max_panels: int = 200_000,
    check=None,
) -> tuple[np.ndarray, bool]:
    """Integrate ``f`` over every interval ``[edges[i], edges[i+1]]``.

    ``f`` maps a 1-D array of nodes to an array of shape ``(len(nodes), ...)``.
    Each panel is compared against its two halves, and the Gauss interpolant
    of each half is extrapolated to points just inside the half's ends and
    compared with the integrand there; panels where either check exceeds
    ``max(atol * width, rtol * |estimate|)`` are bisected. The endpoint check
    catches kinks lying between a panel edge and its outermost node, which
    the two-level comparison alone misses. Kinks are thereby localized
    geometrically.

    Tolerances also allow ``rtol`` relative to the whole integral spread
    evenly over ``[edges[0], edges[-1]]``, and a floor for the rounding of
    the abscissae themselves, so noisy-but-flat panels stop splitting.

    ``check`` optionally selects the output components (flat indices into the
    trailing dimensions) that drive refinement; the others ride along.

    Returns the per-interval integrals and whether every panel converged
    before ``max_depth`` bisections or ``max_panels`` live panels.
    """
    edges = np.asarray(edges, dtype=float)
    x, w = gauss_legendre(order)
    lo = edges[:-1].copy()
    hi = edges[1:].copy()
    owner = np.arange(lo.size)
    result = None
    converged = True
    density = None
    span = float(edges[-1] - edges[0]) if edges.size > 1 else 0.0
    eps = np.finfo(float).eps
    for depth in range(max_depth + 1):
        if lo.size == 0:
            break
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        quarter = 0.5 * half
        coarse_nodes = mid[:, None] + half[:, None] * x
        left_nodes = (0.5 * (lo + mid))[:, None] + quarter[:, None] * x
        right_nodes = (0.5 * (mid + hi))[:, None] + quarter[:, None] * x
        # Probes just inside each half, so one-sided values at edges are used.
        a_lo, a_hi = np.stack([lo, mid]), np.stack([mid, hi])
        nudge = _PROBE_OFFSET * (a_hi - a_lo)
        probe_lo = np.maximum(a_lo + nudge, np.nextafter(a_lo, np.inf))
        probe_hi = np.minimum(a_hi - nudge, np.nextafter(a_hi, -np.inf))
        probes = np.stack([probe_lo, probe_hi], axis=-1)  # (2 halves, P, 2)
        centre = 0.5 * (a_lo + a_hi)[..., None]
        ref = (probes - centre) / quarter[None, :, None]
        nodes = np.concatenate([coarse_nodes, left_nodes, right_nodes]).ravel()
        vals = np.asarray(f(np.concatenate([nodes, probes.ravel()])))
        tail = vals.shape[1:]
        probe_vals = vals[nodes.size:].reshape((2, lo.size, 2) + tail)
        vals = vals[:nodes.size].reshape((3, lo.size, order) + tail)
        wv = w.reshape((1, order) + (1,) * len(tail))
        hs = half.reshape((lo.size,) + (1,) * len(tail))
        qs = quarter.reshape((lo.size,) + (1,) * len(tail))
        coarse = np.sum(vals[0] * wv, axis=1) * hs
        fine = (np.sum(vals[1] * wv, axis=1) + np.sum(vals[2] * wv, axis=1)) * qs
        if result is None:
            result = np.zeros((edges.size - 1,) + tail)
        lw = _lagrange_weights(order, ref)  # (2 halves, P, 2 probes, order)
        flat = vals[1:].reshape(2, lo.size, order, -1)
        extrap = np.einsum("hpko,hpoc->hpkc", lw, flat)
        miss = np.abs(extrap - probe_vals.reshape(2, lo.size, 2, -1)).max(axis=(0, 2))
        miss = miss.reshape((lo.size,) + tail) * qs
        diff = np.maximum(np.abs(coarse - fine), miss).reshape(lo.size, -1)
        scale = np.abs(fine).reshape(lo.size, -1)
        allv = np.concatenate([vals[1], vals[2]], axis=1).reshape(lo.size, 2 * order, -1)
        pv = probe_vals.reshape(2, lo.size, 2, -1)
        jump = np.abs(pv[:, :, 1] - pv[:, :, 0]).max(axis=0)
        xmag = np.maximum(np.abs(lo), np.abs(hi))[:, None]
        noise = 64 * eps * (xmag * jump / np.maximum(quarter, 1e-300)[:, None]
                            + np.abs(allv).max(axis=1)) * (hi - lo)[:, None]
        if check is not None:
            diff, scale, noise = diff[:, check], scale[:, check], noise[:, check]
        if density is None:
            density = scale.sum(axis=0).max() / span if span > 0 else 0.0
        diff = (diff - noise).max(axis=1)
        scale = scale.max(axis=1)
        tol = np.maximum(atol * (hi - lo), rtol * np.maximum(scale, density * (hi - lo)))
        ok = diff <= tol
        if depth == max_depth or 2 * np.count_nonzero(~ok) > max_panels:
            converged = bool(ok.all())
            ok[:] = True
        np.add.at(result, owner[ok], fine[ok])
        keep = ~ok
        lo, mid_k, hi, owner = lo[keep], mid[keep], hi[keep], owner[keep]
        lo, hi = np.concatenate([lo, mid_k]), np.concatenate([mid_k, hi])
        owner = np.concatenate([owner, owner])
    if result is None:
        result = np.zeros(0)
    return result, converged


def merge_edges(points, lo: float, hi: float, tol: float = 1e-12) -> np.ndarray:
    """Sorted unique points inside ``[lo, hi]`` including both ends.

    Points closer than ``tol * max(1, |hi|)`` to a neighbour are dropped.
    """
    pts = np.asarray(list(points), dtype=float).ravel()
    pts = pts[(pts > lo) & (pts < hi)]
    pts = np.unique(np.concatenate([[lo], pts, [hi]]))
    gap = tol * max(1.0, abs(hi), abs(lo))
    keep = [0]
    for i in range(1, pts.size):
        if pts[i] - pts[keep[-1]] > gap:
            keep.append(i)
    out = pts[keep]
    out[-1] = hi
    return out
