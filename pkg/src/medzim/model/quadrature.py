"""Composite rules for ``∫_0^U m^(a-1) exp(g(m)) dm`` with a peaked smooth factor.

The window ``(0, U)`` is cut into panels at caller-given break points and around the mode of
``g``, where ``g`` holds the detection log-weight, the ``(1 - m)^(b-1)`` tail and an optional
Gaussian factor ``-τ (m - c)² / 2``. A panel starting at 0 carries the ``m^(a-1)`` endpoint
singularity in a Gauss–Jacobi weight; the other panels use Gauss–Legendre nodes.
"""

import functools

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special

__all__ = ["PEAK_SPREADS", "log_concave_mode", "panel_edges", "composite_rule"]

FloatArray = NDArray[np.float64]

# Panel edges around the mode, in units of the local scale ``1 / sqrt(-g'')``.
PEAK_SPREADS = (3.0, 10.0)

_BISECTION_STEPS = 64


@functools.lru_cache(maxsize=4096)
def _jacobi_unit(order: int, a: float) -> tuple[FloatArray, FloatArray]:
    """Nodes and log-weights for ``∫_0^1 t^(a-1) f(t) dt``."""
    x, w = special.roots_jacobi(order, 0.0, a - 1.0)
    t = (1.0 + x) / 2.0
    log_w = np.log(w) - a * np.log(2.0)
    t.setflags(write=False)
    log_w.setflags(write=False)
    return t, log_w


@functools.lru_cache(maxsize=64)
def _legendre_unit(order: int) -> tuple[FloatArray, FloatArray]:
    """Nodes and log-weights for ``∫_0^1 f(t) dt``."""
    x, w = special.roots_legendre(order)
    t = (1.0 + x) / 2.0
    log_w = np.log(w / 2.0)
    t.setflags(write=False)
    log_w.setflags(write=False)
    return t, log_w


def log_concave_mode(
    upper: ArrayLike,
    a: ArrayLike,
    b: ArrayLike,
    slope: ArrayLike,
    precision: ArrayLike,
    center: ArrayLike,
) -> tuple[FloatArray, FloatArray]:
    """Mode and local scale of the smooth log-factor on ``(0, U)``.

    The factor is ``(a-1)⁺ ln m + (b-1)⁺ ln(1-m) + λ m - τ (m - c)² / 2``.

    The function is concave, so its derivative is decreasing and the mode is found by
    bisection. Exponents below one are left out; they only move mass towards the window
    ends, which the panels cover anyway.

    Returns
    -------
    mode : FloatArray
        Maximiser on ``[0, U]``.
    scale : FloatArray
        ``1 / sqrt(-g''(mode))``, or ``1 / |g'(mode)|`` when smaller, infinite where the
        function is flat.
    """
    upper_, a_, b_, slope_, precision_, center_ = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (upper, a, b, slope, precision, center))
    )
    a_pos, b_pos = np.maximum(a_ - 1.0, 0.0), np.maximum(b_ - 1.0, 0.0)

    def derivative(m: FloatArray) -> FloatArray:
        out = a_pos / m - b_pos / (1.0 - m) + slope_ - precision_ * (m - center_)
        return out  # type: ignore[no-any-return]

    lo, hi = np.zeros_like(upper_), upper_.copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(_BISECTION_STEPS):
            mid = (lo + hi) / 2.0
            rising = derivative(mid) > 0
            lo = np.where(rising, mid, lo)
            hi = np.where(rising, hi, mid)
        mode = (lo + hi) / 2.0
        curvature = a_pos / mode**2 + b_pos / (1.0 - mode) ** 2 + precision_
        scale = np.where(curvature > 0, 1.0 / np.sqrt(curvature), np.inf)
        # a mode on the window edge decays with the slope there
        scale = np.minimum(scale, 1.0 / np.abs(derivative(mode)))
    return mode, scale


def panel_edges(
    upper: ArrayLike,
    breakpoints: ArrayLike,
    mode: ArrayLike,
    scale: ArrayLike,
) -> FloatArray:
    """Sorted panel edges of each row, from 0 to ``upper``.

    Parameters
    ----------
    upper : ArrayLike
        Window ends, shape (n,).
    breakpoints : ArrayLike
        Extra interior edges, shape (n, k). Values outside the window are clipped.
    mode, scale : ArrayLike
        Mode and local scale of the smooth factor, shape (n,).

    Returns
    -------
    FloatArray
        Shape (n, k + 2 + 1 + 2 * len(PEAK_SPREADS)). Repeated edges give empty panels.
    """
    upper_ = np.atleast_1d(np.asarray(upper, dtype=float))
    mode_ = np.broadcast_to(np.asarray(mode, dtype=float), upper_.shape)
    scale_ = np.broadcast_to(np.asarray(scale, dtype=float), upper_.shape)
    extra = np.asarray(breakpoints, dtype=float).reshape(upper_.size, -1)
    around = [mode_]
    for spread in PEAK_SPREADS:
        with np.errstate(invalid="ignore"):
            around += [mode_ - spread * scale_, mode_ + spread * scale_]
    interior = np.column_stack([extra, *around])
    interior = np.clip(np.nan_to_num(interior, nan=0.0), 0.0, upper_[:, None])
    edges = np.column_stack([np.zeros_like(upper_), interior, upper_])
    return np.sort(edges, axis=1)


def composite_rule(edges: ArrayLike, a: ArrayLike, order: int) -> tuple[FloatArray, FloatArray]:
    """Nodes and log-weights of ``∫ m^(a-1) f(m) dm`` over the panels of each row.

    The ``m^(a-1)`` factor is part of the weights. Empty panels get ``-inf`` weights.

    Returns
    -------
    nodes : FloatArray
        Shape (n, panels * order).
    log_weights : FloatArray
        Same shape, such that the integral is ``Σ exp(log_weights) f(nodes)``.
    """
    edges_ = np.atleast_2d(np.asarray(edges, dtype=float))
    n, n_panels = edges_.shape[0], edges_.shape[1] - 1
    a_ = np.broadcast_to(np.asarray(a, dtype=float), (n,))
    lo, hi = edges_[:, :-1, None], edges_[:, 1:, None]
    width = hi - lo
    t_leg, log_w_leg = _legendre_unit(order)
    nodes = np.empty((n, n_panels, order))
    log_weights = np.empty((n, n_panels, order))
    for a_value in np.unique(a_):
        rows = a_ == a_value
        t_jac, log_w_jac = _jacobi_unit(order, float(a_value))
        lo_r, hi_r, width_r = lo[rows], hi[rows], width[rows]
        origin = lo_r == 0.0
        m = np.where(origin, hi_r * t_jac, lo_r + width_r * t_leg)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_w = np.where(
                origin,
                log_w_jac + a_value * np.log(hi_r),
                log_w_leg + np.log(width_r) + (a_value - 1.0) * np.log(m),
            )
        empty = np.broadcast_to(width_r <= 0.0, m.shape)
        upper = edges_[rows, -1][:, None, None]
        nodes[rows] = np.where(empty, upper / 2.0, m)
        log_weights[rows] = np.where(empty, -np.inf, log_w)
    return nodes.reshape(n, -1), log_weights.reshape(n, -1)
