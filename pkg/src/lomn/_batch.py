"""
Row-vectorised kernels for Monte Carlo work.

Replications are stored as rows of 2-d arrays on the full grid ``t_i = i/n``;
grid points without a quote (thinned away) hold ``+inf`` for minima. Every
kernel agrees with the corresponding single-series function in
:mod:`lomn.series`, :mod:`lomn.inference` or :mod:`lomn.mmn`.
"""

from __future__ import annotations

import numpy as np

from .series import _fill_empty
from .spot_vol import SpotVolConfig, path_core


def grid_starts(n: int, block_count: int = None, block_points: int = None) -> np.ndarray:
    """Block start indices on the full grid ``0..n`` (length ``K + 1``).

    Same convention as :func:`lomn.series.build_block_grid`: right-closed
    time blocks; with ``block_points`` the last block absorbs the remainder.
    """
    t = np.arange(n + 1) / n
    if block_points is not None:
        K = n // block_points
        edges = np.append(np.arange(K) * (block_points / n), 1.0)
    else:
        edges = np.arange(block_count + 1) / block_count
    starts = np.searchsorted(t, edges, side="right")
    starts[0], starts[-1] = 0, n + 1
    return starts


def block_minima(y: np.ndarray, starts: np.ndarray):
    """Row-wise block minima; empty blocks are filled from their neighbours.

    Returns ``(m, empty)`` with shapes ``(R, K)``.
    """
    m = np.minimum.reduceat(y, starts[:-1], axis=1)
    empty = ~np.isfinite(m)
    if empty.any():
        for r in np.flatnonzero(empty.any(axis=1)):
            if empty[r].all():
                m[r] = np.nan
            else:
                m[r] = _fill_empty(m[r], empty[r])
    return m, empty


def count_block_rows(y: np.ndarray, block_points: int, sigma: np.ndarray):
    """Maximum statistic on blocks of ``block_points`` consecutive finite points.

    Row by row, the finite entries of ``y`` (observed quotes; missing points
    are ``+inf``) are cut into runs of ``block_points`` with the remainder
    joining the last run, as in ``build_block_grid(..., partition="count")``.
    Differences are standardised by ``sigma`` at each block's first point.

    Returns ``(T, first, N)``: row maxima, grid index of the first point of
    the argmax block, and the number of differences.
    """
    R = y.shape[0]
    T = np.full(R, np.nan)
    first = np.zeros(R, dtype=int)
    N = np.zeros(R, dtype=int)
    for r in range(R):
        idx = np.flatnonzero(np.isfinite(y[r]))
        K = (idx.size - 1) // block_points
        if K < 3:
            continue
        starts = np.arange(K) * block_points
        m = np.minimum.reduceat(y[r, idx], starts)
        s = sigma[r, idx[starts[1:]]]
        with np.errstate(invalid="ignore", divide="ignore"):
            z = np.abs(np.diff(m)) / s
        ok = np.isfinite(z)
        if ok.sum() < 2:
            continue
        k = int(np.argmax(np.where(ok, z, -np.inf)))
        T[r], first[r], N[r] = z[k], idx[starts[k + 1]], ok.sum()
    return T, first, N


def differences(m: np.ndarray, empty: np.ndarray):
    return np.diff(m, axis=1), ~(empty[:, 1:] | empty[:, :-1])


def spot_vol_rows(m: np.ndarray, empty: np.ndarray, h: float, config: SpotVolConfig):
    d, valid = differences(m, empty)
    return path_core(d, valid, h, config)[0]


def standardized_differences(m, empty, sigma):
    """``|m_k - m_{k-1}| / sigma_k`` with NaN where excluded; ``sigma`` is ``(R, K)``."""
    d, valid = differences(m, empty)
    s = sigma[:, 1:]
    ok = valid & (s > 0) & np.isfinite(s)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(ok, np.abs(d) / np.where(ok, s, 1.0), np.nan)


def max_statistic(z: np.ndarray):
    """Row maxima, argmax (difference index ``k``, 1-based) and valid counts."""
    filled = np.where(np.isfinite(z), z, -np.inf)
    idx = np.argmax(filled, axis=1)
    T = filled[np.arange(z.shape[0]), idx]
    N = np.isfinite(z).sum(axis=1)
    T = np.where(N >= 2, T, np.nan)
    return T, idx + 1, N


def block_averages(z: np.ndarray, nh: int) -> np.ndarray:
    K = z.shape[1] // nh
    return z[:, :K * nh].reshape(z.shape[0], K, nh).mean(axis=2)


def lm_rows(z: np.ndarray, nh: int, sigma: np.ndarray, q: np.ndarray, n: int) -> np.ndarray:
    """Maximum standardised difference of adjacent block averages.

    ``sigma`` is the spot volatility per grid point ``(R, n + 1)`` (its value
    at each block start is used) and ``q`` the noise level per row.
    """
    avg = block_averages(z, nh)
    K = avg.shape[1]
    C = nh / np.sqrt(n)
    s = sigma[:, np.arange(2, K) * nh]
    denom = np.sqrt((2.0 / 3.0) * s * s * C * C + 2.0 * np.asarray(q)[:, None] ** 2)
    diff = np.sqrt(nh) * (avg[:, 2:] - avg[:, 1:-1])
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.max(np.abs(diff) / denom, axis=1)


def window_index(j: np.ndarray, nh: int, n: int, direction: str) -> np.ndarray:
    """Indices of the ``nh`` observations after (``j+1..j+nh``) or up to ``j``."""
    off = np.arange(1, nh + 1) if direction == "after" else np.arange(-nh + 1, 1)
    return np.clip(j[:, None] + off, 0, n)


def local_rows(y, j, nh, sigma_after, sigma_before, n):
    """Local extrema statistic at index ``j`` per row (minima of ``y``)."""
    rows = np.arange(y.shape[0])[:, None]
    after = y[rows, window_index(j, nh, n, "after")].min(axis=1)
    before = y[rows, window_index(j, nh, n, "before")].min(axis=1)
    mid = 0.5 * (after + before)
    stat = np.abs((after - mid) / sigma_after - (before - mid) / sigma_before) / np.sqrt(nh / n)
    return stat, after - before


def local_lm_rows(z, j, nh, sigma, q, n):
    """Standardised difference of the averages after and up to index ``j``."""
    rows = np.arange(z.shape[0])[:, None]
    after = z[rows, window_index(j, nh, n, "after")].mean(axis=1)
    before = z[rows, window_index(j, nh, n, "before")].mean(axis=1)
    C = nh / np.sqrt(n)
    denom = np.sqrt((2.0 / 3.0) * sigma ** 2 * C * C + 2.0 * np.asarray(q) ** 2)
    return np.sqrt(nh) * np.abs(after - before) / denom
