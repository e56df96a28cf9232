"""
Offline jump inference from block extrema.

* :func:`estimate_jump` compares the extrema of the windows just before and
  just after a time ``tau``.
* :func:`local_test` standardises that comparison by pre- and post-window
  volatility estimates and tests for a jump at ``tau``.
* :func:`global_test` looks at the largest volatility-standardised
  difference of adjacent block extrema over the session and calibrates it
  with the Gumbel law (or a bootstrap).
* :func:`sequential_detect` repeats the global test, discarding the
  previously detected block each round.

Standardisation of the maximum
------------------------------
With ``N`` differences the raw maximum ``T`` is mapped to

    ``scaling="block"``:   h**-0.5 * sqrt(2 log 2N) * T - B(N),
    ``scaling="rate"``:    n**(1/3) * T - B(N),

where ``B(N) = 2 log 2N - log(pi log 2N)``. The two coincide when ``h``
solves ``h = 2 log(2/h - 2) n**(-2/3)`` (see
:func:`lomn.evt.balanced_block_count`); the block form stays valid for any
block length.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import evt
from .series import (BlockGrid, ExtremaSeries, QuoteSeries, WindowExtremum,
                     build_block_grid, extrema_window, local_extrema)
from .spot_vol import SpotVolConfig, SpotVolPath, spot_vol_path

__all__ = [
    "JumpEvent",
    "LocalTestReport",
    "GlobalTestReport",
    "estimate_jump",
    "local_statistic",
    "local_test",
    "standardize_max",
    "global_statistic",
    "global_test",
    "finite_sample_block_count",
    "localize_jump",
    "sequential_detect",
]

SCALINGS = ("block", "rate")


@dataclass(frozen=True)
class JumpEvent:
    """A detected (or estimated) jump.

    ``interval`` is the localisation interval in session time; ``latency``
    (online only) is the session time elapsed between the interval start
    and the detection.
    """

    time: float
    size: float
    block: int
    alpha: float
    interval: tuple = (float("nan"), float("nan"))
    wall_clock: float = float("nan")
    latency: float = float("nan")
    side: str = "ask"

    @property
    def direction(self) -> int:
        return int(np.sign(self.size))


@dataclass(frozen=True)
class LocalTestReport:
    statistic: float
    critical_value: float
    decision: bool
    tau: float
    alpha: float
    after: WindowExtremum
    before: WindowExtremum
    sigma_after: float
    sigma_before: float

    @property
    def jump_size(self) -> float:
        return self.after.value - self.before.value


@dataclass(frozen=True, eq=False)
class GlobalTestReport:
    """Outcome of the global maximum test.

    ``standardized`` holds ``|m_k - m_{k-1}| / sigma_k`` for ``k = 1..K-1``
    (index ``k - 1``), NaN where a difference is excluded.
    """

    T_raw: float
    T_std: float
    critical_value: float
    critical_source: str
    decision: bool
    argmax_block: int
    theta_hat: float
    h: float
    alpha: float
    N: int
    scaling: str
    standardized: np.ndarray = field(repr=False)
    jump_size: float = float("nan")


def estimate_jump(series: QuoteSeries, tau: float, nh: int) -> float:
    """``X_hat(tau) - X_hat(tau-)`` from windows of ``nh`` observations."""
    after = extrema_window(series, tau, nh, "after")
    before = extrema_window(series, tau, nh, "before")
    return after.value - before.value


def local_statistic(after, before, sigma_after, sigma_before, h):
    """``h**-0.5 |(after - a) / sigma_after - (before - a) / sigma_before|``.

    ``a`` is the midpoint of the two extrema, which makes the statistic
    invariant to the price level. With equal volatilities it reduces to
    ``h**-0.5 |after - before| / sigma``. Works elementwise on arrays.
    """
    mid = 0.5 * (after + before)
    return np.abs((after - mid) / sigma_after - (before - mid) / sigma_before) / np.sqrt(h)


def _local_vols(series, tau, vol_obs, spot_cfg):
    grid = build_block_grid(series, obs_per_block=vol_obs)
    ext = local_extrema(series, grid)
    k = int(grid.block_of(tau))
    pre = spot_vol_path(ext, replace(spot_cfg, mode="pre")).values
    post = spot_vol_path(ext, replace(spot_cfg, mode="post")).values
    s_before = pre[k]
    s_after = post[min(k + 1, grid.block_count - 1)]
    if not (s_before > 0 and s_after > 0):
        raise ValueError("volatility estimation failed next to tau")
    return float(np.sqrt(s_after)), float(np.sqrt(s_before))


def local_test(series: QuoteSeries, tau: float, nh: int,
               spot_cfg: SpotVolConfig = SpotVolConfig(), alpha: float = 0.05, *,
               vol_obs_per_block: Optional[int] = None, sigma=None,
               critical_value: Optional[float] = None) -> LocalTestReport:
    """Test for a jump at ``tau``.

    Parameters
    ----------
    series : QuoteSeries
        Ask or bid quotes.
    tau : float
        Candidate jump time in ``(0, 1)``.
    nh : int
        Observations in each of the two extrema windows.
    spot_cfg : SpotVolConfig
        Volatility estimator; pre-window before ``tau``, post-window after.
    alpha : float
        Level; the default critical value is :func:`lomn.evt.local_quantile`.
    vol_obs_per_block : int, optional
        Block size of the volatility estimator (default ``nh``).
    sigma : float or (float, float), optional
        Known volatility (after, before) instead of estimates.
    critical_value : float, optional
        Override, e.g. from a bootstrap.
    """
    after = extrema_window(series, tau, nh, "after")
    before = extrema_window(series, tau, nh, "before")
    if sigma is None:
        s_after, s_before = _local_vols(series, tau, vol_obs_per_block or nh, spot_cfg)
    else:
        s_after, s_before = np.broadcast_to(np.asarray(sigma, dtype=float), (2,))
    h = nh / series.n
    stat = float(local_statistic(after.value, before.value, s_after, s_before, h))
    crit = evt.local_quantile(alpha) if critical_value is None else float(critical_value)
    return LocalTestReport(stat, crit, stat > crit, tau, alpha, after, before,
                           float(s_after), float(s_before))


def standardize_max(T_raw, N: int, h: float, n: int, scaling: str = "block"):
    """Centre and scale a raw maximum of ``N`` standardised differences."""
    cal = evt.GumbelCalibration(int(N))
    if scaling == "block":
        return np.asarray(T_raw) / np.sqrt(h) / cal.a - cal.B
    if scaling == "rate":
        return float(n) ** (1.0 / 3.0) * np.asarray(T_raw) - cal.B
    raise ValueError(f"scaling must be one of {SCALINGS}")


def _block_sigma(volpath, grid: BlockGrid) -> np.ndarray:
    """Volatility (not variance) at each block of ``grid``."""
    if isinstance(volpath, SpotVolPath):
        if volpath.values.size == grid.block_count:
            var = volpath.values
        else:
            var = volpath.at_times(grid.edges[:-1] + 1e-12)
        return np.sqrt(var)
    sigma = np.asarray(volpath, dtype=float)
    if sigma.shape != (grid.block_count,):
        raise ValueError("sigma must have one entry per block")
    return sigma


def _standardized_differences(extrema: ExtremaSeries, sigma: np.ndarray) -> np.ndarray:
    d, valid = extrema.differences()
    s = sigma[1:]
    ok = valid & (s > 0) & np.isfinite(s)
    out = np.full(d.shape, np.nan)
    out[ok] = np.abs(d[ok]) / s[ok]
    return out


def global_statistic(series: QuoteSeries, grid: BlockGrid, volpath):
    """Raw maximum statistic and all standardised differences.

    ``volpath`` is a :class:`SpotVolPath` (on this grid or any other grid,
    mapped by block start time) or an array of per-block volatilities.
    Differences touching empty blocks or failed volatility estimates are
    excluded.
    """
    ext = local_extrema(series, grid)
    z = _standardized_differences(ext, _block_sigma(volpath, grid))
    if np.sum(np.isfinite(z)) < 2:
        raise ValueError("fewer than two valid differences")
    return float(np.nanmax(z)), z


def _report(series, grid, z, alpha, critical, scaling, nh, discarded=()):
    z = z.copy()
    z[list(discarded)] = np.nan
    N = int(np.sum(np.isfinite(z)))
    if N < 2:
        raise ValueError("fewer than two valid differences")
    idx = int(np.nanargmax(z))
    T_raw = float(z[idx])
    T_std = float(standardize_max(T_raw, N, grid.block_length, series.n, scaling))
    if isinstance(critical, str):
        if critical != "asymptotic":
            raise ValueError("critical source must be 'asymptotic' or a bootstrap")
        crit, source = evt.gumbel_quantile(alpha), "asymptotic"
        decision = T_std > crit
    else:
        crit = float(critical.quantile(alpha)) if hasattr(critical, "quantile") else float(critical)
        source = "bootstrap"
        decision = T_raw > crit
    k = idx + 1
    theta = float(grid.edges[k])
    size = float("nan")
    if 0.0 < theta < 1.0:
        size = estimate_jump(series, theta, nh)
    return GlobalTestReport(T_raw, T_std, crit, source, bool(decision), k, theta,
                            grid.block_length, alpha, N, scaling, z, size)


def _prepare(series, block_count, obs_per_block, spot_cfg, vol_block_count, sigma,
             vol_obs_per_block=None, partition="time"):
    if block_count is None and obs_per_block is None:
        block_count = evt.balanced_block_count(series.n)
    grid = build_block_grid(series, block_count, obs_per_block, partition)
    if sigma is not None:
        vol = sigma
    else:
        if vol_obs_per_block is not None:
            vol_grid = build_block_grid(series, obs_per_block=vol_obs_per_block, partition=partition)
        elif vol_block_count is not None:
            vol_grid = build_block_grid(series, vol_block_count)
        else:
            vol_grid = grid
        vol = spot_vol_path(local_extrema(series, vol_grid), spot_cfg)
    _, z = global_statistic(series, grid, vol)
    nh = max(1, int(round(grid.block_length * series.n)))
    return grid, z, nh


def finite_sample_block_count(n: int, constant: float = 1.3) -> int:
    """``floor(n**(2/3) / constant)``, i.e. blocks of length ``constant * n**(-2/3)``."""
    return int(np.floor(n ** (2.0 / 3.0) / constant))


def global_test(series: QuoteSeries, block_count: Optional[int] = None,
                obs_per_block: Optional[int] = None,
                spot_cfg: SpotVolConfig = SpotVolConfig(), alpha: float = 0.05,
                critical_source="asymptotic", *, scaling: str = "block",
                vol_block_count: Optional[int] = None, vol_obs_per_block: Optional[int] = None,
                partition: str = "time", sigma=None) -> GlobalTestReport:
    """Global test for at least one jump in the session.

    Parameters
    ----------
    series : QuoteSeries
        Ask or bid quotes.
    block_count, obs_per_block : int, optional
        Test grid. Without either, the block count solves the implicit
        relation of :func:`lomn.evt.balanced_block_count`.
    spot_cfg : SpotVolConfig
        Volatility estimator.
    alpha : float
        Level.
    critical_source : "asymptotic", float or object with ``quantile(alpha)``
        Asymptotic Gumbel calibration of the standardised maximum, or a
        bootstrap critical value for the raw maximum.
    scaling : {"block", "rate"}
        Standardisation of the maximum (see module docstring).
    vol_block_count, vol_obs_per_block : int, optional
        Estimate volatility on its own grid; the value of the volatility
        block containing each test block's start is used.
    partition : {"time", "count"}
        Block partition for grids given by observations per block (see
        :func:`lomn.series.build_block_grid`).
    sigma : array_like, optional
        Known per-block volatilities on the test grid.
    """
    grid, z, nh = _prepare(series, block_count, obs_per_block, spot_cfg, vol_block_count, sigma,
                           vol_obs_per_block, partition)
    return _report(series, grid, z, alpha, critical_source, scaling, nh)


def localize_jump(report: GlobalTestReport) -> float:
    """``h * argmax``; ties resolve to the earliest block."""
    return report.theta_hat


def sequential_detect(series: QuoteSeries, block_count: Optional[int] = None,
                      obs_per_block: Optional[int] = None,
                      spot_cfg: SpotVolConfig = SpotVolConfig(), alpha: float = 0.05,
                      max_jumps: int = 5, *, schedule: str = "constant", decay: float = 0.5,
                      scaling: str = "block", vol_block_count: Optional[int] = None,
                      vol_obs_per_block: Optional[int] = None, partition: str = "time",
                      sigma=None) -> list:
    """Detect several jumps by repeated global testing.

    Each round tests the largest remaining standardised difference with the
    centring recomputed for the reduced count ``N``, records a
    :class:`JumpEvent` on rejection and discards that difference. Levels are
    constant or shrink by ``decay`` per round (``schedule="geometric"``).
    """
    if schedule not in ("constant", "geometric"):
        raise ValueError("schedule must be 'constant' or 'geometric'")
    grid, z, nh = _prepare(series, block_count, obs_per_block, spot_cfg, vol_block_count, sigma,
                           vol_obs_per_block, partition)
    events, discarded = [], []
    for j in range(max_jumps):
        level = alpha * (decay ** j if schedule == "geometric" else 1.0)
        if np.sum(np.isfinite(z)) - len(discarded) < 2:
            break
        rep = _report(series, grid, z, level, "asymptotic", scaling, nh, discarded)
        if not rep.decision:
            break
        k = rep.argmax_block
        events.append(JumpEvent(rep.theta_hat, rep.jump_size, k, level,
                                (float(grid.edges[k - 1]), float(grid.edges[min(k + 1, grid.block_count)])),
                                side=series.side.value))
        discarded.append(rep.argmax_block - 1)
    return events
