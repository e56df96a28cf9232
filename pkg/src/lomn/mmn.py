"""
Baseline for two-sided (MMN) noise and the bootstrap calibration engine.

The MMN statistic compares averages of adjacent blocks of ``nh`` mid quotes,

    T_LM = max_{k >= 2} sqrt(nh) |A_k - A_{k-1}| / sqrt(2/3 sigma_k^2 C^2 + 2 q^2),

with ``C = nh / sqrt(n)``. The factor ``sqrt(nh)`` makes the standardised
differences approximately unit-variance; it is a constant and does not
change bootstrap decisions.

Critical values come from a parametric bootstrap: null paths are rebuilt
from a volatility path with zero drift, noise of the estimated level is
added (two-sided, half-normal one-sided, or two-sided then thinned), and
the statistic's empirical quantile is returned.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import stats

from . import _batch
from .inference import JumpEvent
from .series import QuoteSeries, build_block_grid
from .simulate import HALFNORMAL_SCALE

__all__ = [
    "LMConfig",
    "BootstrapConfig",
    "BootstrapHandle",
    "estimate_noise_level",
    "lm_statistic",
    "bootstrap_statistics",
    "bootstrap_critical_values",
    "local_average_detector",
    "default_jobs",
]

SCENARIOS = ("additive", "halfnormal", "thinned")


def default_jobs() -> int:
    """Worker processes for Monte Carlo loops (``LOMN_JOBS``, default 1)."""
    try:
        return max(1, int(os.environ.get("LOMN_JOBS", "1")))
    except ValueError:
        return 1


def estimate_noise_level(series) -> float:
    """``q_hat = sqrt(sum (Z_i - Z_{i-1})^2 / (2n))``."""
    z = series.values if isinstance(series, QuoteSeries) else np.asarray(series, dtype=float)
    if z.size < 2:
        raise ValueError("need at least two observations")
    dz = np.diff(z)
    return float(np.sqrt(np.sum(dz * dz) / (2.0 * dz.size)))


@dataclass(frozen=True)
class LMConfig:
    nh: int
    q: float
    sigma_source: str = "true"

    def __post_init__(self):
        if self.nh < 2:
            raise ValueError("nh must be at least 2")
        if self.q < 0:
            raise ValueError("q must be nonnegative")


def lm_statistic(mid: QuoteSeries, cfg: LMConfig, sigma_path) -> float:
    """Maximum standardised difference of adjacent block averages.

    ``sigma_path`` is the spot volatility at each observation (array of
    ``len(mid)``) or a constant. Blocks are consecutive runs of ``nh``
    observations from the start; a trailing remainder is dropped.
    """
    z = mid.values[None, :]
    sigma = np.broadcast_to(np.asarray(sigma_path, dtype=float), (mid.times.size,))[None, :]
    if mid.times.size // cfg.nh < 3:
        raise ValueError("insufficient observations for the requested blocks")
    with np.errstate(invalid="ignore", divide="ignore"):
        T = _batch.lm_rows(z, cfg.nh, sigma, np.array([cfg.q]), mid.n)[0]
    if not np.isfinite(T):
        raise ValueError("degenerate denominator")
    return float(T)


@dataclass(frozen=True, eq=False)
class BootstrapConfig:
    """Null model for the bootstrap.

    Parameters
    ----------
    sigma : array_like
        Spot volatility on the grid ``0..n`` (length ``n + 1``), or a pool
        of such paths (one per row); sample ``j`` uses row ``j % rows``.
    q_hat : float
        Noise level of the bootstrap noise.
    scenario : {"additive", "halfnormal", "thinned"}
        Two-sided Gaussian noise; one-sided ``c q |eps|`` on every point;
        or two-sided noise split into ask/bid by sign.
    m : int
        Number of bootstrap samples.
    x0 : float
        Starting log-price.
    seed : int
        Sample ``j`` draws from ``SeedSequence(seed, spawn_key=(j,))``.
    """

    sigma: np.ndarray
    q_hat: float
    scenario: str = "additive"
    m: int = 5_000
    x0: float = 0.0
    seed: int = 0
    chunk: int = 250

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"scenario must be one of {SCENARIOS}")
        if self.m < 1:
            raise ValueError("m must be positive")
        sigma = np.asarray(self.sigma, dtype=float)
        object.__setattr__(self, "sigma", sigma.reshape(-1, sigma.shape[-1]))

    @property
    def n(self) -> int:
        return self.sigma.shape[1] - 1

    def sigma_rows(self, reps) -> np.ndarray:
        return self.sigma[np.asarray(reps) % self.sigma.shape[0]]


@dataclass(frozen=True)
class BootstrapSample:
    """One chunk of bootstrap data handed to statistic callbacks.

    ``mid`` is the two-sided series, ``ask``/``bid`` hold the one-sided
    quotes with ``+inf``/``-inf`` at missing points.
    """

    x: np.ndarray
    mid: np.ndarray
    ask: np.ndarray
    bid: np.ndarray
    sigma: np.ndarray
    q_hat: float


@dataclass(eq=False)
class BootstrapHandle:
    config: BootstrapConfig
    statistics: dict = field(default_factory=dict)

    def quantile(self, alpha: float, name: Optional[str] = None) -> float:
        """Empirical ``(1 - alpha)`` quantile of a bootstrap statistic."""
        if not 0.0 < alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if name is None:
            if len(self.statistics) != 1:
                raise ValueError("name the statistic")
            (name,) = self.statistics
        stats = self.statistics[name]
        stats = stats[np.isfinite(stats)]
        if stats.size < max(100, int(np.ceil(1.0 / alpha))):
            raise ValueError("m too small for alpha")
        return float(np.quantile(stats, 1.0 - alpha))

    def for_statistic(self, name: str) -> "BootstrapHandle":
        return BootstrapHandle(self.config, {name: self.statistics[name]})


def _sample_chunk(cfg: BootstrapConfig, reps) -> BootstrapSample:
    n = cfg.n
    R = len(reps)
    dw = np.empty((R, n))
    eps = np.empty((R, n + 1))
    for j, r in enumerate(reps):
        g = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(int(r),)))
        dw[j] = g.standard_normal(n)
        eps[j] = g.standard_normal(n + 1)
    sigma = cfg.sigma_rows(list(reps))
    x = np.empty((R, n + 1))
    x[:, 0] = cfg.x0
    x[:, 1:] = cfg.x0 + np.cumsum(sigma[:, :-1] * np.sqrt(1.0 / n) * dw, axis=1)
    noise = cfg.q_hat * eps
    mid = x + noise
    if cfg.scenario == "halfnormal":
        folded = HALFNORMAL_SCALE * np.abs(noise)
        ask, bid = x + folded, x - folded
    elif cfg.scenario == "thinned":
        ask = np.where(noise > 0, mid, np.inf)
        bid = np.where(noise < 0, mid, -np.inf)
    else:
        ask, bid = mid, mid
    return BootstrapSample(x, mid, ask, bid, sigma, cfg.q_hat)


def _run_chunk(args):
    cfg, reps, statistics = args
    sample = _sample_chunk(cfg, reps)
    return {name: np.asarray(fn(sample), dtype=float) for name, fn in statistics.items()}


def bootstrap_statistics(cfg: BootstrapConfig, statistics: dict,
                         jobs: Optional[int] = None) -> BootstrapHandle:
    """Evaluate ``statistics`` (name -> callable on a :class:`BootstrapSample`)
    on ``cfg.m`` null samples.

    Results depend only on ``cfg`` (chunking and ``jobs`` do not matter).
    Callables must be picklable when ``jobs > 1``.
    """
    jobs = default_jobs() if jobs is None else jobs
    chunks = [range(a, min(a + cfg.chunk, cfg.m)) for a in range(0, cfg.m, cfg.chunk)]
    tasks = [(cfg, c, statistics) for c in chunks]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(jobs) as ex:
            parts = list(ex.map(_run_chunk, tasks))
    else:
        parts = [_run_chunk(t) for t in tasks]
    out = {name: np.concatenate([p[name] for p in parts]) for name in statistics}
    return BootstrapHandle(cfg, out)


@dataclass(frozen=True)
class BHRStatistic:
    """Global extrema statistic standardised by the bootstrap volatility at
    block starts.

    With ``partition="time"`` blocks are runs of ``block_points`` grid points;
    with ``"count"`` they are runs of ``block_points`` observed quotes, which
    differs from the former for thinned samples.
    """

    block_points: int
    side: str = "ask"
    partition: str = "time"

    def __call__(self, s: BootstrapSample) -> np.ndarray:
        n = s.x.shape[1] - 1
        y = s.ask if self.side == "ask" else -s.bid
        if self.partition == "count":
            return _batch.count_block_rows(y, self.block_points, s.sigma)[0]
        starts = _batch.grid_starts(n, block_points=self.block_points)
        m, empty = _batch.block_minima(y, starts)
        z = _batch.standardized_differences(m, empty, s.sigma[:, starts[:-1]])
        return _batch.max_statistic(z)[0]


@dataclass(frozen=True)
class LMStatistic:
    nh: int

    def __call__(self, s: BootstrapSample) -> np.ndarray:
        n = s.x.shape[1] - 1
        return _batch.lm_rows(s.mid, self.nh, s.sigma, np.full(s.x.shape[0], s.q_hat), n)


def bootstrap_critical_values(cfg: BootstrapConfig, statistic: str = "BHR", alpha: float = 0.05,
                              nh: int = 10, side: str = "ask", partition: str = "time",
                              jobs: Optional[int] = None) -> float:
    """Bootstrap ``(1 - alpha)`` critical value of the BHR or LM statistic."""
    if cfg.m < max(100, int(np.ceil(1.0 / alpha))):
        raise ValueError("m too small for alpha")
    fn: Callable = BHRStatistic(nh, side, partition) if statistic.upper() == "BHR" else LMStatistic(nh)
    return bootstrap_statistics(cfg, {statistic: fn}, jobs).quantile(alpha, statistic)


def local_average_detector(mid: QuoteSeries, nh: int, q: float, sigma, alpha: float = 0.05,
                           critical: Optional[float] = None) -> list:
    """Block-end jump detection from adjacent averages of mid quotes.

    Blocks hold ``nh`` grid steps each (time partition). Block ``k >= 2`` is
    flagged when its standardised average difference (the summand of the
    MMN statistic) exceeds ``critical``; the event is known only at the
    block end, which is its time. Without ``critical`` a Sidak-corrected
    two-sided normal quantile over the tested blocks is used.

    ``sigma`` is a constant, an array per observation, or a callable of
    session time.
    """
    grid = build_block_grid(mid, obs_per_block=nh)
    K = grid.block_count
    if K < 3:
        raise ValueError("insufficient observations for the requested blocks")
    sums = np.add.reduceat(mid.values, grid.starts[:-1])
    avg = sums / np.maximum(grid.counts, 1)
    starts_t = grid.edges[:-1]
    if callable(sigma):
        s = np.asarray(sigma(starts_t), dtype=float)
    else:
        s = np.asarray(sigma, dtype=float)
        if s.ndim:
            s = s[np.minimum(grid.starts[:-1], s.size - 1)]
        s = np.broadcast_to(s, (K,))
    C = nh / np.sqrt(mid.n)
    denom = np.sqrt((2.0 / 3.0) * s * s * C * C + 2.0 * q * q)
    if critical is None:
        level = 1.0 - (1.0 - alpha) ** (1.0 / max(K - 2, 1))
        critical = float(stats.norm.ppf(1.0 - level / 2.0))
    events = []
    for k in range(2, K):
        if grid.counts[k] == 0 or grid.counts[k - 1] == 0:
            continue
        d = avg[k] - avg[k - 1]
        if np.sqrt(nh) * abs(d) / denom[k] > critical:
            end = float(grid.edges[k + 1])
            events.append(JumpEvent(end, float(d), k, alpha, (float(grid.edges[k]), end),
                                    side="mid"))
    return events
