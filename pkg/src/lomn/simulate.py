"""
Efficient prices, microstructure noise and the implicit ask/bid thinning.

The efficient log-price follows

    dX_t = v_t sigma_t dW_t,
    d sigma_t^2 = 0.0162 (0.8465 - sigma_t^2) dt + 0.117 sigma_t dB_t,
    v_t = (1.2 - 0.2 sin(3 pi t / 4)) * 0.01,

with ``d[W, B]_t = -0.5 dt``, discretised by Euler-Maruyama on the grid
``t_i = i/n`` (full truncation keeps ``sigma^2`` positive).

Noise kinds
-----------
``ar1``         two-sided AR(1) noise ``e_{i+1} = phi e_i + eta``; ask and bid
                quotes are the grid points where the noise is positive /
                negative.
``gaussian``    i.i.d. N(0, q^2) mid noise, thinned the same way.
``halfnormal``  ask = X + q |eps| / sqrt(1 - 2/pi) on every grid point, i.e.
                one-sided noise with variance q^2; the mid series is
                ``X + q eps`` with the same draws.
``exponential`` ask = X + q Exp(1) on every grid point.
``rounding``    ``Z = log(s v round(exp(X + eps) / s))`` with tick ``s``,
                thinned into ask/bid by the sign of ``Z - X``.

Seeding: replication ``r`` of seed ``s`` draws from
``SeedSequence(s, spawn_key=(r,))``, split into independent path, noise and
jump streams, so results do not depend on batch sizes or worker counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import signal

from .series import QuoteSeries, Side

__all__ = [
    "SimConfig",
    "NoiseSpec",
    "Path",
    "ObservationSet",
    "replication_rngs",
    "seasonal_factor",
    "simulate_path",
    "simulate_paths",
    "inject_jump",
    "draw_jump",
    "apply_noise",
    "noise_batch",
    "sample_one_sided_noise",
    "observe",
]

HALFNORMAL_SCALE = 1.0 / np.sqrt(1.0 - 2.0 / np.pi)
JUMP_BAND = (0.1, 0.9)


@dataclass(frozen=True)
class SimConfig:
    n: int = 23_400
    mean_reversion: float = 0.0162
    level: float = 0.8465
    vol_of_vol: float = 0.117
    leverage: float = -0.5
    sigma0_sq: Optional[float] = None
    x0: float = 0.0
    drift: float = 0.0
    seasonal: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.initial_variance <= 0:
            raise ValueError("initial variance must be positive")

    @property
    def initial_variance(self) -> float:
        return self.level if self.sigma0_sq is None else self.sigma0_sq


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "ar1"
    q: float = 0.0
    phi: float = -0.5
    tick: float = 0.01

    _KINDS = ("ar1", "gaussian", "halfnormal", "exponential", "rounding")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.q < 0:
            raise ValueError("noise level must be nonnegative")
        if self.kind == "rounding" and self.tick <= 0:
            raise ValueError("tick must be positive")
        if self.kind == "ar1" and not -1 < self.phi < 1:
            raise ValueError("AR coefficient must lie in (-1, 1)")

    @property
    def thinned(self) -> bool:
        """True if ask/bid samples are obtained by thinning a two-sided series."""
        return self.kind in ("ar1", "gaussian", "rounding")

    def with_q(self, q: float) -> "NoiseSpec":
        return replace(self, q=q)


def seasonal_factor(t):
    return (1.2 - 0.2 * np.sin(0.75 * np.pi * np.asarray(t, dtype=float))) * 0.01


def replication_rngs(seed: int, rep: int, streams: int = 3):
    """Independent generators (path, noise, jump, ...) for one replication."""
    ss = np.random.SeedSequence(seed, spawn_key=(int(rep),))
    return [np.random.default_rng(s) for s in ss.spawn(streams)]


@dataclass(frozen=True, eq=False)
class Path:
    """One simulated session: ``x`` on the grid and the spot volatility ``v_t sigma_t``."""

    t: np.ndarray
    x: np.ndarray
    spot_vol: np.ndarray
    sigma_sq: np.ndarray
    jumps: tuple = ()

    @property
    def n(self) -> int:
        return self.t.size - 1


def _euler(config: SimConfig, dw: np.ndarray, db: np.ndarray):
    """Vectorised Euler scheme; ``dw``, ``db`` are standard normals of shape (R, n)."""
    R, n = dw.shape
    dt = 1.0 / n
    sq = np.sqrt(dt)
    rho = config.leverage
    dbc = rho * dw + np.sqrt(1.0 - rho * rho) * db
    s2 = np.empty((n + 1, R))
    s2[0] = config.initial_variance
    cur = s2[0].copy()
    dbT = dbc.T * sq
    a, lvl, xi = config.mean_reversion, config.level, config.vol_of_vol
    for i in range(n):
        cur = cur + a * (lvl - cur) * dt + xi * np.sqrt(cur) * dbT[i]
        np.maximum(cur, 1e-10, out=cur)
        s2[i + 1] = cur
    s2 = s2.T
    t = np.arange(n + 1) / n
    v = seasonal_factor(t) if config.seasonal else np.full(n + 1, 0.01)
    spot = v * np.sqrt(s2)
    x = np.empty((R, n + 1))
    x[:, 0] = config.x0
    np.cumsum(config.drift * dt + spot[:, :-1] * sq * dw, axis=1, out=x[:, 1:])
    x[:, 1:] += config.x0
    return t, x, spot, s2


def simulate_paths(config: SimConfig, reps, seed: Optional[int] = None):
    """Simulate replications ``reps`` (an int count or an iterable of indices).

    Returns ``t`` and arrays ``x``, ``spot_vol``, ``sigma_sq`` of shape
    ``(R, n + 1)``.
    """
    seed = config.seed if seed is None else seed
    reps = range(reps) if isinstance(reps, (int, np.integer)) else list(reps)
    n = config.n
    dw = np.empty((len(reps), n))
    db = np.empty((len(reps), n))
    for j, r in enumerate(reps):
        g = replication_rngs(seed, r)[0]
        dw[j] = g.standard_normal(n)
        db[j] = g.standard_normal(n)
    return _euler(config, dw, db)


def simulate_path(config: SimConfig, rep: int = 0) -> Path:
    """One session; identical to row ``rep`` of :func:`simulate_paths`."""
    t, x, spot, s2 = simulate_paths(config, [rep])
    return Path(t, x[0], spot[0], s2[0])


def inject_jump(path: Path, time: float, size: float, band=JUMP_BAND) -> Path:
    """Add ``size`` to ``X_t`` for all grid times ``t >= time``."""
    if not band[0] <= time <= band[1]:
        raise ValueError(f"jump time must lie in {band}")
    x = path.x.copy()
    if size != 0.0:
        x[path.t >= time] += size
    return Path(path.t, x, path.spot_vol, path.sigma_sq, path.jumps + ((time, size),))


def draw_jump(rng: np.random.Generator, abs_size: float, n: int, band=JUMP_BAND):
    """Random jump time strictly between grid points and a random sign."""
    i = rng.integers(int(np.ceil(band[0] * n)), int(np.floor(band[1] * n)))
    time = (i + rng.uniform(0.05, 0.95)) / n
    sign = 1.0 if rng.random() < 0.5 else -1.0
    return float(time), sign * abs_size


def _ar1(eta: np.ndarray, phi: float, q: float, first: np.ndarray) -> np.ndarray:
    """AR(1) along the last axis with a stationary start; ``eta`` and ``first`` are N(0, 1)."""
    e0 = first * q / np.sqrt(1.0 - phi * phi)
    out = np.empty(eta.shape[:-1] + (eta.shape[-1] + 1,))
    out[..., 0] = e0
    out[..., 1:] = signal.lfilter([1.0], [1.0, -phi], q * eta, axis=-1,
                                  zi=(phi * e0)[..., None])[0]
    return out


def _draws(spec: NoiseSpec, g: np.random.Generator, shape) -> np.ndarray:
    """Raw noise draws from one generator, AR structure along the last axis.

    Two-sided kinds give the centred noise; ``halfnormal`` gives the Gaussian
    draw ``q eps`` that the one-sided quote folds; ``exponential`` gives
    ``q Exp(1)``. Rounding is applied in :func:`observe` since it depends on
    the price level.
    """
    shape = tuple(shape)
    if spec.kind == "ar1":
        z = g.standard_normal(shape)
        return _ar1(z[..., 1:], spec.phi, spec.q, z[..., 0])
    if spec.kind == "exponential":
        return spec.q * g.exponential(size=shape)
    return spec.q * g.standard_normal(shape)


def noise_batch(spec: NoiseSpec, shape, rngs) -> np.ndarray:
    """Raw noise draws of shape ``(R, m)``, row ``j`` from ``rngs[j]``."""
    R, m = shape
    out = np.empty((R, m))
    for j, g in enumerate(rngs):
        out[j] = _draws(spec, g, (m,))
    return out


def sample_one_sided_noise(spec: NoiseSpec, shape, rng: np.random.Generator) -> np.ndarray:
    """Nonnegative ask-side noise; grid points that thinning removes are ``+inf``.

    For the rounding kind the Gaussian pre-rounding noise is used, since the
    rounding error depends on the unknown price level.
    """
    d = _draws(spec, rng, shape)
    if spec.q == 0.0:
        return np.zeros(d.shape)
    if spec.kind == "halfnormal":
        return HALFNORMAL_SCALE * np.abs(d)
    if spec.kind == "exponential":
        return d
    return np.where(d > 0, d, np.inf)


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Mid, ask and bid samples of one session on the full grid.

    ``ask_mask`` / ``bid_mask`` select the grid points at which an ask / bid
    quote is observed; ``ask`` and ``bid`` hold the quote values there.
    """

    t: np.ndarray
    x: np.ndarray
    spot_vol: np.ndarray
    mid: np.ndarray
    ask: np.ndarray
    bid: np.ndarray
    ask_mask: np.ndarray
    bid_mask: np.ndarray
    jumps: tuple = field(default=())

    def _series(self, values, mask, side):
        return QuoteSeries(self.t[mask], values[mask], side)

    def ask_series(self) -> QuoteSeries:
        return self._series(self.ask, self.ask_mask, Side.ASK)

    def bid_series(self) -> QuoteSeries:
        return self._series(self.bid, self.bid_mask, Side.BID)

    def mid_series(self) -> QuoteSeries:
        return QuoteSeries(self.t, self.mid, Side.MID)


def observe(spec: NoiseSpec, x: np.ndarray, draws: np.ndarray):
    """Turn efficient prices and raw draws into ``(mid, ask, bid, ask_mask, bid_mask)``.

    Works elementwise, so 1-d paths and 2-d batches are both fine.
    """
    full = np.ones(x.shape, dtype=bool)
    if spec.kind == "halfnormal":
        folded = HALFNORMAL_SCALE * np.abs(draws)
        return x + draws, x + folded, x - folded, full, full
    if spec.kind == "exponential":
        return x + draws - spec.q, x + draws, x - draws, full, full
    if spec.kind == "rounding":
        price = np.exp(x + draws)
        mid = np.log(np.maximum(spec.tick, np.round(price / spec.tick) * spec.tick))
        ask_mask = mid >= x  # ties go to the ask side
    else:
        mid = x + draws
        ask_mask = mid > x
    return mid, mid, mid, ask_mask, mid < x


def apply_noise(path: Path, spec: NoiseSpec, rng=None, seed: int = 0, rep: int = 0) -> ObservationSet:
    """Observe ``path`` with noise ``spec``.

    Without an explicit ``rng`` the noise stream of replication ``rep`` of
    ``seed`` is used, matching the batch experiment engine.
    """
    rng = replication_rngs(seed, rep)[1] if rng is None else rng
    draws = _draws(spec, rng, (path.n + 1,))
    mid, ask, bid, am, bm = observe(spec, path.x, draws)
    return ObservationSet(path.t, path.x, path.spot_vol, mid, ask, bid, am, bm, path.jumps)
