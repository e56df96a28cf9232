"""
Spot volatility from differences of adjacent block extrema.

For block minima ``m_k`` on blocks of length ``h`` the estimator is

    sigma2_hat(k) = c / K_eff * sum_r (m_r - m_{r-1})**2 / h,   c = pi / (2 (pi - 2)),

summed over a window of ``K`` differences before, around or after block
``k``. ``c`` rescales the variance ``2 (pi - 2) / pi`` of a difference of
two independent half-normals to one. With truncation, differences larger
than ``u = beta * h**kappa`` are dropped so that jumps do not leak into the
estimate; ``K_eff`` counts the retained terms.

The finite-sample expectation ``Psi(sigma^2)`` of the estimator is not the
identity; :func:`psi_mc` approximates it by Monte Carlo and
:class:`PsiInverse` inverts it by bisection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .series import ExtremaSeries
from .simulate import NoiseSpec, sample_one_sided_noise

__all__ = [
    "VAR_CONSTANT",
    "Truncation",
    "PsiInverse",
    "SpotVolConfig",
    "SpotVolPath",
    "spot_vol_at",
    "spot_vol_path",
    "psi_mc",
    "psi_mc_variance_form",
]

VAR_CONSTANT = np.pi / (2.0 * (np.pi - 2.0))
MODES = ("standard", "pre", "center", "post")


@dataclass(frozen=True)
class Truncation:
    """Threshold ``u = beta * h**kappa``.

    ``beta=None`` uses ``beta_factor`` times a preliminary untruncated
    global volatility estimate.
    """

    kappa: float = 0.4
    beta: Optional[float] = None
    beta_factor: float = 5.0

    def __post_init__(self):
        if not 0.0 < self.kappa < 0.5:
            raise ValueError("kappa must lie in (0, 1/2)")
        if self.beta is not None and self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.beta_factor <= 0:
            raise ValueError("beta_factor must be positive")


@dataclass(eq=False)
class PsiInverse:
    """Correction ``sigma2 -> Psi^{-1}(sigma2)`` with common random numbers.

    Parameters
    ----------
    noise : NoiseSpec
        Noise model under which ``Psi`` is evaluated.
    n : int
        Observations per unit of session time.
    reps : int
        Monte Carlo pairs of blocks.
    seed : int
        Seed of the cached draws; the same draws are reused for every
        evaluation so that ``Psi`` is monotone in ``sigma2``.
    rtol : float
        Bisection tolerance relative to the raw estimate.
    """

    noise: NoiseSpec
    n: int
    reps: int = 20_000
    seed: int = 0
    rtol: float = 1e-6
    _cache: dict = field(default_factory=dict, repr=False)

    def _draws(self, h: float):
        nh = int(round(self.n * h))
        if nh not in self._cache:
            self._cache[nh] = _psi_draws(self.n, nh, self.noise, self.reps, self.seed)
        return self._cache[nh]

    def psi(self, sigma_sq: float, h: float) -> float:
        paths, eps = self._draws(h)
        return _psi_eval(sigma_sq, paths, eps, h)

    def __call__(self, target: float, h: float) -> float:
        if not np.isfinite(target):
            return float("nan")
        floor = self.psi(0.0, h)
        if target <= floor:
            return 0.0
        hi = max(target, 1e-300)
        while self.psi(hi, h) < target:
            hi *= 2.0
        lo = 0.0
        tol = self.rtol * target
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if self.psi(mid, h) < target:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


Correction = Union[None, float, PsiInverse]


@dataclass(frozen=True)
class SpotVolConfig:
    """Window, truncation and correction of the spot volatility estimator.

    ``mode`` is ``"pre"``, ``"center"``, ``"post"`` or ``"standard"``; the
    latter uses the pre-window for ``k >= K`` and the post-window before.
    ``correction`` is ``None``, a constant factor, or a :class:`PsiInverse`.
    """

    K: int = 200
    mode: str = "standard"
    truncation: Optional[Truncation] = field(default_factory=Truncation)
    correction: Correction = 0.954

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if isinstance(self.correction, (int, float)) and self.correction <= 0:
            raise ValueError("correction factor must be positive")


@dataclass(frozen=True, eq=False)
class SpotVolPath:
    """Per-block variance estimates.

    ``failed`` marks blocks whose window had no usable difference (value
    NaN) or only zero differences (value 0).
    """

    values: np.ndarray
    config: SpotVolConfig
    h: float
    retained: np.ndarray
    truncation_hits: np.ndarray
    threshold: float
    failed: np.ndarray
    edges: Optional[np.ndarray] = None

    @property
    def sigma(self) -> np.ndarray:
        return np.sqrt(self.values)

    def at_times(self, t) -> np.ndarray:
        """Estimate of the block whose left edge is the last one ``<= t``."""
        t = np.asarray(t, dtype=float)
        if self.edges is None:
            k = (t / self.h).astype(int)
        else:
            k = np.searchsorted(self.edges, t + 1e-12, side="right") - 1
        return self.values[np.clip(k, 0, self.values.size - 1)]


def _windows(block_count: int, K: int, mode: str):
    """Inclusive difference-index windows ``[lo_k, hi_k]``, ``r`` in ``1..block_count-1``."""
    k = np.arange(block_count)
    last = block_count - 1
    pre_lo, pre_hi = np.maximum(k - K, 1), k - 1
    post_lo, post_hi = k + 1, np.minimum(k + K, last)
    if mode == "pre":
        return pre_lo, pre_hi
    if mode == "post":
        return post_lo, post_hi
    if mode == "center":
        below = (K - 1) // 2
        return np.maximum(k - below, 1), np.minimum(k + K - 1 - below, last)
    use_pre = k >= K
    return np.where(use_pre, pre_lo, post_lo), np.where(use_pre, pre_hi, post_hi)


def _threshold(d: np.ndarray, valid: np.ndarray, h: float, tr: Optional[Truncation]):
    """Truncation level per row (last axis indexes differences)."""
    if tr is None:
        return np.full(d.shape[:-1], np.inf)
    if tr.beta is not None:
        return np.full(d.shape[:-1], tr.beta * h ** tr.kappa)
    count = valid.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        ms = np.where(count > 0, np.sum(np.where(valid, d * d, 0.0), axis=-1) / count, np.inf)
    return tr.beta_factor * np.sqrt(VAR_CONSTANT * ms / h) * h ** tr.kappa


def _apply_correction(values: np.ndarray, correction: Correction, h: float) -> np.ndarray:
    if correction is None:
        return values
    if isinstance(correction, PsiInverse):
        flat = [correction(v, h) for v in values.ravel()]
        return np.array(flat).reshape(values.shape)
    return values * float(correction)


def path_core(d: np.ndarray, valid: np.ndarray, h: float, config: SpotVolConfig):
    """Windowed estimates for rows of extrema differences.

    ``d`` and ``valid`` have shape ``(..., K_b - 1)``. Returns the corrected
    values, retained counts, truncation hits and thresholds.
    """
    u = _threshold(d, valid, h, config.truncation)
    kept = valid & (np.abs(d) <= u[..., None])
    lead = d.shape[:-1]
    pad = np.zeros(lead + (2,))

    def prefix(a):
        return np.concatenate((pad, np.cumsum(a, axis=-1)), axis=-1)

    csum = prefix(np.where(kept, d * d, 0.0))
    ckept = prefix(kept.astype(float))
    ctrunc = prefix((valid & ~kept).astype(float))
    lo, hi = _windows(d.shape[-1] + 1, config.K, config.mode)
    hi_c = np.maximum(hi, lo - 1) + 1
    lo = np.minimum(lo, hi_c)

    def window(c):
        return c[..., hi_c] - c[..., lo]

    total, count, hits = window(csum), window(ckept), window(ctrunc)
    with np.errstate(invalid="ignore", divide="ignore"):
        raw = np.where(count > 0, VAR_CONSTANT * total / (h * count), np.nan)
    values = _apply_correction(raw, config.correction, h)
    return values, count.astype(int), hits.astype(int), u


def spot_vol_path(extrema: ExtremaSeries, config: SpotVolConfig = SpotVolConfig()) -> SpotVolPath:
    """Spot variance estimate at every block, via prefix sums over the windows.

    Blocks whose window has no retained difference get NaN and are flagged
    in ``failed`` rather than raising.
    """
    d, valid = extrema.differences()
    values, count, hits, u = path_core(d, valid, extrema.h, config)
    return SpotVolPath(values, config, extrema.h, count, hits, float(u), ~(values > 0),
                       extrema.grid.edges)


def spot_vol_at(extrema: ExtremaSeries, k: int, config: SpotVolConfig = SpotVolConfig()) -> float:
    """Spot variance estimate at block ``k``.

    Raises
    ------
    ValueError
        If the window is empty or every difference in it is truncated.
    """
    K_b = extrema.values.size
    if not 0 <= k < K_b:
        raise IndexError("block index out of range")
    d, valid = extrema.differences()
    h = extrema.h
    lo, hi = (w[k] for w in _windows(K_b, config.K, config.mode))
    if hi < lo:
        raise ValueError("empty estimation window")
    r = np.arange(lo, hi + 1) - 1
    dr = d[r][valid[r]]
    if dr.size == 0:
        raise ValueError("empty estimation window")
    u = _threshold(d, valid, h, config.truncation)
    dr = dr[np.abs(dr) <= u]
    if dr.size == 0:
        raise ValueError("all differences truncated")
    raw = VAR_CONSTANT * np.sum(dr * dr) / (h * dr.size)
    return float(_apply_correction(np.array([raw]), config.correction, h)[0])


def _psi_draws(n: int, nh: int, noise: NoiseSpec, reps: int, seed: int):
    """Brownian partial sums (unit variance rate) and one-sided noise for two blocks."""
    if reps < 1:
        raise ValueError("reps must be at least 1")
    if nh < 2:
        raise ValueError("need at least two observations per block")
    rng = np.random.default_rng(seed)
    steps = rng.standard_normal((reps, 2 * nh)) / np.sqrt(n)
    paths = np.concatenate((np.zeros((reps, 1)), np.cumsum(steps, axis=1)), axis=1)
    eps = sample_one_sided_noise(noise, (reps, 2 * nh + 1), rng)
    return paths, eps


def _block_minima(sigma_sq: float, paths: np.ndarray, eps: np.ndarray):
    nh = (paths.shape[1] - 1) // 2
    y = np.sqrt(sigma_sq) * paths + eps
    # observations i = 0..nh-1 form the first block, nh..2nh-1 the second
    return y[:, :nh].min(axis=1), y[:, nh:2 * nh].min(axis=1)


def _psi_eval(sigma_sq: float, paths: np.ndarray, eps: np.ndarray, h: float) -> float:
    m0, m1 = _block_minima(sigma_sq, paths, eps)
    d = m1 - m0
    d = d[np.isfinite(d)]
    return float(VAR_CONSTANT * np.mean(d * d) / h)


def psi_mc(sigma_sq: float, n: int, h: float, noise: NoiseSpec, reps: int = 20_000,
           seed: int = 0) -> float:
    """Monte Carlo ``Psi(sigma^2)``: expected estimator output at constant variance.

    Simulates two adjacent blocks of ``n h`` observations of ``sigma B + eps``,
    takes their minima and averages ``c (m_1 - m_0)**2 / h``.
    """
    if sigma_sq < 0:
        raise ValueError("sigma_sq must be nonnegative")
    paths, eps = _psi_draws(n, int(round(n * h)), noise, reps, seed)
    return _psi_eval(sigma_sq, paths, eps, h)


def psi_mc_variance_form(sigma_sq: float, n: int, h: float, noise: NoiseSpec,
                         reps: int = 20_000, seed: int = 0) -> float:
    """``Psi`` via ``(pi / (pi - 2)) Var(min) / h`` on a single block.

    Agrees with :func:`psi_mc` to leading order when block minima are
    nearly independent; used as a cross-check.
    """
    paths, eps = _psi_draws(n, int(round(n * h)), noise, reps, seed)
    m0, _ = _block_minima(sigma_sq, paths, eps)
    m0 = m0[np.isfinite(m0)]
    return float(np.pi / (np.pi - 2.0) * np.var(m0, ddof=1) / h)
