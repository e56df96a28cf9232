"""
Observation series, block partitions and block-wise local extrema.

Every estimator in the package works on a :class:`QuoteSeries`: a strictly
increasing vector of session times in ``[0, 1]`` together with log-prices and
a tag saying on which side the noise is bounded. Ask quotes carry
lower-bounded noise and are summarised by block minima; bid quotes carry
upper-bounded noise and are summarised by block maxima.

Blocks are right-closed time intervals ``(k h, (k + 1) h]``; the observation
at time 0 (if any) belongs to block 0. Because times are sorted, every block
is a contiguous index range, which makes all block reductions a single
``np.minimum.reduceat`` call.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

__all__ = [
    "Side",
    "QuoteSeries",
    "BlockGrid",
    "ExtremaSeries",
    "WindowExtremum",
    "build_block_grid",
    "local_extrema",
    "extrema_window",
]


class Side(str, enum.Enum):
    """Which way the microstructure noise is bounded."""

    ASK = "ask"  # lower-bounded noise, use minima
    BID = "bid"  # upper-bounded noise, use maxima
    MID = "mid"  # two-sided noise

    @property
    def sign(self) -> int:
        """+1 if extrema are minima, -1 if maxima. Raises for two-sided data."""
        if self is Side.ASK:
            return 1
        if self is Side.BID:
            return -1
        raise ValueError("block extrema need a one-sided (ask or bid) series")

    def flipped(self) -> "Side":
        return {Side.ASK: Side.BID, Side.BID: Side.ASK, Side.MID: Side.MID}[self]

    @classmethod
    def parse(cls, value) -> "Side":
        if isinstance(value, cls):
            return value
        aliases = {"lower": cls.ASK, "min": cls.ASK, "upper": cls.BID,
                   "max": cls.BID, "two-sided": cls.MID}
        value = str(value).lower()
        return aliases.get(value) or cls(value)


@dataclass(frozen=True, eq=False)
class QuoteSeries:
    """Timestamped log-prices of one side of the book.

    Parameters
    ----------
    times : array_like
        Session times in ``[0, 1]``, strictly increasing.
    values : array_like
        Log-prices, finite.
    side : Side or str
        ``"ask"``, ``"bid"`` or ``"mid"``.
    session : tuple of float, optional
        Wall-clock ``(start, end)`` in seconds after midnight that the unit
        interval maps to. Only used for reporting.
    wall_times : array_like, optional
        Wall-clock seconds per observation, kept so that cleaning and
        serialisation never have to invert the time normalisation.
    flags : array_like of bool, optional
        Per-observation quality flag (e.g. crossed book at ingestion).
    """

    times: np.ndarray
    values: np.ndarray
    side: Side = Side.ASK
    session: Optional[tuple] = None
    wall_times: Optional[np.ndarray] = None
    flags: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        values = np.array(self.values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if times.size < 2:
            raise ValueError("a QuoteSeries needs at least two observations")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        if times[0] < 0.0 or times[-1] > 1.0:
            raise ValueError("times must lie in [0, 1]")
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("times must be strictly increasing")
        times.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "side", Side.parse(self.side))
        if self.wall_times is not None:
            wall = np.array(self.wall_times, dtype=float)
            if wall.shape != times.shape:
                raise ValueError("wall_times must match times")
            wall.flags.writeable = False
            object.__setattr__(self, "wall_times", wall)
        if self.flags is not None:
            flags = np.array(self.flags, dtype=bool)
            if flags.shape != times.shape:
                raise ValueError("flags must match times")
            object.__setattr__(self, "flags", flags)

    def __len__(self) -> int:
        return self.times.size

    @property
    def n(self) -> int:
        """Number of increments, i.e. ``len(series) - 1``."""
        return self.times.size - 1

    @classmethod
    def equispaced(cls, values, side=Side.ASK, **kwargs) -> "QuoteSeries":
        """Series observed at ``t_i = i / n``, ``i = 0, ..., n``."""
        values = np.asarray(values, dtype=float)
        n = values.size - 1
        return cls(np.arange(n + 1) / n, values, side, **kwargs)

    def wall_clock(self, t):
        """Map session time(s) to wall-clock seconds (NaN without a session)."""
        if self.session is None:
            return np.full(np.shape(t), np.nan) if np.ndim(t) else float("nan")
        start, end = self.session
        return start + np.asarray(t, dtype=float) * (end - start)

    def with_values(self, values, side=None) -> "QuoteSeries":
        """Same timestamps, new values (and optionally a new side tag)."""
        return QuoteSeries(self.times, values, self.side if side is None else side,
                           self.session, self.wall_times, self.flags)

    def negated(self) -> "QuoteSeries":
        """``-Y`` with the side flipped; the mirror image used for bid/ask duality."""
        return self.with_values(-self.values, self.side.flipped())

    def subset(self, mask) -> "QuoteSeries":
        mask = np.asarray(mask)
        return QuoteSeries(
            self.times[mask], self.values[mask], self.side, self.session,
            None if self.wall_times is None else self.wall_times[mask],
            None if self.flags is None else self.flags[mask],
        )


@dataclass(frozen=True, eq=False)
class BlockGrid:
    """Partition of the session into ``block_count`` right-closed blocks.

    ``starts[k]:starts[k + 1]`` is the index range of block ``k``; an empty
    range marks an empty block.
    """

    block_count: int
    block_length: float
    edges: np.ndarray
    starts: np.ndarray

    def index_set(self, k: int) -> range:
        return range(int(self.starts[k]), int(self.starts[k + 1]))

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.starts)

    @property
    def empty(self) -> np.ndarray:
        return self.counts == 0

    def block_of(self, t) -> np.ndarray:
        """Index of the block whose left edge is the last one ``<= t``."""
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.edges, t + 1e-12, side="right") - 1
        return np.clip(k, 0, self.block_count - 1)


def _grid_from_edges(times: np.ndarray, edges: np.ndarray, h: float) -> BlockGrid:
    starts = np.searchsorted(times, edges, side="right")
    starts[0] = 0
    starts[-1] = times.size
    return BlockGrid(edges.size - 1, float(h), edges, starts)


PARTITIONS = ("time", "count")


def build_block_grid(series: QuoteSeries, block_count: Optional[int] = None,
                     obs_per_block: Optional[int] = None, partition: str = "time") -> BlockGrid:
    """Partition ``[0, 1]`` into blocks for a given series.

    Exactly one of ``block_count`` (equal blocks of length ``1/block_count``)
    or ``obs_per_block`` (``B``) must be given. With ``B``, the block count is
    ``floor(n / B)``, all blocks but the last have length ``B / n`` and the
    last block absorbs the remainder of the session.

    Index sets are computed from the observation times, so irregular
    sampling is handled without resampling. With ``partition="count"`` (only
    together with ``obs_per_block``) each block instead holds ``B``
    consecutive observations, the last one again taking the remainder; the
    edges are the times of each block's first observation and the nominal
    block length stays ``B / n``.
    """
    if (block_count is None) == (obs_per_block is None):
        raise ValueError("give exactly one of block_count or obs_per_block")
    if partition not in PARTITIONS:
        raise ValueError(f"partition must be one of {PARTITIONS}")
    n = series.n
    if obs_per_block is not None:
        if obs_per_block < 1:
            raise ValueError("obs_per_block must be positive")
        K = n // int(obs_per_block)
        if K < 3:
            raise ValueError("insufficient observations for the requested blocks")
        h = obs_per_block / n
        if partition == "count":
            starts = np.append(np.arange(K) * int(obs_per_block), series.times.size)
            edges = np.append(series.times[starts[:-1]], 1.0)
            edges[0] = 0.0
            return BlockGrid(K, float(h), edges, starts)
        edges = np.append(np.arange(K) * h, 1.0)
    else:
        if partition == "count":
            raise ValueError("partition='count' needs obs_per_block")
        K = int(block_count)
        if K < 3:
            raise ValueError("block_count must be at least 3")
        if n + 1 < K:
            raise ValueError("insufficient observations for the requested blocks")
        h = 1.0 / K
        edges = np.arange(K + 1) / K
    return _grid_from_edges(series.times, edges, h)


@dataclass(frozen=True, eq=False)
class ExtremaSeries:
    """Block minima (``side="min"``) or maxima (``side="max"``).

    Empty blocks hold the value of their nearest nonempty neighbour and are
    listed in ``empty_blocks``; differences touching them are invalid.
    """

    values: np.ndarray
    grid: BlockGrid
    side: str
    empty_blocks: np.ndarray

    @property
    def sign(self) -> int:
        return 1 if self.side == "min" else -1

    @property
    def h(self) -> float:
        return self.grid.block_length

    def differences(self):
        """``m_k - m_{k-1}`` for ``k = 1..K-1`` and their validity mask."""
        d = np.diff(self.values)
        empty = np.zeros(self.values.size, dtype=bool)
        empty[self.empty_blocks] = True
        valid = ~(empty[1:] | empty[:-1])
        return d, valid

    def scaled(self, lam: float, shift: float = 0.0) -> "ExtremaSeries":
        return ExtremaSeries(lam * self.values + shift, self.grid, self.side, self.empty_blocks)


def _fill_empty(values: np.ndarray, empty: np.ndarray) -> np.ndarray:
    """Replace empty entries by the nearest nonempty one (earlier wins ties)."""
    idx = np.flatnonzero(~empty)
    pos = np.arange(values.size)
    right = np.searchsorted(idx, pos)
    left = np.clip(right - 1, 0, idx.size - 1)
    right = np.clip(right, 0, idx.size - 1)
    use_right = np.abs(idx[right] - pos) < np.abs(pos - idx[left])
    nearest = np.where(use_right, idx[right], idx[left])
    return values[nearest]


def local_extrema(series: QuoteSeries, grid: BlockGrid) -> ExtremaSeries:
    """Block-wise minima of an ask series, maxima of a bid series.

    Maxima are computed as ``-min(-Y)`` so both sides share one code path.
    """
    sign = series.side.sign
    if grid.starts[-1] != series.times.size:
        raise ValueError("grid was built for a different series")
    empty = grid.empty
    if empty.all():
        raise ValueError("all blocks are empty")
    y = sign * series.values
    nonempty = np.flatnonzero(~empty)
    m = np.full(grid.block_count, np.nan)
    m[nonempty] = np.minimum.reduceat(y, grid.starts[nonempty])
    if empty.any():
        m = _fill_empty(m, empty)
    return ExtremaSeries(sign * m, grid, "min" if sign > 0 else "max",
                         np.flatnonzero(empty))


class WindowExtremum(NamedTuple):
    value: float
    first: int
    last: int
    shrunk: bool


def extrema_window(series: QuoteSeries, tau: float, window_obs: int,
                   direction: str) -> WindowExtremum:
    """Extremum of the ``window_obs`` observations right after or up to ``tau``.

    With ``j`` the last index with ``t_j <= tau``, ``direction="after"`` uses
    indices ``j+1 .. j+window_obs`` and ``"before"`` uses
    ``j-window_obs+1 .. j``. Near the session boundary the window is cut to
    the available indices and ``shrunk`` is set.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    if window_obs < 1:
        raise ValueError("window_obs must be positive")
    j = int(np.searchsorted(series.times, tau, side="right")) - 1
    if direction == "after":
        lo, hi = j + 1, j + window_obs
    elif direction == "before":
        lo, hi = j - window_obs + 1, j
    else:
        raise ValueError("direction must be 'before' or 'after'")
    first, last = max(lo, 0), min(hi, series.n)
    if last < first:
        raise ValueError("empty window")
    sign = series.side.sign
    value = sign * np.min(sign * series.values[first:last + 1])
    return WindowExtremum(float(value), first, last, (first, last) != (lo, hi))
