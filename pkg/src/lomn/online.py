"""
Streaming jump detection with running block extrema.

For an ask stream (lower-bounded noise) block ``k`` is compared with the
final minimum ``m_{k-1}`` of the previous block. Since the running minimum
of block ``k`` can only fall, a negative jump is flagged at the first quote

    Y_i - m_{k-1} < -c_n * sigma_k,

where ``sigma_k`` is the pre-window volatility estimate frozen when block
``k`` opens (it uses completed blocks only) and ``c_n`` is the Gumbel
threshold factor. A positive jump raises the block minimum and can only be
confirmed when the block closes; such events carry the block end as their
time. A bid stream mirrors everything (maxima, positive jumps fast).

:func:`run` processes a whole session block by block and gives exactly the
same state as replaying it through :func:`push`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import evt
from .inference import JumpEvent
from .mmn import local_average_detector
from .series import QuoteSeries, Side
from .spot_vol import VAR_CONSTANT, PsiInverse, SpotVolConfig

__all__ = [
    "DetectorConfig",
    "DetectorState",
    "detector_new",
    "push",
    "close",
    "run",
    "RaceRecord",
    "race",
]


@dataclass(frozen=True)
class DetectorConfig:
    """Calibration of an online detector.

    Parameters
    ----------
    n : int
        Expected number of observations in the session.
    block_count : int, optional
        Blocks per session; default :func:`lomn.evt.balanced_block_count`.
    alpha : float
        Level of the Gumbel threshold.
    scaling : {"rate", "block"}
        ``c_n = n**(-1/3) (q_{1-alpha} + B)`` or
        ``c_n = sqrt(h) (a_N q_{1-alpha} + b_N)`` with ``N = K - 1``.
    session : (float, float), optional
        Wall-clock start and end of the session in seconds, for event
        timestamps.
    confirm_reverse : bool
        Also emit block-end events for jumps in the slow direction.
    """

    n: int
    block_count: Optional[int] = None
    alpha: float = 0.05
    scaling: str = "rate"
    session: Optional[tuple] = None
    confirm_reverse: bool = True

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.scaling not in ("rate", "block"):
            raise ValueError("scaling must be 'rate' or 'block'")
        if self.block_count is not None and self.block_count < 3:
            raise ValueError("block_count must be at least 3")

    @property
    def blocks(self) -> int:
        return evt.balanced_block_count(self.n) if self.block_count is None else int(self.block_count)

    def threshold_factor(self) -> float:
        K = self.blocks
        qa = evt.gumbel_quantile(self.alpha)
        if self.scaling == "rate":
            return float(self.n) ** (-1.0 / 3.0) * (qa + evt.global_centering(K))
        cal = evt.GumbelCalibration(K - 1)
        return float(np.sqrt(1.0 / K) * (cal.a * qa + cal.b))


@dataclass(eq=False)
class DetectorState:
    """Mutable detector state; extrema are kept on the signed scale ``sign * Y``."""

    config: DetectorConfig
    spot: SpotVolConfig
    side: Side
    factor: float
    block: int = 0
    running: float = np.inf
    seen: int = 0
    finals: list = field(default_factory=list)
    diffs: list = field(default_factory=list)
    sigma: float = float("nan")
    fired: bool = False
    last_time: float = -np.inf
    events: list = field(default_factory=list)

    @property
    def h(self) -> float:
        return 1.0 / self.config.blocks

    @property
    def sign(self) -> int:
        return self.side.sign

    @property
    def previous(self) -> float:
        """Last completed nonempty block extremum (signed scale), NaN if none."""
        for m in reversed(self.finals):
            if np.isfinite(m):
                return m
        return float("nan")

    def extrema(self) -> np.ndarray:
        """Completed block extrema on the price scale; NaN marks empty blocks."""
        return self.sign * np.asarray(self.finals, dtype=float)


def detector_new(config: DetectorConfig, spot_cfg: SpotVolConfig = SpotVolConfig(mode="pre", truncation=None),
                 side=Side.ASK) -> DetectorState:
    """Fresh detector at block 0.

    The volatility estimator always uses the pre-window. Truncation, if
    any, needs a fixed ``beta``: a data-driven threshold would look ahead.
    """
    side = Side.parse(side)
    if side == Side.MID:
        raise ValueError("online extrema detection needs an ask or bid stream")
    tr = spot_cfg.truncation
    if tr is not None and tr.beta is None:
        raise ValueError("online truncation needs a fixed beta")
    return DetectorState(config, spot_cfg, side, config.threshold_factor())


def _online_sigma(state: DetectorState) -> float:
    """Pre-window estimate at the current block from completed blocks only."""
    k = state.block
    lo = max(k - state.spot.K, 1)
    d = np.asarray(state.diffs[lo - 1:k - 1], dtype=float)
    d = d[np.isfinite(d)]
    tr = state.spot.truncation
    if tr is not None:
        d = d[np.abs(d) <= tr.beta * state.h ** tr.kappa]
    if d.size == 0:
        return float("nan")
    var = VAR_CONSTANT * np.sum(d * d) / (state.h * d.size)
    corr = state.spot.correction
    if isinstance(corr, PsiInverse):
        var = corr(var, state.h)
    elif corr is not None:
        var *= float(corr)
    return float(np.sqrt(var)) if var > 0 else float("nan")


def _event(state: DetectorState, t: float, size: float, lo: float) -> JumpEvent:
    wall = float("nan")
    if state.config.session is not None:
        a, b = state.config.session
        wall = a + t * (b - a)
    return JumpEvent(float(t), float(size), state.block, state.config.alpha, (float(lo), float(t)),
                     wall, float(t - lo), state.side.value)


def _finish_block(state: DetectorState) -> Optional[JumpEvent]:
    """Close the current block: store its extremum and open the next one."""
    final = state.running if state.seen else float("nan")
    prev = state.previous
    event = None
    thr = state.factor * state.sigma
    if (state.config.confirm_reverse and not state.fired and np.isfinite(final)
            and np.isfinite(prev) and thr > 0 and final - prev > thr):
        end = (state.block + 1) * state.h
        event = _event(state, end, state.sign * (final - prev), state.block * state.h)
        state.events.append(event)
    if state.finals:
        last = state.finals[-1]
        state.diffs.append(final - last if np.isfinite(final) and np.isfinite(last) else np.nan)
    state.finals.append(final)
    state.block += 1
    state.running, state.seen, state.fired = np.inf, 0, False
    state.sigma = _online_sigma(state) if state.block >= 2 else float("nan")
    return event


def _block_index(state: DetectorState, t: float) -> int:
    """Right-closed blocks ``(k h, (k+1) h]``; ``t = 0`` belongs to block 0."""
    K = state.config.blocks
    edges = np.arange(K + 1) / K
    return int(min(max(np.searchsorted(edges, t, side="left") - 1, 0), K - 1))


def push(state: DetectorState, observation) -> Optional[JumpEvent]:
    """Feed one ``(time, value)`` observation.

    Returns the event triggered by this observation, if any. A block-end
    event for the block that this observation closes is appended to
    ``state.events`` as well (and returned when no fast event fires).
    """
    t, v = float(observation[0]), float(observation[1])
    if t < state.last_time:
        raise ValueError("out-of-order timestamp")
    if not 0.0 <= t <= 1.0:
        raise ValueError("time must lie in [0, 1]")
    state.last_time = t
    target = _block_index(state, t)
    closed = None
    while state.block < target:
        closed = _finish_block(state) or closed
    y = state.sign * v
    state.running = min(state.running, y)
    state.seen += 1
    prev = state.previous
    thr = state.factor * state.sigma
    if (not state.fired and state.block >= 2 and np.isfinite(prev) and thr > 0
            and y - prev < -thr):
        state.fired = True
        event = _event(state, t, state.sign * (y - prev), state.block * state.h)
        state.events.append(event)
        return event
    return closed


def close(state: DetectorState) -> list:
    """Finalise the open block and any remaining empty ones at session end.

    Returns the block-end events this produces.
    """
    events = []
    while state.block < state.config.blocks:
        event = _finish_block(state)
        if event is not None:
            events.append(event)
    return events


def run(config: DetectorConfig, series: QuoteSeries,
        spot_cfg: SpotVolConfig = SpotVolConfig(mode="pre", truncation=None),
        finish: bool = True) -> DetectorState:
    """Process a whole session; equivalent to pushing every observation.

    Each block is handled at once: its running extremum is a cumulative
    minimum and the first threshold crossing is found with one search.
    """
    state = detector_new(config, spot_cfg, series.side)
    K = config.blocks
    edges = np.arange(K + 1) / K
    block = np.clip(np.searchsorted(edges, series.times, side="left") - 1, 0, K - 1)
    bounds = np.searchsorted(block, np.arange(K + 1), side="left")
    y_all = state.sign * series.values
    for k in range(K):
        a, b = bounds[k], bounds[k + 1]
        if a == b:
            continue
        while state.block < k:
            _finish_block(state)
        y = y_all[a:b]
        prev = state.previous
        thr = state.factor * state.sigma
        if state.block >= 2 and np.isfinite(prev) and thr > 0:
            hit = np.flatnonzero(y - prev < -thr)
            if hit.size:
                i = a + hit[0]
                state.fired = True
                state.events.append(_event(state, series.times[i], state.sign * (y_all[i] - prev),
                                           state.block * state.h))
        state.running = min(state.running, float(y.min()))
        state.seen += b - a
        state.last_time = float(series.times[b - 1])
    if finish:
        while state.block < K:
            _finish_block(state)
    return state


@dataclass(frozen=True)
class RaceRecord:
    """Detection times of one jump by the mid, ask and bid detectors.

    ``advantage`` is the mid detection time minus the earlier one-sided
    detection time (session units; multiply by the session length for
    seconds).
    """

    mmn_time: float
    ask_time: float
    bid_time: float
    direction: int

    @property
    def advantage(self) -> float:
        return self.mmn_time - np.fmin(self.ask_time, self.bid_time)

    @property
    def all_detected(self) -> bool:
        return bool(np.isfinite(self.ask_time) and np.isfinite(self.bid_time))


def race(mid: QuoteSeries, ask: QuoteSeries, bid: QuoteSeries, mmn_cfg: dict,
         ask_cfg: Optional[DetectorConfig] = None, bid_cfg: Optional[DetectorConfig] = None,
         spot_cfg: SpotVolConfig = SpotVolConfig(mode="pre", truncation=None)) -> list:
    """Compare one-sided online detection with a local-average detector on mid quotes.

    ``mmn_cfg`` holds the keyword arguments of
    :func:`lomn.mmn.local_average_detector` (``nh``, ``q``, ``sigma``, ...).
    A one-sided event is matched to a mid event of the same direction when
    it falls between the start of the block before the mid event's block and
    the mid detection time plus two one-sided blocks (a slow-direction
    confirmation can come one block after the jump block). Returns one
    :class:`RaceRecord` per mid event matched by the ask or the bid detector.
    """
    if Side.parse(ask.side) != Side.ASK or Side.parse(bid.side) != Side.BID:
        raise ValueError("stream misalignment: expected ask and bid series")
    if mid.times[0] > max(ask.times[0], bid.times[0]) or mid.times[-1] < min(ask.times[-1], bid.times[-1]):
        raise ValueError("stream misalignment: mid does not cover the one-sided streams")
    ask_cfg = ask_cfg or DetectorConfig(ask.n)
    bid_cfg = bid_cfg or DetectorConfig(bid.n)
    ask_events = run(ask_cfg, ask, spot_cfg).events
    bid_events = run(bid_cfg, bid, spot_cfg).events
    mid_events = local_average_detector(mid, **mmn_cfg)
    slack = 2.0 * max(1.0 / ask_cfg.blocks, 1.0 / bid_cfg.blocks)
    records = []
    for ev in mid_events:
        width = ev.interval[1] - ev.interval[0]
        lo, hi = ev.interval[0] - width, ev.time + slack

        def first(events):
            times = [e.time for e in events if e.direction == ev.direction and lo <= e.time <= hi]
            return min(times) if times else float("nan")

        ta, tb = first(ask_events), first(bid_events)
        if np.isfinite(ta) or np.isfinite(tb):
            records.append(RaceRecord(ev.time, ta, tb, ev.direction))
    return records
