"""
Monte Carlo size and power studies.

An :class:`ExperimentSpec` names a study (``"T1"``, ``"T2"``, ``"T3"``,
``"T3-10"``, ``"T4"`` or ``"S1"``), the simulation and noise model, the
``(q, nh)`` cells and the jump sizes. :func:`run_experiment` returns a
:class:`SizePowerTable` of rejection frequencies.

Common random numbers are used throughout: replication ``r`` draws its
path, its standardised noise and its jump time and sign from
``SeedSequence(seed, spawn_key=(r,))``; the noise level and the jump size
only scale those draws. Replications are processed in chunks whose results
are summed, so the table does not depend on the chunk size or the number of
worker processes.

Calibration
-----------
* ``T1``/``S1``: global test on the ask series with the asymptotic Gumbel
  critical value; test blocks of about ``1.3 n**(-2/3)`` and volatility
  blocks of ``vol_obs`` quotes, both as runs of consecutive observations.
* ``T2``/``T3``/``T4``: bootstrap critical values from ``bootstrap_m`` null
  samples built on a pool of ``bootstrap_paths`` reference volatility paths
  (replications ``10**6, 10**6 + 1, ...``), with the noise level estimated
  from reference data. Test statistics use the true spot volatility.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import _batch
from .inference import finite_sample_block_count, global_test, sequential_detect
from .mmn import (BHRStatistic, BootstrapConfig, LMStatistic, bootstrap_statistics,
                  default_jobs, estimate_noise_level)
from .series import QuoteSeries, Side, build_block_grid
from .simulate import (NoiseSpec, SimConfig, draw_jump, noise_batch, observe,
                       replication_rngs, simulate_paths)
from .spot_vol import SpotVolConfig

__all__ = [
    "GlobalDesign",
    "ExperimentSpec",
    "Cell",
    "SizePowerTable",
    "preset",
    "run_experiment",
    "jump_paths",
    "REFERENCE_OFFSET",
    "localization_study",
    "sequential_study",
    "pulverization_study",
    "speed_study",
]

CSV_HEADER = ("q", "jump_size", "test", "nh_n", "rejection_rate", "replications", "failures")
REFERENCE_OFFSET = 10 ** 6
SCENARIOS = ("bef-", "at", "aft+")


@dataclass(frozen=True)
class GlobalDesign:
    """Global test tuning for the asymptotically calibrated studies."""

    spot: SpotVolConfig = SpotVolConfig(K=200, mode="center", truncation=None, correction=0.954)
    vol_obs: int = 30
    block_constant: float = 1.3
    partition: str = "count"
    scaling: str = "block"

    def test_block_points(self, n: int) -> int:
        return max(2, int(round(n / finite_sample_block_count(n, self.block_constant))))


@dataclass(frozen=True)
class ExperimentSpec:
    """A size/power study.

    ``cells`` pairs each noise level ``q`` with a block size ``nh`` (``None``
    where the block size follows from ``n``). Jump sizes are absolute log
    price changes; ``0`` gives the size.
    """

    table: str
    sim: SimConfig
    noise: NoiseSpec
    cells: tuple
    jump_sizes: tuple
    replications: int
    seed: int = 0
    alpha: float = 0.05
    design: GlobalDesign = GlobalDesign()
    bootstrap_m: int = 5_000
    bootstrap_paths: int = 200
    chunk: int = 50

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.table not in KERNELS:
            raise ValueError(f"unknown table {self.table!r}")


@dataclass(frozen=True)
class Cell:
    q: float
    jump_size: float
    test: str
    nh: Optional[int]
    rejections: int
    replications: int
    failures: int

    @property
    def rate(self) -> float:
        valid = self.replications - self.failures
        return self.rejections / valid if valid else float("nan")


@dataclass
class SizePowerTable:
    table: str
    cells: list = field(default_factory=list)

    def rate(self, q: float, jump_size: float, test: str, nh=None) -> float:
        for c in self.cells:
            if (np.isclose(c.q, q) and np.isclose(c.jump_size, jump_size) and c.test == test
                    and (nh is None or c.nh == nh)):
                return c.rate
        raise KeyError((q, jump_size, test, nh))

    def row(self, q: float, test: str, nh=None) -> list:
        cells = [c for c in self.cells if np.isclose(c.q, q) and c.test == test
                 and (nh is None or c.nh == nh)]
        return [c.rate for c in sorted(cells, key=lambda c: c.jump_size)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for c in self.cells:
            w.writerow([repr(c.q), repr(c.jump_size), c.test, "" if c.nh is None else c.nh,
                        f"{c.rate:.6f}", c.replications, c.failures])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, table: str = "") -> "SizePowerTable":
        rows = list(csv.DictReader(io.StringIO(text)))
        cells = []
        for r in rows:
            reps, fails = int(r["replications"]), int(r["failures"])
            rej = int(round(float(r["rejection_rate"]) * (reps - fails)))
            cells.append(Cell(float(r["q"]), float(r["jump_size"]), r["test"],
                              int(r["nh_n"]) if r["nh_n"] else None, rej, reps, fails))
        return cls(table, cells)


def preset(table: str, replications: int = 1_000, seed: int = 0, **overrides) -> ExperimentSpec:
    """Study definitions for the standard simulation designs."""
    pct = 0.01
    if table == "T1":
        spec = ExperimentSpec(table, SimConfig(), NoiseSpec("ar1"),
                              tuple((q * pct, None) for q in (0.010, 0.025, 0.050, 0.075, 0.100)),
                              tuple(j * pct for j in (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)),
                              replications, seed)
    elif table == "S1":
        spec = ExperimentSpec(table, SimConfig(), NoiseSpec("exponential"),
                              tuple((q * pct, None) for q in (0.010, 0.025, 0.050, 0.075, 0.100)),
                              tuple(j * pct for j in (0.0, 0.10, 0.15, 0.20, 0.25, 0.30, 0.50)),
                              replications, seed)
    elif table == "T2":
        spec = ExperimentSpec(table, SimConfig(), NoiseSpec("halfnormal"),
                              ((0.05 * pct, 11), (0.05 * pct, 15), (0.10 * pct, 20), (0.10 * pct, 34)),
                              tuple(j * pct for j in (0.0, 0.100, 0.125, 0.150, 0.175, 0.200)),
                              replications, seed)
    elif table in ("T3", "T3-10"):
        price = 50.0 if table == "T3" else 10.0
        cells = ((0.05 * pct, 5), (0.05 * pct, 12)) if table == "T3" else ((0.05 * pct, 10), (0.05 * pct, 11))
        spec = ExperimentSpec(table, SimConfig(x0=float(np.log(price))), NoiseSpec("rounding"), cells,
                              tuple(j * pct for j in (0.0, 0.100, 0.125, 0.150, 0.175, 0.200)),
                              replications, seed)
    elif table == "T4":
        spec = ExperimentSpec(table, SimConfig(), NoiseSpec("halfnormal"),
                              ((0.05 * pct, 12), (0.10 * pct, 26)),
                              tuple(j * pct for j in (0.0, 0.05, 0.075, 0.1, 0.125, 0.15, 0.2)),
                              replications, seed)
    else:
        raise ValueError(f"unknown table {table!r}")
    return replace(spec, **overrides)


def jump_paths(spec: ExperimentSpec, reps):
    """Paths, standardised noise and jump (time, sign) for replications ``reps``."""
    reps = list(reps)
    n = spec.sim.n
    t, x, spot, _ = simulate_paths(spec.sim, reps, spec.seed)
    rngs = [replication_rngs(spec.seed, r) for r in reps]
    eps = noise_batch(spec.noise.with_q(1.0), (len(reps), n + 1), [g[1] for g in rngs])
    jumps = np.array([draw_jump(g[2], 1.0, n) for g in rngs])
    return t, x, spot, eps, jumps[:, 0], jumps[:, 1]


def _shifted(t, x, time, sign, size):
    if size == 0.0:
        return x
    return x + size * sign[:, None] * (t[None, :] >= time[:, None])


# ---------------------------------------------------------------- kernels

def _global_kernel(spec: ExperimentSpec, reps, crit):
    t, x, spot, eps, time, sign = jump_paths(spec, reps)
    d = spec.design
    out = {}
    for q, nh in spec.cells:
        noise = spec.noise.with_q(q)
        for J in spec.jump_sizes:
            _, ask, _, am, _ = observe(noise, _shifted(t, x, time, sign, J), q * eps)
            rej = fail = 0
            for r in range(x.shape[0]):
                series = QuoteSeries(t[am[r]], ask[r, am[r]], Side.ASK)
                try:
                    rep = global_test(series, obs_per_block=d.test_block_points(series.n),
                                      spot_cfg=d.spot, alpha=spec.alpha, scaling=d.scaling,
                                      vol_obs_per_block=d.vol_obs, partition=d.partition)
                except ValueError:
                    fail += 1
                    continue
                rej += rep.decision
            out[(q, J, "BHR", nh)] = (rej, fail)
    return out


def _row_noise_levels(mid):
    dz = np.diff(mid, axis=1)
    return np.sqrt(np.sum(dz * dz, axis=1) / (2.0 * dz.shape[1]))


def _count(stat, crit):
    ok = np.isfinite(stat)
    return int(np.sum(stat[ok] > crit)), int(np.sum(~ok))


def _scenario1_kernel(spec: ExperimentSpec, reps, crit):
    t, x, spot, eps, time, sign = jump_paths(spec, reps)
    n = spec.sim.n
    out = {}
    for q, nh in spec.cells:
        noise = spec.noise.with_q(q)
        starts = _batch.grid_starts(n, block_points=nh)
        for J in spec.jump_sizes:
            mid, ask, _, _, _ = observe(noise, _shifted(t, x, time, sign, J), q * eps)
            m, empty = _batch.block_minima(ask, starts)
            T = _batch.max_statistic(_batch.standardized_differences(m, empty, spot[:, starts[:-1]]))[0]
            L = _batch.lm_rows(mid, nh, spot, _row_noise_levels(mid), n)
            out[(q, J, "BHR", nh)] = _count(T, crit[(q, nh, "BHR")])
            out[(q, J, "LM", nh)] = _count(L, crit[(q, nh, "LM")])
    return out


def _scenario2_kernel(spec: ExperimentSpec, reps, crit):
    t, x, spot, eps, time, sign = jump_paths(spec, reps)
    n = spec.sim.n
    out = {}
    for q, nh in spec.cells:
        noise = spec.noise.with_q(q)
        for J in spec.jump_sizes:
            mid, _, _, am, bm = observe(noise, _shifted(t, x, time, sign, J), q * eps)
            A = _batch.count_block_rows(np.where(am, mid, np.inf), nh, spot)[0]
            B = _batch.count_block_rows(np.where(bm, -mid, np.inf), nh, spot)[0]
            L = _batch.lm_rows(mid, nh, spot, _row_noise_levels(mid), n)
            out[(q, J, "BHR-ask", nh)] = _count(A, crit[(q, nh, "BHR-ask")])
            out[(q, J, "BHR-bid", nh)] = _count(B, crit[(q, nh, "BHR-bid")])
            out[(q, J, "LM", nh)] = _count(L, crit[(q, nh, "LM")])
    return out


def test_index(time, sign, nh, n, scenario, reps, seed):
    """Grid index ``j`` of the test time (the last observation at or before it).

    ``"at"`` tests at the jump; ``"bef-"`` up to ``nh - 1`` observations
    before a (negative) jump; ``"aft+"`` up to ``nh - 1`` observations after a
    (positive) jump. The offset comes from a fourth replication stream.
    """
    j = np.floor(time * n).astype(int)
    if scenario == "at":
        return j
    off = np.array([replication_rngs(seed, r, 4)[3].integers(0, nh) for r in reps])
    return j - off if scenario == "bef-" else j + off


def _local_kernel(spec: ExperimentSpec, reps, crit):
    reps = list(reps)
    t, x, spot, eps, time, sign = jump_paths(spec, reps)
    n = spec.sim.n
    out = {}
    for scenario in SCENARIOS:
        s = sign if scenario == "at" else np.full(sign.shape, -1.0 if scenario == "bef-" else 1.0)
        for q, nh in spec.cells:
            noise = spec.noise.with_q(q)
            j = test_index(time, s, nh, n, scenario, reps, spec.seed)
            rows = np.arange(len(reps))
            for J in spec.jump_sizes:
                mid, ask, _, _, _ = observe(noise, _shifted(t, x, time, s, J), q * eps)
                stat, _ = _batch.local_rows(ask, j, nh, spot[rows, j + 1], spot[rows, j], n)
                L = _batch.local_lm_rows(mid, j, nh, spot[rows, j], _row_noise_levels(mid), n)
                out[(q, J, f"BHR@{scenario}", nh)] = _count(stat, crit[(q, nh, "BHR")])
                out[(q, J, f"LM@{scenario}", nh)] = _count(L, crit[(q, nh, "LM")])
    return out


KERNELS = {
    "T1": _global_kernel,
    "S1": _global_kernel,
    "T2": _scenario1_kernel,
    "T3": _scenario2_kernel,
    "T3-10": _scenario2_kernel,
    "T4": _local_kernel,
}


# ------------------------------------------------------------ calibration

@dataclass(frozen=True)
class LocalBHRStatistic:
    """Local extrema statistic of the bootstrap ask quotes at the mid-session index."""

    nh: int

    def __call__(self, s) -> np.ndarray:
        n = s.x.shape[1] - 1
        j = np.full(s.x.shape[0], n // 2)
        return _batch.local_rows(s.ask, j, self.nh, s.sigma[:, n // 2 + 1], s.sigma[:, n // 2], n)[0]


@dataclass(frozen=True)
class LocalLMStatistic:
    nh: int

    def __call__(self, s) -> np.ndarray:
        n = s.x.shape[1] - 1
        j = np.full(s.x.shape[0], n // 2)
        return _batch.local_lm_rows(s.mid, j, self.nh, s.sigma[:, n // 2],
                                    np.full(s.x.shape[0], s.q_hat), n)


def reference_pool(spec: ExperimentSpec, q: float):
    """Reference volatility paths and the median noise estimate of their mid quotes."""
    reps = range(REFERENCE_OFFSET, REFERENCE_OFFSET + spec.bootstrap_paths)
    t, x, spot, _ = simulate_paths(spec.sim, reps, spec.seed)
    rngs = [replication_rngs(spec.seed, r)[1] for r in reps]
    eps = noise_batch(spec.noise.with_q(1.0), (len(rngs), spec.sim.n + 1), rngs)
    mid = observe(spec.noise.with_q(q), x, q * eps)[0]
    q_hat = float(np.median([estimate_noise_level(z) for z in mid]))
    return spot, q_hat


def calibrate(spec: ExperimentSpec, jobs: Optional[int] = None) -> dict:
    """Bootstrap critical values per ``(q, nh, test)``; empty for asymptotic studies."""
    if spec.table in ("T1", "S1"):
        return {}
    crit = {}
    for q, nh in spec.cells:
        spot, q_hat = reference_pool(spec, q)
        base = dict(m=spec.bootstrap_m, x0=spec.sim.x0, seed=spec.seed + 1)
        if spec.table == "T2":
            h1 = bootstrap_statistics(BootstrapConfig(spot, q_hat, "halfnormal", **base),
                                      {"BHR": BHRStatistic(nh)}, jobs)
            h2 = bootstrap_statistics(BootstrapConfig(spot, q_hat, "additive", **base),
                                      {"LM": LMStatistic(nh)}, jobs)
            handles = {"BHR": h1, "LM": h2}
        elif spec.table == "T4":
            h1 = bootstrap_statistics(BootstrapConfig(spot, q_hat, "halfnormal", **base),
                                      {"BHR": LocalBHRStatistic(nh)}, jobs)
            h2 = bootstrap_statistics(BootstrapConfig(spot, q_hat, "additive", **base),
                                      {"LM": LocalLMStatistic(nh)}, jobs)
            handles = {"BHR": h1, "LM": h2}
        else:
            h = bootstrap_statistics(BootstrapConfig(spot, q_hat, "thinned", **base),
                                     {"BHR-ask": BHRStatistic(nh, "ask", "count"),
                                      "BHR-bid": BHRStatistic(nh, "bid", "count"),
                                      "LM": LMStatistic(nh)}, jobs)
            handles = {name: h for name in ("BHR-ask", "BHR-bid", "LM")}
        for name, handle in handles.items():
            crit[(q, nh, name)] = handle.quantile(spec.alpha, name)
    return crit


def _run_chunk(args):
    spec, reps, crit = args
    return KERNELS[spec.table](spec, reps, crit)


def run_experiment(spec: ExperimentSpec, jobs: Optional[int] = None,
                   critical_values: Optional[dict] = None) -> SizePowerTable:
    """Rejection frequencies for every cell of ``spec``.

    Parameters
    ----------
    spec : ExperimentSpec
        Study definition.
    jobs : int, optional
        Worker processes (default from ``LOMN_JOBS``). Results do not depend
        on it.
    critical_values : dict, optional
        Precomputed output of :func:`calibrate`.
    """
    jobs = default_jobs() if jobs is None else jobs
    crit = calibrate(spec, jobs) if critical_values is None else critical_values
    R = spec.replications
    tasks = [(spec, range(a, min(a + spec.chunk, R)), crit) for a in range(0, R, spec.chunk)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(jobs) as ex:
            parts = list(ex.map(_run_chunk, tasks))
    else:
        parts = [_run_chunk(task) for task in tasks]
    totals = {}
    for part in parts:
        for key, (rej, fail) in part.items():
            a, b = totals.get(key, (0, 0))
            totals[key] = (a + rej, b + fail)
    cells = [Cell(q, J, test, nh, rej, R, fail) for (q, J, test, nh), (rej, fail) in totals.items()]
    return SizePowerTable(spec.table, cells)


# -------------------------------------------------- auxiliary studies

def _ask_series(t, ask, mask):
    return QuoteSeries(t[mask], ask[mask], Side.ASK)


def localization_study(replications: int, q: float = 0.001, size: float = 0.003, seed: int = 0,
                       design: GlobalDesign = GlobalDesign(), alpha: float = 0.05):
    """Global test with one jump (AR(1) noise, thinned ask quotes).

    Returns ``(detected, within)`` arrays: whether the test rejected and,
    if so, whether the argmax block lies within two blocks of the block
    holding the jump.
    """
    spec = preset("T1", replications, seed, design=design, alpha=alpha)
    t, x, _, eps, time, sign = jump_paths(spec, range(replications))
    noise = spec.noise.with_q(q)
    _, ask, _, am, _ = observe(noise, _shifted(t, x, time, sign, size), q * eps)
    detected = np.zeros(replications, bool)
    within = np.zeros(replications, bool)
    for r in range(replications):
        s = _ask_series(t, ask[r], am[r])
        rep = global_test(s, obs_per_block=design.test_block_points(s.n), spot_cfg=design.spot,
                          alpha=alpha, scaling=design.scaling, vol_obs_per_block=design.vol_obs,
                          partition=design.partition)
        detected[r] = rep.decision
        edges = build_block_grid(s, obs_per_block=design.test_block_points(s.n),
                                 partition=design.partition).edges
        k_true = int(np.searchsorted(edges, time[r], side="left") - 1)
        within[r] = rep.decision and abs(rep.argmax_block - k_true) <= 2
    return detected, within


def sequential_study(replications: int, sizes=(0.005, 0.004), q: float = 0.0001, seed: int = 0,
                     design: GlobalDesign = GlobalDesign(), alpha: float = 0.05) -> np.ndarray:
    """Number of events found by :func:`lomn.inference.sequential_detect` with
    two jumps, one in ``[0.1, 0.45]`` and one in ``[0.55, 0.9]`` with random signs."""
    spec = preset("T1", replications, seed)
    n = spec.sim.n
    t, x, _, eps, _, _ = jump_paths(spec, range(replications))
    counts = np.zeros(replications, int)
    for r in range(replications):
        g = replication_rngs(seed, r, 5)[4]
        xr = x[r].copy()
        for size, band in zip(sizes, ((0.1, 0.45), (0.55, 0.9))):
            time, signed = draw_jump(g, size, n, band)
            xr = xr + signed * (t >= time)
        _, ask, _, am, _ = observe(spec.noise.with_q(q), xr, q * eps[r])
        s = _ask_series(t, ask, am)
        events = sequential_detect(s, obs_per_block=design.test_block_points(s.n), spot_cfg=design.spot,
                                   alpha=alpha, scaling=design.scaling,
                                   vol_obs_per_block=design.vol_obs, partition=design.partition)
        counts[r] = len(events)
    return counts


def pulverization_study(replications: int, size: float = 0.01, nh: int = 30, q: float = 0.0001,
                        seed: int = 0):
    """Largest adjacent differences of block averages (mid) and block minima (ask).

    One jump of ``size`` (random sign) sits in the middle of a block of
    ``nh`` grid steps; the noise is Gaussian, thinned into ask quotes.
    Returns ``(avg_max, min_max)``, each divided by the jump size.
    """
    spec = preset("T1", replications, seed, noise=NoiseSpec("gaussian"))
    n = spec.sim.n
    t, x, _, eps, time, sign = jump_paths(spec, range(replications))
    block = np.floor(time * n / nh).astype(int)
    centred = (block * nh + nh / 2.0) / n
    mid, ask, _, am, _ = observe(spec.noise.with_q(q), _shifted(t, x, centred, sign, size), q * eps)
    starts = _batch.grid_starts(n, block_points=nh)
    avg = np.add.reduceat(mid, starts[:-1], axis=1) / np.diff(starts)
    m, empty = _batch.block_minima(np.where(am, ask, np.inf), starts)
    d, valid = _batch.differences(m, empty)
    avg_max = np.max(np.abs(np.diff(avg, axis=1)), axis=1) / size
    min_max = np.max(np.where(valid, np.abs(d), 0.0), axis=1) / size
    return avg_max, min_max


def speed_study(replications: int, size: float = -0.01, q: float = 0.0005, nh_mid: int = 30,
                seed: int = 0) -> list:
    """Online race on sessions with one large jump; one list entry per session,
    the :class:`lomn.online.RaceRecord` of the first matched mid event or None."""
    from .online import race

    spec = preset("T1", replications, seed, noise=NoiseSpec("gaussian"))
    t, x, spot, eps, time, _ = jump_paths(spec, range(replications))
    sign = np.full(replications, np.sign(size))
    mid, _, _, am, bm = observe(spec.noise.with_q(q), _shifted(t, x, time, sign, abs(size)), q * eps)
    out = []
    for r in range(replications):
        a = QuoteSeries(t[am[r]], mid[r, am[r]], Side.ASK)
        b = QuoteSeries(t[bm[r]], mid[r, bm[r]], Side.BID)
        z = QuoteSeries(t, mid[r], Side.MID)
        records = race(z, a, b, dict(nh=nh_mid, q=q, sigma=spot[r]))
        records = [rec for rec in records if rec.direction == np.sign(size)]
        out.append(records[0] if records else None)
    return out
