import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import stats

from lomn import (BootstrapConfig, LMConfig, QuoteSeries, bootstrap_critical_values,
                  bootstrap_statistics, build_block_grid, estimate_noise_level, global_statistic,
                  lm_statistic, local_average_detector)
from lomn.mmn import BHRStatistic, LMStatistic, _sample_chunk


def test_noise_level_alternating():
    z = np.tile([0.0, 1.0], 50)
    assert estimate_noise_level(z) == pytest.approx(1 / np.sqrt(2))


def test_noise_level_white_noise():
    z = 0.003 * np.random.default_rng(0).standard_normal(200_000)
    assert estimate_noise_level(z) == pytest.approx(0.003, rel=0.01)


def _lm_loop(z, nh, sigma, q, n):
    K = z.size // nh
    avg = [np.mean(z[k * nh:(k + 1) * nh]) for k in range(K)]
    C = nh / np.sqrt(n)
    best = 0.0
    for k in range(2, K):
        s = sigma[k * nh]
        stat = np.sqrt(nh) * abs(avg[k] - avg[k - 1]) / np.sqrt(2 / 3 * s * s * C * C + 2 * q * q)
        best = max(best, stat)
    return best


def test_lm_statistic_matches_loop(rng):
    n = 1003
    z = np.cumsum(rng.standard_normal(n + 1)) * 0.001 + 0.0005 * rng.standard_normal(n + 1)
    sigma = 0.01 + 0.001 * rng.random(n + 1)
    mid = QuoteSeries.equispaced(z, "mid")
    got = lm_statistic(mid, LMConfig(10, 0.0005), sigma)
    assert got == pytest.approx(_lm_loop(z, 10, sigma, 0.0005, n), rel=1e-12)


def test_lm_config_validation():
    with pytest.raises(ValueError):
        LMConfig(1, 0.1)
    with pytest.raises(ValueError):
        LMConfig(5, -0.1)


def _pool(n=600, rows=3, seed=0):
    g = np.random.default_rng(seed)
    return 0.01 * (1 + 0.2 * g.random((rows, n + 1)))


def test_bhr_time_statistic_matches_series(rng):
    cfg = BootstrapConfig(_pool(), 0.0005, "halfnormal", m=4, chunk=4)
    sample = _sample_chunk(cfg, range(4))
    got = BHRStatistic(12)(sample)
    for r in range(4):
        s = QuoteSeries.equispaced(sample.ask[r], "ask")
        g = build_block_grid(s, obs_per_block=12)
        T, _ = global_statistic(s, g, sample.sigma[r, g.starts[:-1]])
        assert got[r] == pytest.approx(T, rel=1e-12)


def test_bhr_count_statistic_matches_series():
    cfg = BootstrapConfig(_pool(), 0.0005, "thinned", m=3, chunk=3)
    sample = _sample_chunk(cfg, range(3))
    for side in ("ask", "bid"):
        got = BHRStatistic(5, side, "count")(sample)
        for r in range(3):
            vals = sample.ask[r] if side == "ask" else sample.bid[r]
            keep = np.isfinite(vals)
            s = QuoteSeries(np.arange(601)[keep] / 600, vals[keep], side)
            g = build_block_grid(s, obs_per_block=5, partition="count")
            idx = np.flatnonzero(keep)[g.starts[:-1]]
            T, _ = global_statistic(s, g, sample.sigma[r, idx])
            assert got[r] == pytest.approx(T, rel=1e-12)


def test_bootstrap_thinned_masks():
    cfg = BootstrapConfig(_pool(), 0.001, "thinned", m=2, chunk=2)
    s = _sample_chunk(cfg, range(2))
    assert_array_equal(np.isfinite(s.ask), s.mid > s.x)
    assert np.all(s.ask[np.isfinite(s.ask)] > s.x[np.isfinite(s.ask)])


def test_bootstrap_independent_of_chunking():
    pool = _pool()
    stats_ = {"LM": LMStatistic(10), "BHR": BHRStatistic(10)}
    a = bootstrap_statistics(BootstrapConfig(pool, 0.0005, "additive", m=120, chunk=7), stats_, 1)
    b = bootstrap_statistics(BootstrapConfig(pool, 0.0005, "additive", m=120, chunk=50), stats_, 2)
    assert_array_equal(a.statistics["LM"], b.statistics["LM"])
    assert_array_equal(a.statistics["BHR"], b.statistics["BHR"])
    assert a.quantile(0.05, "LM") == np.quantile(a.statistics["LM"], 0.95)
    with pytest.raises(ValueError):
        a.quantile(0.05)
    with pytest.raises(ValueError):
        a.quantile(0.001, "LM")


def test_bootstrap_critical_values_seeded():
    cfg = BootstrapConfig(_pool(), 0.0005, "halfnormal", m=200, seed=3)
    c1 = bootstrap_critical_values(cfg, "BHR", 0.05, nh=10)
    c2 = bootstrap_critical_values(cfg, "BHR", 0.05, nh=10)
    assert c1 == c2 and c1 > 0
    with pytest.raises(ValueError):
        bootstrap_critical_values(BootstrapConfig(_pool(), 0.0005, m=50), "LM", 0.05)
    with pytest.raises(ValueError):
        BootstrapConfig(_pool(), 0.0005, "skewed")


def test_local_average_detector_sidak_and_timing(rng):
    n, nh = 3000, 30
    x = np.cumsum(rng.standard_normal(n + 1)) * 0.01 / np.sqrt(n)
    x[x.size // 2 + 15:] -= 0.01
    mid = QuoteSeries.equispaced(x + 1e-4 * rng.standard_normal(n + 1), "mid")
    events = local_average_detector(mid, nh, 1e-4, 0.01)
    assert len(events) >= 1
    ev = events[0]
    grid = build_block_grid(mid, obs_per_block=nh)
    assert ev.time == grid.edges[ev.block + 1] and ev.direction == -1
    assert ev.interval == (grid.edges[ev.block], ev.time)
    K = grid.block_count
    crit = stats.norm.ppf(1 - (1 - 0.95 ** (1 / (K - 2))) / 2)
    assert local_average_detector(mid, nh, 1e-4, 0.01, critical=crit)[0] == ev
    assert local_average_detector(mid, nh, 1e-4, 0.01, critical=1e6) == []
