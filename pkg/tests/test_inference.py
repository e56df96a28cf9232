import numpy as np
import pytest
from numpy.testing import assert_allclose

from lomn import (QuoteSeries, SpotVolConfig, build_block_grid, estimate_jump,
                  finite_sample_block_count, global_statistic, global_test, local_statistic,
                  local_test, localize_jump, sequential_detect)
from lomn import evt
from lomn.inference import standardize_max

from conftest import random_walk_series


def _with_jump(s, at, size):
    v = s.values.copy()
    v[s.times >= at] += size
    return QuoteSeries(s.times, v, s.side)


def test_finite_sample_block_count():
    assert finite_sample_block_count(23_400) == 629
    assert finite_sample_block_count(1000, 1.0) == 99


def test_local_statistic_reduces_with_equal_vols():
    assert local_statistic(1.3, 1.0, 0.5, 0.5, 0.04) == pytest.approx(0.3 / 0.5 / 0.2)
    a = np.array([0.1, 0.2])
    assert_allclose(local_statistic(a, 0.0, 1.0, 1.0, 1.0), a)


def test_estimate_jump_recovers_size(rng):
    s = _with_jump(random_walk_series(rng, n=5000, sigma=0.001, q=1e-5), 0.50005, 0.02)
    assert estimate_jump(s, 0.50005, 10) == pytest.approx(0.02, abs=1e-3)


def test_local_test_detects_jump(rng):
    s = _with_jump(random_walk_series(rng, n=5000, q=1e-5), 0.50005, 0.01)
    rep = local_test(s, 0.50005, 12, sigma=0.01)
    assert rep.decision and rep.jump_size == pytest.approx(0.01, abs=1e-3)
    assert rep.critical_value == pytest.approx(evt.local_quantile(0.05))
    quiet = local_test(s, 0.25005, 12, SpotVolConfig(K=50, truncation=None))
    assert quiet.statistic < rep.statistic


def test_standardize_max_scalings():
    cal = evt.GumbelCalibration(100)
    assert standardize_max(2.0, 100, 0.01, 1000, "block") == pytest.approx(20 / cal.a - cal.B)
    assert standardize_max(2.0, 100, 0.01, 1000, "rate") == pytest.approx(20 - cal.B)
    with pytest.raises(ValueError):
        standardize_max(2.0, 100, 0.01, 1000, "other")


def test_global_statistic_with_known_sigma(rng):
    s = random_walk_series(rng, n=900)
    g = build_block_grid(s, block_count=30)
    T, z = global_statistic(s, g, np.full(30, 2.0))
    m = np.array([s.values[list(g.index_set(k))].min() for k in range(30)])
    assert_allclose(z, np.abs(np.diff(m)) / 2.0)
    assert T == z.max()


def test_global_test_detects_and_localizes(rng):
    s = _with_jump(random_walk_series(rng, n=10_000, q=5e-5), 0.6123, -0.01)
    rep = global_test(s, block_count=200, spot_cfg=SpotVolConfig(K=200, mode="center"))
    assert rep.decision
    assert abs(localize_jump(rep) - 0.6123) <= 2 / 200
    assert rep.jump_size == pytest.approx(-0.01, abs=2e-3)
    assert rep.critical_value == pytest.approx(evt.gumbel_quantile(0.05))
    assert rep.N == 199


def test_global_test_bootstrap_value(rng):
    s = random_walk_series(rng, n=2000)
    rep = global_test(s, block_count=50, critical_source=1e9)
    assert rep.critical_source == "bootstrap" and not rep.decision
    with pytest.raises(ValueError):
        global_test(s, block_count=50, critical_source="gumbel")


def test_global_test_count_partition(rng):
    s = random_walk_series(rng, n=3000)
    rep = global_test(s, obs_per_block=20, partition="count", vol_obs_per_block=10,
                      spot_cfg=SpotVolConfig(K=100, mode="center", truncation=None))
    grid = build_block_grid(s, obs_per_block=20, partition="count")
    assert rep.theta_hat == grid.edges[rep.argmax_block]


def test_sequential_detect_two_jumps(rng):
    s = random_walk_series(rng, n=10_000, q=5e-5)
    s = _with_jump(_with_jump(s, 0.30005, 0.015), 0.70005, -0.012)
    events = sequential_detect(s, block_count=200, spot_cfg=SpotVolConfig(K=200, mode="center"))
    assert len(events) == 2
    times = sorted(e.time for e in events)
    assert times[0] == pytest.approx(0.3, abs=0.01) and times[1] == pytest.approx(0.7, abs=0.01)
    for e in events:
        assert e.interval[0] <= e.time <= e.interval[1]
    with pytest.raises(ValueError):
        sequential_detect(s, block_count=200, schedule="linear")


def test_sequential_detect_null_quiet(rng):
    s = random_walk_series(rng, n=10_000, q=5e-5)
    assert sequential_detect(s, block_count=200, alpha=0.001,
                             spot_cfg=SpotVolConfig(K=200, mode="center")) == []
