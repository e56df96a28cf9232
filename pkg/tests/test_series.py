import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from lomn import QuoteSeries, Side, build_block_grid, extrema_window, local_extrema


class TestQuoteSeries:
    def test_equispaced(self):
        s = QuoteSeries.equispaced([1.0, 2.0, 3.0, 4.0])
        assert_allclose(s.times, [0, 1 / 3, 2 / 3, 1])
        assert s.n == 3 and len(s) == 4 and s.side is Side.ASK

    @pytest.mark.parametrize("times, values", [
        ([0.0, 0.5, 0.5], [1, 2, 3]),
        ([0.0, 0.5, 1.2], [1, 2, 3]),
        ([0.0, 0.5], [1, np.nan]),
        ([0.0], [1.0]),
    ])
    def test_rejects_bad_input(self, times, values):
        with pytest.raises(ValueError):
            QuoteSeries(times, values)

    def test_side_aliases(self):
        assert Side.parse("min") is Side.ASK
        assert Side.parse("BID") is Side.BID
        assert Side.ASK.flipped() is Side.BID
        assert Side.ASK.sign == 1 and Side.BID.sign == -1

    def test_values_are_read_only(self):
        s = QuoteSeries.equispaced([1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            s.values[0] = 5.0


class TestBlockGrid:
    def test_block_count_grid(self):
        s = QuoteSeries.equispaced(np.zeros(13))
        g = build_block_grid(s, block_count=4)
        assert_allclose(g.edges, [0, 0.25, 0.5, 0.75, 1])
        # right-closed blocks; t=0 joins block 0
        assert_array_equal(g.starts, [0, 4, 7, 10, 13])
        assert g.block_length == 0.25

    def test_obs_per_block_remainder(self):
        s = QuoteSeries.equispaced(np.zeros(11))
        g = build_block_grid(s, obs_per_block=3)
        assert g.block_count == 3
        assert_allclose(g.edges, [0, 0.3, 0.6, 1.0])
        assert g.block_length == pytest.approx(0.3)

    def test_count_partition(self):
        t = np.array([0.0, 0.05, 0.1, 0.4, 0.41, 0.42, 0.7, 0.8, 0.9, 0.95, 1.0])
        s = QuoteSeries(t, np.zeros(t.size))
        g = build_block_grid(s, obs_per_block=3, partition="count")
        assert g.block_count == 3
        assert_array_equal(g.starts, [0, 3, 6, 11])
        assert_allclose(g.edges, [0.0, 0.4, 0.7, 1.0])

    def test_empty_blocks(self):
        t = np.array([0.0, 0.1, 0.2, 0.8, 0.9, 1.0])
        g = build_block_grid(QuoteSeries(t, np.arange(6.0)), block_count=5)
        assert_array_equal(g.empty, [False, True, True, False, False])
        assert list(g.index_set(0)) == [0, 1, 2]

    @pytest.mark.parametrize("kwargs", [{}, {"block_count": 3, "obs_per_block": 2},
                                        {"block_count": 2}, {"obs_per_block": 5},
                                        {"block_count": 4, "partition": "count"}])
    def test_invalid(self, kwargs):
        s = QuoteSeries.equispaced(np.zeros(11))
        with pytest.raises(ValueError):
            build_block_grid(s, **kwargs)

    def test_block_of(self):
        s = QuoteSeries.equispaced(np.zeros(11))
        g = build_block_grid(s, block_count=5)
        assert_array_equal(g.block_of([0.0, 0.19, 0.2, 0.99, 1.0]), [0, 0, 1, 4, 4])


class TestExtrema:
    def test_ask_minima_and_bid_maxima(self):
        v = np.array([3.0, 1.0, 2.0, 5.0, 4.0, 6.0, 0.5, 2.0, 1.0, 3.0])
        ask = QuoteSeries.equispaced(v, "ask")
        g = build_block_grid(ask, obs_per_block=3, partition="count")
        assert_array_equal(local_extrema(ask, g).values, [1.0, 4.0, 0.5])
        bid = QuoteSeries.equispaced(v, "bid")
        e = local_extrema(bid, g)
        assert_array_equal(e.values, [3.0, 6.0, 3.0])
        assert e.side == "max" and e.sign == -1

    def test_empty_blocks_take_nearest_value(self):
        t = np.array([0.0, 0.1, 0.2, 0.8, 0.9, 1.0])
        s = QuoteSeries(t, [1.0, 2.0, 3.0, 7.0, 8.0, 9.0])
        e = local_extrema(s, build_block_grid(s, block_count=5))
        assert_array_equal(e.values, [1.0, 1.0, 7.0, 7.0, 8.0])
        assert_array_equal(e.empty_blocks, [1, 2])
        d, valid = e.differences()
        assert_array_equal(valid, [False, False, False, True])

    def test_grid_mismatch(self):
        a = QuoteSeries.equispaced(np.zeros(11))
        b = QuoteSeries.equispaced(np.zeros(21))
        with pytest.raises(ValueError):
            local_extrema(a, build_block_grid(b, block_count=4))


class TestWindow:
    def test_after_and_before(self):
        s = QuoteSeries.equispaced([5.0, 4.0, 3.0, 9.0, 8.0, 7.0, 6.0, 1.0, 2.0, 3.0, 4.0])
        after = extrema_window(s, 0.35, 3, "after")
        before = extrema_window(s, 0.35, 3, "before")
        assert (after.first, after.last, after.value) == (4, 6, 6.0)
        assert (before.first, before.last, before.value) == (1, 3, 3.0)
        assert not after.shrunk

    def test_shrinks_at_boundary(self):
        s = QuoteSeries.equispaced(np.arange(11.0))
        w = extrema_window(s, 0.05, 4, "before")
        assert w.shrunk and (w.first, w.last) == (0, 0)

    @pytest.mark.parametrize("tau", [0.0, 1.0])
    def test_tau_outside(self, tau):
        with pytest.raises(ValueError):
            extrema_window(QuoteSeries.equispaced(np.zeros(5)), tau, 2, "after")
