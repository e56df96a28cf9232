import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from lomn import JumpEvent, QuoteSeries, global_test
from lomn import io as qio
from lomn.io import SessionCleanRules, hms


def _write(path, rows, header="time_sec,ask_price,bid_price"):
    path.write_text(header + "\n" + "\n".join(",".join(map(str, r)) for r in rows) + "\n")
    return path


def _day(n=4000, seed=0, start="09:30", end="16:00"):
    g = np.random.default_rng(seed)
    t = np.linspace(hms(start), hms(end) - 1e-3, n)
    x = 50 * np.exp(np.cumsum(g.standard_normal(n)) * 1e-4)
    ask = np.round(x * 100 + 0.5) / 100
    return np.column_stack((t, ask, ask - 0.01))


def test_two_row_mid(tmp_path):
    f = _write(tmp_path / "q.csv", [(34200.0, 50.01, 49.99), (34201.5, 50.01, 50.0)])
    ask, bid, mid = qio.load_quotes(f)
    assert_allclose(np.exp(mid.values), [50.000, 50.005])
    assert_allclose(ask.times, [0.0, 1.0])
    assert mid.side.value == "mid" and ask.session == (34200.0, 34201.5)


def test_header_and_parse_errors(tmp_path):
    with pytest.raises(ValueError, match="header"):
        qio.load_quotes(_write(tmp_path / "a.csv", [(1, 2, 1)], "t,ask,bid"))
    with pytest.raises(ValueError, match=":3:"):
        qio.load_quotes(_write(tmp_path / "b.csv", [(1, 2, 1), (2, "x", 1)]))
    with pytest.raises(ValueError, match="sorted"):
        qio.load_quotes(_write(tmp_path / "c.csv", [(2, 2, 1), (1, 2, 1)]))


def test_duplicate_timestamp_keeps_last(tmp_path):
    f = _write(tmp_path / "q.csv", [(1.0, 10.0, 9.0), (2.0, 10.5, 9.5), (2.0, 11.0, 10.0), (3.0, 12, 11)])
    ask, _, _ = qio.load_quotes(f)
    assert_allclose(np.exp(ask.values), [10.0, 11.0, 12.0])


def test_crossed_records_flagged(tmp_path):
    f = _write(tmp_path / "q.csv", [(1.0, 10.0, 9.0), (2.0, 9.0, 9.5), (3.0, 12, 11)])
    with pytest.warns(UserWarning, match="crossed"):
        ask, _, _ = qio.load_quotes(f)
    assert_array_equal(ask.flags, [False, True, False])


def test_lobster(tmp_path):
    ob = tmp_path / "ob.csv"
    ob.write_text("500100,10,499900,5\n500200,10,500000,5\n")
    msg = tmp_path / "msg.csv"
    msg.write_text("34200.5,1,1,10,500100,1\n34300.0,1,1,10,500200,1\n")
    ask, bid, _ = qio.load_quotes(ob, "lobster", msg)
    assert_allclose(np.exp(ask.values), [50.01, 50.02])
    assert_allclose(bid.wall_times, [34200.5, 34300.0])
    with pytest.raises(ValueError):
        qio.load_quotes(ob, "lobster")


def test_clean_rules(tmp_path):
    rows = [(hms("09:32"), 10, 9), (hms("09:35"), 10, 9), (hms("09:36"), 10.0, 9),
            (hms("09:37"), 10.0, 9), (hms("09:38"), 10.0, 9.5), (hms("09:39"), 10.1, 9.5),
            (hms("16:00"), 10.2, 9.5)]
    ask, bid, _ = qio.load_quotes(_write(tmp_path / "q.csv", rows))
    a = qio.clean_session(ask)
    assert_allclose(a.wall_times, [hms("09:35"), hms("09:39")])
    b = qio.clean_session(bid)
    assert_allclose(b.wall_times, [hms("09:35"), hms("09:38")])
    assert a.times[0] == 0.0 and a.session == (hms("09:35"), hms("16:00"))
    keep_all = qio.clean_session(ask, SessionCleanRules(change_filter=False))
    assert len(keep_all) == 5
    with pytest.raises(ValueError):
        SessionCleanRules(exclude=(hms("08:00"), hms("09:35")))


def test_clean_idempotent(tmp_path):
    f = tmp_path / "d.csv"
    _write(f, _day().tolist())
    for s in qio.load_quotes(f):
        once = qio.clean_session(s)
        twice = qio.clean_session(once)
        assert_array_equal(once.values, twice.values)
        assert_array_equal(once.times, twice.times)


def test_split_intervals(tmp_path):
    t = np.arange(hms("09:35"), hms("16:00"), 1.0)
    s = QuoteSeries((t - t[0]) / (hms("16:00") - t[0]), np.arange(t.size) * 1e-6, "ask",
                    (t[0], hms("16:00")), t)
    segs = qio.split_intervals(s)
    assert len(segs) == 7
    assert [g.count for g in segs] == [1500, 3600, 3600, 3600, 3600, 3600, 3600]
    assert segs[1].series.wall_times[0] == hms("11:00") - 3600
    assert segs[2].series.wall_times[0] == hms("11:00")
    for g in segs:
        assert g.series.times[0] == 0.0 and g.series.times[-1] < 1.0
    sparse = QuoteSeries([0.0, 1.0], [0.0, 0.0], "ask", (0, 1), [hms("09:40"), hms("09:50")])
    segs = qio.split_intervals(sparse)
    assert segs[0].count == 2 and segs[1].empty and segs[1].count == 0


def test_acf_median():
    g = np.random.default_rng(1)
    iid = [np.cumsum(1e-5 * g.standard_normal(5000)) + 1e-3 * g.standard_normal(5000)
           for _ in range(5)]
    med = qio.acf_median_diagnostic(iid, 3)
    assert med[0] == pytest.approx(-0.5, abs=0.03)
    # AR(1) noise with phi=-0.5: acf of the increments is -(1-phi)/2 and -phi(1-phi)/2
    from lomn.simulate import _ar1
    days = [_ar1(g.standard_normal(20_000), -0.5, 1.0, g.standard_normal(())) for _ in range(7)]
    med = qio.acf_median_diagnostic(days, 2)
    assert_allclose(med, [-0.75, 0.375], atol=0.03)
    single = qio.acf_median_diagnostic(days[:1], 2)
    assert_allclose(single, qio._acf(np.diff(days[0]), 2))
    with pytest.raises(ValueError):
        qio.acf_median_diagnostic([np.zeros(3)], 5)
    with pytest.raises(ValueError):
        qio.acf_median_diagnostic([], 5)


def test_series_round_trip(tmp_path):
    f = tmp_path / "d.csv"
    _write(f, _day(seed=3).tolist())
    ask, _, _ = qio.load_quotes(f)
    c = qio.clean_session(ask)
    qio.series_to_csv(c, tmp_path / "s.csv")
    back = qio.series_from_csv(tmp_path / "s.csv")
    assert_array_equal(back.times, c.times)
    assert_array_equal(back.values, c.values)
    assert_array_equal(back.wall_times, c.wall_times)
    assert back.session == c.session and back.side == c.side


def test_write_quotes_round_trip(tmp_path):
    f = tmp_path / "d.csv"
    _write(f, _day(n=200).tolist())
    ask, bid, _ = qio.load_quotes(f)
    qio.write_quotes(tmp_path / "w.csv", ask, bid)
    a2, b2, _ = qio.load_quotes(tmp_path / "w.csv")
    assert_allclose(a2.values, ask.values, rtol=0, atol=1e-15)
    assert_array_equal(b2.wall_times, bid.wall_times)


def test_reports_and_events_json():
    g = np.random.default_rng(0)
    s = QuoteSeries.equispaced(np.cumsum(g.standard_normal(2001)) * 1e-4)
    d = qio.report_to_dict(global_test(s, block_count=40))
    json.dumps(d)
    assert set(d) >= {"T_raw", "T_std", "decision", "theta_hat", "standardized"}
    ev = [JumpEvent(0.5, -0.01, 3, 0.05, (0.49, 0.5), 45900.0, 0.01)]
    line = json.loads(qio.events_to_jsonl(ev))
    assert line == {"session_time": 0.5, "wall_clock": 45900.0, "direction": -1,
                    "size_estimate": -0.01, "interval_lo": 0.49, "interval_hi": 0.5, "alpha": 0.05}
    assert qio.events_to_jsonl([]) == ""
