import json

import pytest

from lomn.cli import main

# carried-forward simulated quotes cross now and then
pytestmark = pytest.mark.filterwarnings("ignore:.*crossed records")


@pytest.fixture(scope="module")
def quotes(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "day.csv"
    code = main(["simulate", "--n", "4000", "--noise", "ar1", "--q", "0.0002", "--price", "50",
                 "--jump", "-0.01", "--jump-time", "0.6", "--quotes", "--seed", "1",
                 "--out", str(path)])
    assert code == 0
    return path


def test_simulate_grid_csv(tmp_path):
    out = tmp_path / "sim.csv"
    assert main(["simulate", "--n", "200", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "time,x,spot_vol,mid,ask,bid" and len(lines) == 202


def test_quotes_header(quotes):
    assert quotes.read_text().splitlines()[0] == "time_sec,ask_price,bid_price"


def test_global(quotes, capsys):
    assert main(["test-global", str(quotes), "--nhn", "20"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["decision"] is True
    assert abs(rep["theta_hat"] - 0.6) < 0.02


def test_global_bootstrap(quotes, capsys):
    assert main(["test-global", str(quotes), "--nhn", "20", "--critical-source", "bootstrap",
                 "--m", "200", "--statistic", "BHR"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["critical_source"] == "bootstrap"


def test_local(quotes, capsys):
    assert main(["test-local", str(quotes), "--tau", "0.6", "--side", "bid", "--nhn", "10"]) == 0
    assert json.loads(capsys.readouterr().out)["decision"] is True


def test_detect_online(quotes, tmp_path):
    out = tmp_path / "ev.jsonl"
    assert main(["detect-online", str(quotes), "--out", str(out)]) == 0
    events = [json.loads(line) for line in out.read_text().splitlines()]
    assert any(e["direction"] == -1 and abs(e["session_time"] - 0.6) < 0.05 for e in events)
    assert all(e["wall_clock"] is not None for e in events)


def test_race(quotes, capsys):
    assert main(["race", str(quotes), "--nhn", "30"]) == 0
    records = json.loads(capsys.readouterr().out)
    assert isinstance(records, list)


def test_calibrate(quotes, capsys):
    assert main(["calibrate-bootstrap", str(quotes), "--m", "200", "--statistic", "LM",
                 "--scenario", "additive", "--seed", "4"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["critical_value"] > 0 and out["m"] == 200


def test_acf(quotes, capsys):
    assert main(["diagnose-acf", str(quotes), str(quotes), "--max-lag", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "lag,median_acf" and len(lines) == 4


def test_clean(quotes, tmp_path):
    prefix = tmp_path / "c"
    assert main(["clean", str(quotes), "--out-prefix", str(prefix), "--split"]) == 0
    assert (tmp_path / "c_ask.csv").exists() and (tmp_path / "c_mid_0.csv").exists()


@pytest.mark.parametrize("argv", [
    ["reproduce-table", "--table", "T1", "--reps", "100"],
    ["test-global", "/nonexistent/file.csv"],
    ["test-local", "{quotes}", "--tau", "1.5"],
])
def test_infrastructure_errors_exit_2(argv, quotes, capsys):
    argv = [a.replace("{quotes}", str(quotes)) for a in argv]
    assert main(argv) == 2
    assert "error" in capsys.readouterr().err
