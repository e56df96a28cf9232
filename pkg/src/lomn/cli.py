"""Command line interface: ``lomn <subcommand> ...``.

Exit status is 0 on success and 2 when input, configuration or computation
fails. ``LOMN_JOBS`` sets the default number of worker processes.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io as qio
from .experiments import preset, run_experiment
from .inference import global_test, local_test
from .mmn import (BootstrapConfig, bootstrap_critical_values, default_jobs,
                  estimate_noise_level)
from .online import DetectorConfig, detector_new, push, close, race
from .series import QuoteSeries, Side, build_block_grid, local_extrema
from .simulate import NoiseSpec, SimConfig, apply_noise, inject_jump, simulate_path
from .spot_vol import SpotVolConfig, spot_vol_path
from .tables import compare


def _spot_cfg(args) -> SpotVolConfig:
    return SpotVolConfig(K=args.kn, mode=getattr(args, "mode", "standard"))


def _load(args):
    ask, bid, mid = qio.load_quotes(args.input, args.format, args.messages)
    if args.clean:
        ask, bid, mid = (qio.clean_session(s) for s in (ask, bid, mid))
    return {"ask": ask, "bid": bid, "mid": mid}


def _emit(obj, out):
    text = obj if isinstance(obj, str) else json.dumps(obj, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args):
    path = simulate_path(SimConfig(n=args.n, x0=float(np.log(args.price)), seed=args.seed), args.rep)
    if args.jump:
        path = inject_jump(path, args.jump_time, args.jump)
    obs = apply_noise(path, NoiseSpec(args.noise, args.q), seed=args.seed, rep=args.rep)
    if args.quotes:
        # interchange format: each side holds its last quote until it changes
        def carried(values, mask):
            idx = np.maximum.accumulate(np.where(mask, np.arange(mask.size), -1))
            idx[idx < 0] = np.flatnonzero(mask)[0]
            return np.exp(values[idx])

        wall = args.start + obs.t * (args.end - args.start)
        ask, bid = carried(obs.ask, obs.ask_mask), carried(obs.bid, obs.bid_mask)
        rows = ["time_sec,ask_price,bid_price"]
        rows += [f"{w!r},{a!r},{b!r}" for w, a, b in zip(wall.tolist(), ask.tolist(), bid.tolist())]
        _emit("\n".join(rows) + "\n", args.out)
        return
    rows = ["time,x,spot_vol,mid,ask,bid"]
    for i in range(obs.t.size):
        a = repr(float(obs.ask[i])) if obs.ask_mask[i] else ""
        b = repr(float(obs.bid[i])) if obs.bid_mask[i] else ""
        rows.append(f"{float(obs.t[i])!r},{float(obs.x[i])!r},{float(obs.spot_vol[i])!r},"
                    f"{float(obs.mid[i])!r},{a},{b}")
    _emit("\n".join(rows) + "\n", args.out)


def cmd_test_global(args):
    d = _load(args)
    s = d[args.side]
    if args.critical_source == "bootstrap":
        crit = _bootstrap_value(args, s, d["mid"])
    else:
        crit = "asymptotic"
    kw = {"obs_per_block": args.nhn} if args.nhn else {"block_count": args.blocks}
    rep = global_test(s, spot_cfg=_spot_cfg(args), alpha=args.alpha, critical_source=crit, **kw)
    _emit(qio.report_to_dict(rep), args.out)


def cmd_test_local(args):
    s = _load(args)[args.side]
    rep = local_test(s, args.tau, args.nhn or 12, _spot_cfg(args), args.alpha)
    _emit(qio.report_to_dict(rep), args.out)


def cmd_detect_online(args):
    s = _load(args)[args.side]
    state = detector_new(DetectorConfig(s.n, args.blocks, args.alpha, session=s.session),
                         SpotVolConfig(K=args.kn, mode="pre", truncation=None), s.side)
    for t, v in zip(s.times, s.values):
        push(state, (t, v))
    close(state)
    _emit(qio.events_to_jsonl(state.events), args.out)


def _sigma_on(series: QuoteSeries, target: QuoteSeries, kn: int) -> np.ndarray:
    grid = build_block_grid(series, obs_per_block=max(2, int(round(series.n ** (1 / 3)))))
    path = spot_vol_path(local_extrema(series, grid), SpotVolConfig(K=kn))
    return np.sqrt(path.at_times(target.times))


def cmd_race(args):
    d = _load(args)
    q = estimate_noise_level(d["mid"])
    sigma = args.sigma if args.sigma else _sigma_on(d["ask"], d["mid"], args.kn)
    records = race(d["mid"], d["ask"], d["bid"], dict(nh=args.nhn or 30, q=q, sigma=sigma, alpha=args.alpha))
    span = 1.0 if d["mid"].session is None else d["mid"].session[1] - d["mid"].session[0]
    out = [{"mmn_time": r.mmn_time, "ask_time": r.ask_time, "bid_time": r.bid_time,
            "direction": r.direction, "advantage_seconds": r.advantage * span,
            "all_detected": r.all_detected} for r in records]
    _emit(qio._plain(out), args.out)


def _bootstrap_value(args, series, mid):
    sigma = _sigma_on(series, mid, args.kn)
    cfg = BootstrapConfig(sigma, estimate_noise_level(mid),
                          args.scenario, m=args.m, seed=args.seed, x0=float(mid.values[0]))
    side = "bid" if series.side == Side.BID else "ask"
    return bootstrap_critical_values(cfg, args.statistic, args.alpha, args.nhn or 10, side,
                                     jobs=args.jobs)


def cmd_calibrate_bootstrap(args):
    d = _load(args)
    crit = _bootstrap_value(args, d[args.side], d["mid"])
    _emit({"statistic": args.statistic, "alpha": args.alpha, "critical_value": crit,
           "m": args.m, "seed": args.seed}, args.out)


def cmd_reproduce_table(args):
    if args.reps < 200:
        raise ValueError("replication budget must be at least 200")
    spec = preset(args.table, args.reps, args.seed)
    if args.bootstrap_m:
        spec = replace(spec, bootstrap_m=args.bootstrap_m)
    result = run_experiment(spec, jobs=args.jobs)
    if args.out:
        Path(args.out).write_text(result.to_csv())
    else:
        sys.stdout.write(result.to_csv())
    checks = compare(result)
    for c in checks:
        print(c.line(), file=sys.stderr)
    passed = sum(c.passed for c in checks)
    print(f"{passed}/{len(checks)} cells within tolerance", file=sys.stderr)


def cmd_diagnose_acf(args):
    days = []
    for path in args.inputs:
        d = dict(zip(("ask", "bid", "mid"), qio.load_quotes(path, args.format)))
        s = qio.clean_session(d[args.side]) if args.clean else d[args.side]
        days.append(s)
    med = qio.acf_median_diagnostic(days, args.max_lag)
    lines = ["lag,median_acf"] + [f"{k},{v!r}" for k, v in enumerate(med.tolist(), start=1)]
    _emit("\n".join(lines) + "\n", args.out)


def cmd_clean(args):
    ask, bid, mid = qio.load_quotes(args.input, args.format, args.messages)
    prefix = args.out_prefix
    for s in (ask, bid, mid):
        cleaned = qio.clean_session(s)
        qio.series_to_csv(cleaned, f"{prefix}_{s.side.value}.csv")
        if args.split:
            for i, seg in enumerate(qio.split_intervals(cleaned)):
                if not seg.empty:
                    qio.series_to_csv(seg.series, f"{prefix}_{s.side.value}_{i}.csv")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lomn", description="Jump inference under one-sided noise")
    sub = p.add_subparsers(dest="command", required=True)

    def data(sp, side=True):
        sp.add_argument("input")
        sp.add_argument("--format", choices=("csv", "lobster"), default="csv")
        sp.add_argument("--messages", help="LOBSTER message file")
        sp.add_argument("--clean", action="store_true", help="apply the default session cleaning")
        if side:
            sp.add_argument("--side", choices=("ask", "bid"), default="ask")
        sp.add_argument("--alpha", type=float, default=0.05)
        sp.add_argument("--kn", type=int, default=200)
        sp.add_argument("--out")

    sp = sub.add_parser("simulate", help="simulate one session and write it as CSV")
    sp.add_argument("--n", type=int, default=23_400)
    sp.add_argument("--noise", choices=("ar1", "gaussian", "halfnormal", "exponential", "rounding"),
                    default="ar1")
    sp.add_argument("--q", type=float, default=0.0005)
    sp.add_argument("--price", type=float, default=1.0)
    sp.add_argument("--jump", type=float, default=0.0)
    sp.add_argument("--jump-time", type=float, default=0.5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--rep", type=int, default=0)
    sp.add_argument("--quotes", action="store_true",
                    help="write time_sec,ask_price,bid_price with quotes carried forward")
    sp.add_argument("--start", type=float, default=34_200.0, help="session start, seconds after midnight")
    sp.add_argument("--end", type=float, default=57_600.0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_simulate)

    def boot(sp):
        sp.add_argument("--statistic", choices=("BHR", "LM"), default="BHR")
        sp.add_argument("--scenario", choices=("additive", "halfnormal", "thinned"), default="thinned")
        sp.add_argument("--m", type=int, default=5_000)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--jobs", type=int, default=None)

    sp = sub.add_parser("test-global", help="global maximum test")
    data(sp)
    sp.add_argument("--nhn", type=int, help="observations per block")
    sp.add_argument("--blocks", type=int, help="block count (default from n)")
    sp.add_argument("--critical-source", choices=("asymptotic", "bootstrap"), default="asymptotic")
    boot(sp)
    sp.set_defaults(func=cmd_test_global)

    sp = sub.add_parser("test-local", help="local test at a given session time")
    data(sp)
    sp.add_argument("--tau", type=float, required=True)
    sp.add_argument("--nhn", type=int)
    sp.set_defaults(func=cmd_test_local)

    sp = sub.add_parser("detect-online", help="replay a session through the online detector")
    data(sp)
    sp.add_argument("--blocks", type=int)
    sp.set_defaults(func=cmd_detect_online)

    sp = sub.add_parser("race", help="online detection times: ask/bid extrema vs mid averages")
    data(sp, side=False)
    sp.add_argument("--nhn", type=int, help="mid observations per block")
    sp.add_argument("--sigma", type=float, help="constant volatility for the mid detector")
    sp.set_defaults(func=cmd_race)

    sp = sub.add_parser("calibrate-bootstrap", help="bootstrap critical value")
    data(sp)
    sp.add_argument("--nhn", type=int)
    boot(sp)
    sp.set_defaults(func=cmd_calibrate_bootstrap)

    sp = sub.add_parser("reproduce-table", help="Monte Carlo size/power table vs reference values")
    sp.add_argument("--table", choices=("T1", "T2", "T3", "T3-10", "T4", "S1"), required=True)
    sp.add_argument("--reps", type=int, default=1_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--bootstrap-m", type=int)
    sp.add_argument("--jobs", type=int, default=None)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_reproduce_table)

    sp = sub.add_parser("diagnose-acf", help="median ACF of quote increments across days")
    sp.add_argument("inputs", nargs="+")
    sp.add_argument("--format", choices=("csv",), default="csv")
    sp.add_argument("--side", choices=("ask", "bid", "mid"), default="mid")
    sp.add_argument("--max-lag", type=int, default=10)
    sp.add_argument("--clean", action="store_true")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_diagnose_acf)

    sp = sub.add_parser("clean", help="clean a session and write per-side series")
    sp.add_argument("input")
    sp.add_argument("--format", choices=("csv", "lobster"), default="csv")
    sp.add_argument("--messages")
    sp.add_argument("--out-prefix", required=True)
    sp.add_argument("--split", action="store_true", help="also write the seven intraday intervals")
    sp.set_defaults(func=cmd_clean)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", None) is None and hasattr(args, "jobs"):
        args.jobs = default_jobs()
    try:
        args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
