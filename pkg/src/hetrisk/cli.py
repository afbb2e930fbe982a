"""hetrisk command line: build, invert, style, kappa, backtest, synth.

Exit codes: 0 success, 2 usage/config, 3 data, 4 numerical.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .backtest import MODELS, BacktestConfig, run_backtest
from .config import FLOAT_DIGITS
from .diagnostics import KappaSchedule, figure1_data
from .errors import ConfigError, FormatError, HetRiskError
from .facmodel import invert_factor_model, load_model, save_model
from .nested import NestedBuildOptions, build_nested
from .panel import (
    fmt,
    load_hierarchy,
    load_prices,
    load_returns,
    returns_from_prices,
    write_hierarchy,
    write_prices,
)
from .stats import sample_covariance
from .styles import STYLE_NAMES, StyleFactorSet, compute_styles
from .synth import SynthConfig, generate

log = logging.getLogger("hetrisk")


@dataclass(frozen=True)
class RunConfig:
    command: str
    paths: dict = field(default_factory=dict)
    build: NestedBuildOptions | None = None
    backtest: BacktestConfig | None = None
    out: str = "."
    digits: int = FLOAT_DIGITS


def _write_rows(path, header, rows):
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _style_cols(text: str | None) -> tuple:
    if not text:
        return ()
    cols = tuple(c.strip() for c in text.split(",") if c.strip())
    for c in cols:
        if c not in STYLE_NAMES + ("int",):
            raise ConfigError(f"unknown style column {c!r}")
    return cols


def _load_styles(path, tickers) -> StyleFactorSet:
    if not os.path.exists(path):
        raise FormatError(f"no such file: {path}", exit_code=2)
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    names = tuple(rows[0][1:])
    table = {r[0]: [float(x) for x in r[1:]] for r in rows[1:]}
    missing = [t for t in tickers if t not in table]
    if missing:
        raise FormatError(f"{path}: no styles for {missing[:5]}")
    return StyleFactorSet(np.array([table[t] for t in tickers]), names, 0, "", tickers)


# ------------------------------------------------------------------ commands

def cmd_build(args) -> int:
    cols = _style_cols(args.style_cols)
    if (args.k_style > 0 or args.append_style) and not cols:
        raise ConfigError("--k-style/--append-style need --style-cols")
    if args.k_style > 0 and (args.p > 0 or args.append_style):
        raise ConfigError("--k-style cannot be combined with --p or --append-style")
    if args.returns is None and args.prices is None:
        raise ConfigError("give --returns or --prices")
    hier = load_hierarchy(args.hierarchy)
    prices = None
    if args.returns is not None:
        panel = load_returns(args.returns)
    else:
        prices = load_prices(args.prices)
        window = prices.take(None, np.arange(min(args.lookback + 1, prices.days)))
        panel = returns_from_prices(window, "close-to-close")
    hier = hier.reorder(panel.tickers)
    style = None
    if cols:
        if args.styles is not None:
            st = _load_styles(args.styles, panel.tickers).select(cols)
        elif prices is not None:
            st = compute_styles(prices.take(None, np.arange(min(args.style_days, prices.days))),
                                do_norm=args.do_norm).select(cols)
        else:
            raise ConfigError("style columns need --styles or --prices")
        style = np.array(st.matrix)
    opts = NestedBuildOptions(mkt_fac=args.mkt_fac, rm_sing_tkr=args.rm_sing_tkr, p=args.p,
                              append_style=args.append_style, k_style=args.k_style, style=style,
                              k_pc=args.k_pc, weights=args.weights, early_stop=args.early_stop,
                              restore_diag=args.restore_diag)
    model = build_nested(panel, hier, opts)
    final = model.final
    save_model(final, args.out, dates=panel.dates, digits=args.digits)
    for lv in model.per_level:
        k = lv.level
        _write_rows(os.path.join(args.out, f"level{k}_loadings.csv"),
                    ["row", *(f"f{a}" for a in range(lv.loadings.shape[1]))],
                    [[i, *(fmt(x, args.digits) for x in row)] for i, row in enumerate(lv.loadings)])
        _write_rows(os.path.join(args.out, f"level{k}_spec_risk.csv"), ["row", "spec_risk"],
                    [[i, fmt(x, args.digits)] for i, x in enumerate(lv.spec_risk)])
        _write_rows(os.path.join(args.out, f"level{k}_fac_cov.csv"),
                    ["row", *(f"f{a}" for a in range(lv.fac_cov.shape[1]))],
                    [[i, *(fmt(x, args.digits) for x in row)] for i, row in enumerate(lv.fac_cov)])
    if model.dropped_tickers:
        _write_rows(os.path.join(args.out, "dropped.csv"), ["ticker"],
                    [[t] for t in model.dropped_tickers])
    c = sample_covariance(model.returns)
    dev = float(np.abs(np.diag(final.cov_mat) - np.diag(c)).max())
    min_eig = float(np.linalg.eigvalsh(model.fac_cov_unbarred).min())
    print(f"N = {final.n}")
    print("factors per level = " + ",".join(str(lv.loadings.shape[1]) for lv in model.per_level))
    print(f"min eigenvalue of factor covariance = {min_eig:.6e}")
    print(f"max |diag(model) - sample variance| = {dev:.3e}")
    return 0


def cmd_invert(args) -> int:
    model = load_model(args.model)
    inv = invert_factor_model(model)
    out = args.out or os.path.join(args.model, "inv_cov.csv")
    tickers = model.tickers
    _write_rows(out, ["ticker", *tickers],
                [[t, *(fmt(x, args.digits) for x in row)] for t, row in zip(tickers, inv)])
    err = float(np.abs(model.cov_mat @ inv - np.eye(model.n)).max())
    print(f"max |G G^-1 - I| = {err:.3e}")
    return 0


def cmd_style(args) -> int:
    prices = load_prices(args.prices)
    window = prices.take(None, np.arange(min(args.window, prices.days)))
    st = compute_styles(window, do_norm=args.do_norm)
    _write_rows(args.out, ["ticker", *st.names],
                [[t, *(fmt(x, args.digits) for x in row)] for t, row in zip(st.tickers, st.matrix)])
    return 0


def cmd_kappa(args) -> int:
    prices = load_prices(args.prices)
    hier = load_hierarchy(args.hierarchy)
    sched = KappaSchedule(period=args.period, top=args.top, addv_days=args.addv_days,
                          min_cluster=args.min_cluster, level=args.level)
    rows = figure1_data(prices, hier, sched)
    _write_rows(args.out, ["period", "style", "cluster", "n", "kappa"],
                [[p, s, c, n, fmt(k, args.digits)] for p, s, c, n, k in rows])
    return 0


def backtest_config(args) -> BacktestConfig:
    cols = _style_cols(args.style_cols) or ("prc",)
    if args.k_style > 0 and args.model == "nested-custom" and (args.p > 0 or args.append_style):
        raise ConfigError("--k-style cannot be combined with --p or --append-style")
    return BacktestConfig(model=args.model, style_cols=cols, k_style=args.k_style, q=args.q,
                          p=args.p, mkt_fac=args.mkt_fac, append_style=args.append_style,
                          rm_sing_tkr=args.rm_sing_tkr, levels_from=args.levels_from,
                          bounds=args.bounds, investment=args.investment,
                          rebalance_days=args.rebalance_days, top=args.top,
                          addv_days=args.addv_days, lookback=args.lookback, threads=args.threads)


def cmd_backtest(args) -> int:
    cfg = backtest_config(args)
    prices = load_prices(args.prices)
    hier = load_hierarchy(args.hierarchy)
    rep = run_backtest(prices, hier, cfg, label=args.model)
    os.makedirs(args.out, exist_ok=True)
    _write_rows(os.path.join(args.out, "report.csv"),
                ["model", "roc_pct", "sr", "cps", "n_days", "sr_degenerate"],
                [[rep.label, fmt(100 * rep.roc, 6), fmt(rep.sr, 6), fmt(rep.cps, 6), rep.n_days,
                  int(rep.sr_degenerate)]])
    _write_rows(os.path.join(args.out, "pnl.csv"), ["date", "pnl", "shares"],
                [[d, fmt(p, args.digits), fmt(s, args.digits)]
                 for d, p, s in zip(rep.dates, rep.daily_pnl, rep.daily_shares)])
    print(f"ROC {100 * rep.roc:.2f}%  SR {rep.sr:.2f}  CPS {rep.cps:.2f}  days {rep.n_days}")
    return 0


def cmd_synth(args) -> int:
    try:
        clusters = tuple(int(c) for c in args.clusters.split(","))
    except ValueError:
        raise ConfigError(f"bad cluster plan {args.clusters!r}") from None
    cfg = SynthConfig(n=args.n, days=args.days, clusters=clusters, singletons=args.singletons,
                      seed=args.seed)
    prices, hier = generate(cfg)
    os.makedirs(args.out, exist_ok=True)
    write_prices(prices, os.path.join(args.out, "prices.csv"), args.digits)
    write_hierarchy(hier, os.path.join(args.out, "hierarchy.csv"))
    return 0


# ------------------------------------------------------------------ parser

def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hetrisk", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--digits", type=_positive_int, default=FLOAT_DIGITS)
        p.add_argument("--threads", type=_positive_int, default=1)

    def model_flags(p):
        p.add_argument("--mkt-fac", action="store_true")
        p.add_argument("--rm-sing-tkr", action="store_true")
        p.add_argument("--p", type=int, default=0)
        p.add_argument("--append-style", action="store_true")
        p.add_argument("--k-style", type=int, default=0)
        p.add_argument("--style-cols", default=None, help="comma list from prc,mom,hlv,vol,int")

    p = sub.add_parser("build", help="build a nested factor model")
    p.add_argument("--returns")
    p.add_argument("--prices")
    p.add_argument("--hierarchy", required=True)
    p.add_argument("--styles", help="CSV ticker,<style columns>")
    p.add_argument("--out", required=True)
    p.add_argument("--lookback", type=_positive_int, default=21)
    p.add_argument("--style-days", type=_positive_int, default=21)
    p.add_argument("--do-norm", action="store_true")
    p.add_argument("--k-pc", type=_positive_int, default=1)
    p.add_argument("--weights", choices=("heterotic", "binary"), default="heterotic")
    p.add_argument("--early-stop", action="store_true")
    p.add_argument("--restore-diag", action="store_true")
    model_flags(p)
    common(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("invert", help="invert a saved model through its factor structure")
    p.add_argument("--model", required=True)
    p.add_argument("--out")
    common(p)
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("style", help="compute style exposures")
    p.add_argument("--prices", required=True)
    p.add_argument("--window", type=_positive_int, default=21)
    p.add_argument("--do-norm", action="store_true")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_style)

    p = sub.add_parser("kappa", help="out-of-sample per-cluster kappa for each style")
    p.add_argument("--prices", required=True)
    p.add_argument("--hierarchy", required=True)
    p.add_argument("--period", type=_positive_int, default=21)
    p.add_argument("--top", type=_positive_int, default=2000)
    p.add_argument("--addv-days", type=_positive_int, default=21)
    p.add_argument("--min-cluster", type=_positive_int, default=4)
    p.add_argument("--level", type=int, default=0)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("backtest", help="intraday mean-reversion backtest")
    p.add_argument("--prices", required=True)
    p.add_argument("--hierarchy", required=True)
    p.add_argument("--model", choices=MODELS, default="heterotic")
    p.add_argument("--q", type=float, default=0.5)
    p.add_argument("--levels-from", type=int, default=0)
    p.add_argument("--bounds", default="none")
    p.add_argument("--investment", type=float, default=20_000_000.0)
    p.add_argument("--rebalance-days", type=_positive_int, default=21)
    p.add_argument("--top", type=_positive_int, default=2000)
    p.add_argument("--addv-days", type=_positive_int, default=21)
    p.add_argument("--lookback", type=_positive_int, default=21)
    p.add_argument("--out", required=True)
    model_flags(p)
    common(p)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("synth", help="write a seeded synthetic price tape and hierarchy")
    p.add_argument("--n", type=_positive_int, default=100)
    p.add_argument("--days", type=_positive_int, default=240)
    p.add_argument("--clusters", default="20,6,3")
    p.add_argument("--singletons", type=int, default=0)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    paths = {k: v for k, v in vars(args).items()
             if k in ("returns", "prices", "hierarchy", "styles", "model") and v}
    run = RunConfig(args.command, paths, out=getattr(args, "out", None) or ".", digits=args.digits)
    log.debug("%s", run)
    try:
        return args.func(args)
    except HetRiskError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
