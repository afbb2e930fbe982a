"""Heterotic CAPM backtests over q = 0, 0.1, ..., 1 for one or more style columns."""

import argparse
import csv
import sys

import numpy as np

from hetrisk.backtest import BacktestConfig, run_backtest
from hetrisk.panel import load_hierarchy, load_prices
from hetrisk.synth import SynthConfig, generate


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--prices")
    ap.add_argument("--hierarchy")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--styles", default="prc,hlv,vol", help="one sweep per style column")
    args = ap.parse_args(argv)
    if args.prices:
        prices, hier = load_prices(args.prices), load_hierarchy(args.hierarchy)
    else:
        prices, hier = generate(SynthConfig(seed=args.seed))
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["style", "q", "roc_pct", "sr", "cps"])
    for style in args.styles.split(","):
        for q in np.round(np.linspace(0, 1, 11), 1):
            cfg = BacktestConfig(model="capm", style_cols=(style,), q=float(q))
            r = run_backtest(prices, hier, cfg)
            out.writerow([style, q, f"{100 * r.roc:.2f}", f"{r.sr:.2f}", f"{r.cps:.2f}"])


if __name__ == "__main__":
    main()
