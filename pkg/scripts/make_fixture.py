"""Write the small bundled fixtures under tests/data.

fixture12: 12 tickers, 4 sub-industries of 3, 2 industries, 1 sector, 40 days
of prices and the latest 6 close-to-close returns.
fixture13: the same plan plus one single-ticker sub-industry.
"""

import argparse
import os

import numpy as np

from hetrisk.panel import returns_from_prices, write_hierarchy, write_prices, write_returns
from hetrisk.synth import SynthConfig, generate


def write_fixture(out, singletons, seed):
    os.makedirs(out, exist_ok=True)
    prices, hier = generate(SynthConfig(n=12 + singletons, days=40, clusters=(4, 2, 1),
                                        singletons=singletons, seed=seed, reversion=0.5,
                                        intraday_vol=0.008))
    write_prices(prices, os.path.join(out, "prices.csv"))
    write_hierarchy(hier, os.path.join(out, "hierarchy.csv"))
    ret = returns_from_prices(prices.take(None, np.arange(7)))
    write_returns(ret, os.path.join(out, "returns.csv"))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    here = os.path.dirname(os.path.abspath(__file__))
    ap.add_argument("--out", default=os.path.join(here, "..", "tests", "data"))
    args = ap.parse_args()
    write_fixture(os.path.join(args.out, "fixture12"), 0, 12)
    write_fixture(os.path.join(args.out, "fixture13"), 1, 13)


if __name__ == "__main__":
    main()
