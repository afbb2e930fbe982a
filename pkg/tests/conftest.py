import os
import sys

import numpy as np
import pytest
from hypothesis import settings

from hetrisk.panel import ReturnsPanel, hierarchy_from_labels, load_hierarchy, load_prices, load_returns
from hetrisk.synth import SynthConfig, generate

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

DATA = os.path.join(os.path.dirname(__file__), "data")


def random_panel(seed, n=10, obs=30, factors=2):
    """Returns with a few common factors so correlations are not trivial."""
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((factors, obs))
    x = rng.standard_normal((n, factors)) @ f + rng.standard_normal((n, obs))
    x *= rng.uniform(0.005, 0.03, n)[:, None]
    return ReturnsPanel(tuple(f"t{i}" for i in range(n)), tuple(f"d{s}" for s in range(obs)), x)


def contiguous_hierarchy(tickers, plan, singletons=0):
    """Nested labels from array_split, finest level first."""
    n = len(tickers)
    body = n - singletons
    lab = np.empty(n, dtype=int)
    for a, idx in enumerate(np.array_split(np.arange(body), plan[0])):
        lab[idx] = a
    lab[body:] = plan[0] + np.arange(singletons)
    cols = [[f"L0_{c}" for c in lab]]
    k_prev = plan[0] + singletons
    cur = lab
    for lvl, k in enumerate(plan[1:], start=1):
        parent = np.empty(k_prev, dtype=int)
        for b, idx in enumerate(np.array_split(np.arange(k_prev), k)):
            parent[idx] = b
        cur = parent[cur]
        cols.append([f"L{lvl}_{c}" for c in cur])
        k_prev = k
    return hierarchy_from_labels(tickers, cols)


@pytest.fixture
def fixture12():
    d = os.path.join(DATA, "fixture12")
    return (load_returns(os.path.join(d, "returns.csv")), load_hierarchy(os.path.join(d, "hierarchy.csv")),
            load_prices(os.path.join(d, "prices.csv")))


@pytest.fixture
def fixture13():
    d = os.path.join(DATA, "fixture13")
    return (load_returns(os.path.join(d, "returns.csv")), load_hierarchy(os.path.join(d, "hierarchy.csv")),
            load_prices(os.path.join(d, "prices.csv")))


@pytest.fixture(scope="session")
def tape():
    return generate(SynthConfig(n=60, days=120, clusters=(12, 4, 2), seed=5))
