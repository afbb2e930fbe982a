"""Seeded synthetic price tapes with a nested cluster structure.

Overnight (close-to-open) log returns load on a market shock plus one shock
per cluster at every level plus idiosyncratic noise.  The following intraday
move reverts a fraction of the overnight move and adds its own
cluster-correlated noise, so an overnight mean-reversion alpha has something
to find.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .panel import IndustryHierarchy, PricePanel, hierarchy_from_labels

LEVEL_PREFIX = ("sub", "ind", "sec")


@dataclass(frozen=True)
class SynthConfig:
    n: int = 100
    days: int = 240
    clusters: tuple = (20, 6, 3)
    singletons: int = 0
    seed: int = 42
    reversion: float = 0.1
    market_vol: float = 0.006
    cluster_vol: float = 0.005
    idio_vol: float = 0.010
    intraday_vol: float = 0.015
    start: str = "2020-01-02"

    def __post_init__(self):
        object.__setattr__(self, "clusters", tuple(int(c) for c in self.clusters))
        if self.n < 2 or self.days < 2:
            raise ConfigError("need n >= 2 and days >= 2")
        if not self.clusters or min(self.clusters) < 1:
            raise ConfigError("cluster plan needs positive counts")
        if any(b > a for a, b in zip(self.clusters, self.clusters[1:])):
            raise ConfigError("cluster counts must not increase toward coarser levels")
        if self.singletons < 0 or self.n - self.singletons < self.clusters[0]:
            raise ConfigError("not enough tickers for the requested clusters and singletons")


def cluster_labels(cfg: SynthConfig) -> list:
    """Per-level integer labels, finest level first; singletons go at the end."""
    body = cfg.n - cfg.singletons
    lab0 = np.empty(cfg.n, dtype=int)
    for a, idx in enumerate(np.array_split(np.arange(body), cfg.clusters[0])):
        lab0[idx] = a
    lab0[body:] = cfg.clusters[0] + np.arange(cfg.singletons)
    labels = [lab0]
    k_prev = cfg.clusters[0]
    for k in cfg.clusters[1:]:
        parent = np.empty(k_prev + (cfg.singletons if len(labels) == 1 else 0), dtype=int)
        for b, idx in enumerate(np.array_split(np.arange(k_prev), k)):
            parent[idx] = b
        # singleton clusters join the last coarser cluster
        parent[k_prev:] = k - 1
        labels.append(parent[labels[-1]])
        k_prev = k
    return labels


def make_hierarchy(tickers, cfg: SynthConfig) -> IndustryHierarchy:
    cols = []
    for lvl, lab in enumerate(cluster_labels(cfg)):
        prefix = LEVEL_PREFIX[lvl] if lvl < len(LEVEL_PREFIX) else f"l{lvl}_"
        cols.append([f"{prefix}{c}" for c in lab])
    return hierarchy_from_labels(tickers, cols)


def _shocks(rng, labels, n, days, cluster_vol, market_vol, idio_vol):
    x = market_vol * rng.uniform(0.5, 1.5, n)[:, None] * rng.standard_normal(days)[None, :]
    for lab in labels:
        k = lab.max() + 1
        f = cluster_vol * rng.standard_normal((k, days))
        x += rng.uniform(0.5, 1.5, n)[:, None] * f[lab]
    return x + idio_vol * rng.uniform(0.5, 1.5, n)[:, None] * rng.standard_normal((n, days))


def generate(cfg: SynthConfig | None = None) -> tuple[PricePanel, IndustryHierarchy]:
    cfg = cfg or SynthConfig()
    rng = np.random.default_rng(cfg.seed)
    n, days = cfg.n, cfg.days
    width = len(str(n - 1))
    tickers = tuple(f"T{i:0{width}d}" for i in range(n))
    labels = cluster_labels(cfg)
    overnight = _shocks(rng, labels, n, days, cfg.cluster_vol, cfg.market_vol, cfg.idio_vol)
    intraday = -cfg.reversion * overnight + _shocks(
        rng, labels[:1], n, days, cfg.cluster_vol, cfg.market_vol, cfg.intraday_vol)
    p0 = np.exp(rng.uniform(np.log(5.0), np.log(200.0), n))
    log_close = np.log(p0)[:, None] + np.cumsum(overnight + intraday, axis=1)
    log_prev = np.concatenate([np.log(p0)[:, None], log_close[:, :-1]], axis=1)
    close = np.exp(log_close)
    open_ = np.exp(log_prev + overnight)
    wick = 0.004 * np.abs(rng.standard_normal((2, n, days)))
    high = np.maximum(open_, close) * np.exp(wick[0])
    low = np.minimum(open_, close) * np.exp(-wick[1])
    base = rng.uniform(np.log(2e5), np.log(5e6), n)
    volume = np.round(np.exp(base[:, None] + 0.3 * rng.standard_normal((n, days))))
    dates = np.busday_offset(np.datetime64(cfg.start), np.arange(days), roll="forward")
    date_labels = tuple(str(d) for d in dates[::-1])
    rev = np.s_[:, ::-1]
    prices = PricePanel(tickers, date_labels, open_[rev], close[rev], high[rev], low[rev],
                        open_[rev], close[rev], volume[rev])
    return prices, make_hierarchy(tickers, cfg)
