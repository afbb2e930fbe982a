"""Style factors from daily price/volume windows, rank-normal conformance and the q-blend."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .config import TOL
from .errors import ConfigError, DomainError
from .panel import PricePanel, _frozen

STYLE_NAMES = ("prc", "mom", "hlv", "vol")


@dataclass(frozen=True)
class StyleFactorSet:
    matrix: np.ndarray
    names: tuple
    window: int
    as_of: str
    tickers: tuple = ()

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.shape[1] != len(self.names):
            raise DomainError(f"style matrix shape {m.shape} does not match names {self.names}")
        if not np.isfinite(m).all():
            raise DomainError("style exposures must be finite")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "tickers", tuple(self.tickers))

    def select(self, names) -> StyleFactorSet:
        """Columns in the requested order; 'int' yields the intercept."""
        cols = []
        for name in names:
            if name == "int":
                cols.append(np.ones(self.matrix.shape[0]))
            elif name in self.names:
                cols.append(self.matrix[:, self.names.index(name)])
            else:
                raise ConfigError(f"unknown style factor {name!r}")
        return StyleFactorSet(np.column_stack(cols), tuple(names), self.window, self.as_of,
                              self.tickers)


def ppoints(n: int) -> np.ndarray:
    a = 3.0 / 8.0 if n <= 10 else 0.5
    k = np.arange(1, n + 1)
    return (k - a) / (n + 1 - 2 * a)


MAD_CONSTANT = 1.4826


def mad(x) -> float:
    """Median absolute deviation with the normal-consistency constant."""
    x = np.asarray(x, dtype=float)
    return float(MAD_CONSTANT * np.median(np.abs(x - np.median(x))))


def normalize_to_normal(x, center: float | None = None, sdev: float | None = None) -> np.ndarray:
    """Map x to normal quantiles by rank, scaled to (center, sdev); ties keep index order."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n == 0:
        raise DomainError("cannot normalize an empty vector")
    if center is None:
        center = float(x.mean())
    if sdev is None:
        sdev = float(x.std(ddof=1)) if n > 1 else float("nan")
    if n == 1:
        return np.full(1, float(center))
    if not sdev > 0:
        raise DomainError(f"sdev must be positive, got {sdev}")
    rank = np.empty(n, dtype=int)
    rank[np.argsort(x, kind="stable")] = np.arange(n)
    return norm.ppf(ppoints(n)[rank]) * sdev + center


def compute_styles(prices: PricePanel, do_norm: bool = False, prc_average: bool = False,
                   mom_average: bool = False) -> StyleFactorSet:
    """prc, mom, hlv, vol exposures from a most-recent-first price window.

    ``prc_average`` replaces the latest log adjusted close by its window mean;
    ``mom_average`` does the same for the open-to-close log return.
    """
    floor = TOL.log_floor
    close_adj = prices.close_adj
    if prc_average:
        prc = np.log(close_adj).mean(axis=1)
    else:
        prc = np.log(close_adj[:, 0])
    oc = np.log(prices.close / prices.open)
    mom = oc.mean(axis=1) if mom_average else oc[:, 0]
    spread = np.mean(((prices.high - prices.low) / prices.close) ** 2, axis=1)
    hlv = 0.5 * np.log(np.maximum(spread, floor))
    vol = np.log(np.maximum(prices.volume.mean(axis=1), floor))
    if do_norm:
        hlv = normalize_to_normal(hlv)
        vol = normalize_to_normal(vol)
    as_of = prices.dates[0] if len(prices.dates) else ""
    return StyleFactorSet(np.column_stack([prc, mom, hlv, vol]), STYLE_NAMES, prices.days,
                          as_of, prices.tickers)


def q_blend(omega_star, q: float) -> np.ndarray:
    """q * w + (1 - 2q) * mean(w); q=0 is the intercept direction, q=1 the demeaned vector."""
    w = np.asarray(omega_star, dtype=float)
    return q * w + (1 - 2 * q) * w.mean()
