"""kappa: how well a candidate loadings vector lines up with the leading principal component."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SchedulingError
from .panel import IndustryHierarchy, PricePanel, returns_from_prices
from .stats import EigenSystem, correlation, eigen_decreasing
from .styles import STYLE_NAMES, compute_styles


@dataclass(frozen=True)
class ClusterKappa:
    cluster: str
    n: int
    kappa: float | None
    used_approximation: bool = False


@dataclass(frozen=True)
class KappaReport:
    global_kappa: float
    per_cluster: list
    beta_name: str = "beta"
    window: tuple = ()


def _unit(beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    norm = np.sqrt(beta @ beta)
    if norm == 0:
        raise DomainError("beta is identically zero")
    return beta / norm


def kappa(beta, psi) -> float:
    b = _unit(beta)
    psi = np.asarray(psi, dtype=float)
    lam1 = eigen_decreasing(psi).eigenvalues[0]
    return float(b @ psi @ b / lam1)


def kappa_spectral(beta, eig: EigenSystem) -> float:
    b = _unit(beta)
    proj = eig.eigenvectors.T @ b
    return float(np.sum(eig.eigenvalues / eig.eigenvalues[0] * proj ** 2))


def kappa_approx(beta, v1) -> float:
    return float((_unit(beta) @ np.asarray(v1, dtype=float)) ** 2)


def kappa_per_cluster(beta, psi, membership, min_cluster: int = 4, labels=None,
                      approx_above: int | None = None, beta_name: str = "beta") -> KappaReport:
    """kappa(A) on each cluster's correlation block; clusters below min_cluster are skipped.

    With ``approx_above`` set, clusters larger than it use the squared
    overlap with the block's first principal component instead.
    """
    beta = np.asarray(beta, dtype=float)
    psi = np.asarray(psi, dtype=float)
    membership = np.asarray(membership)
    labels = labels or tuple(str(a) for a in range(membership.shape[1]))
    rows = []
    for a in range(membership.shape[1]):
        idx = np.flatnonzero(membership[:, a] > 0)
        if idx.size < min_cluster:
            continue
        b = beta[idx]
        if not b.any():
            rows.append(ClusterKappa(labels[a], idx.size, None))
            continue
        block = psi[np.ix_(idx, idx)]
        approx = approx_above is not None and idx.size > approx_above
        if approx:
            k = kappa_approx(b, eigen_decreasing(block).eigenvectors[:, 0])
        else:
            k = kappa(b, block)
        rows.append(ClusterKappa(labels[a], idx.size, k, approx))
    g = kappa(beta, psi) if beta.any() else float("nan")
    return KappaReport(g, rows, beta_name)


@dataclass(frozen=True)
class KappaSchedule:
    """Consecutive periods of ``period`` days; styles come from the ``period`` days before each."""

    period: int = 21
    top: int = 2000
    addv_days: int = 21
    min_cluster: int = 4
    level: int = 0
    do_norm: bool = False


def figure1_data(prices: PricePanel, hierarchy: IndustryHierarchy,
                 schedule: KappaSchedule | None = None) -> list:
    """Rows (period, style, cluster, n, kappa), fully out of sample.

    For every period the universe comes from trailing ADDV, correlation
    blocks from the period's close-to-close returns, and style exposures from
    the preceding window (mom as the window mean of open-to-close returns).
    """
    from .backtest import addv, select_universe

    sched = schedule or KappaSchedule()
    p = sched.period
    need = max(p, sched.addv_days)
    days = prices.days
    # chronological index t maps to panel column days-1-t
    first = need
    if days < first + p + 1:
        raise SchedulingError(f"need at least {first + p + 1} days of prices, found {days}")
    hier = hierarchy.reorder(prices.tickers)
    level = np.asarray(hier.levels[sched.level])
    labels = hier.labels[sched.level] if hier.labels else None
    rows = []
    start = first
    period = 0
    while start + p <= days:
        col0 = days - 1 - start
        a = addv(prices, sched.addv_days)[:, col0]
        univ = select_universe(a, sched.top)
        pre = prices.take(univ, np.arange(col0 + 1, col0 + 1 + p))
        styles = compute_styles(pre, do_norm=sched.do_norm, mom_average=True)
        # returns inside the period; the first return needs the close before it
        window = prices.take(univ, np.arange(col0 - p + 1, col0 + 2))
        ret = returns_from_prices(window, "close-to-close").values
        memb = level[univ]
        keep = memb.sum(axis=0) >= sched.min_cluster
        for j, name in enumerate(STYLE_NAMES):
            beta = styles.matrix[:, j]
            for c in np.flatnonzero(keep):
                idx = np.flatnonzero(memb[:, c] > 0)
                b = beta[idx]
                if not b.any():
                    continue
                psi = correlation(ret[idx])
                lab = labels[c] if labels is not None else str(c)
                rows.append((period, name, lab, idx.size, kappa(b, psi)))
        start += p
        period += 1
    return rows
