"""Intraday mean-reversion backtest: ADDV universe, optimized holdings, ROC/SR/CPS.

Everything here works in chronological day indices t = 0..d-1 (oldest
first); the most-recent-first price matrices are flipped once on entry.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import TRADING_DAYS
from .errors import (
    ConfigError,
    ConvergenceError,
    InfeasibleError,
    NoSignalError,
    NumericalError,
    SchedulingError,
)
from .facmodel import FactorModel
from .nested import NestedBuildOptions, build_nested
from .panel import IndustryHierarchy, PricePanel, ReturnsPanel
from .styles import compute_styles, q_blend

log = logging.getLogger(__name__)

MODELS = ("heterotic", "binary", "capm", "nested-custom")


@dataclass(frozen=True)
class Holdings:
    values: np.ndarray
    date: str = ""
    investment_level: float = 0.0
    risk_aversion: float | None = None
    n_bound: int = 0

    @property
    def gross(self) -> float:
        return float(np.abs(self.values).sum())

    @property
    def net(self) -> float:
        return float(self.values.sum())


@dataclass(frozen=True)
class BacktestReport:
    """Daily P&L and shares plus the summary metrics.

    ``roc`` is a fraction (multiply by 100 for percent); ``sr_degenerate``
    flags a zero-variance P&L series, for which ``sr`` is reported as 0.
    ``max_bound_excess`` is the largest |H_i| - B_i seen on any day (NaN
    without bounds); a value <= 0 means the bounds always held.
    """

    daily_pnl: np.ndarray
    daily_shares: np.ndarray
    roc: float
    sr: float
    cps: float
    n_days: int
    dates: tuple = ()
    investment: float = 0.0
    sr_degenerate: bool = False
    max_net: float = 0.0
    max_gross_err: float = 0.0
    label: str = ""
    max_bound_excess: float = float("nan")


@dataclass(frozen=True)
class BacktestConfig:
    """Protocol settings.

    ``levels_from`` drops the finest hierarchy levels (1 = start from
    industries, 2 = sectors only).  ``bounds`` is "none" or "addv:<frac>".
    ``lookback`` is the number of daily returns in each model build.
    """

    model: str = "heterotic"
    style_cols: tuple = ("prc",)
    k_style: int = 0
    q: float = 0.5
    p: int = 0
    mkt_fac: bool = False
    append_style: bool = False
    rm_sing_tkr: bool = False
    k_pc: int = 1
    levels_from: int = 0
    bounds: str = "none"
    investment: float = 20_000_000.0
    rebalance_days: int = 21
    top: int = 2000
    addv_days: int = 21
    lookback: int = 21
    style_days: int = 21
    do_norm: bool = False
    start: int | None = None
    threads: int = 1

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose from {MODELS}")
        if self.investment <= 0:
            raise ConfigError("investment must be positive")
        for name in ("rebalance_days", "top", "addv_days", "lookback", "style_days", "threads"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.lookback < 2:
            raise ConfigError("lookback must be >= 2")
        self.bound_fraction  # validates
        object.__setattr__(self, "style_cols", tuple(self.style_cols))

    @property
    def bound_fraction(self) -> float | None:
        if self.bounds == "none":
            return None
        kind, _, frac = self.bounds.partition(":")
        try:
            f = float(frac)
        except ValueError:
            f = float("nan")
        if kind != "addv" or not f > 0:
            raise ConfigError(f"bounds must be 'none' or 'addv:<positive fraction>', got {self.bounds!r}")
        return f

    @property
    def uses_styles(self) -> bool:
        return self.model == "capm" or (self.model == "nested-custom" and
                                        (self.append_style or self.k_style > 0))

    @property
    def daily_rebuild(self) -> bool:
        return self.uses_styles and "mom" in self.style_cols

    def build_options(self, style: np.ndarray | None) -> NestedBuildOptions:
        if self.model == "heterotic":
            return NestedBuildOptions(mkt_fac=self.mkt_fac, rm_sing_tkr=self.rm_sing_tkr,
                                      p=self.p, k_pc=self.k_pc)
        if self.model == "binary":
            return NestedBuildOptions(mkt_fac=self.mkt_fac, rm_sing_tkr=self.rm_sing_tkr,
                                      p=self.p, weights="binary")
        if self.model == "capm":
            style = style.copy()
            style[:, 0] = q_blend(style[:, 0], self.q)
            return NestedBuildOptions(mkt_fac=self.mkt_fac, rm_sing_tkr=self.rm_sing_tkr,
                                      k_style=max(self.k_style, 1), style=style)
        return NestedBuildOptions(mkt_fac=self.mkt_fac, rm_sing_tkr=self.rm_sing_tkr, p=self.p,
                                  append_style=self.append_style,
                                  k_style=self.k_style if not (self.append_style or self.p) else 0,
                                  style=style, k_pc=self.k_pc)


# ------------------------------------------------------------ universe

def addv(prices: PricePanel, d: int = 21) -> np.ndarray:
    """N x days matrix; column s averages V*C over the d days before s (NaN without history)."""
    if d < 1:
        raise ConfigError("d must be >= 1")
    dv = prices.volume * prices.close
    n, days = dv.shape
    out = np.full((n, days), np.nan)
    if days <= d:
        raise SchedulingError(f"ADDV over {d} days needs more than {d} days of data, found {days}")
    # accumulate from the oldest day so later prices cannot touch earlier values, even by rounding
    csum = np.concatenate([np.zeros((n, 1)), np.cumsum(dv[:, ::-1], axis=1)], axis=1)
    s = np.arange(days - d)
    hi = days - 1 - s  # entries of columns s+1..s+d sit at chronological positions < hi
    out[:, s] = (csum[:, hi] - csum[:, hi - d]) / d
    return out


def select_universe(addv_values, top: int = 2000) -> np.ndarray:
    """Indices of the ``top`` largest ADDVs, earlier ticker first on ties, in ticker order."""
    a = np.asarray(addv_values, dtype=float)
    if np.isnan(a).any():
        raise SchedulingError("ADDV undefined (not enough history)")
    order = np.lexsort((np.arange(len(a)), -a))
    return np.sort(order[:top])


# ------------------------------------------------------------ optimizers

def optimize(expected, inverse, investment: float, date: str = "") -> Holdings:
    """Sharpe-optimal dollar-neutral holdings for the mean-reversion alpha -E."""
    e = np.asarray(expected, dtype=float)
    inv = np.asarray(inverse, dtype=float)
    x = inv @ e
    u = inv @ np.ones(len(e))
    den = u.sum()
    if not den > 0:
        raise NumericalError(f"1' inv 1 = {den} is not positive")
    h = x - u * (x.sum() / den)
    scale = np.abs(h).sum()
    if scale <= 1e-13 * max(np.abs(x).sum(), 1e-300):
        raise NoSignalError("expected returns carry no signal after removing the neutral direction")
    hold = -h * (investment / scale)
    return Holdings(hold, date, investment, None, 0)


def _kkt(e, cov, lam, free, fixed_vals):
    """Minimize e'H + lam/2 H'cov H with 1'H = 0 over the free set; returns (H, nu)."""
    h = fixed_vals.copy()
    f = np.flatnonzero(free)
    c = np.flatnonzero(~free)
    nf = f.size
    if nf == 0:
        return h, 0.0
    a = np.zeros((nf + 1, nf + 1))
    a[:nf, :nf] = lam * cov[np.ix_(f, f)]
    a[:nf, nf] = 1.0
    a[nf, :nf] = 1.0
    rhs = np.empty(nf + 1)
    rhs[:nf] = -e[f] - lam * cov[np.ix_(f, c)] @ h[c]
    rhs[nf] = -h[c].sum()
    sol = np.linalg.solve(a, rhs)
    h[f] = sol[:nf]
    return h, sol[nf]


def solve_box_qp(e, cov, lam, bound, start=None, max_iter: int = 50):
    """Clip-and-release active set for min e'H + lam/2 H'cov H, 1'H = 0, |H| <= bound.

    Returns (H, sign) where sign[i] in {-1, 0, 1} marks variables pinned at a bound.
    """
    n = len(e)
    sign = np.zeros(n, dtype=int) if start is None else start.copy()
    tol = 1e-12
    for _ in range(max_iter):
        free = sign == 0
        h, nu = _kkt(e, cov, lam, free, sign * bound)
        over = free & (np.abs(h) > bound * (1 + tol))
        grad = e + lam * cov @ h + nu
        # pinned at +B needs grad <= 0, at -B needs grad >= 0
        wrong = ((sign > 0) & (grad > tol * (np.abs(e).max() + 1e-300))) | \
                ((sign < 0) & (grad < -tol * (np.abs(e).max() + 1e-300)))
        if over.any():
            sign[over] = np.sign(h[over]).astype(int)
            continue
        if wrong.any():
            sign[wrong] = 0
            continue
        return h, sign
    resid = float(np.abs(h).max() - bound.max()) if n else 0.0
    raise ConvergenceError(f"active set did not settle in {max_iter} iterations", residual=resid)


def _neutralize(h, free, u, investment, bound, rounds: int = 3):
    f = free & (u != 0)
    if not f.any():
        return h
    h = h.copy()
    for _ in range(rounds):
        h[f] -= h.sum() * u[f] / u[f].sum()
        fixed_gross = np.abs(h[~free]).sum()
        fg = np.abs(h[free]).sum()
        if fg > 0:
            h[free] *= (investment - fixed_gross) / fg
    return np.clip(h, -bound, bound)


def optimize_bounded(expected, model: FactorModel, investment: float, bound,
                     date: str = "") -> Holdings:
    """Mean-variance holdings with |H_i| <= B_i, dollar neutral, gross equal to ``investment``.

    The risk aversion is bisected until the box-constrained optimum has the
    requested gross exposure.  When no bound binds the result is ``optimize``.
    """
    e = np.asarray(expected, dtype=float)
    b = np.broadcast_to(np.asarray(bound, dtype=float), e.shape).copy()
    if (b <= 0).any() or np.isnan(b).any():
        raise InfeasibleError("bounds must be positive")
    if b.sum() < investment:
        raise InfeasibleError(f"sum of bounds {b.sum():.6g} is below the investment {investment:.6g}")
    inv = model.inv_cov if model.inv_cov is not None else np.linalg.inv(model.cov_mat)
    free_sol = optimize(e, inv, investment, date)
    if (np.abs(free_sol.values) <= b).all():
        return free_sol
    cov = np.asarray(model.cov_mat, dtype=float)
    u = inv @ np.ones(len(e))
    x = inv @ e
    # without bounds the gross exposure at risk aversion lam is |h|_1 / lam
    lam_star = np.abs(x - u * (x.sum() / u.sum())).sum() / investment

    def gross(lam, start):
        h, s = solve_box_qp(e, cov, lam, b, start)
        return np.abs(h).sum(), h, s

    hi = lam_star
    g_hi, _, s_hi = gross(hi, None)
    while g_hi >= investment:
        hi *= 2
        g_hi, _, s_hi = gross(hi, s_hi)
    lo, s_lo = hi, s_hi
    for _ in range(200):
        lo /= 2
        g_lo, h, s_lo = gross(lo, s_lo)
        if g_lo >= investment:
            break
    else:
        raise InfeasibleError(f"gross exposure saturates at {g_lo:.6g} below {investment:.6g}")
    s = s_lo
    for _ in range(200):
        if g_lo - investment <= 1e-12 * investment or hi / lo - 1 < 1e-14:
            break
        mid = np.sqrt(lo * hi)
        g, h_mid, s_mid = gross(mid, s)
        if g >= investment:
            lo, g_lo, h, s = mid, g, h_mid, s_mid
        else:
            hi = mid
    h = _neutralize(h, s == 0, u, investment, b)
    return Holdings(h, date, investment, float(lo), int((s != 0).sum()))


# ------------------------------------------------------------ metrics

def summarize(pnl, shares, investment: float, dates=(), label: str = "", max_net: float = 0.0,
              max_gross_err: float = 0.0, max_bound_excess: float = float("nan")) -> BacktestReport:
    pnl = np.asarray(pnl, dtype=float)
    shares = np.asarray(shares, dtype=float)
    n = len(pnl)
    mean = pnl.mean() if n else 0.0
    sd = pnl.std(ddof=1) if n > 1 else 0.0
    degenerate = not (sd > 1e-12 * max(abs(mean), investment * 1e-12))
    sr = 0.0 if degenerate else float(mean / sd * np.sqrt(TRADING_DAYS))
    total_shares = shares.sum()
    cps = float(100 * pnl.sum() / total_shares) if total_shares > 0 else 0.0
    return BacktestReport(pnl, shares, float(mean / investment * TRADING_DAYS), sr, cps, n,
                          tuple(dates), investment, degenerate, max_net, max_gross_err, label,
                          max_bound_excess)


# ------------------------------------------------------------ driver

@dataclass
class _Block:
    start: int
    stop: int
    universe: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))


def _model_for(chrono, hier_levels, labels, tickers, dates, univ, t, cfg: BacktestConfig):
    """Risk model from the ``cfg.lookback`` close-to-close returns ending the day before t."""
    ac = chrono["close_adj"][univ]
    ret = np.log(ac[:, t - cfg.lookback:t] / ac[:, t - cfg.lookback - 1:t - 1])
    var = ret.var(axis=1, ddof=1)
    ok = var > 0
    if not ok.all():
        warnings.warn(f"dropping {int((~ok).sum())} zero-variance tickers at {dates[t]}",
                      RuntimeWarning, stacklevel=2)
    univ = univ[ok]
    ret = ret[ok]
    # panels are most-recent-first
    panel = ReturnsPanel(tuple(tickers[i] for i in univ),
                         tuple(dates[t - 1 - k] for k in range(cfg.lookback)), ret[:, ::-1])
    hier = IndustryHierarchy(panel.tickers, tuple(lv[univ] for lv in hier_levels),
                             labels).subset(np.arange(len(univ)))
    style = None
    if cfg.uses_styles:
        sl = slice(t - cfg.style_days, t)
        window = PricePanel(panel.tickers, tuple(dates[sl][::-1]),
                            *(chrono[f][univ][:, sl][:, ::-1] for f in PricePanel.FIELDS))
        st = compute_styles(window, do_norm=cfg.do_norm).select(cfg.style_cols)
        style = np.array(st.matrix)
    model = build_nested(panel, hier, cfg.build_options(style))
    keep = np.array([tk in set(model.tickers) for tk in panel.tickers])
    return model.final, univ[keep]


def _run_block(chrono, hier_levels, labels, tickers, dates, blk: _Block, cfg: BacktestConfig,
               adv):
    bound_frac = cfg.bound_fraction
    rows = []
    model, univ = None, None
    for t in range(blk.start, blk.stop):
        if model is None or cfg.daily_rebuild:
            model, univ = _model_for(chrono, hier_levels, labels, tickers, dates, blk.universe,
                                     t, cfg)
        o, c = chrono["open"][univ, t], chrono["close"][univ, t]
        e = np.log(chrono["open_adj"][univ, t] / chrono["close_adj"][univ, t - 1])
        if bound_frac is None:
            h = optimize(e, model.inv_cov, cfg.investment, dates[t])
            excess = np.nan
        else:
            bound = bound_frac * adv[univ, t]
            h = optimize_bounded(e, model, cfg.investment, bound, dates[t])
            excess = float((np.abs(h.values) - bound).max())
        pnl = float(h.values @ (c / o - 1))
        shares = float((2 * np.abs(h.values) / o).sum())
        rows.append((t, pnl, shares, abs(h.net), abs(h.gross - cfg.investment), excess))
    return rows


def plan_blocks(days: int, cfg: BacktestConfig) -> list:
    first = max(cfg.lookback + 1, cfg.addv_days, cfg.style_days if cfg.uses_styles else 0)
    start = first if cfg.start is None else cfg.start
    if start < first:
        raise SchedulingError(f"start day {start} leaves too little history (need {first})")
    if start >= days:
        raise SchedulingError(f"need more than {start} days of prices, found {days}")
    return [_Block(s, min(s + cfg.rebalance_days, days))
            for s in range(start, days, cfg.rebalance_days)]


def run_backtest(prices: PricePanel, hierarchy: IndustryHierarchy,
                 config: BacktestConfig | None = None, label: str = "") -> BacktestReport:
    cfg = config or BacktestConfig()
    hier = hierarchy.reorder(prices.tickers).slice_levels(cfg.levels_from)
    chrono = {f: prices.chronological(f) for f in PricePanel.FIELDS}
    dates = tuple(prices.dates[::-1])
    blocks = plan_blocks(prices.days, cfg)
    adv_rev = addv(prices, cfg.addv_days)[:, ::-1]
    for blk in blocks:
        blk.universe = select_universe(adv_rev[:, blk.start], cfg.top)
    args = (chrono, hier.levels, hier.labels, prices.tickers, dates)
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            parts = list(pool.map(lambda b: _run_block(*args, b, cfg, adv_rev), blocks))
    else:
        parts = [_run_block(*args, b, cfg, adv_rev) for b in blocks]
    rows = [r for part in parts for r in part]
    t, pnl, shares, net, gerr, excess = (np.array(col) for col in zip(*rows))
    worst = float(excess.max()) if cfg.bound_fraction is not None else float("nan")
    return summarize(pnl, shares, cfg.investment, tuple(dates[i] for i in t.astype(int)), label,
                     float(net.max()), float(gerr.max()), worst)
