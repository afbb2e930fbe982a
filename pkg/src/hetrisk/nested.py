"""Nested (Russian-doll) multi-level factor model.

Level 0 regresses normalized ticker returns on cluster loadings; every
coarser level models the factor covariance of the level below with its own
factor model, until the top level.  The factor covariances are then
recombined from the top down, and the ticker-level inverse is computed
through the factor structure.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import TOL
from .errors import ConfigError, DegenerateResidualError, DomainError, SingularFactorCovarianceError
from .facmodel import FactorModel, cov_gen, regress, woodbury_inverse
from .hierarchy import promote_loadings
from .panel import IndustryHierarchy, ReturnsPanel
from .stats import correlation, first_pc, principal_components

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NestedBuildOptions:
    """Build switches.

    ``weights`` is "heterotic" (first principal component per cluster) or
    "binary" (uniform weights, giving the classic industry model).
    ``k_pc`` picks a later principal component as the cluster weight.
    ``early_stop`` skips coarser levels once a level's sample factor
    covariance is already well conditioned.  ``restore_diag`` rescales the
    final rows so the model variances equal the sample variances even when
    level-0 rows load on several factors (appended components or styles).
    """

    mkt_fac: bool = False
    rm_sing_tkr: bool = False
    p: int = 0
    append_style: bool = False
    k_style: int = 0
    style: np.ndarray | None = None
    k_pc: int = 1
    weights: str = "heterotic"
    early_stop: bool = False
    restore_diag: bool = False
    calc_inv: bool = True

    def __post_init__(self):
        if self.p < 0 or self.k_style < 0 or self.k_pc < 1:
            raise ConfigError("p and k_style must be >= 0 and k_pc >= 1")
        if self.weights not in ("heterotic", "binary"):
            raise ConfigError(f"unknown weights scheme {self.weights!r}")
        if self.k_style > 0 and (self.p > 0 or self.append_style):
            raise ConfigError("k_style cannot be combined with p > 0 or append_style")
        if (self.k_style > 0 or self.append_style) and self.style is None:
            raise ConfigError("style factors requested but no style matrix given")
        if self.style is not None:
            s = np.asarray(self.style, dtype=float)
            if s.ndim == 1:
                s = s[:, None]
            if not np.isfinite(s).all():
                raise DomainError("style matrix must be finite")
            object.__setattr__(self, "style", s)


@dataclass(frozen=True)
class LevelResult:
    """One level of the build.

    ``raw_loadings`` are the weights before the total-variance rescaling;
    ``sample_cov`` is the sample covariance of this level's factor returns;
    ``fac_cov`` the covariance after top-down recombination.
    """

    level: int
    raw_loadings: np.ndarray
    loadings: np.ndarray
    spec_risk: np.ndarray
    sample_cov: np.ndarray
    fac_cov: np.ndarray
    fac_ret: np.ndarray
    gamma: np.ndarray
    resid_var: np.ndarray
    lambdas: np.ndarray | None = None
    n_industry: int = 0


@dataclass(frozen=True)
class NestedModel:
    final: FactorModel
    per_level: list
    dropped_tickers: tuple = ()
    tickers: tuple = ()
    fac_cov_unbarred: np.ndarray | None = None
    spec_risk_unbarred: np.ndarray | None = None
    singleton_tickers: tuple = ()
    returns: ReturnsPanel | None = field(default=None, repr=False)

    @property
    def depth(self) -> int:
        return len(self.per_level)


def null_elem(z, prec: float = TOL.null_prec) -> int:
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        return 0
    return int(np.sum((z == 0) | (z < z.max() * prec)))


def expand_style_loadings(level0: np.ndarray, style: np.ndarray, k_style: int,
                          returns: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-cluster style loadings for the heterotic CAPM.

    Each cluster A gets up to min(N(A) - 1, Y) columns of membership-masked
    style exposures, shrunk while the within-cluster regression of the
    returns on them leaves numerically zero residual volatility.
    Returns (loadings, expanded membership), both N x sum_A k_A.
    """
    if k_style < 1:
        raise ConfigError("k_style must be >= 1")
    level0 = np.asarray(level0, dtype=float)
    style = np.array(style, dtype=float, copy=True)
    if style.ndim == 1:
        style = style[:, None]
    ret = np.asarray(returns, dtype=float)
    n_style = style.shape[1]
    load_cols, memb_cols = [], []
    for a in range(level0.shape[1]):
        take = level0[:, a] > 0
        k = int(take.sum())
        for j in range(n_style):
            if np.all(style[take, j] == 0):
                style[take, j] = 1.0
        chk = k > 1
        if k < k_style:
            k = 1
        if k > 1:
            k = min(k - 1, n_style)
        if chk and k > 1:
            s = style[take, :k]
            if null_elem(np.linalg.eigvalsh(s.T @ s)) > 0:
                k = 1
        while chk:
            s = style[take, :k]
            coef = np.linalg.lstsq(s, ret[take], rcond=None)[0]
            sd = (ret[take] - s @ coef).std(axis=1, ddof=1)
            bad = null_elem(sd)
            chk = bad > 0
            if chk:
                if bad < k:
                    k -= bad
                else:
                    k = 1
                    style[take, 0] = 1.0
                    chk = False
        for j in range(k):
            load_cols.append(level0[:, a] * style[:, j])
            memb_cols.append(level0[:, a])
    return np.column_stack(load_cols), np.column_stack(memb_cols)


def _prepare(panel: ReturnsPanel, hierarchy: IndustryHierarchy, opts: NestedBuildOptions):
    if tuple(hierarchy.tickers) != tuple(panel.tickers):
        raise ConfigError("hierarchy tickers must match the panel tickers in order")
    levels = [np.array(lv, dtype=float) for lv in hierarchy.levels]
    ret = np.asarray(panel.values, dtype=float)
    style = opts.style
    if style is not None and style.shape[0] != panel.n:
        raise ConfigError(f"style has {style.shape[0]} rows for {panel.n} tickers")
    tickers = tuple(panel.tickers)
    if opts.mkt_fac:
        levels.append(np.ones((panel.n, 1)))
    dropped = ()
    if opts.rm_sing_tkr:
        single = levels[0].sum(axis=0) == 1
        levels[0] = levels[0][:, ~single]
        keep = levels[0].sum(axis=1) > 0
        dropped = tuple(t for t, k in zip(tickers, keep) if not k)
        levels = [lv[keep] for lv in levels]
        # coarser clusters left without members would make promotion 0/0
        levels = [lv[:, lv.sum(axis=0) > 0] for lv in levels]
        ret = ret[keep]
        tickers = tuple(t for t, k in zip(tickers, keep) if k)
        if style is not None:
            style = style[keep]
        if len(tickers) < 2:
            raise DomainError("fewer than two tickers left after removing singletons")
    return levels, ret, style, tickers, dropped


def build_nested(panel: ReturnsPanel, hierarchy: IndustryHierarchy,
                 opts: NestedBuildOptions | None = None) -> NestedModel:
    opts = opts or NestedBuildOptions()
    levels, ret, style, tickers, dropped = _prepare(panel, hierarchy, opts)
    n_obs = ret.shape[1]
    n_style = style.shape[1] if (style is not None and opts.append_style) else 0

    flm = [lv.copy() for lv in levels]
    ind = list(levels)
    if opts.k_style > 0:
        flm[0], ind[0] = expand_style_loadings(ind[0], style, opts.k_style, ret)

    fac_ret = [ret]
    results = []
    extra = 0
    for lvl in range(len(ind)):
        if lvl > 0:
            flm[lvl] = promote_loadings(ind[lvl], ind[lvl - 1])
            if opts.early_stop:
                g = fac_cov_of(fac_ret[lvl])
                if np.linalg.cond(g) < TOL.well_conditioned:
                    log.info("level %d factor covariance well conditioned, stopping", lvl - 1)
                    break
        lambdas = None
        if opts.k_style == 0 or lvl > 0:
            k_rows = ret.shape[0] if lvl == 0 else ind[lvl - 1].shape[1]
            lambdas = np.zeros(flm[lvl].shape[1])
            for a in range(flm[lvl].shape[1]):
                take = flm[lvl][:, a] != 0
                if opts.weights == "binary":
                    w, lam = np.full(int(take.sum()), 1 / np.sqrt(take.sum())), np.nan
                else:
                    block = correlation(fac_ret[lvl][:k_rows][take[:k_rows]])
                    w, lam = first_pc(block, opts.k_pc)
                flm[lvl][take, a] = w * flm[lvl][take, a]
                lambdas[a] = lam
        n_industry = flm[lvl].shape[1]
        if opts.p > 0 or opts.append_style:
            if lvl == 0:
                cols = []
                if opts.p > 0:
                    cols.append(principal_components(correlation(ret), opts.p)[0])
                if n_style:
                    cols.append(style)
                flm[0] = np.column_stack([flm[0], *cols])
                extra = opts.p + n_style
            else:
                r, c = flm[lvl].shape
                tmp = np.zeros((r + extra, c + extra))
                tmp[:r, :c] = flm[lvl]
                tmp[r:, c:] = np.eye(extra)
                flm[lvl] = tmp
        raw = flm[lvl].copy()
        if lvl == len(ind) - 1 and raw.shape[1] >= n_obs:
            raise DegenerateResidualError(
                f"top level {lvl} has {raw.shape[1]} factors but only {n_obs} observations; "
                "its factor covariance is singular", level=lvl)
        res = cov_gen(fac_ret[lvl], raw, calc_inv=False, level=lvl)
        flm[lvl] = res.fac_load
        fac_ret.append(res.fac_ret)
        results.append(dict(level=lvl, raw_loadings=raw, loadings=res.fac_load,
                            spec_risk=res.spec_risk, sample_cov=res.fac_cov,
                            fac_ret=res.fac_ret, gamma=res.gamma, resid_var=res.resid_var,
                            lambdas=lambdas, n_industry=n_industry))

    # top-down recombination
    depth = len(results)
    covs = [r["sample_cov"] for r in results]
    for lvl in range(depth - 1, 0, -1):
        r = results[lvl]
        c = np.diag(r["spec_risk"] ** 2) + r["loadings"] @ covs[lvl] @ r["loadings"].T
        covs[lvl - 1] = (c + c.T) / 2
    spec = results[0]["spec_risk"]
    load = results[0]["loadings"]
    fac_cov = covs[0]
    cov_mat = np.diag(spec ** 2) + load @ fac_cov @ load.T
    if opts.restore_diag:
        # recombination only keeps the diagonal when each row loads on one factor
        scale = np.sqrt(ret.var(axis=1, ddof=1) / np.diag(cov_mat))
        spec = spec * scale
        load = load * scale[:, None]
        cov_mat = np.diag(spec ** 2) + load @ fac_cov @ load.T
    cov_mat = (cov_mat + cov_mat.T) / 2

    sv = spec ** 2
    fac_cov_bar = fac_cov.copy()
    singles = ()
    if not opts.rm_sing_tkr:
        k = ind[0].shape[1]
        sv1 = (load[:, :k] ** 2 * np.diag(fac_cov)[:k]).sum(axis=1)
        single_cl = ind[0].sum(axis=0) == 1
        d = np.diag(fac_cov_bar).copy()
        d[:k][single_cl] = 0.0
        np.fill_diagonal(fac_cov_bar, d)
        single_tkr = ind[0][:, single_cl].sum(axis=1) == 1
        sv = sv.copy()
        sv[single_tkr] = sv1[single_tkr]
        singles = tuple(t for t, s in zip(tickers, single_tkr) if s)

    inv = None
    if opts.calc_inv:
        try:
            inv = woodbury_inverse(sv, load, fac_cov_bar)
        except SingularFactorCovarianceError as exc:
            raise DegenerateResidualError(
                f"recombined factor covariance is singular: {exc}", level=depth - 1) from None

    levels_out = []
    for lvl, r in enumerate(results):
        levels_out.append(LevelResult(fac_cov=covs[lvl], **r))
    final = FactorModel(np.sqrt(sv), load, fac_cov_bar, cov_mat, results[0]["fac_ret"], inv,
                        tickers, results[0]["gamma"], results[0]["resid_var"])
    kept = ReturnsPanel(tickers, panel.dates, ret, check=False)
    return NestedModel(final, levels_out, dropped, tickers, fac_cov, spec, singles, kept)


def fac_cov_of(series: np.ndarray) -> np.ndarray:
    c = np.atleast_2d(np.cov(series, ddof=1))
    return (c + c.T) / 2


def factor_returns_chain(model: NestedModel) -> list:
    """Recompute each level's factor returns from the stored raw loadings."""
    x = np.asarray(model.returns.values, dtype=float)
    chain = []
    for lv in model.per_level:
        x = x / x.std(axis=1, ddof=1)[:, None]
        x = regress(x, lv.raw_loadings, lv.level)[0]
        chain.append(x)
    return chain
