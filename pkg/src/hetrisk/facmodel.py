"""Single-level factor models on the correlation matrix.

Returns are first normalized by their sample volatilities, regressed
cross-sectionally (unit weights, no intercept) on the loadings, and the
resulting model is rescaled ticker-by-ticker so its diagonal reproduces the
sample variances exactly.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .config import FLOAT_DIGITS, TOL
from .errors import (
    CollinearLoadingsError,
    DegenerateReturnError,
    DegenerateTickerError,
    FormatError,
    SingularFactorCovarianceError,
    SingularSpecificRiskError,
)
from .panel import ReturnsPanel, _frozen, fmt
from .styles import mad, normalize_to_normal
from .stats import CorrelationModelInputs, correlation_inputs, sample_covariance


@dataclass(frozen=True)
class FactorModel:
    """Ticker-level factor model Gamma = diag(spec_risk^2) + L Phi L^T.

    ``fac_ret`` holds factor returns of the *normalized* returns, one row per
    factor, date order as in the input.  ``gamma`` and ``resid_var`` are the
    rescaling factors and pre-rescaling residual variances; both are ``None``
    for models that did not come out of a regression.
    """

    spec_risk: np.ndarray
    fac_load: np.ndarray
    fac_cov: np.ndarray
    cov_mat: np.ndarray
    fac_ret: np.ndarray | None = None
    inv_cov: np.ndarray | None = None
    tickers: tuple | None = None
    gamma: np.ndarray | None = None
    resid_var: np.ndarray | None = None

    def __post_init__(self):
        for name in ("spec_risk", "fac_load", "fac_cov", "cov_mat", "fac_ret", "inv_cov",
                     "gamma", "resid_var"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _frozen(val))
        if self.tickers is not None:
            object.__setattr__(self, "tickers", tuple(self.tickers))

    @property
    def n(self) -> int:
        return len(self.spec_risk)

    @property
    def k(self) -> int:
        return self.fac_load.shape[1]


def assemble(spec_risk, fac_load, fac_cov) -> np.ndarray:
    load = np.asarray(fac_load)
    g = np.diag(np.asarray(spec_risk) ** 2) + load @ fac_cov @ load.T
    return (g + g.T) / 2


def _check_loadings(omega: np.ndarray, level: int | None = None) -> None:
    k = omega.shape[1]
    if k > omega.shape[0]:
        raise CollinearLoadingsError(
            f"{k} factors for {omega.shape[0]} rows", columns=range(k), level=level)
    sv = np.linalg.svd(omega, compute_uv=False)
    if sv[-1] == 0 or (sv[0] / sv[-1]) ** 2 > TOL.max_condition:
        _, _, vt = np.linalg.svd(omega)
        v = np.abs(vt[-1])
        cols = np.flatnonzero(v > 1e-6 * v.max())
        where = "" if level is None else f" at level {level}"
        raise CollinearLoadingsError(
            f"loadings are collinear{where}; offending columns {cols.tolist()}",
            columns=cols.tolist(), level=level)


def regress(normalized: np.ndarray, omega: np.ndarray, level: int | None = None):
    """Cross-sectional least squares per date; returns (factor returns, residuals)."""
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    if omega.shape[0] != normalized.shape[0]:
        omega = omega.reshape(normalized.shape[0], -1)
    _check_loadings(omega, level)
    f = np.linalg.lstsq(omega, normalized, rcond=None)[0]
    return f, normalized - omega @ f


def projector(omega: np.ndarray) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    _check_loadings(omega)
    q = omega @ np.linalg.solve(omega.T @ omega, omega.T)
    return (q + q.T) / 2


def factor_returns(inputs: CorrelationModelInputs, omega: np.ndarray) -> np.ndarray:
    return regress(inputs.normalized, omega)[0]


def specific_risk_via_definition(inputs: CorrelationModelInputs, omega: np.ndarray) -> np.ndarray:
    """1 - diag(Q Psi Q); may come out negative for general loadings."""
    q = projector(omega)
    return 1.0 - np.einsum("ij,jk,ki->i", q, inputs.psi, q)


def woodbury_inverse(spec_var: np.ndarray, load: np.ndarray, fac_cov: np.ndarray) -> np.ndarray:
    spec_var = np.asarray(spec_var, dtype=float)
    if (spec_var <= 0).any():
        i = int(np.flatnonzero(spec_var <= 0)[0])
        raise SingularSpecificRiskError(f"specific variance of row {i} is {spec_var[i]}")
    try:
        phi_inv = np.linalg.inv(fac_cov)
        v = load / spec_var[:, None]
        d = phi_inv + load.T @ v
        inv = np.diag(1.0 / spec_var) - v @ np.linalg.solve(d, v.T)
    except np.linalg.LinAlgError as exc:
        raise SingularFactorCovarianceError(f"factor covariance is singular: {exc}") from None
    return (inv + inv.T) / 2


def invert_factor_model(model: FactorModel) -> np.ndarray:
    """Gamma^{-1} through the factor structure; only K x K systems are solved."""
    return woodbury_inverse(np.asarray(model.spec_risk) ** 2, model.fac_load, model.fac_cov)


def cov_gen(ret: np.ndarray, load: np.ndarray, calc_inv: bool = False,
            level: int | None = None) -> FactorModel:
    """Factor model for the rows of ``ret`` (any units) with raw loadings ``load``."""
    ret = np.asarray(ret, dtype=float)
    load = np.asarray(load, dtype=float).reshape(ret.shape[0], -1)
    tv = ret.var(axis=1, ddof=1)
    if (tv <= 0).any():
        i = int(np.flatnonzero(tv <= 0)[0])
        raise DegenerateReturnError(f"row {i} has zero variance" +
                                    ("" if level is None else f" at level {level}"))
    tr = np.sqrt(tv)
    r1 = ret / tr[:, None]
    z, resid = regress(r1, load, level)
    g = sample_covariance(z)
    x_f = load @ g @ load.T
    x_s = resid.var(axis=1, ddof=1)
    gamma = np.sqrt(x_s + np.diag(x_f))
    if (gamma == 0).any():
        i = int(np.flatnonzero(gamma == 0)[0])
        raise DegenerateTickerError(f"row {i} has zero residual and zero factor variance")
    scale = tr / gamma
    sv = x_s * scale ** 2
    fac_load = load * scale[:, None]
    cov = np.diag(sv) + x_f * np.outer(scale, scale)
    cov = (cov + cov.T) / 2
    inv = woodbury_inverse(sv, fac_load, g) if calc_inv else None
    return FactorModel(np.sqrt(sv), fac_load, g, cov, z, inv, gamma=gamma, resid_var=x_s)


def build_general(panel: ReturnsPanel, omega: np.ndarray, calc_inv: bool = False) -> FactorModel:
    """General factor model with total-variance-preserving rescaling."""
    m = cov_gen(panel.values, omega, calc_inv)
    return _with_tickers(m, panel.tickers)


def _with_tickers(m: FactorModel, tickers) -> FactorModel:
    return FactorModel(m.spec_risk, m.fac_load, m.fac_cov, m.cov_mat, m.fac_ret, m.inv_cov,
                       tickers, m.gamma, m.resid_var)


# ------------------------------------------------------ factor-risk squashing

def squash_factor_risk(fr, tv, low: float = 0.01, high: float = 0.81) -> np.ndarray:
    """Rank-conform log factor-to-total risk and soft-clamp it into [low, high] (variance ratio).

    Returns factor risk in the units of ``sqrt(tv)``.
    """
    fr = np.asarray(fr, dtype=float)
    tv = np.asarray(tv, dtype=float)
    with np.errstate(divide="ignore"):
        y = np.log(fr) - 0.5 * np.log(tv)
    spread = mad(y) if np.isfinite(np.median(y)) else np.nan
    if not np.isfinite(spread) or spread <= 0:
        return np.sqrt(np.clip(fr ** 2 / tv, low, high) * tv)
    y = normalize_to_normal(y, float(np.median(y)), spread)
    min_y, max_y = 0.5 * np.log(low), 0.5 * np.log(high)
    center, sdev = float(np.median(y)), mad(y)
    x = (y - center) / sdev
    min_x = max((min_y - center) / sdev, x.min())
    max_x = min((max_y - center) / sdev, x.max())
    neg, pos = x < 0, x > 0
    if min_x < 0:
        x[neg] = min_x * (1 - np.exp(x[neg]))
    else:
        x[x < min_x] = min_x
    if max_x > 0:
        x[pos] = max_x * (1 - np.exp(-x[pos]))
    else:
        x[x > max_x] = max_x
    return np.exp(center + x * sdev) * np.sqrt(tv)


def build_general_alt(panel: ReturnsPanel, omega: np.ndarray, bounds=(0.01, 0.81),
                      calc_inv: bool = False) -> FactorModel:
    """Variant that keeps sample variances by squashing only the factor risk."""
    ret = panel.values
    omega = np.asarray(omega, dtype=float).reshape(ret.shape[0], -1)
    inputs = correlation_inputs(panel)
    tv, tr = inputs.variances, inputs.sigma
    z, _ = regress(inputs.normalized, omega)
    g = sample_covariance(z)
    load = omega * tr[:, None]
    x_f = load @ g @ load.T
    fr = np.sqrt(np.clip(np.diag(x_f), 0.0, None))
    y = squash_factor_risk(fr, tv, *bounds)
    take = fr > 0
    y[~take] = 0.0
    sv = tv - y ** 2
    y[take] = y[take] / fr[take]
    load = load * y[:, None]
    cov = np.diag(sv) + x_f * np.outer(y, y)
    cov = (cov + cov.T) / 2
    inv = woodbury_inverse(sv, load, g) if calc_inv else None
    return FactorModel(np.sqrt(sv), load, g, cov, z, inv, panel.tickers)


# ------------------------------------------------------------- serialization

def save_model(model: FactorModel, directory, dates=None, factor_names=None,
               digits: int = FLOAT_DIGITS) -> None:
    """Write the text bundle: spec_risk.csv, fac_load.csv, fac_cov.csv, fac_ret.csv, meta.csv."""
    os.makedirs(directory, exist_ok=True)
    tickers = model.tickers or tuple(f"t{i}" for i in range(model.n))
    names = factor_names or tuple(f"f{a}" for a in range(model.k))

    def put(name, header, rows):
        with open(os.path.join(directory, name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)

    put("spec_risk.csv", ["ticker", "spec_risk"],
        [[t, fmt(x, digits)] for t, x in zip(tickers, model.spec_risk)])
    put("fac_load.csv", ["ticker", *names],
        [[t, *(fmt(x, digits) for x in row)] for t, row in zip(tickers, model.fac_load)])
    put("fac_cov.csv", ["factor", *names],
        [[f, *(fmt(x, digits) for x in row)] for f, row in zip(names, model.fac_cov)])
    meta = [["ticker", i, t] for i, t in enumerate(tickers)]
    meta += [["factor", a, f] for a, f in enumerate(names)]
    if model.fac_ret is not None:
        dates = dates or tuple(f"d{s}" for s in range(model.fac_ret.shape[1]))
        meta += [["date", s, d] for s, d in enumerate(dates)]
        put("fac_ret.csv", ["factor", *dates],
            [[f, *(fmt(x, digits) for x in row)] for f, row in zip(names, model.fac_ret)])
    put("meta.csv", ["axis", "index", "label"], meta)


def _read_matrix(path):
    if not os.path.exists(path):
        raise FormatError(f"no such file: {path}", exit_code=2)
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    header, body = rows[0], rows[1:]
    labels = [r[0] for r in body]
    return header[1:], labels, np.array([[float(c) for c in r[1:]] for r in body], dtype=float)


def load_model(directory) -> FactorModel:
    _, tickers, spec = _read_matrix(os.path.join(directory, "spec_risk.csv"))
    _, _, load = _read_matrix(os.path.join(directory, "fac_load.csv"))
    _, _, cov = _read_matrix(os.path.join(directory, "fac_cov.csv"))
    fac_ret = None
    ret_path = os.path.join(directory, "fac_ret.csv")
    if os.path.exists(ret_path):
        fac_ret = _read_matrix(ret_path)[2]
    spec = spec[:, 0]
    load = load.reshape(len(tickers), -1)
    return FactorModel(spec, load, cov, assemble(spec, load, cov), fac_ret, None, tuple(tickers))
