"""Straight-line numpy transcription of the reference R routines.

Nothing here imports hetrisk: the acceptance parity checks compare the
package against this file.  R idioms are mirrored literally (1-based loops
become 0-based, lm without intercept becomes a normal-equations solve, var()
uses the n-1 divisor).  Eigenvector signs follow the package's declared
convention (nonnegative entry sum, else first nonzero entry positive) since R
leaves them arbitrary.  v solve(d) v' is evaluated as a linear solve rather
than an explicit inverse; same formula, less rounding when d is poorly scaled.
"""

import numpy as np
from scipy.stats import norm


def r_var_rows(x):
    m = x - x.mean(axis=1, keepdims=True)
    return (m * m).sum(axis=1) / (x.shape[1] - 1)


def r_cov_cols(z):
    # var(z, z) for a matrix z with observations in rows
    m = z - z.mean(axis=0, keepdims=True)
    return m.T @ m / (z.shape[0] - 1)


def r_cor_rows(x):
    c = r_cov_cols(x.T)
    s = np.sqrt(np.diag(c))
    out = c / s[:, None] / s[None, :]
    np.fill_diagonal(out, 1.0)
    return out


def r_eigen_vectors(a):
    vals, vecs = np.linalg.eigh((a + a.T) / 2)
    vecs = vecs[:, ::-1].copy()
    for j in range(vecs.shape[1]):
        v = vecs[:, j]
        tot = v.sum()
        big = np.abs(v).max()
        if abs(tot) > 1e-12 * max(big, 1.0) * np.sqrt(len(v)):
            if tot < 0:
                vecs[:, j] = -v
        else:
            for x in v:
                if abs(x) > 1e-12 * max(big, 1e-300):
                    if x < 0:
                        vecs[:, j] = -v
                    break
    return vecs


def lm_no_intercept(y, x):
    # y: n_obs x n_resp, x: n_obs x k; returns (coef k x n_resp, residuals)
    coef = np.linalg.solve(x.T @ x, x.T @ y)
    return coef, y - x @ coef


def qrm_cov_gen(ret, load, calc_inv=True):
    tr = np.sqrt(r_var_rows(ret))
    r1 = ret / tr[:, None]
    coef, x = lm_no_intercept(r1, load)
    z = coef.T
    g = r_cov_cols(z)
    x_f = load @ g @ load.T
    x_s = r_var_rows(x)
    tr1 = np.sqrt(x_s + np.diag(x_f))
    tr = tr / tr1
    sv = x_s * tr ** 2
    load = load * tr[:, None]
    cov_mat = np.diag(sv) + (x_f * tr[:, None]).T * tr[:, None]
    out = dict(spec_risk=np.sqrt(sv), fac_load=load, fac_cov=g, cov_mat=cov_mat, fac_ret=z.T)
    if calc_inv:
        v = load / sv[:, None]
        d = np.linalg.inv(g) + load.T @ v
        out["inv_cov"] = np.diag(1 / sv) - v @ np.linalg.solve(d, v.T)
    return out


def ppoints(n):
    a = 3.0 / 8.0 if n <= 10 else 0.5
    return (np.arange(1, n + 1) - a) / (n + 1 - 2 * a)


def qrm_normalize(x, center=None, sdev=None):
    x = np.asarray(x, dtype=float)
    if center is None:
        center = x.mean()
    if sdev is None:
        sdev = x.std(ddof=1)
    if len(x) == 1:
        return np.array([center], dtype=float)
    order = np.argsort(x, kind="stable")
    rank = np.argsort(order, kind="stable")
    return norm.ppf(ppoints(len(x))[rank], center, sdev)


def r_mad(x):
    med = np.median(x)
    return 1.4826 * np.median(np.abs(x - med))


def qrm_fr(fr, tv, low=0.1 ** 2, high=0.9 ** 2):
    y = np.log(fr)
    y = y - 0.5 * np.log(tv)
    y = qrm_normalize(y, np.median(y), r_mad(y))
    min_y = 0.5 * np.log(low)
    max_y = 0.5 * np.log(high)
    center = np.median(y)
    sdev = r_mad(y)
    x = (y - center) / sdev
    min_x = max((min_y - center) / sdev, x.min())
    max_x = min((max_y - center) / sdev, x.max())
    if min_x < 0:
        take = x < 0
        x[take] = min_x * (1 - np.exp(x[take]))
    else:
        x[x < min_x] = min_x
    if max_x > 0:
        take = x > 0
        x[take] = max_x * (1 - np.exp(-x[take]))
    else:
        x[x > max_x] = max_x
    y = center + x * sdev
    return np.exp(y) * np.sqrt(tv)


def qrm_cov_gen_alt(ret, load):
    tv = r_var_rows(ret)
    tr = np.sqrt(tv)
    r1 = ret / tr[:, None]
    coef, _ = lm_no_intercept(r1, load)
    z = coef.T
    g = r_cov_cols(z)
    load = tr[:, None] * load
    x_f = load @ g @ load.T
    fr = np.sqrt(np.diag(x_f))
    y = qrm_fr(fr, tv)
    take = fr > 0
    y[~take] = 0
    sv = tv - y ** 2
    y[take] = y[take] / fr[take]
    load = load * y[:, None]
    cov_mat = np.diag(sv) + (x_f * y[:, None]).T * y[:, None]
    return dict(spec_risk=np.sqrt(sv), fac_load=load, fac_cov=g, cov_mat=cov_mat)


def qrm_style(close, open_, high, low, vol, do_norm=False):
    st1 = np.log(close[:, 0])
    st2 = np.log(close[:, 0] / open_[:, 0])
    st3 = 0.5 * np.log((((high - low) / close) ** 2).mean(axis=1))
    if do_norm:
        st3 = qrm_normalize(st3)
    st4 = np.log(vol.mean(axis=1))
    if do_norm:
        st4 = qrm_normalize(st4)
    return np.column_stack([st1, st2, st3, st4])


def null_elem(z, prec=1e-10):
    z = np.asarray(z)
    return int(np.sum((z == 0) | (z < z.max() * prec)))


def qrm_gen_het(ret, ind, mkt_fac=False, rm_sing_tkr=False, p=0, append_style=False,
                k_style=0, style=None):
    """Returns the R result list plus the per-level pieces.

    Two documented departures from the R listing: style columns are appended
    only when append_style is set, and coarser clusters emptied by singleton
    removal are dropped instead of crashing.
    """
    ind = [np.array(m, dtype=float) for m in ind]
    ret = np.array(ret, dtype=float)
    s = 0
    if style is not None:
        style = np.array(style, dtype=float).reshape(ret.shape[0], -1)
        s = style.shape[1]
    else:
        append_style = False
    if append_style or p > 0:
        k_style = 0
    if mkt_fac:
        ind.append(np.ones((ind[0].shape[0], 1)))
    if rm_sing_tkr:
        bad = ind[0].sum(axis=0) == 1
        ind[0] = ind[0][:, ~bad]
        bad = ind[0].sum(axis=1) == 0
        for lvl in range(len(ind)):
            ind[lvl] = ind[lvl][~bad, :]
            ind[lvl] = ind[lvl][:, ind[lvl].sum(axis=0) > 0]
        ret = ret[~bad, :]
        if style is not None:
            style = style[~bad, :]

    flm = [m.copy() for m in ind]
    fac_ret = [ret]
    spec_risk, fac_cov = [None] * len(ind), [None] * len(ind)

    if k_style > 0:
        style = style.copy()
        xs, ys = [], []
        for a in range(ind[0].shape[1]):
            take = ind[0][:, a] > 0
            k = int(take.sum())
            for j in range(style.shape[1]):
                if np.sum(style[take, j] == 0) == k:
                    style[take, j] = 1
            chk_mat = k > 1
            if k < k_style:
                k = 1
            if k > 1:
                k = min(k - 1, style.shape[1])
            if chk_mat and k > 1:
                sm = style[take, :k]
                if null_elem(np.linalg.eigvalsh(sm.T @ sm)) > 0:
                    k = 1
            while chk_mat:
                sm = style[take, :k]
                _, z = lm_no_intercept(fac_ret[0][take, :], sm)
                z = np.sqrt(r_var_rows(z))
                bad = null_elem(z)
                chk_mat = bad > 0
                if chk_mat:
                    if bad < k:
                        k = k - bad
                    else:
                        k = 1
                        style[take, 0] = 1
                        chk_mat = False
            for j in range(k):
                xs.append(ind[0][:, a] * style[:, j])
                ys.append(ind[0][:, a])
        flm[0] = np.column_stack(xs)
        ind[0] = np.column_stack(ys)

    def calc_load(load, load1):
        x = load1.sum(axis=0)
        return (load1.T @ load) / x[:, None]

    raw = []
    for lvl in range(len(ind)):
        if lvl > 0:
            flm[lvl] = calc_load(ind[lvl], ind[lvl - 1])
        if k_style == 0 or lvl > 0:
            for a in range(flm[lvl].shape[1]):
                take = flm[lvl][:, a] != 0
                k = fac_ret[lvl].shape[0] if lvl == 0 else ind[lvl - 1].shape[1]
                x = fac_ret[lvl][:k, :][take, :]
                if x.shape[0] == 1:
                    y1 = np.ones(1)
                else:
                    y1 = r_eigen_vectors(r_cor_rows(x))[:, 0]
                flm[lvl][take, a] = y1 * flm[lvl][take, a]
        if p > 0 or append_style:
            if lvl == 0:
                ss = s if append_style else 0
                tmp = np.zeros((flm[lvl].shape[0], p + ss))
                if p > 0:
                    tmp[:, :p] = r_eigen_vectors(r_cor_rows(ret))[:, :p]
                if ss > 0:
                    tmp[:, p:p + ss] = style
                flm[lvl] = np.column_stack([flm[lvl], tmp])
                p = p + ss
            else:
                r, c = flm[lvl].shape
                tmp = np.zeros((r + p, c + p))
                tmp[:r, :c] = flm[lvl]
                tmp[r:, c:] = np.eye(p)
                flm[lvl] = tmp
        raw.append(flm[lvl].copy())
        res = qrm_cov_gen(fac_ret[lvl], flm[lvl], calc_inv=False)
        spec_risk[lvl] = res["spec_risk"]
        fac_cov[lvl] = res["fac_cov"]
        flm[lvl] = res["fac_load"]
        fac_ret.append(res["fac_ret"])

    for lvl in range(len(ind) - 1, -1, -1):
        if lvl > 0:
            fac_cov[lvl - 1] = np.diag(spec_risk[lvl] ** 2) + flm[lvl] @ fac_cov[lvl] @ flm[lvl].T
        else:
            spec = spec_risk[0]
            fcov = fac_cov[0].copy()
            load = flm[0]
            mod_mat = np.diag(spec ** 2) + load @ fcov @ load.T

    sv = spec ** 2
    if not rm_sing_tkr:
        k = ind[0].shape[1]
        sv1 = ((load[:, :k].T) ** 2 * np.diag(fcov[:k, :k])[:, None]).sum(axis=0)
        take = ind[0].sum(axis=0) == 1
        x = np.diag(fcov).copy()
        y = x[:k].copy()
        y[take] = 0
        x[:k] = y
        np.fill_diagonal(fcov, x)
        take = ind[0][:, take].sum(axis=1) == 1
        sv = sv.copy()
        sv[take] = sv1[take]
        spec = np.sqrt(sv)

    v = load / sv[:, None]
    d = np.linalg.inv(fcov) + load.T @ v
    inv = np.diag(1 / sv) - v @ np.linalg.solve(d, v.T)
    return dict(spec_risk=spec, fac_load=load, fac_cov=fcov, cov_mat=mod_mat, inv_cov=inv,
                raw=raw, fac_ret=fac_ret)


# ------------------------------------------------------------------ dense formulas

def dense_general(ret, omega):
    """Same model as qrm_cov_gen via projector algebra on the correlation matrix."""
    c = np.cov(ret, ddof=1)
    sig = np.sqrt(np.diag(c))
    psi = c / np.outer(sig, sig)
    rn = ret / sig[:, None]
    q = omega @ np.linalg.inv(omega.T @ omega) @ omega.T
    phi = np.linalg.inv(omega.T @ omega) @ omega.T @ psi @ omega @ np.linalg.inv(omega.T @ omega)
    resid = rn - q @ rn
    xs = resid.var(axis=1, ddof=1)
    gam2 = xs + np.diag(omega @ phi @ omega.T)
    tilde = np.diag(xs) + omega @ phi @ omega.T
    d = sig / np.sqrt(gam2)
    return tilde * np.outer(d, d)
