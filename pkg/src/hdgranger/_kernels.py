"""Compiled inner loops: coordinate descent over a penalty path, and the
scalar autoregressive recursion used by the residual bootstrap.

Everything here works on plain float64 arrays; callers own all statistical
conventions (standardization, weight construction, grids).  The design
matrix is expected in Fortran order so column slices are contiguous.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _sweep(X, r, b, z, thr, idx):
    """One pass of cyclic coordinate descent over the columns in `idx`.

    Updates b and the residual r in place; returns the largest absolute
    coefficient change.  z holds the per-column curvatures (1/n) X_i'X_i,
    thr the soft thresholds lam * w_i / 2.
    """
    n = r.shape[0]
    delta = 0.0
    for q in range(idx.shape[0]):
        i = idx[q]
        zi = z[i]
        if zi <= 0.0:
            continue
        col = X[:, i]
        acc = 0.0
        for t in range(n):
            acc += col[t] * r[t]
        rho = acc / n + zi * b[i]
        ti = thr[i]
        if rho > ti:
            bnew = (rho - ti) / zi
        elif rho < -ti:
            bnew = (rho + ti) / zi
        else:
            bnew = 0.0
        d = bnew - b[i]
        if d != 0.0:
            for t in range(n):
                r[t] -= col[t] * d
            b[i] = bnew
            ad = abs(d)
            if ad > delta:
                delta = ad
    return delta


@njit(cache=True)
def lasso_path(X, y, w, lams, tol, max_sweeps, df_cap):
    """Weighted-L1 path via coordinate descent with warm starts.

    Solves min (1/n)||y - X b||^2 + lam * sum_i w_i |b_i| for every lam in
    `lams` (expected decreasing, so each solution warm-starts the next).
    Convergence: a full sweep moves no coefficient by >= tol.  Zeros are
    exact.  Returns (betas, rss, df, n_valid) with one row / entry per lam;
    traversal stops after the first solution whose support exceeds df_cap
    (smaller penalties only grow the support further), so only the leading
    n_valid entries are filled.
    """
    n, P = X.shape
    L = lams.shape[0]
    betas = np.zeros((L, P))
    rss = np.zeros(L)
    dfs = np.zeros(L, np.int64)
    n_valid = L

    b = np.zeros(P)
    z = np.zeros(P)
    for i in range(P):
        col = X[:, i]
        acc = 0.0
        for t in range(n):
            acc += col[t] * col[t]
        z[i] = acc / n
    thr = np.zeros(P)
    r = np.zeros(n)
    all_cols = np.arange(P)

    for li in range(L):
        lam = lams[li]
        for i in range(P):
            thr[i] = 0.5 * lam * w[i]
        # rebuild the residual from the warm start, clearing accumulated drift
        for t in range(n):
            r[t] = y[t]
        for i in range(P):
            bi = b[i]
            if bi != 0.0:
                col = X[:, i]
                for t in range(n):
                    r[t] -= col[t] * bi
        sweeps = 0
        while sweeps < max_sweeps:
            delta = _sweep(X, r, b, z, thr, all_cols)
            sweeps += 1
            if delta < tol:
                break
            # refine on the current support before rescanning all columns
            active = np.nonzero(b)[0]
            while sweeps < max_sweeps:
                d2 = _sweep(X, r, b, z, thr, active)
                sweeps += 1
                if d2 < tol:
                    break
        nz = 0
        for i in range(P):
            betas[li, i] = b[i]
            if b[i] != 0.0:
                nz += 1
        dfs[li] = nz
        acc = 0.0
        for t in range(n):
            acc += r[t] * r[t]
        rss[li] = acc
        if nz > df_cap:
            n_valid = li + 1
            break
    return betas, rss, dfs, n_valid


@njit(cache=True)
def arx_recursion(own_coefs, drive, init):
    """Generate y[t] = sum_j own_coefs[j-1] * y[t-j] + drive[t].

    init holds the p pre-sample values, oldest first (init[p-1] immediately
    precedes y[0]).  Returns the n generated values, n = len(drive).
    """
    p = own_coefs.shape[0]
    n = drive.shape[0]
    out = np.empty(n)
    for t in range(n):
        acc = drive[t]
        for j in range(1, p + 1):
            s = t - j
            if s >= 0:
                acc += own_coefs[j - 1] * out[s]
            else:
                acc += own_coefs[j - 1] * init[p + s]
        out[t] = acc
    return out
