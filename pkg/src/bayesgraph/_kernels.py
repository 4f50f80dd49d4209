"""Numba-compiled inner loops.

Everything here works on plain float64 arrays with hand-rolled small-matrix
linear algebra: the matrices involved are tiny (p up to a few hundred,
neighbor blocks usually much smaller) and LAPACK call overhead dominates at
those sizes.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _chol_lower(a, n):
    """In-place lower Cholesky of the leading n-by-n block; reads and
    writes the lower triangle only.  Returns False if not positive
    definite."""
    for j in range(n):
        s = a[j, j]
        for k in range(j):
            s -= a[j, k] * a[j, k]
        if s <= 0.0:
            return False
        d = np.sqrt(s)
        a[j, j] = d
        for i in range(j + 1, n):
            t = a[i, j]
            for k in range(j):
                t -= a[i, k] * a[j, k]
            a[i, j] = t / d
    return True


@njit(cache=True)
def _solve_chol(L, b, x, n):
    """Solve (L L^T) x = b given the lower Cholesky factor L."""
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * x[k]
        x[i] = s / L[i, i]
    for i in range(n - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, n):
            s -= L[k, i] * x[k]
        x[i] = s / L[i, i]


@njit(cache=True)
def _inv_spd(a, out):
    """Inverse of a symmetric positive definite matrix via Cholesky.
    Overwrites a; returns False on failure."""
    p = a.shape[0]
    if not _chol_lower(a, p):
        return False
    e = np.zeros(p)
    x = np.empty(p)
    for c in range(p):
        e[c] = 1.0
        _solve_chol(a, e, x, p)
        for r in range(p):
            out[r, c] = x[r]
        e[c] = 0.0
    # symmetrize against round-off
    for r in range(p):
        for c in range(r):
            v = 0.5 * (out[r, c] + out[c, r])
            out[r, c] = v
            out[c, r] = v
    return True


@njit(cache=True)
def complete_inplace(omega, sigma, nbrs, nnbr, tol, max_sweeps):
    """Iterative completion of omega toward the covariance cone of a graph.

    Sweeps nodes in ascending order; for node i solves the neighbor-block
    system beta = Omega[N,N]^{-1} Sigma[N,i] and rewrites row/column i of
    omega with Omega[-i,-i] @ beta (zero-padded off the neighbor set).
    Stops when the largest entry change in a full sweep drops below tol.

    Returns (sweeps_used, last_change, converged).
    """
    p = omega.shape[0]
    sub = np.empty((p, p))
    rhs = np.empty(p)
    beta = np.empty(p)
    w = np.empty(p)
    last = 0.0
    for sweep in range(max_sweeps):
        delta = 0.0
        for i in range(p):
            k = nnbr[i]
            if k == 0:
                for r in range(p):
                    w[r] = 0.0
            else:
                for a in range(k):
                    na = nbrs[i, a]
                    rhs[a] = sigma[na, i]
                    for c in range(a + 1):
                        sub[a, c] = omega[na, nbrs[i, c]]
                if _chol_lower(sub, k):
                    _solve_chol(sub, rhs, beta, k)
                else:
                    a2 = np.empty((k, k))
                    b2 = np.empty(k)
                    for a in range(k):
                        b2[a] = sigma[nbrs[i, a], i]
                        for c in range(k):
                            a2[a, c] = omega[nbrs[i, a], nbrs[i, c]]
                    sol = np.linalg.solve(a2, b2)
                    for a in range(k):
                        beta[a] = sol[a]
                for r in range(p):
                    s = 0.0
                    for a in range(k):
                        s += omega[r, nbrs[i, a]] * beta[a]
                    w[r] = s
            for r in range(p):
                if r != i:
                    d = w[r] - omega[r, i]
                    if d < 0.0:
                        d = -d
                    if d > delta:
                        delta = d
                    omega[r, i] = w[r]
                    omega[i, r] = w[r]
        last = delta
        if delta < tol:
            return sweep + 1, last, True
    return max_sweeps, last, False


@njit(cache=True)
def _wishart_lower(chol_si, normals_tri, chis, A, T):
    """Build the lower factor T of one Wishart draw W = T T' with scale
    D^{-1} (chol_si = lower Cholesky of D^{-1}) via the Bartlett
    decomposition.  normals_tri packs the strict lower triangle row-major;
    chis are the chi-square diagonal draws."""
    p = chol_si.shape[0]
    t = 0
    for i in range(p):
        A[i, i] = np.sqrt(chis[i])
        for j in range(i):
            A[i, j] = normals_tri[t]
            t += 1
    for i in range(p):
        for j in range(i + 1):
            s = 0.0
            for k in range(j, i + 1):
                s += chol_si[i, k] * A[k, j]
            T[i, j] = s


@njit(cache=True)
def marginal_log_kernels(nbrs, nnbr, chol_si, n, S, normals_tri, chis,
                         tol, max_sweeps):
    """Log Gaussian likelihood kernels of M independent prior draws.

    For each Monte Carlo sample: draw an unconstrained Wishart precision,
    invert it, complete the inverse onto the graph's cone, invert back,
    and evaluate (n/2) log|K| - tr(S K)/2.
    """
    M = chis.shape[0]
    p = S.shape[0]
    out = np.empty(M)
    A = np.zeros((p, p))
    T = np.zeros((p, p))
    W = np.empty((p, p))
    sigma = np.empty((p, p))
    omega = np.empty((p, p))
    K = np.empty((p, p))
    scratch = np.empty((p, p))
    for m in range(M):
        _wishart_lower(chol_si, normals_tri[m], chis[m], A, T)
        for i in range(p):
            for j in range(i + 1):
                s = 0.0
                for k in range(j + 1):
                    s += T[i, k] * T[j, k]
                W[i, j] = s
                W[j, i] = s
        for i in range(p):
            for j in range(p):
                scratch[i, j] = W[i, j]
        if not _inv_spd(scratch, sigma):
            out[m] = -np.inf
            continue
        for i in range(p):
            for j in range(p):
                omega[i, j] = sigma[i, j]
        complete_inplace(omega, sigma, nbrs, nnbr, tol, max_sweeps)
        for i in range(p):
            for j in range(p):
                scratch[i, j] = omega[i, j]
        if not _chol_lower(scratch, p):
            out[m] = -np.inf
            continue
        logdet_omega = 0.0
        for i in range(p):
            logdet_omega += np.log(scratch[i, i])
        logdet_omega *= 2.0
        for i in range(p):
            for j in range(p):
                scratch[i, j] = omega[i, j]
        if not _inv_spd(scratch, K):
            out[m] = -np.inf
            continue
        tr = 0.0
        for i in range(p):
            for j in range(p):
                tr += S[i, j] * K[j, i]
        out[m] = -0.5 * n * logdet_omega - 0.5 * tr
    return out


@njit(cache=True)
def marginal_log_kernels_from_sigma(nbrs, nnbr, n, S, sigmas, tol, max_sweeps):
    """Like marginal_log_kernels, but starting from precomputed
    unconstrained covariance draws (one p-by-p sigma per sample); used
    when a shared variate stream makes the draws graph-independent."""
    M = sigmas.shape[0]
    p = S.shape[0]
    out = np.empty(M)
    omega = np.empty((p, p))
    K = np.empty((p, p))
    scratch = np.empty((p, p))
    for m in range(M):
        sigma = sigmas[m]
        for i in range(p):
            for j in range(p):
                omega[i, j] = sigma[i, j]
        complete_inplace(omega, sigma, nbrs, nnbr, tol, max_sweeps)
        for i in range(p):
            for j in range(p):
                scratch[i, j] = omega[i, j]
        if not _chol_lower(scratch, p):
            out[m] = -np.inf
            continue
        logdet_omega = 0.0
        for i in range(p):
            logdet_omega += np.log(scratch[i, i])
        logdet_omega *= 2.0
        for i in range(p):
            for j in range(p):
                scratch[i, j] = omega[i, j]
        if not _inv_spd(scratch, K):
            out[m] = -np.inf
            continue
        tr = 0.0
        for i in range(p):
            for j in range(p):
                tr += S[i, j] * K[j, i]
        out[m] = -0.5 * n * logdet_omega - 0.5 * tr
    return out


@njit(cache=True)
def sigma_draws(chol_si, normals_tri, chis):
    """Unconstrained Wishart-inverse covariance draws: for each sample,
    build W = T T' via Bartlett and return W^{-1} (symmetrized)."""
    M = chis.shape[0]
    p = chol_si.shape[0]
    out = np.empty((M, p, p))
    A = np.zeros((p, p))
    T = np.zeros((p, p))
    W = np.empty((p, p))
    scratch = np.empty((p, p))
    for m in range(M):
        _wishart_lower(chol_si, normals_tri[m], chis[m], A, T)
        for i in range(p):
            for j in range(i + 1):
                s = 0.0
                for k in range(j + 1):
                    s += T[i, k] * T[j, k]
                W[i, j] = s
                W[j, i] = s
        for i in range(p):
            for j in range(p):
                scratch[i, j] = W[i, j]
        if not _inv_spd(scratch, out[m]):
            for i in range(p):
                for j in range(p):
                    out[m, i, j] = 1.0 if i == j else 0.0
    return out


def warmup():
    """Force JIT compilation of the hot kernels on a toy problem."""
    nbrs = np.zeros((2, 2), dtype=np.int64)
    nbrs[0, 0] = 1
    nbrs[1, 0] = 0
    nnbr = np.ones(2, dtype=np.int64)
    eye = np.eye(2)
    om = eye.copy()
    complete_inplace(om, eye.copy(), nbrs, nnbr, 1e-8, 10)
    marginal_log_kernels(nbrs, nnbr, eye, 1, eye.copy(),
                         np.zeros((2, 1)), np.ones((2, 2)) * 3.0, 1e-8, 10)
    sig = sigma_draws(eye, np.zeros((2, 1)), np.ones((2, 2)) * 3.0)
    marginal_log_kernels_from_sigma(nbrs, nnbr, 1, eye.copy(), sig, 1e-8, 10)
