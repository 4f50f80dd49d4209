"""The G-Wishart distribution on graph-constrained precision matrices:
unnormalized log density, exact sampling by iterative completion, and
normalizing constants (Monte Carlo plus closed forms for decomposable
graphs)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import networkx as nx
import numpy as np
from scipy.special import gammaln, multigammaln

from ._kernels import complete_inplace
from .errors import (ConvergenceFailureError, InputError, NotDecomposableError,
                     NotPositiveDefiniteError, UnsupportedScaleError)
from .graphs import Graph

SYMMETRY_TOL = 1e-10
ZERO_PATTERN_TOL = 1e-8


def _cholesky_or_raise(m, what="matrix"):
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"{what} is not positive definite") from exc


def _check_symmetric(m, what="matrix", tol=SYMMETRY_TOL):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"{what} must be square")
    if np.max(np.abs(m - m.T), initial=0.0) > tol:
        raise NotPositiveDefiniteError(f"{what} is not symmetric within {tol}")
    return m


@dataclass(frozen=True)
class GWishartParams:
    """Degrees of freedom b > 2 and a symmetric positive definite p-by-p
    scale matrix D."""

    b: float
    D: np.ndarray

    def __post_init__(self):
        if not self.b > 2:
            raise InputError(f"degrees of freedom must exceed 2, got {self.b}")
        D = _check_symmetric(self.D, "scale matrix D")
        _cholesky_or_raise(D, "scale matrix D")
        D = D.copy()
        D.setflags(write=False)
        object.__setattr__(self, "D", D)

    @property
    def p(self) -> int:
        return self.D.shape[0]


def validate_precision(K, graph: Graph | None = None,
                       sym_tol=SYMMETRY_TOL, zero_tol=ZERO_PATTERN_TOL):
    """Check the precision-matrix invariants: symmetry, positive
    definiteness and, when a graph is given, (near-)zero entries off its
    edge pattern.  Raises on violation, returns K as float array."""
    K = _check_symmetric(K, "precision matrix", sym_tol)
    _cholesky_or_raise(K, "precision matrix")
    if graph is not None:
        if graph.p != K.shape[0]:
            raise InputError("graph and matrix dimension mismatch")
        resid = pattern_residual(K, graph)
        if resid > zero_tol:
            raise NotPositiveDefiniteError(
                f"off-pattern entry of magnitude {resid:.3e} exceeds {zero_tol}")
    return K


def pattern_residual(K, graph: Graph) -> float:
    """Largest |K_ij| over non-adjacent pairs i != j."""
    K = np.asarray(K)
    mask = graph.adjacency().astype(bool)
    np.fill_diagonal(mask, True)
    off = np.abs(K)[~mask]
    return float(off.max()) if off.size else 0.0


def neighbor_arrays(g: Graph):
    """Padded 0-based neighbor table (p, p) plus per-node neighbor counts,
    in the layout the compiled kernels expect."""
    p = g.p
    nbrs = np.zeros((p, p), dtype=np.int64)
    nnbr = np.zeros(p, dtype=np.int64)
    for i in range(1, p + 1):
        ns = g.neighbors_of(i)
        nnbr[i - 1] = len(ns)
        for a, j in enumerate(ns):
            nbrs[i - 1, a] = j - 1
    return nbrs, nnbr


def log_unnorm_density(K, params: GWishartParams) -> float:
    """((b-2)/2) log|K| - tr(D K)/2, with log|K| from a Cholesky factor."""
    K = np.asarray(K, dtype=float)
    L = _cholesky_or_raise(K, "precision matrix")
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    return 0.5 * (params.b - 2.0) * logdet - 0.5 * float(np.sum(params.D * K))


def complete_to_cone(sigma, g: Graph, tol: float = 1e-8,
                     max_sweeps: int = 1000) -> np.ndarray:
    """Map an SPD matrix sigma to the precision matrix K in the graph's
    cone whose inverse agrees with sigma on the diagonal and the edge set.

    Node sweeps run in ascending order until the largest entry change in a
    full sweep falls below tol; the result additionally satisfies the
    off-pattern zero tolerance (extra sweeps are spent if the first stop
    leaves a larger residual)."""
    if tol <= 0:
        raise InputError("tol must be positive")
    sigma = _check_symmetric(sigma, "input matrix")
    _cholesky_or_raise(sigma, "input matrix")
    if g.p != sigma.shape[0]:
        raise InputError("graph and matrix dimension mismatch")
    nbrs, nnbr = neighbor_arrays(g)
    omega = sigma.copy()
    total = 0
    cur_tol = tol
    while True:
        sweeps, last, ok = complete_inplace(omega, sigma, nbrs, nnbr,
                                            cur_tol, max_sweeps - total)
        total += sweeps
        K = _spd_inverse(omega)
        resid = pattern_residual(K, g)
        if ok and resid <= ZERO_PATTERN_TOL:
            return K
        if total >= max_sweeps:
            raise ConvergenceFailureError(
                f"completion did not converge in {max_sweeps} sweeps "
                f"(last change {last:.3e}, pattern residual {resid:.3e})",
                residual=max(last, resid))
        cur_tol = cur_tol / 10.0


def _spd_inverse(m):
    L = _cholesky_or_raise(m, "matrix to invert")
    inv_l = np.linalg.solve(L, np.eye(m.shape[0]))
    inv = inv_l.T @ inv_l
    return 0.5 * (inv + inv.T)


def sample(params: GWishartParams, g: Graph, rng=None,
           tol: float = 1e-8, max_sweeps: int = 1000) -> np.ndarray:
    """One exact draw from the G-Wishart on the cone of g.

    Draws an unconstrained Wishart precision with p+b-1 degrees of freedom
    and scale D^{-1} (Bartlett decomposition), inverts it, and completes
    the inverse onto the cone; for the full graph the completion changes
    nothing."""
    rng = rng if rng is not None else np.random.default_rng()
    p = params.p
    if g.p != p:
        raise InputError("graph and scale dimension mismatch")
    df = params.b + p - 1
    chol_si = np.linalg.cholesky(_spd_inverse(params.D))
    A = np.zeros((p, p))
    diag_draws = rng.chisquare(df - np.arange(p))
    np.fill_diagonal(A, np.sqrt(diag_draws))
    lower = np.tril_indices(p, -1)
    A[lower] = rng.standard_normal(len(lower[0]))
    T = chol_si @ A
    K_free = T @ T.T
    sigma = _spd_inverse(K_free)
    return complete_to_cone(sigma, g, tol=tol, max_sweeps=max_sweeps)


def _scalar_scale(D) -> float:
    """The c with D = c*I, or raise."""
    D = np.asarray(D, dtype=float)
    c = float(D[0, 0])
    if np.max(np.abs(D - c * np.eye(D.shape[0]))) > 1e-12 or c <= 0:
        raise UnsupportedScaleError(
            "Monte Carlo normalizing constant supports only scale matrices "
            "c*I; use log_norm_constant_exact for decomposable graphs or "
            "the marginal module for posterior ratios")
    return c


def log_norm_constant_mc(params: GWishartParams, g: Graph,
                         samples: int, rng=None) -> float:
    """Monte Carlo estimate of the log normalizing constant for D = c*I.

    Uses the triangular-completion construction: free elements of the
    upper Cholesky factor are chi/normal draws, constrained elements are
    filled in by the zero constraints, and the constant is the analytic
    free-element integral times the mean of exp(-sum(constrained^2)/2)."""
    if samples < 1:
        raise InputError("samples must be >= 1")
    rng = rng if rng is not None else np.random.default_rng()
    c = _scalar_scale(params.D)
    p, b = params.p, params.b
    if g.p != p:
        raise InputError("graph and scale dimension mismatch")
    adj = g.adjacency().astype(bool)
    nu = np.array([int(adj[i, i + 1:].sum()) for i in range(p)])
    n_edges = g.size

    psi = np.zeros((samples, p, p))
    diag = np.sqrt(rng.chisquare(b + nu, size=(samples, p)))
    for i in range(p):
        psi[:, i, i] = diag[:, i]
    sq_constrained = np.zeros(samples)
    for i in range(p):
        for j in range(i + 1, p):
            if adj[i, j]:
                psi[:, i, j] = rng.standard_normal(samples)
            elif i > 0:
                num = np.einsum("mk,mk->m", psi[:, :i, i], psi[:, :i, j])
                psi[:, i, j] = -num / psi[:, i, i]
                sq_constrained += psi[:, i, j] ** 2
            # i == 0 constrained entries stay exactly zero

    log_terms = -0.5 * sq_constrained
    shift = log_terms.max()
    log_mean = shift + math.log(np.mean(np.exp(log_terms - shift)))
    log_free = float(np.sum(0.5 * (b + nu) * math.log(2.0) + gammaln(0.5 * (b + nu))))
    log_free += 0.5 * n_edges * math.log(2.0 * math.pi)
    scale_term = -(0.5 * p * (b - 2.0) + p + n_edges) * math.log(c)
    return log_free + log_mean + scale_term


def _log_full_constant(b: float, D_sub: np.ndarray) -> float:
    """Closed-form constant of the unconstrained (full-graph) case on a
    sub-block of D."""
    c = D_sub.shape[0]
    if c == 0:
        return 0.0
    half = 0.5 * (b + c - 1.0)
    sign, logdet = np.linalg.slogdet(D_sub)
    if sign <= 0:
        raise NotPositiveDefiniteError("scale sub-block is not positive definite")
    return c * half * math.log(2.0) + multigammaln(half, c) - half * logdet


def log_norm_constant_exact(params: GWishartParams, g: Graph) -> float:
    """Closed-form log normalizing constant for decomposable graphs:
    product over cliques divided by product over separators of the
    unconstrained constant on the corresponding sub-blocks of D."""
    p, b, D = params.p, params.b, np.asarray(params.D, dtype=float)
    if g.p != p:
        raise InputError("graph and scale dimension mismatch")
    gx = nx.Graph()
    gx.add_nodes_from(range(p))
    gx.add_edges_from((i - 1, j - 1) for (i, j) in g.edges)
    if not nx.is_chordal(gx):
        raise NotDecomposableError("graph is not decomposable (chordal)")
    cliques = [sorted(c) for c in nx.chordal_graph_cliques(gx)]
    total = sum(_log_full_constant(b, D[np.ix_(c, c)]) for c in cliques)
    # Separators from a maximum-weight spanning forest of the clique graph.
    if len(cliques) > 1:
        cg = nx.Graph()
        cg.add_nodes_from(range(len(cliques)))
        for a in range(len(cliques)):
            for bidx in range(a + 1, len(cliques)):
                inter = set(cliques[a]) & set(cliques[bidx])
                if inter:
                    cg.add_edge(a, bidx, weight=len(inter))
        for (a, bidx) in nx.maximum_spanning_tree(cg).edges():
            sep = sorted(set(cliques[a]) & set(cliques[bidx]))
            total -= _log_full_constant(b, D[np.ix_(sep, sep)])
    return total
