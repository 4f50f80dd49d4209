"""Synthetic data generation: draw a graph, a compatible precision
matrix, and Gaussian / discrete / binary / non-Gaussian / mixed
observations linked to the latent Gaussian by monotone marginal maps."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import expon, poisson

from . import gwishart
from .errors import InputError, NotPositiveDefiniteError
from .graphs import Graph, GraphFamily, generate_graph
from .gwishart import GWishartParams, _spd_inverse, validate_precision

DATA_TYPES = ("Gaussian", "non-Gaussian", "discrete", "binary", "mixed")
_MIXED_CYCLE = ("count", "ordinal", "binary", "Gaussian", "non-Gaussian")
_KIND_OF = {"count": "count", "ordinal": "ordinal", "binary": "binary",
            "Gaussian": "continuous", "non-Gaussian": "continuous"}


@dataclass
class SimSpec:
    """What to simulate: size, data type, graph family, discretization
    level, and the G-Wishart prior used to draw the precision matrix."""

    n: int
    p: int
    data_type: str = "Gaussian"
    family: GraphFamily = field(default_factory=lambda: GraphFamily("random"))
    cut: int = 4
    b: float = 3.0
    K: np.ndarray | None = None
    sigma: np.ndarray | None = None

    def __post_init__(self):
        if self.n < 1 or self.p < 2 or self.cut < 2:
            raise InputError(
                f"need n >= 1, p >= 2, cut >= 2; got n={self.n} p={self.p} cut={self.cut}")
        if self.data_type not in DATA_TYPES:
            raise InputError(f"unknown data type {self.data_type!r}")
        if self.K is not None and self.sigma is not None:
            K = np.asarray(self.K, dtype=float)
            sigma = np.asarray(self.sigma, dtype=float)
            if np.max(np.abs(K @ sigma - np.eye(self.p))) > 1e-6:
                raise InputError("supplied K and sigma are not inverses")


@dataclass
class SimOutput:
    """Simulated observations plus the generating truth."""

    data: np.ndarray
    graph: Graph
    K: np.ndarray
    kinds: list


def _band_matrix(p: int, bands: dict) -> np.ndarray:
    K = np.eye(p)
    for off, val in bands.items():
        for i in range(p - off):
            K[i, i + off] = val
            K[i + off, i] = val
    return K


def simulate_precision(g: Graph, family: GraphFamily, rng=None) -> np.ndarray:
    """Precision matrix compatible with g: the fixed band matrices for
    AR2 and circle, otherwise an exact W_G(3, I) draw on the graph."""
    p = g.p
    if family.kind == "AR2":
        K = _band_matrix(p, {1: 0.5, 2: 0.25})
    elif family.kind == "circle":
        K = _band_matrix(p, {1: 0.5})
        K[0, p - 1] = K[p - 1, 0] = 0.4
    else:
        rng = rng if rng is not None else np.random.default_rng()
        return gwishart.sample(GWishartParams(3.0, np.eye(p)), g, rng)
    return validate_precision(K, g)


def _latent_gaussian(spec: SimSpec, g: Graph, rng):
    if spec.K is not None:
        K = validate_precision(np.asarray(spec.K, dtype=float), g)
        sigma = _spd_inverse(K)
    elif spec.sigma is not None:
        sigma = np.asarray(spec.sigma, dtype=float)
        K = validate_precision(_spd_inverse(sigma), g)
    else:
        K = simulate_precision(g, spec.family, rng)
        sigma = _spd_inverse(K)
    L = np.linalg.cholesky(sigma)
    X = rng.standard_normal((spec.n, spec.p)) @ L.T
    return X, K


def _discretize(x, cut):
    """Cut a column into 1..cut categories at its empirical quantiles."""
    qs = np.quantile(x, np.linspace(0, 1, cut + 1)[1:-1])
    return (np.searchsorted(qs, x, side="left") + 1).astype(float)


def _quantile_map(x, dist):
    """Monotone map to the target marginal via the latent normal CDF."""
    from scipy.stats import norm
    return dist.ppf(norm.cdf(x))


def simulate_data(spec: SimSpec, rng=None) -> SimOutput:
    """Draw the true graph, the true precision matrix K, latent rows
    X ~ N_p(0, K^{-1}) i.i.d., and observations per data type:

    Gaussian is X itself; discrete cuts each column into `cut` equal-mass
    categories; binary is a median split; non-Gaussian maps each column to
    an exponential(1) marginal; mixed assigns column kinds round-robin
    over (count, ordinal, binary, Gaussian, non-Gaussian) with count via
    a Poisson(5) quantile map."""
    rng = rng if rng is not None else np.random.default_rng()
    g = generate_graph(spec.family, spec.p, rng)
    X, K = _latent_gaussian(spec, g, rng)
    p = spec.p

    if spec.data_type == "Gaussian":
        return SimOutput(X, g, K, ["continuous"] * p)
    if spec.data_type == "non-Gaussian":
        Y = np.column_stack([_quantile_map(X[:, j], expon()) for j in range(p)])
        return SimOutput(Y, g, K, ["continuous"] * p)
    if spec.data_type == "discrete":
        Y = np.column_stack([_discretize(X[:, j], spec.cut) for j in range(p)])
        return SimOutput(Y, g, K, ["ordinal"] * p)
    if spec.data_type == "binary":
        Y = np.column_stack([_discretize(X[:, j], 2) for j in range(p)])
        return SimOutput(Y, g, K, ["binary"] * p)

    cols, kinds = [], []
    for j in range(p):
        role = _MIXED_CYCLE[j % len(_MIXED_CYCLE)]
        kinds.append(_KIND_OF[role])
        x = X[:, j]
        if role == "count":
            cols.append(_quantile_map(x, poisson(5)).astype(float))
        elif role == "ordinal":
            cols.append(_discretize(x, spec.cut))
        elif role == "binary":
            cols.append(_discretize(x, 2))
        elif role == "Gaussian":
            cols.append(x)
        else:
            cols.append(_quantile_map(x, expon()))
    return SimOutput(np.column_stack(cols), g, K, kinds)
