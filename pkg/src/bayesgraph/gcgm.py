"""Gaussian copula layer for mixed discrete/continuous data: latent
Gibbs updates with rank-derived truncation bounds, missing-data handling,
and the rank-based Gaussianization shortcut for continuous columns."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm, rankdata

from . import gwishart
from .errors import DegenerateColumnError, InputError, TruncationError
from .ggm import (ChainState, ChainTrace, SamplerConfig, _initial_state,
                  _posterior_params, bd_step, rj_step)
from .gwishart import GWishartParams
from .marginal import MarginalBackend, MarginalCache, data_fingerprint

COLUMN_KINDS = ("continuous", "ordinal", "count", "binary")
_TAIL_SD = 5.0


@dataclass
class MixedData:
    """n x p observations with per-column kinds and a missing mask.

    Discrete kinds (ordinal, count, binary) must hold integers where
    observed; every column needs at least one observed value."""

    Y: np.ndarray
    kinds: list
    missing: np.ndarray = None

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float)
        if Y.ndim != 2:
            raise InputError("Y must be a 2-d array")
        n, p = Y.shape
        if len(self.kinds) != p:
            raise InputError(f"{len(self.kinds)} kinds for {p} columns")
        for k in self.kinds:
            if k not in COLUMN_KINDS:
                raise InputError(f"unknown column kind {k!r}")
        if self.missing is None:
            missing = ~np.isfinite(Y)
        else:
            missing = np.asarray(self.missing, dtype=bool)
            if missing.shape != Y.shape:
                raise InputError("missing mask shape mismatch")
            missing = missing | ~np.isfinite(Y)
        for j, kind in enumerate(self.kinds):
            obs = Y[~missing[:, j], j]
            if obs.size == 0:
                raise InputError(f"column {j} has no observed values")
            if kind != "continuous" and np.any(obs != np.round(obs)):
                raise InputError(f"{kind} column {j} contains non-integers")
        Y = Y.copy()
        Y[missing] = np.nan
        self.Y = Y
        self.missing = missing

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def p(self) -> int:
        return self.Y.shape[1]


@dataclass
class LatentState:
    """Latent Gaussian matrix Z matching the observed data's ordering
    constraints column by column."""

    Z: np.ndarray


def truncation_bounds(Y_col, Z_col, r: int, missing=None):
    """Interval (L, U) for the latent value of observed cell r in one
    column: L is the largest latent value among strictly smaller observed
    categories, U the smallest among strictly larger ones; ties bound
    neither side.  Empty sets give -inf / +inf."""
    Y_col = np.asarray(Y_col, dtype=float)
    Z_col = np.asarray(Z_col, dtype=float)
    if missing is None:
        missing = ~np.isfinite(Y_col)
    lower = (~missing) & (Y_col < Y_col[r])
    upper = (~missing) & (Y_col > Y_col[r])
    L = float(Z_col[lower].max()) if lower.any() else -np.inf
    U = float(Z_col[upper].min()) if upper.any() else np.inf
    return L, U


def _sample_truncnorm(mean, sd, L, U, rng):
    """Vectorized draws from N(mean, sd^2) truncated to (L, U).

    Inverse CDF in the central region; exponential-rejection tail sampler
    when the whole interval lies beyond 5 standard deviations.  Intervals
    of zero numerical width trigger jitter-and-retry, then an error."""
    mean = np.asarray(mean, dtype=float)
    n = mean.shape[0]
    a = (np.broadcast_to(L, (n,)) - mean) / sd
    b = (np.broadcast_to(U, (n,)) - mean) / sd
    out = np.empty(n)
    right_tail = a >= _TAIL_SD
    left_tail = b <= -_TAIL_SD
    central = ~(right_tail | left_tail)

    if central.any():
        fa = norm.cdf(a[central])
        fb = norm.cdf(b[central])
        z = np.full(central.sum(), np.nan)
        lo, hi = fa.copy(), fb.copy()
        for _ in range(10):
            bad = ~np.isfinite(z) | (z < a[central]) | (z > b[central])
            if not bad.any():
                break
            u = rng.uniform(lo[bad], hi[bad])
            z[bad] = norm.ppf(u)
            # widen degenerate probability intervals slightly and retry
            width = hi[bad] - lo[bad]
            collapse = width <= 0
            if collapse.any():
                idx = np.flatnonzero(bad)[collapse]
                lo[idx] = np.nextafter(lo[idx], -np.inf)
                hi[idx] = np.nextafter(hi[idx], np.inf)
        bad = ~np.isfinite(z) | (z < a[central]) | (z > b[central])
        if bad.any():
            # fall back to the nearest representable interior point
            mid = 0.5 * (np.clip(a[central], -_TAIL_SD, _TAIL_SD)
                         + np.clip(b[central], -_TAIL_SD, _TAIL_SD))
            z[bad] = mid[bad]
            if np.any(z[bad] < a[central][bad]) or np.any(z[bad] > b[central][bad]):
                raise TruncationError("truncation interval has zero numerical width")
        out[central] = z

    for mask, flip in ((right_tail, False), (left_tail, True)):
        if not mask.any():
            continue
        lo_t = np.where(flip, -b[mask], a[mask])
        hi_t = np.where(flip, -a[mask], b[mask])
        z = np.empty(mask.sum())
        todo = np.ones(mask.sum(), dtype=bool)
        for attempt in range(1000):
            if not todo.any():
                break
            m = todo.sum()
            # exponential proposal with optimal rate for the left endpoint
            rate = 0.5 * (lo_t[todo] + np.sqrt(lo_t[todo] ** 2 + 4.0))
            draw = lo_t[todo] + rng.exponential(1.0, m) / rate
            acc = (rng.random(m) <= np.exp(-0.5 * (draw - rate) ** 2)) \
                & (draw <= hi_t[todo])
            idx = np.flatnonzero(todo)
            z[idx[acc]] = draw[acc]
            todo[idx[acc]] = False
        if todo.any():
            # interval numerically empty in the far tail: pin to endpoint
            idx = np.flatnonzero(todo)
            z[idx] = lo_t[idx]
            if np.any(z[idx] > hi_t[idx]):
                raise TruncationError("truncation interval has zero numerical width")
        out[mask] = np.where(flip, -z, z)
    return mean + sd * out


def gibbs_update_latent(state: LatentState, data: MixedData, K, rng) -> LatentState:
    """One full Gibbs sweep of the latent matrix.

    Variables are visited in canonical order.  For each variable the
    conditional given the other columns is N(-sum_r' K_{rr'} z_{r'} / K_rr,
    1/K_rr) per observation; observed cells are truncated to their current
    rank bounds, missing cells are drawn untruncated.  Within a variable,
    observations sharing a category are updated as a block: their bounds
    come from other categories only, so the block draws are conditionally
    independent and every draw lands strictly inside its bounds."""
    K = np.asarray(K, dtype=float)
    Z = np.array(state.Z, dtype=float)
    n, p = Z.shape
    for r in range(p):
        sd = 1.0 / np.sqrt(K[r, r])
        others = np.delete(np.arange(p), r)
        mean = -(Z[:, others] @ K[others, r]) / K[r, r]
        miss = data.missing[:, r]
        if miss.any():
            Z[miss, r] = mean[miss] + sd * rng.standard_normal(int(miss.sum()))
        y = data.Y[:, r]
        obs_vals = np.unique(y[~miss])
        for v in obs_vals:
            block = (~miss) & (y == v)
            below = (~miss) & (y < v)
            above = (~miss) & (y > v)
            L = Z[below, r].max() if below.any() else -np.inf
            U = Z[above, r].min() if above.any() else np.inf
            Z[block, r] = _sample_truncnorm(mean[block], sd, L, U, rng)
    return LatentState(Z)


def gaussianize(Y_col):
    """Rank-based transform of a fully observed continuous column to
    standard normal scores: value -> Phi^{-1}(rank / (n+1)) with average
    ranks for ties."""
    y = np.asarray(Y_col, dtype=float)
    if y.ndim != 1:
        raise InputError("gaussianize expects a single column")
    if not np.all(np.isfinite(y)):
        raise InputError("gaussianize requires a fully observed column")
    if np.all(y == y[0]):
        raise DegenerateColumnError("cannot gaussianize a constant column")
    return norm.ppf(rankdata(y, method="average") / (len(y) + 1))


def initial_latent(data: MixedData) -> LatentState:
    """Starting Z: per-column normal scores Phi^{-1}((rank - 0.5)/n) over
    observed cells with average ranks for ties, tie groups spread by a
    1e-6 rank perturbation so containment is strict; missing cells 0."""
    n, p = data.n, data.p
    Z = np.zeros((n, p))
    for j in range(p):
        obs = ~data.missing[:, j]
        y = data.Y[obs, j]
        ranks = rankdata(y, method="average")
        base = norm.ppf((ranks - 0.5) / len(y))
        order = rankdata(y, method="ordinal")
        Z[obs, j] = base + 1e-6 * (order - ranks)
    return LatentState(Z)


def check_containment(state: LatentState, data: MixedData) -> bool:
    """True when every observed latent value lies strictly inside its
    recomputed truncation bounds."""
    for j in range(data.p):
        miss = data.missing[:, j]
        for r in np.flatnonzero(~miss):
            L, U = truncation_bounds(data.Y[:, j], state.Z[:, j], r, miss)
            if not (L < state.Z[r, j] < U):
                return False
    return True


def run_chain_gcgm(data: MixedData, config: SamplerConfig | None = None,
                   latent_callback=None) -> ChainTrace:
    """Run one copula-layer chain on mixed data.

    Each iteration: one latent Gibbs sweep given the current K, then one
    graph/precision step of the configured algorithm on S = Z'Z.  The
    marginal cache is rebuilt every iteration since S moves with Z."""
    config = config if config is not None else SamplerConfig(method="gcgm")
    if data.p < 2:
        raise InputError(f"need p >= 2 variables, got {data.p}")
    p, n = data.p, data.n
    rng = np.random.default_rng(config.seed)
    prior = GWishartParams(config.prior_df, np.eye(p))
    backend = MarginalBackend(prior, mc_samples=config.mc_samples,
                              crn_seed=int(rng.integers(2 ** 63)))

    latent = initial_latent(data)
    S0 = latent.Z.T @ latent.Z
    post0 = _posterior_params(prior, S0, n)
    state = _initial_state(config, post0, backend, rng)

    trace = ChainTrace(p, config.algorithm, config.iter, config.burnin,
                       save_all=config.save_all)
    for t in range(config.iter):
        latent = gibbs_update_latent(latent, data, state.K, rng)
        S = latent.Z.T @ latent.Z
        post_params = _posterior_params(prior, S, n)
        cache = MarginalCache(data_fingerprint(S, n))
        # fresh shared variates each sweep: estimator noise then averages
        # out across iterations instead of biasing the whole run
        backend.crn_seed = int(rng.integers(2 ** 63))
        backend._sigmas = None
        if config.algorithm == "bdmcmc":
            new_state, weight = bd_step(state, S, n, backend, cache, rng,
                                        post_params=post_params)
            if t >= config.burnin:
                trace.record(state.g, state.K, weight)
            state = new_state
        else:
            state = rj_step(state, S, n, backend, cache, rng,
                            post_params=post_params)
            if t >= config.burnin:
                trace.record(state.g, state.K, 1.0)
        if latent_callback is not None:
            latent_callback(t, latent, state)
    trace.final_state = state
    return trace
