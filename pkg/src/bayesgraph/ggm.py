"""Trans-dimensional samplers over (graph, precision matrix) for Gaussian
data: continuous-time birth-death MCMC with Rao-Blackwell sojourn weights,
and discrete-time reversible-jump MCMC, sharing one marginal-rate backend."""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import gwishart
from .errors import (DegenerateRatesError, InputError, NoSamplesError,
                     RequiresHistoryError)
from .graphs import (Graph, GraphKey, KeyStore, decode_key, encode_key,
                     iter_cells, key_length, n_cells)
from .gwishart import GWishartParams
from .marginal import (MarginalBackend, MarginalCache, data_fingerprint,
                       log_marginal)

ALGORITHMS = ("bdmcmc", "rjmcmc")
METHODS = ("ggm", "gcgm")
RATE_FLOOR = 1e-300
RATE_CEIL = 1e300

_TRACE_MAGIC = b"BGTR"
_ALGO_CODE = {"bdmcmc": 0, "rjmcmc": 1}
_ALGO_NAME = {v: k for k, v in _ALGO_CODE.items()}


@dataclass
class SamplerConfig:
    """Run-length, algorithm and prior settings for one chain."""

    iter: int = 5000
    burnin: int | None = None
    algorithm: str = "bdmcmc"
    method: str = "ggm"
    g_start: object = "empty"  # "empty", "full", or a ChainState to resume
    prior_df: float = 3.0
    save_all: bool = False
    seed: int | None = None
    mc_samples: int = 200

    def __post_init__(self):
        if self.burnin is None:
            self.burnin = self.iter // 2
        if self.iter < 1 or not (0 <= self.burnin < self.iter):
            raise InputError(
                f"need 0 <= burnin < iter, got burnin={self.burnin} iter={self.iter}")
        if self.algorithm not in ALGORITHMS:
            raise InputError(f"unknown algorithm {self.algorithm!r}")
        if self.method not in METHODS:
            raise InputError(f"unknown method {self.method!r}")
        if not self.prior_df > 2:
            raise InputError(f"prior_df must exceed 2, got {self.prior_df}")
        if self.mc_samples < 1:
            raise InputError("mc_samples must be >= 1")


@dataclass
class ChainState:
    """Current graph, compatible precision matrix, and iteration index."""

    g: Graph
    K: np.ndarray
    iteration: int = 0


class ChainTrace:
    """Post-burn-in record of a chain.

    Stores per-iteration weight and graph size, running weighted
    accumulators (edge indicators, precision matrix, total weight), and
    the full key history when save_all was requested."""

    def __init__(self, p: int, algorithm: str, iterations: int, burnin: int,
                 save_all: bool = False):
        if algorithm not in ALGORITHMS:
            raise InputError(f"unknown algorithm {algorithm!r}")
        self.p = p
        self.algorithm = algorithm
        self.iterations = iterations
        self.burnin = burnin
        self.save_all = save_all
        self.weights: list[float] = []
        self.sizes: list[int] = []
        self.keys: KeyStore | None = KeyStore(p) if save_all else None
        self.edge_sum: np.ndarray | None = np.zeros((p, p))
        self.k_sum: np.ndarray | None = np.zeros((p, p))
        self.total_weight = 0.0

    def __len__(self) -> int:
        return len(self.weights)

    def record(self, g: Graph, K: np.ndarray, weight: float) -> None:
        if weight <= 0:
            raise InputError(f"trace weights must be positive, got {weight}")
        self.weights.append(float(weight))
        self.sizes.append(g.size)
        if self.keys is not None:
            self.keys.append(encode_key(g))
        adj = g.adjacency().astype(float)
        self.edge_sum += weight * adj
        self.k_sum += weight * np.asarray(K, dtype=float)
        self.total_weight += float(weight)

    def merge(self, other: "ChainTrace") -> "ChainTrace":
        """Concatenate two traces over the same problem (e.g. parallel
        chains); accumulators add, key history is kept only if both sides
        have it."""
        if other.p != self.p or other.algorithm != self.algorithm:
            raise InputError("cannot merge traces from different problems")
        both_keys = self.keys is not None and other.keys is not None
        out = ChainTrace(self.p, self.algorithm,
                         self.iterations + other.iterations,
                         self.burnin + other.burnin, save_all=both_keys)
        out.weights = self.weights + other.weights
        out.sizes = self.sizes + other.sizes
        if both_keys:
            for store in (self.keys, other.keys):
                for i in range(len(store)):
                    out.keys.append_bits(store.get_bits(i))
        if self.edge_sum is None or other.edge_sum is None:
            out.edge_sum = None
            out.k_sum = None
        else:
            out.edge_sum = self.edge_sum + other.edge_sum
            out.k_sum = self.k_sum + other.k_sum
        out.total_weight = self.total_weight + other.total_weight
        return out

    def save(self, path) -> None:
        """Binary trace file: header (p, iter, burnin, algorithm,
        save_all, record count), then per-record key bytes (only when
        save_all), weight as an 8-byte float and size as a 4-byte int."""
        with open(path, "wb") as fh:
            fh.write(_TRACE_MAGIC)
            fh.write(struct.pack("<HIIIBBI", 1, self.p, self.iterations,
                                 self.burnin, _ALGO_CODE[self.algorithm],
                                 1 if self.save_all else 0, len(self.weights)))
            for i, (w, s) in enumerate(zip(self.weights, self.sizes)):
                if self.keys is not None:
                    fh.write(self.keys.get_bits(i))
                fh.write(struct.pack("<dI", w, s))

    @classmethod
    def load(cls, path) -> "ChainTrace":
        """Read a trace file.  Accumulators are rebuilt from the key
        history when present; the precision accumulator is not stored in
        the file and stays unavailable on a loaded trace."""
        with open(path, "rb") as fh:
            if fh.read(4) != _TRACE_MAGIC:
                raise InputError(f"{path} is not a trace file")
            version, p, iters, burnin, algo, save_all, count = struct.unpack(
                "<HIIIBBI", fh.read(20))
            if version != 1 or algo not in _ALGO_NAME:
                raise InputError(f"unsupported trace file version in {path}")
            trace = cls(p, _ALGO_NAME[algo], iters, burnin, save_all=bool(save_all))
            trace.k_sum = None
            if not save_all:
                trace.edge_sum = None
            klen = key_length(p)
            for _ in range(count):
                if save_all:
                    bits = fh.read(klen)
                    trace.keys.append_bits(bits)
                w, s = struct.unpack("<dI", fh.read(12))
                trace.weights.append(w)
                trace.sizes.append(s)
                trace.total_weight += w
                if save_all:
                    g = decode_key(GraphKey(p, bits))
                    trace.edge_sum += w * g.adjacency().astype(float)
        return trace


def _clamped_rate(log_ratio: float, edge) -> float:
    """Metropolized jump rate exp(min(0, log_ratio)): the capped rates
    keep every birth/death ratio equal to the posterior ratio of the two
    graphs, so the jump process is balanced with respect to the graph
    posterior itself.  Clamped away from 0 so totals stay positive."""
    rate = float(np.exp(min(0.0, log_ratio)))
    if rate < RATE_FLOOR:
        warnings.warn(f"rate for edge {edge} clamped to {RATE_FLOOR}",
                      RuntimeWarning, stacklevel=3)
        rate = RATE_FLOOR
    if rate > RATE_CEIL:  # unreachable with capped rates; kept as a guard
        warnings.warn(f"rate for edge {edge} clamped to {RATE_CEIL}",
                      RuntimeWarning, stacklevel=3)
        rate = RATE_CEIL
    return rate


def _log_marginals_around(g: Graph, S, n, backend, cache, rng):
    """Current graph's log marginal plus one per single-edge move, in
    canonical cell order: list of (edge, kind, log_ratio)."""
    base = log_marginal(g, S, n, backend, cache, rng)
    out = []
    for (i, j) in iter_cells(g.p):
        if (i, j) in g.edges:
            nb, kind = g.without_edge(i, j), "death"
        else:
            nb, kind = g.with_edge(i, j), "birth"
        lm = log_marginal(nb, S, n, backend, cache, rng)
        prior = backend.log_graph_prior(nb) - backend.log_graph_prior(g)
        out.append(((i, j), kind, lm - base + prior))
    return out


def bd_rates(state: ChainState, S, n: int, backend: MarginalBackend,
             cache: MarginalCache | None = None, rng=None):
    """Birth rates for absent edges and death rates for present edges.

    Returns (births, deaths) as dicts keyed by canonical edge."""
    births, deaths = {}, {}
    for edge, kind, lr in _log_marginals_around(state.g, S, n, backend, cache, rng):
        rate = _clamped_rate(lr, edge)
        (births if kind == "birth" else deaths)[edge] = rate
    return births, deaths


def _select_jump(moves, rng):
    """Cumulative-sum inversion over rates in canonical edge order.

    moves: list of (edge, kind, rate).  Returns (edge, kind, total_rate)."""
    total = sum(r for (_, _, r) in moves)
    if not total > 0.0:
        raise DegenerateRatesError("all birth/death rates vanished")
    u = rng.random() * total
    acc = 0.0
    for edge, kind, rate in moves:
        acc += rate
        if u <= acc:
            return edge, kind, total
    return moves[-1][0], moves[-1][1], total


def bd_step(state: ChainState, S, n: int, backend: MarginalBackend,
            cache: MarginalCache | None, rng,
            post_params: GWishartParams | None = None):
    """One birth-death transition from the current state.

    Returns (new state, sojourn weight W) where W = 1/(total birth rate +
    total death rate) is the deterministic expected waiting time at the
    current state; the jumped-to graph gets a fresh exact draw of K from
    its G-Wishart posterior."""
    g = state.g
    moves = [(edge, kind, _clamped_rate(lr, edge))
             for edge, kind, lr in _log_marginals_around(g, S, n, backend, cache, rng)]
    edge, kind, total = _select_jump(moves, rng)
    weight = 1.0 / total
    g_new = g.without_edge(*edge) if kind == "death" else g.with_edge(*edge)
    if post_params is None:
        post_params = _posterior_params(backend.prior, S, n)
    # exact draw at the tight default tolerances: recorded states must
    # satisfy the SPD/zero-pattern invariants, unlike the completions
    # inside the marginal estimator
    K_new = gwishart.sample(post_params, g_new, rng)
    return ChainState(g_new, K_new, state.iteration + 1), weight


def rj_step(state: ChainState, S, n: int, backend: MarginalBackend,
            cache: MarginalCache | None, rng,
            post_params: GWishartParams | None = None) -> ChainState:
    """One reversible-jump transition: toggle a uniformly chosen edge
    cell, accept with probability min(1, posterior ratio), then resample
    K from the G-Wishart posterior on the (possibly unchanged) graph."""
    g = state.g
    cells = list(iter_cells(g.p))
    i, j = cells[int(rng.integers(len(cells)))]
    proposal = g.without_edge(i, j) if (i, j) in g.edges else g.with_edge(i, j)
    base = log_marginal(g, S, n, backend, cache, rng)
    prop = log_marginal(proposal, S, n, backend, cache, rng)
    log_ratio = (prop - base
                 + backend.log_graph_prior(proposal) - backend.log_graph_prior(g))
    if np.log(rng.random()) < min(0.0, log_ratio):
        g = proposal
    if post_params is None:
        post_params = _posterior_params(backend.prior, S, n)
    K_new = gwishart.sample(post_params, g, rng)
    return ChainState(g, K_new, state.iteration + 1)


def _posterior_params(prior: GWishartParams, S, n: int) -> GWishartParams:
    """Conjugate update: W_G(b, D) with Gaussian cross-product S of n rows
    gives W_G(b + n, D + S)."""
    return GWishartParams(prior.b + n, prior.D + np.asarray(S, dtype=float))


def _resolve_data(data, S, n, config: SamplerConfig):
    if data is not None:
        data = np.asarray(data, dtype=float)
        if data.ndim != 2:
            raise InputError("data must be a 2-d array (observations x variables)")
        if not np.all(np.isfinite(data)):
            raise InputError("data contains non-finite values")
        if data.shape[0] < 1:
            raise InputError("need at least one observation")
        S = data.T @ data
        n = data.shape[0]
    elif S is None or n is None:
        raise InputError("supply either data or a cross-product matrix S with n")
    S = np.asarray(S, dtype=float)
    if S.shape[0] < 2:
        raise InputError(f"need p >= 2 variables, got {S.shape[0]}")
    return S, int(n)


def _initial_state(config: SamplerConfig, post_params: GWishartParams,
                   backend: MarginalBackend, rng) -> ChainState:
    if isinstance(config.g_start, ChainState):
        return ChainState(config.g_start.g, np.array(config.g_start.K, dtype=float),
                          config.g_start.iteration)
    if config.g_start == "empty":
        g = Graph.empty(post_params.p)
    elif config.g_start == "full":
        g = Graph.full(post_params.p)
    else:
        raise InputError(f"unknown g_start {config.g_start!r}")
    K = gwishart.sample(post_params, g, rng)
    return ChainState(g, K, 0)


def run_chain(data=None, S=None, n=None, config: SamplerConfig | None = None,
              cache: MarginalCache | None = None) -> ChainTrace:
    """Run one chain of the configured algorithm on Gaussian data (or a
    precomputed cross-product matrix) and return its post-burn-in trace.

    BDMCMC records the pre-jump state each iteration with its sojourn
    weight; RJMCMC records each post-move state with weight 1.
    Deterministic given config.seed."""
    config = config if config is not None else SamplerConfig()
    S, n = _resolve_data(data, S, n, config)
    p = S.shape[0]
    rng = np.random.default_rng(config.seed)
    prior = GWishartParams(config.prior_df, np.eye(p))
    backend = MarginalBackend(prior, mc_samples=config.mc_samples,
                              crn_seed=int(rng.integers(2 ** 63)))
    if cache is None:
        cache = MarginalCache(data_fingerprint(S, n))
    post_params = _posterior_params(prior, S, n)
    state = _initial_state(config, post_params, backend, rng)

    trace = ChainTrace(p, config.algorithm, config.iter, config.burnin,
                       save_all=config.save_all)
    for t in range(config.iter):
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
    trace.final_state = state
    return trace
