"""Posterior summaries of a chain trace: Rao-Blackwellized edge
inclusion probabilities, the weighted average precision matrix, BMA and
MAP graph selection, and the visited-graph table."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NoSamplesError, RequiresHistoryError
from .ggm import ChainTrace
from .graphs import Graph, GraphKey, decode_key


@dataclass
class PosteriorSummary:
    """Bundle of the standard outputs: edge probabilities (upper
    triangle), averaged precision matrix, selected graph, and the visited
    graphs with normalized weights in descending order."""

    plinks: np.ndarray
    K_hat: np.ndarray | None
    selected: Graph
    graph_table: list


def plinks(trace: ChainTrace) -> np.ndarray:
    """Posterior edge inclusion probabilities: the weighted frequency of
    each edge over the recorded iterations (weights are sojourn times for
    bdmcmc and all 1 for rjmcmc), as an upper-triangular p x p matrix."""
    if len(trace) == 0:
        raise NoSamplesError("trace holds no recorded iterations")
    if trace.edge_sum is None:
        raise RequiresHistoryError(
            "trace was loaded without edge accumulators or key history")
    m = trace.edge_sum / trace.total_weight
    return np.triu(m, k=1)


def k_hat(trace: ChainTrace) -> np.ndarray:
    """Weighted average of the sampled precision matrices."""
    if len(trace) == 0:
        raise NoSamplesError("trace holds no recorded iterations")
    if trace.k_sum is None:
        raise RequiresHistoryError("trace carries no precision accumulator")
    return trace.k_sum / trace.total_weight


def select_bma(plinks_matrix, cut: float = 0.5) -> Graph:
    """Model-averaged selection: include each edge whose inclusion
    probability strictly exceeds the cut (so cut=1 gives the empty
    graph)."""
    if not 0.0 <= cut <= 1.0:
        raise InputError(f"cut must be in [0,1], got {cut}")
    m = np.asarray(plinks_matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError("plinks must be a square matrix")
    p = m.shape[0]
    edges = {(i + 1, j + 1) for i in range(p) for j in range(i + 1, p)
             if m[i, j] > cut}
    return Graph(p, frozenset(edges))


def graph_table(trace: ChainTrace) -> list:
    """Visited graphs as (GraphKey, normalized weight), sorted by weight
    descending with ties broken by first visit."""
    if len(trace) == 0:
        raise NoSamplesError("trace holds no recorded iterations")
    if trace.keys is None:
        raise RequiresHistoryError("graph table needs a save_all trace")
    totals: dict[bytes, float] = {}
    first: dict[bytes, int] = {}
    for i, w in enumerate(trace.weights):
        bits = trace.keys.get_bits(i)
        if bits not in totals:
            totals[bits] = 0.0
            first[bits] = i
        totals[bits] += w
    order = sorted(totals, key=lambda b: (-totals[b], first[b]))
    return [(GraphKey(trace.p, b), totals[b] / trace.total_weight) for b in order]


def select_map(trace: ChainTrace) -> Graph:
    """Maximum a posteriori selection: the visited graph with the largest
    accumulated weight (needs the save_all key history)."""
    table = graph_table(trace)
    return decode_key(table[0][0])


def summarize(trace: ChainTrace, cut: float = 0.5) -> PosteriorSummary:
    """The full summary bundle; the graph table is empty without a
    save_all history, and K_hat is omitted when unavailable."""
    pl = plinks(trace)
    kh = k_hat(trace) if trace.k_sum is not None else None
    table = graph_table(trace) if trace.keys is not None else []
    return PosteriorSummary(pl, kh, select_bma(pl, cut), table)
