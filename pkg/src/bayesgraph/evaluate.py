"""Structure-recovery metrics (confusion counts, F1, ROC/AUC from edge
probabilities) and convergence-diagnostic series (running edge-probability
traces, graph-size trace, ACF/PACF)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRocError, InputError, NoSamplesError
from .ggm import ChainTrace
from .graphs import Graph, iter_cells, n_cells


@dataclass
class MetricsReport:
    """Confusion counts over the upper-triangle cells plus derived rates."""

    TP: int
    TN: int
    FP: int
    FN: int
    TPR: float
    FPR: float
    accuracy: float
    F1: float
    PPV: float


@dataclass
class RocCurve:
    """ROC polyline at equally spaced thresholds plus the exact AUC from
    the full sorted sweep over distinct probability values."""

    thresholds: np.ndarray
    points: list  # (FPR, TPR) per threshold
    auc: float


def _ratio(num, den):
    return num / den if den > 0 else 0.0


def compare(truth: Graph, estimate: Graph) -> MetricsReport:
    """Edgewise confusion of an estimated graph against the truth."""
    if truth.p != estimate.p:
        raise InputError("graphs have different node counts")
    tp = len(truth.edges & estimate.edges)
    fp = len(estimate.edges - truth.edges)
    fn = len(truth.edges - estimate.edges)
    tn = n_cells(truth.p) - tp - fp - fn
    return MetricsReport(
        TP=tp, TN=tn, FP=fp, FN=fn,
        TPR=_ratio(tp, tp + fn),
        FPR=_ratio(fp, fp + tn),
        accuracy=_ratio(tp + tn, n_cells(truth.p)),
        F1=_ratio(2 * tp, 2 * tp + fp + fn),
        PPV=_ratio(tp, tp + fp),
    )


def _rates_at(truth_mask, scores, t):
    pred = scores > t
    tp = int(np.sum(pred & truth_mask))
    fp = int(np.sum(pred & ~truth_mask))
    tpr = _ratio(tp, int(truth_mask.sum()))
    fpr = _ratio(fp, int((~truth_mask).sum()))
    return fpr, tpr


def roc(truth: Graph, plinks_matrix, cut_num: int = 20) -> RocCurve:
    """ROC of the edge probabilities against the true graph.

    The reported polyline classifies by probability > t at cut_num
    equally spaced thresholds over [0,1]; the AUC is the exact trapezoid
    area of the full sweep over distinct probability values, which
    depends only on the ordering of the probabilities."""
    if cut_num < 2:
        raise InputError(f"cut_num must be >= 2, got {cut_num}")
    p = truth.p
    total = n_cells(p)
    if truth.size == 0 or truth.size == total:
        raise DegenerateRocError(
            "ROC undefined for an empty or complete reference graph")
    m = np.asarray(plinks_matrix, dtype=float)
    scores = np.array([m[i - 1, j - 1] for (i, j) in iter_cells(p)])
    truth_mask = np.array([(i, j) in truth.edges for (i, j) in iter_cells(p)])

    thresholds = np.linspace(0.0, 1.0, cut_num)
    points = [_rates_at(truth_mask, scores, t) for t in thresholds]

    sweep = sorted({_rates_at(truth_mask, scores, t)
                    for t in np.unique(scores)} | {(0.0, 0.0), (1.0, 1.0)})
    xs = np.array([q[0] for q in sweep])
    ys = np.array([q[1] for q in sweep])
    auc = float(np.trapezoid(ys, xs))
    return RocCurve(thresholds, points, auc)


def acf(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelations to max_lag; a constant series reports 1 at
    lag 0 and 0 at positive lags."""
    x = np.asarray(series, dtype=float)
    T = len(x)
    if T == 0:
        raise NoSamplesError("empty series")
    x = x - x.mean()
    denom = float(np.dot(x, x))
    out = np.zeros(max_lag + 1)
    out[0] = 1.0
    if denom <= 0:
        return out
    for k in range(1, max_lag + 1):
        out[k] = float(np.dot(x[:-k], x[k:])) / denom if k < T else 0.0
    return out


def pacf(acf_vals) -> np.ndarray:
    """Partial autocorrelations from the ACF by the Durbin-Levinson
    recursion; entry 0 is 1 by convention."""
    rho = np.asarray(acf_vals, dtype=float)
    m = len(rho) - 1
    out = np.zeros(m + 1)
    out[0] = 1.0
    if m == 0:
        return out
    phi = np.zeros((m + 1, m + 1))
    phi[1, 1] = rho[1]
    out[1] = rho[1]
    for k in range(2, m + 1):
        num = rho[k] - np.dot(phi[k - 1, 1:k], rho[k - 1:0:-1])
        den = 1.0 - np.dot(phi[k - 1, 1:k], rho[1:k])
        phi[k, k] = num / den if abs(den) > 1e-300 else 0.0
        for j in range(1, k):
            phi[k, j] = phi[k - 1, j] - phi[k, k] * phi[k - 1, k - j]
        out[k] = phi[k, k]
    return out


@dataclass
class DiagnosticBundle:
    """Convergence diagnostics of one trace."""

    edges: list  # the edge cells whose running estimates are reported
    running_plinks: np.ndarray  # (T, len(edges)) running weighted estimates
    sizes: np.ndarray  # graph-size series
    acf: np.ndarray
    pacf: np.ndarray


def diag_series(trace: ChainTrace, edges=None, rng=None) -> DiagnosticBundle:
    """Running edge-probability estimates, the graph-size series, and the
    ACF/PACF of the sizes (to lag min(50, T/4)).

    Needs the save_all key history for the per-edge running estimates.
    Above p=15 with no edge subset given, 100 cells are chosen uniformly
    at random."""
    if len(trace) == 0:
        raise NoSamplesError("trace holds no recorded iterations")
    from .graphs import GraphKey, decode_key
    p = trace.p
    cells = list(iter_cells(p))
    if edges is None:
        edges = cells
        if p > 15 and len(cells) > 100:
            rng = rng if rng is not None else np.random.default_rng()
            idx = rng.choice(len(cells), size=100, replace=False)
            edges = [cells[i] for i in sorted(idx)]
    else:
        edges = [tuple(e) for e in edges]

    T = len(trace)
    running = np.zeros((T, len(edges)))
    if trace.keys is not None:
        acc = np.zeros(len(edges))
        wsum = 0.0
        for t in range(T):
            g = decode_key(GraphKey(p, trace.keys.get_bits(t)))
            w = trace.weights[t]
            wsum += w
            for a, e in enumerate(edges):
                if e in g.edges:
                    acc[a] += w
            running[t] = acc / wsum
    else:
        running[:] = np.nan

    sizes = np.asarray(trace.sizes, dtype=float)
    max_lag = max(1, min(50, T // 4)) if T > 1 else 1
    a = acf(sizes, max_lag)
    return DiagnosticBundle(edges, running, sizes, a, pacf(a))
