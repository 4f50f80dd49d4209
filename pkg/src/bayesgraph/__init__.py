"""Bayesian structure learning in undirected graphical models.

Birth-death and reversible-jump MCMC over (graph, precision matrix) with
a G-Wishart prior, a Gaussian copula layer for mixed data, synthetic data
generation, posterior summarization and structure-recovery metrics."""

__version__ = "0.1.0"

from .errors import BayesgraphError
from .gcgm import MixedData, gaussianize, run_chain_gcgm
from .ggm import ChainState, ChainTrace, SamplerConfig, run_chain
from .graphs import Graph, GraphFamily, GraphKey, generate_graph
from .gwishart import GWishartParams
from .marginal import MarginalBackend, MarginalCache, log_marginal
from .posterior import (PosteriorSummary, k_hat, plinks, select_bma,
                        select_map, summarize)
from .simulate import SimOutput, SimSpec, simulate_data, simulate_precision
from .evaluate import MetricsReport, RocCurve, compare, diag_series, roc

__all__ = [
    "BayesgraphError", "ChainState", "ChainTrace", "Graph", "GraphFamily",
    "GraphKey", "GWishartParams", "MarginalBackend", "MarginalCache",
    "MetricsReport", "MixedData", "PosteriorSummary", "RocCurve",
    "SamplerConfig", "SimOutput", "SimSpec", "compare", "diag_series",
    "gaussianize", "generate_graph", "k_hat", "log_marginal", "plinks",
    "roc", "run_chain", "run_chain_gcgm", "select_bma", "select_map",
    "simulate_data", "simulate_precision", "summarize",
]
