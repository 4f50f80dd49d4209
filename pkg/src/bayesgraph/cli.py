"""Command-line front end: simulate data, run chains, summarize, score
and diagnose, plus the replicated simulation study."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, evaluate, io, posterior
from .errors import (BayesgraphError, ConvergenceFailureError,
                     DegenerateRatesError, DegenerateRocError, InputError,
                     NotPositiveDefiniteError, TruncationError)
from .gcgm import run_chain_gcgm
from .ggm import (ALGORITHMS, METHODS, ChainState, ChainTrace, SamplerConfig,
                  run_chain)
from .graphs import GRAPH_FAMILIES, Graph, GraphFamily
from .simulate import DATA_TYPES, SimSpec, simulate_data

THREADS_ENV = "BAYESGRAPH_THREADS"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

_NUMERIC_ERRORS = (NotPositiveDefiniteError, ConvergenceFailureError,
                   DegenerateRatesError, TruncationError, DegenerateRocError,
                   np.linalg.LinAlgError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: {message}\n")


def _thread_count() -> int:
    override = os.environ.get(THREADS_ENV)
    if override:
        try:
            return max(1, int(override))
        except ValueError:
            raise InputError(f"{THREADS_ENV} must be an integer, got {override!r}")
    return os.cpu_count() or 1


def _write_manifest(outdir: Path, command: str, config: dict, seed,
                    timings: dict, outputs: list) -> None:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "timings_sec": {k: round(v, 4) for k, v in timings.items()},
        "outputs": [str(p) for p in outputs],
        "version": __version__,
    }
    path = outdir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _svg_lines(path, series, width=640, height=400, margin=40):
    """Minimal SVG line plot: series is a list of (xs, ys) polylines on a
    shared scale."""
    xs_all = np.concatenate([np.asarray(x, dtype=float) for x, _ in series])
    ys_all = np.concatenate([np.asarray(y, dtype=float) for _, y in series])
    x0, x1 = float(xs_all.min()), float(xs_all.max())
    y0, y1 = float(ys_all.min()), float(ys_all.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    def sx(v):
        return margin + (v - x0) / (x1 - x0) * (width - 2 * margin)
    def sy(v):
        return height - margin - (v - y0) / (y1 - y0) * (height - 2 * margin)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>']
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"]
    for k, (x, y) in enumerate(series):
        pts = " ".join(f"{sx(a):.1f},{sy(b):.1f}" for a, b in zip(x, y))
        parts.append(f'<polyline points="{pts}" fill="none" '
                     f'stroke="{colors[k % len(colors)]}" stroke-width="1.5"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def cmd_sim(args) -> int:
    out = _outdir(args)
    t0 = time.perf_counter()
    family = GraphFamily(args.graph, prob=args.prob)
    spec = SimSpec(n=args.n, p=args.p, data_type=args.type, family=family,
                   cut=args.cut)
    rng = np.random.default_rng(args.seed)
    sim = simulate_data(spec, rng)
    t1 = time.perf_counter()
    io.write_matrix(out / "data.csv", sim.data, na_token=args.na_token)
    io.write_adjacency(out / "graph.csv", sim.graph)
    io.write_matrix(out / "ktrue.csv", sim.K)
    io.write_kinds(out / "kinds.txt", sim.kinds)
    outputs = [out / n for n in ("data.csv", "graph.csv", "ktrue.csv", "kinds.txt")]
    _write_manifest(out, "sim",
                    {"p": args.p, "n": args.n, "graph": args.graph,
                     "type": args.type, "cut": args.cut, "prob": args.prob},
                    args.seed,
                    {"simulate": t1 - t0, "write": time.perf_counter() - t1},
                    outputs)
    return EXIT_OK


def _load_resume(token: str) -> ChainState:
    path = token.split(":", 1)[1]
    blob = np.load(path)
    g = Graph.from_adjacency(blob["adjacency"])
    return ChainState(g, np.asarray(blob["K"], dtype=float),
                      int(blob["iteration"]))


def cmd_run(args) -> int:
    out = _outdir(args)
    if args.g_start in ("empty", "full"):
        g_start = args.g_start
    elif args.g_start.startswith("resume:"):
        g_start = _load_resume(args.g_start)
    else:
        raise InputError(f"--g-start must be empty, full or resume:PATH, "
                         f"got {args.g_start!r}")
    config = SamplerConfig(iter=args.iter, burnin=args.burnin,
                           algorithm=args.algorithm, method=args.method,
                           g_start=g_start, prior_df=args.prior_df,
                           save_all=args.save_all, seed=args.seed,
                           mc_samples=args.mc_samples)
    t0 = time.perf_counter()
    if args.method == "gcgm":
        if args.kinds is None:
            raise InputError("--method gcgm requires a --kinds sidecar file")
        data = io.read_mixed_data(args.data, args.kinds, args.na_token)
        t1 = time.perf_counter()
        trace = run_chain_gcgm(data, config)
    else:
        Y, _ = io.read_matrix(args.data, args.na_token)
        t1 = time.perf_counter()
        trace = run_chain(data=Y, config=config)
    t2 = time.perf_counter()

    summary = posterior.summarize(trace, cut=args.cut)
    trace.save(out / "trace.bin")
    io.write_matrix(out / "plinks.csv", summary.plinks)
    io.write_matrix(out / "khat.csv", summary.K_hat)
    io.write_adjacency(out / "selected.csv", summary.selected)
    final = trace.final_state
    np.savez(out / "state.npz", adjacency=final.g.adjacency(),
             K=final.K, iteration=final.iteration)
    table = [{"key": key.bits.hex(), "weight": w}
             for key, w in summary.graph_table[:20]]
    with open(out / "summary.json", "w") as fh:
        json.dump({
            "p": trace.p,
            "algorithm": trace.algorithm,
            "iterations": trace.iterations,
            "burnin": trace.burnin,
            "records": len(trace),
            "selected_edges": sorted(summary.selected.edges),
            "graph_table_top20": table,
        }, fh, indent=2)
        fh.write("\n")
    outputs = [out / n for n in ("trace.bin", "plinks.csv", "khat.csv",
                                 "selected.csv", "state.npz", "summary.json")]
    _write_manifest(out, "run",
                    {"data": args.data, "kinds": args.kinds,
                     "method": args.method, "algorithm": args.algorithm,
                     "iter": args.iter, "burnin": config.burnin,
                     "g_start": args.g_start, "prior_df": args.prior_df,
                     "save_all": args.save_all, "mc_samples": args.mc_samples,
                     "cut": args.cut},
                    args.seed,
                    {"read": t1 - t0, "chain": t2 - t1,
                     "summarize": time.perf_counter() - t2}, outputs)
    return EXIT_OK


def cmd_select(args) -> int:
    out = _outdir(args)
    t0 = time.perf_counter()
    m, _ = io.read_matrix(args.plinks)
    g = posterior.select_bma(m, cut=args.cut)
    io.write_adjacency(out / "selected.csv", g)
    _write_manifest(out, "select", {"plinks": args.plinks, "cut": args.cut},
                    None, {"total": time.perf_counter() - t0},
                    [out / "selected.csv"])
    return EXIT_OK


def cmd_compare(args) -> int:
    out = _outdir(args)
    t0 = time.perf_counter()
    truth = io.read_adjacency(args.truth)
    names, reports = [], []
    for path in args.estimates:
        names.append(Path(path).stem)
        reports.append(evaluate.compare(truth, io.read_adjacency(path)))
    rows = ["TP", "TN", "FP", "FN", "TPR", "FPR", "accuracy", "F1", "PPV"]
    lines = ["{:<10}".format("") + "".join(f"{n:>12}" for n in names)]
    for r in rows:
        vals = [getattr(rep, r) for rep in reports]
        cells = "".join(f"{v:>12}" if isinstance(v, int) else f"{v:>12.3f}"
                        for v in vals)
        lines.append(f"{r:<10}{cells}")
    table = "\n".join(lines) + "\n"
    sys.stdout.write(table)
    (out / "compare.txt").write_text(table)
    with open(out / "metrics.json", "w") as fh:
        json.dump({n: vars(rep) for n, rep in zip(names, reports)}, fh, indent=2)
        fh.write("\n")
    _write_manifest(out, "compare",
                    {"truth": args.truth, "estimates": args.estimates}, None,
                    {"total": time.perf_counter() - t0},
                    [out / "compare.txt", out / "metrics.json"])
    return EXIT_OK


def cmd_roc(args) -> int:
    out = _outdir(args)
    t0 = time.perf_counter()
    truth = io.read_adjacency(args.truth)
    m, _ = io.read_matrix(args.plinks)
    curve = evaluate.roc(truth, m, cut_num=args.cut_num)
    rows = np.column_stack([curve.thresholds,
                            [p[0] for p in curve.points],
                            [p[1] for p in curve.points]])
    io.write_matrix(out / "roc.csv", rows, header=["threshold", "FPR", "TPR"])
    with open(out / "roc.json", "w") as fh:
        json.dump({"auc": curve.auc, "cut_num": args.cut_num}, fh, indent=2)
        fh.write("\n")
    outputs = [out / "roc.csv", out / "roc.json"]
    if args.svg:
        pts = sorted(curve.points)
        _svg_lines(out / "roc.svg",
                   [([p[0] for p in pts], [p[1] for p in pts]),
                    ([0.0, 1.0], [0.0, 1.0])])
        outputs.append(out / "roc.svg")
    _write_manifest(out, "roc", {"truth": args.truth, "plinks": args.plinks,
                                 "cut_num": args.cut_num}, None,
                    {"total": time.perf_counter() - t0}, outputs)
    return EXIT_OK


def cmd_diag(args) -> int:
    out = _outdir(args)
    t0 = time.perf_counter()
    trace = ChainTrace.load(args.trace)
    rng = np.random.default_rng(args.seed)
    bundle = evaluate.diag_series(trace, rng=rng)
    io.write_matrix(out / "sizes.csv", np.asarray(bundle.sizes)[:, None],
                    header=["size"])
    lags = np.arange(len(bundle.acf))
    io.write_matrix(out / "acf.csv",
                    np.column_stack([lags, bundle.acf, bundle.pacf]),
                    header=["lag", "acf", "pacf"])
    outputs = [out / "sizes.csv", out / "acf.csv"]
    if trace.keys is not None:
        header = [f"e{i}_{j}" for (i, j) in bundle.edges]
        io.write_matrix(out / "running_plinks.csv", bundle.running_plinks,
                        header=header)
        outputs.append(out / "running_plinks.csv")
    if args.svg:
        t = np.arange(len(bundle.sizes))
        _svg_lines(out / "sizes.svg", [(t, bundle.sizes)])
        outputs.append(out / "sizes.svg")
    _write_manifest(out, "diag", {"trace": args.trace}, args.seed,
                    {"total": time.perf_counter() - t0}, outputs)
    return EXIT_OK


def _study_replication(cell: dict, seed: int):
    """One replication of one study cell: simulate, run, score.

    Returns (f1, seconds per 1000 iterations, key-store bytes)."""
    family = GraphFamily(cell["family"], prob=cell.get("prob"))
    spec = SimSpec(n=cell["n"], p=cell["p"],
                   data_type=cell.get("type", "Gaussian"), family=family)
    rng = np.random.default_rng(seed)
    sim = simulate_data(spec, rng)
    config = SamplerConfig(iter=cell.get("iter", 5000),
                           burnin=cell.get("burnin"),
                           algorithm=cell.get("algorithm", "bdmcmc"),
                           save_all=True, seed=seed,
                           mc_samples=cell.get("mc_samples", 200))
    t0 = time.perf_counter()
    trace = run_chain(data=sim.data, config=config)
    elapsed = time.perf_counter() - t0
    pl = posterior.plinks(trace)
    est = posterior.select_bma(pl, cut=cell.get("cut", 0.5))
    f1 = evaluate.compare(sim.graph, est).F1
    return f1, elapsed * 1000.0 / config.iter, trace.keys.nbytes


def cmd_study(args) -> int:
    out = _outdir(args)
    t0 = time.perf_counter()
    with open(args.config) as fh:
        study = json.load(fh)
    seed_base = int(study.get("seed_base", 0))
    reps = int(study.get("replications", 1))
    workers = _thread_count()
    results = []
    for cell in study["cells"]:
        f1s, times, keybytes, failures = [], [], [], 0
        jobs = [(cell, seed_base + r) for r in range(reps)]
        if workers > 1:
            from concurrent.futures import ProcessPoolExecutor
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futs = [pool.submit(_study_replication, c, s) for c, s in jobs]
                outcomes = []
                for f in futs:
                    try:
                        outcomes.append(f.result())
                    except Exception:
                        outcomes.append(None)
        else:
            outcomes = []
            for c, s in jobs:
                try:
                    outcomes.append(_study_replication(c, s))
                except Exception:
                    outcomes.append(None)
        for o in outcomes:
            if o is None:
                failures += 1
            else:
                f1s.append(o[0])
                times.append(o[1])
                keybytes.append(o[2])
        results.append({
            "family": cell["family"], "p": cell["p"], "n": cell["n"],
            "algorithm": cell.get("algorithm", "bdmcmc"),
            "replications": reps, "failures": failures,
            "f1_mean": float(np.mean(f1s)) if f1s else None,
            "f1_sd": float(np.std(f1s, ddof=1)) if len(f1s) > 1 else None,
            "sec_per_1000_iter": float(np.mean(times)) if times else None,
            "keystore_bytes_peak": max(keybytes) if keybytes else None,
        })
    with open(out / "study.json", "w") as fh:
        json.dump(results, fh, indent=2)
        fh.write("\n")
    import csv as _csv
    with open(out / "study.csv", "w", newline="") as fh:
        w = _csv.DictWriter(fh, fieldnames=list(results[0].keys()))
        w.writeheader()
        w.writerows(results)
    _write_manifest(out, "study", study, seed_base,
                    {"total": time.perf_counter() - t0},
                    [out / "study.json", out / "study.csv"])
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="bayesgraph",
                     description="Bayesian structure learning in graphical "
                                 "models: simulate, sample, summarize, score.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sim", help="simulate graph, precision matrix and data")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--graph", choices=[f for f in GRAPH_FAMILIES if f != "fixed"],
                   default="random")
    p.add_argument("--type", choices=DATA_TYPES, default="Gaussian")
    p.add_argument("--cut", type=int, default=4)
    p.add_argument("--prob", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--na-token", default=io.DEFAULT_NA)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("run", help="run one chain on a data file")
    p.add_argument("--data", required=True)
    p.add_argument("--kinds", default=None)
    p.add_argument("--method", choices=METHODS, default="ggm")
    p.add_argument("--algorithm", choices=ALGORITHMS, default="bdmcmc")
    p.add_argument("--iter", type=int, default=5000)
    p.add_argument("--burnin", type=int, default=None)
    p.add_argument("--g-start", default="empty")
    p.add_argument("--prior-df", type=float, default=3.0)
    p.add_argument("--save-all", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--mc-samples", type=int, default=200)
    p.add_argument("--na-token", default=io.DEFAULT_NA)
    p.add_argument("--cut", type=float, default=0.5)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("select", help="threshold an edge-probability matrix")
    p.add_argument("--plinks", required=True)
    p.add_argument("--cut", type=float, default=0.5)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("compare", help="confusion metrics vs a true graph")
    p.add_argument("truth")
    p.add_argument("estimates", nargs="+")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("roc", help="ROC curve of edge probabilities")
    p.add_argument("--truth", required=True)
    p.add_argument("--plinks", required=True)
    p.add_argument("--cut-num", type=int, default=20)
    p.add_argument("--svg", action="store_true")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_roc)

    p = sub.add_parser("diag", help="convergence diagnostics of a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--svg", action="store_true")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_diag)

    p = sub.add_parser("study", help="replicated simulation study")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_study)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _NUMERIC_ERRORS as exc:
        print(f"bayesgraph: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (BayesgraphError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"bayesgraph: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
