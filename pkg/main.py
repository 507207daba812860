# main.py
#
# purpose: command-line entry point for metagraph-learn. wires ingestion ->
#          MM solver -> evaluation -> export for four subcommands:
#            learn  learn one graph from signals (+ metadata when alpha < 1)
#            sweep  alpha (and lambda) grid with F-score/modularity per row
#            eval   score a graph file against sector labels
#            synth  write a seeded synthetic instance in the input formats
#
# dependencies: argparse (flags), logging (configured once here from LOG_LEVEL),
#               pydantic (typed configs; validation errors map to exit code 2),
#               data_io / mm_solver / evaluation / synth.
#
# design rationale: main() returns an exit code (0 ok, 2 input error, 3 solver
#                   error) and never raises for domain failures. every run
#                   writes a manifest with input digests and all resolved
#                   defaults next to its outputs.
#
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from collections.abc import Sequence

from pydantic import ValidationError

from config import DEFAULT_THRESHOLD, HyperParams, SolverConfig, SynthConfig, __version__, env_float, env_int
from data_io import (
    LearnedGraph,
    RunManifest,
    export_edge_csv,
    export_graph,
    import_graph,
    log_returns,
    read_distance_matrix,
    read_embeddings,
    read_labels,
    read_prices,
    read_signals,
    sample_covariance,
    write_manifest,
    write_report_csv,
)
from errors import DomainError, GraphLearnError, IngestionError, exit_code_for
from evaluation import alpha_sweep, best_row, cluster_ids, parse_grid, score_graph, sector_block_truth
from mm_solver import run_mm
from objective import ProblemData
from path_utils import file_digest, normalize_path
from side_info import distances_from_matrix, pairwise_sq_dists, reorder, sigma2_heuristic
from synth import generate_instance, write_instance

logger = logging.getLogger(__name__)

SIGMA2_HEURISTICS = ("median", "mean")


def setup_logging() -> None:
    logging.basicConfig(
        level=os.environ.get("LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )


def manifest_path_for(output: str) -> str:
    return os.path.splitext(normalize_path(output))[0] + ".manifest.json"


# --- shared pipeline pieces ---


class Inputs:
    """Signals, metadata and everything read to build them (for the manifest)."""

    def __init__(self):
        self.labels: tuple[str, ...] = ()
        self.data: ProblemData | None = None
        self.digests: dict[str, str] = {}

    def record(self, path: str) -> str:
        path = normalize_path(path)
        if not os.path.isfile(path):
            raise IngestionError("file not found", path)
        self.digests[path] = file_digest(path)
        return path


def load_problem(args, need_metadata: bool) -> Inputs:
    inputs = Inputs()
    if args.prices:
        panel = read_prices(inputs.record(args.prices))
        labels, X = panel.labels, log_returns(panel)
    elif args.signals:
        labels, X = read_signals(inputs.record(args.signals))
    else:
        raise DomainError("one of --prices or --signals is required")
    S = sample_covariance(X, center=args.center)

    z = None
    if args.embeddings:
        emb = reorder(read_embeddings(inputs.record(args.embeddings)), labels)
        z = pairwise_sq_dists(emb)
    elif args.distances:
        dist_labels, Z = read_distance_matrix(inputs.record(args.distances))
        z = distances_from_matrix(Z, dist_labels, order=labels)
    elif need_metadata:
        raise DomainError("alpha < 1 needs node metadata: pass --embeddings or --distances")

    inputs.labels = tuple(labels)
    inputs.data = ProblemData.build(S, z)
    logger.info(f"Problem: p={len(labels)} nodes, n={X.shape[1]} samples, metadata={'yes' if z is not None else 'no'}")
    return inputs


def resolve_sigma2(spec: str, data: ProblemData) -> tuple[float, str]:
    if data.z is None:
        return 1.0, "unused"
    if spec in SIGMA2_HEURISTICS:
        return sigma2_heuristic(data.z, spec), spec
    try:
        return float(spec), "value"
    except ValueError as e:
        raise DomainError(f"--sigma2 must be a number or one of {SIGMA2_HEURISTICS}, got {spec!r}") from e


def solver_config(args, trace_path: str | None = None) -> SolverConfig:
    overrides = {"trace_path": trace_path}
    if args.epsilon is not None:
        overrides["epsilon"] = args.epsilon
    if args.maxiter is not None:
        overrides["maxiter"] = args.maxiter
    if args.cubic_method is not None:
        overrides["cubic_method"] = args.cubic_method
    return SolverConfig(**overrides)


def _json_safe(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


# --- subcommands ---


def cmd_learn(args) -> int:
    t0 = time.perf_counter()
    inputs = load_problem(args, need_metadata=args.alpha < 1)
    data = inputs.data
    sigma2, sigma2_source = resolve_sigma2(args.sigma2, data)
    hp = HyperParams(alpha=args.alpha, sigma2=sigma2, lam=args.lam, **_scad(args))
    cfg = solver_config(args, trace_path=args.trace)

    t1 = time.perf_counter()
    w, trace = run_mm(data, hp, cfg)
    solve_ms = (time.perf_counter() - t1) * 1000.0

    graph = LearnedGraph.from_weights(
        inputs.labels, w, threshold=args.export_threshold,
        hyperparameters=hp.model_dump(by_alias=True) | {"sigma2_source": sigma2_source},
        convergence={
            "termination": trace.termination,
            "iterations": trace.iterations,
            "objective": trace.records[-1].objective,
            "delta_norm": trace.records[-1].delta_norm,
        },
    )
    outputs = [export_graph(graph, args.out)]
    if args.edges_csv:
        outputs.append(export_edge_csv(graph, args.edges_csv))
    if args.trace:
        outputs.append(normalize_path(args.trace))

    manifest = RunManifest(
        command="learn",
        tool_version=__version__,
        inputs=inputs.digests,
        parameters={
            "hyperparameters": graph.hyperparameters,
            "solver": cfg.model_dump(),
            "center": args.center,
            "export_threshold": args.export_threshold,
        },
        outputs=outputs,
        timings={"solve_ms": solve_ms, "total_ms": (time.perf_counter() - t0) * 1000.0},
    )
    write_manifest(manifest, manifest_path_for(args.out))
    print(f"{trace.termination} after {trace.iterations} iterations; "
          f"{len(graph.edges)} edges written to {outputs[0]}")
    return 0


def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    alphas = parse_grid(args.alpha_grid)
    lambdas = parse_grid(args.lambda_grid) if args.lambda_grid else [args.lam]
    inputs = load_problem(args, need_metadata=min(alphas) < 1)
    data = inputs.data
    sigma2, sigma2_source = resolve_sigma2(args.sigma2, data)
    hp = HyperParams(alpha=alphas[0], sigma2=sigma2, lam=lambdas[0], **_scad(args))
    cfg = solver_config(args)

    truth = partition_ids = None
    if args.labels:
        partition = read_labels(inputs.record(args.labels))
        truth = sector_block_truth(partition, inputs.labels)
        partition_ids = cluster_ids(partition, inputs.labels)
    elif args.modularity_on == "truth":
        logger.warning("No --labels given: F-score and ground-truth modularity will be NaN")

    rows = alpha_sweep(
        data, hp, alphas, cfg, truth=truth, partition_ids=partition_ids, lambdas=lambdas,
        threshold=args.threshold, modularity_on=args.modularity_on, jobs=args.jobs,
        progress=not args.quiet and sys.stderr.isatty(),
    )
    out = write_report_csv(rows, args.out, timings=args.timings)

    manifest = RunManifest(
        command="sweep",
        tool_version=__version__,
        inputs=inputs.digests,
        parameters={
            "alpha_grid": alphas,
            "lambda_grid": lambdas,
            "sigma2": sigma2,
            "sigma2_source": sigma2_source,
            "scad_a": hp.scad_a,
            "solver": cfg.model_dump(),
            "threshold": args.threshold,
            "modularity_on": args.modularity_on,
            "center": args.center,
            "jobs": args.jobs,
        },
        outputs=[out],
        timings={"total_ms": (time.perf_counter() - t0) * 1000.0}
        | {f"row_{i}_ms": r["millis"] for i, r in enumerate(rows)},
    )
    write_manifest(manifest, manifest_path_for(args.out))

    print(f"{'lambda':>10} {'alpha':>6} {'f_score':>8} {'modularity':>10} {'iters':>6}  termination")
    for r in rows:
        print(f"{r['lambda']:>10.4g} {r['alpha']:>6.3g} {r['f_score']:>8.4f} "
              f"{r['modularity']:>10.4f} {r['iters']:>6d}  {r['termination']}")
    best = best_row(rows)
    if best is not None:
        print(f"best: lambda={best['lambda']:.4g} alpha={best['alpha']:.3g} f_score={best['f_score']:.4f}")
    return 0


def cmd_eval(args) -> int:
    graph_path = normalize_path(args.graph)
    graph = import_graph(graph_path)
    partition = read_labels(args.labels)
    nodes = list(graph.nodes)
    ids = cluster_ids(partition, nodes)
    w = graph.to_weights()
    metrics = score_graph(w, sector_block_truth(partition, nodes), ids,
                          threshold=args.threshold, modularity_on=args.modularity_on)
    metrics = {k: _json_safe(v) for k, v in metrics.items()}
    metrics |= {"threshold": args.threshold, "modularity_on": args.modularity_on}

    if args.json:
        print(json.dumps(metrics, indent=2, sort_keys=True))
    else:
        for key in sorted(metrics):
            print(f"{key}: {metrics[key]}")
    if args.out:
        out = normalize_path(args.out)
        with open(out, "w", encoding="utf-8") as f:
            json.dump(metrics, f, indent=2, sort_keys=True)
        manifest = RunManifest(
            command="eval",
            tool_version=__version__,
            inputs={graph_path: file_digest(graph_path),
                    normalize_path(args.labels): file_digest(args.labels)},
            parameters={"threshold": args.threshold, "modularity_on": args.modularity_on},
            outputs=[out],
        )
        write_manifest(manifest, manifest_path_for(out))
    return 0


def cmd_synth(args) -> int:
    t0 = time.perf_counter()
    cfg = SynthConfig(
        p=args.p, clusters=args.clusters, n=args.n, seed=args.seed, dim=args.dim,
        noise=args.noise, p_intra=args.p_intra, d_in=args.d_in, d_out=args.d_out,
        shared_centroid=args.shared_centroid,
    )
    inst = generate_instance(cfg)
    paths = write_instance(inst, normalize_path(args.outdir))
    manifest = RunManifest(
        command="synth",
        tool_version=__version__,
        seed=cfg.seed,
        parameters=cfg.model_dump(),
        outputs=list(paths.values()),
        timings={"total_ms": (time.perf_counter() - t0) * 1000.0},
    )
    write_manifest(manifest, os.path.join(normalize_path(args.outdir), "manifest.json"))
    print(f"wrote {len(paths)} files to {args.outdir}")
    return 0


def _scad(args) -> dict:
    return {} if args.scad_a is None else {"scad_a": args.scad_a}


# --- argument parsing ---


def _add_problem_flags(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--prices", help="Price CSV (node, dates...); log-returns are taken.")
    src.add_argument("--signals", help="Signal CSV (node, samples...), used as is.")
    meta = p.add_mutually_exclusive_group()
    meta.add_argument("--embeddings", help="Embedding CSV (node, components...).")
    meta.add_argument("--distances", help="Square labeled squared-distance matrix CSV.")
    p.add_argument("--sigma2", default="median",
                   help="Kernel width: a number, 'median' or 'mean' of the distances (default: median).")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0, help="SCAD sparsity level (default 0).")
    p.add_argument("--scad-a", type=float, default=None, help="SCAD shape a > 2 (default $SCAD_A or 3.7).")
    p.add_argument("--center", action="store_true", help="Subtract per-node means before the covariance.")
    p.add_argument("--epsilon", type=float, default=None, help="Stop when ||w_k+1 - w_k|| <= epsilon.")
    p.add_argument("--maxiter", type=int, default=None, help="Iteration cap.")
    p.add_argument("--cubic-method", choices=["companion", "bisection"], default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metagraph-learn",
        description="Learn graphs from smooth signals fused with node metadata (MM solver).",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    learn = sub.add_parser("learn", help="Learn one graph.")
    _add_problem_flags(learn)
    learn.add_argument("--alpha", type=float, required=True, help="Fusion weight in [0, 1].")
    learn.add_argument("--out", default="outputs/graph.json", help="Graph JSON output path.")
    learn.add_argument("--edges-csv", default=None, help="Optional flat edge-list CSV.")
    learn.add_argument("--trace", default=None, help="Optional JSON-lines objective trace.")
    learn.add_argument("--export-threshold", type=float, default=0.0,
                       help="Absolute weight threshold for exported edges (default 0).")
    learn.set_defaults(func=cmd_learn)

    sweep = sub.add_parser("sweep", help="Alpha/lambda grid with F-score and modularity.")
    _add_problem_flags(sweep)
    sweep.add_argument("--alpha-grid", default="0:1:0.1", help="Alpha grid (default 0:1:0.1).")
    sweep.add_argument("--lambda-grid", default=None, help="Lambda grid, e.g. log:0.1:10:20.")
    sweep.add_argument("--labels", default=None, help="Sector labels CSV (node, sector).")
    sweep.add_argument("--threshold", type=float, default=env_float("BIN_THRESHOLD", DEFAULT_THRESHOLD))
    sweep.add_argument("--modularity-on", choices=["truth", "detected"], default="truth")
    sweep.add_argument("--jobs", type=int, default=env_int("SWEEP_JOBS", 1))
    sweep.add_argument("--timings", action="store_true", help="Add a millis column to the report.")
    sweep.add_argument("--quiet", action="store_true", help="No progress bar.")
    sweep.add_argument("--out", default="outputs/sweep.csv", help="Report CSV path.")
    sweep.set_defaults(func=cmd_sweep)

    ev = sub.add_parser("eval", help="Score a graph file against sector labels.")
    ev.add_argument("--graph", required=True)
    ev.add_argument("--labels", required=True)
    ev.add_argument("--threshold", type=float, default=env_float("BIN_THRESHOLD", DEFAULT_THRESHOLD))
    ev.add_argument("--modularity-on", choices=["truth", "detected"], default="truth")
    ev.add_argument("--json", action="store_true", help="Print metrics as JSON.")
    ev.add_argument("--out", default=None, help="Optional metrics JSON file.")
    ev.set_defaults(func=cmd_eval)

    syn = sub.add_parser("synth", help="Generate a synthetic instance.")
    syn.add_argument("--p", type=int, default=30)
    syn.add_argument("--clusters", type=int, default=3)
    syn.add_argument("--n", type=int, default=200)
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--dim", type=int, default=8)
    syn.add_argument("--noise", type=float, default=0.0)
    syn.add_argument("--p-intra", type=float, default=0.7)
    syn.add_argument("--d-in", type=float, default=1.0)
    syn.add_argument("--d-out", type=float, default=80.0)
    syn.add_argument("--shared-centroid", action=argparse.BooleanOptionalAction, default=True,
                     help="Place the last cluster on cluster 0's metadata centroid.")
    syn.add_argument("--outdir", default="outputs/synth")
    syn.set_defaults(func=cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(x) for x in first.get("loc", ()))
        logger.error(f"Invalid parameter {field}: {first.get('msg')}")
        return 2
    except GraphLearnError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return exit_code_for(e)


if __name__ == "__main__":
    raise SystemExit(main())
