# evaluation.py
#
# purpose: scoring of learned graphs and the alpha/lambda sweep harness.
#   - binarize: relative threshold on the weight vector -> edge set
#   - f_score: 2tp / (2tp + fp + fn) against a block ground truth
#   - modularity: weighted Newman modularity on the (non-binarized) weights
#   - components_clustering: connected components of the binarized graph
#   - alpha_sweep: independent solver runs per grid point, concurrent rows
#
# Edge sets are frozensets of 0-based canonical edge positions.
#
from __future__ import annotations

import asyncio
import logging
import math
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor

import networkx as nx
import numpy as np
from tqdm import tqdm

from config import DEFAULT_THRESHOLD, HyperParams, SolverConfig
from errors import DomainError, GraphLearnError, LabelMismatchError, UndefinedModularityError
from graph_core import adjacency, as_weights, edge_endpoints, is_connected, laplacian_rank, n_nodes
from mm_solver import run_mm
from objective import ProblemData

logger = logging.getLogger(__name__)

Partition = dict[str, str]
EdgeSet = frozenset[int]


def cluster_ids(partition: Mapping[str, str], labels: Sequence[str]) -> np.ndarray:
    """Integer cluster id per node, in the order of ``labels``."""
    missing = [lab for lab in labels if lab not in partition]
    if missing:
        raise LabelMismatchError(f"partition does not label nodes {missing[:10]}")
    extra = sorted(set(partition) - set(labels))
    if extra:
        raise LabelMismatchError(f"partition labels unknown nodes {extra[:10]}")
    names: dict[str, int] = {}
    return np.array([names.setdefault(partition[lab], len(names)) for lab in labels], dtype=int)


def binarize(w, threshold: float = DEFAULT_THRESHOLD) -> EdgeSet:
    """Edges with w_k > threshold * max(w)."""
    if threshold < 0:
        raise DomainError(f"threshold must be >= 0, got {threshold}")
    w = as_weights(w)
    top = float(w.max()) if w.size else 0.0
    if top <= 0:
        return frozenset()
    return frozenset(np.flatnonzero(w > threshold * top).tolist())


def f_score(estimated: EdgeSet, truth: EdgeSet) -> float:
    """2tp / (2tp + fp + fn); both empty counts as perfect recovery."""
    est, tru = set(estimated), set(truth)
    tp = len(est & tru)
    fp = len(est - tru)
    fn = len(tru - est)
    if tp + fp + fn == 0:
        return 1.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def sector_block_truth(partition: Mapping[str, str], labels: Sequence[str] | None = None) -> EdgeSet:
    labels = list(partition) if labels is None else list(labels)
    ids = cluster_ids(partition, labels)
    lo, hi = edge_endpoints(len(labels))
    return frozenset(np.flatnonzero(ids[lo] == ids[hi]).tolist())


def modularity(w, partition: Mapping[str, str] | np.ndarray, labels: Sequence[str] | None = None) -> float:
    """Weighted Newman modularity of ``partition`` on the graph with weights w.

    ``partition`` is either a label mapping (node order given by ``labels``)
    or an integer cluster id per node.
    """
    w = as_weights(w)
    p = n_nodes(w.size)
    if isinstance(partition, Mapping):
        ids = cluster_ids(partition, list(partition) if labels is None else labels)
    else:
        ids = np.asarray(partition, dtype=int)
    if ids.shape != (p,):
        raise DomainError(f"partition has {ids.size} entries for {p} nodes")
    total = float(w.sum())  # W, each edge once
    if total <= 0:
        raise UndefinedModularityError("a graph without edge weight has undefined modularity")
    lo, hi = edge_endpoints(p)
    degree = adjacency(w).sum(axis=1)
    n_comm = int(ids.max()) + 1
    inside = np.bincount(ids[lo], weights=np.where(ids[lo] == ids[hi], w, 0.0), minlength=n_comm)
    deg_sum = np.bincount(ids, weights=degree, minlength=n_comm)
    return float(np.sum(inside / total - (deg_sum / (2.0 * total)) ** 2))


def components_clustering(w, threshold: float = DEFAULT_THRESHOLD,
                          labels: Sequence[str] | None = None) -> Partition:
    """Connected components of the binarized graph; clusters named c0, c1, ... by smallest node."""
    w = as_weights(w)
    p = n_nodes(w.size)
    labels = [str(i) for i in range(p)] if labels is None else list(labels)
    lo, hi = edge_endpoints(p)
    graph = nx.Graph()
    graph.add_nodes_from(range(p))
    graph.add_edges_from((int(lo[k]), int(hi[k])) for k in sorted(binarize(w, threshold)))
    comps = sorted((sorted(c) for c in nx.connected_components(graph)), key=lambda c: c[0])
    out: Partition = {}
    for cid, comp in enumerate(comps):
        for node in comp:
            out[labels[node]] = f"c{cid}"
    return {lab: out[lab] for lab in labels}


def score_graph(w, truth: EdgeSet | None = None, partition_ids: np.ndarray | None = None,
                threshold: float = DEFAULT_THRESHOLD, modularity_on: str = "truth") -> dict:
    """All metrics reported for one learned weight vector."""
    w = as_weights(w)
    edges = binarize(w, threshold)
    result: dict = {
        "edges": len(edges),
        "connected": is_connected(w),
        "laplacian_rank": laplacian_rank(w),
        "f_score": f_score(edges, truth) if truth is not None else math.nan,
    }
    detected = components_clustering(w, threshold)
    result["detected_clusters"] = len(set(detected.values()))
    if modularity_on == "detected":
        ids = cluster_ids(detected, [str(i) for i in range(n_nodes(w.size))])
    elif modularity_on == "truth":
        ids = partition_ids
    else:
        raise DomainError(f"modularity_on must be 'truth' or 'detected', got {modularity_on!r}")
    try:
        result["modularity"] = modularity(w, ids) if ids is not None else math.nan
    except UndefinedModularityError as e:
        logger.warning(str(e))
        result["modularity"] = math.nan
    return result


# --- grids ---


def parse_grid(spec: str) -> list[float]:
    """Grid syntax: 'log:a:b:n', 'lin:a:b:n', 'start:stop:step' (inclusive), 'v1,v2,...' or one value."""
    spec = spec.strip()
    try:
        if spec.startswith(("log:", "lin:")):
            kind, a, b, n = spec.split(":")
            a, b, n = float(a), float(b), int(n)
            if n < 1:
                raise DomainError(f"grid size must be >= 1 in {spec!r}")
            if kind == "log":
                if a <= 0 or b <= 0:
                    raise DomainError(f"log grid bounds must be > 0 in {spec!r}")
                values = np.geomspace(a, b, n)
            else:
                values = np.linspace(a, b, n)
            return [float(v) for v in values]
        if ":" in spec:
            start, stop, step = (float(x) for x in spec.split(":"))
            if step <= 0 or stop < start:
                raise DomainError(f"range grid needs step > 0 and stop >= start in {spec!r}")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + k * step, 12) for k in range(count)]
        values = [float(x) for x in spec.split(",") if x.strip()]
    except ValueError as e:
        raise DomainError(f"cannot parse grid {spec!r}: {e}") from e
    if not values:
        raise DomainError("empty grid")
    return values


# --- sweep ---


def _sweep_row(data: ProblemData, hp: HyperParams, cfg: SolverConfig, truth: EdgeSet | None,
               partition_ids: np.ndarray | None, threshold: float, modularity_on: str) -> dict:
    row = {"lambda": hp.lam, "alpha": hp.alpha}
    try:
        w, trace = run_mm(data, hp, cfg)
    except GraphLearnError as e:
        logger.error(f"row alpha={hp.alpha} lambda={hp.lam} failed: {e}")
        row.update(f_score=math.nan, modularity=math.nan, iters=0, millis=0.0,
                   termination=f"error: {type(e).__name__}: {e}")
        return row
    metrics = score_graph(w, truth, partition_ids, threshold, modularity_on)
    row.update(f_score=metrics["f_score"], modularity=metrics["modularity"],
               iters=trace.iterations, millis=trace.total_millis, termination=trace.termination)
    return row


async def _run_rows(jobs: list[Callable[[], dict]], workers: int, progress: bool) -> list[dict]:
    loop = asyncio.get_running_loop()
    results: list[dict | None] = [None] * len(jobs)

    async def run(idx: int, job: Callable[[], dict]) -> None:
        results[idx] = await loop.run_in_executor(pool, job)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        tasks = [run(i, job) for i, job in enumerate(jobs)]
        for fut in tqdm(asyncio.as_completed(tasks), total=len(tasks), desc="sweep",
                        unit="row", disable=not progress):
            await fut
    return results  # type: ignore[return-value]


def alpha_sweep(data: ProblemData, hp: HyperParams, alphas: Sequence[float], cfg: SolverConfig,
                truth: EdgeSet | None = None, partition_ids: np.ndarray | None = None,
                lambdas: Sequence[float] | None = None, threshold: float = DEFAULT_THRESHOLD,
                modularity_on: str = "truth", jobs: int = 1, progress: bool = False) -> list[dict]:
    """One independent solver run per (lambda, alpha); rows in grid order, lambda outermost.

    Failures are recorded per row in the ``termination`` column.
    """
    for a in alphas:
        if not 0.0 <= a <= 1.0:
            raise DomainError(f"alpha grid values must lie in [0, 1], got {a}")
    lambdas = [hp.lam] if lambdas is None else list(lambdas)
    if any(lam < 0 for lam in lambdas):
        raise DomainError(f"lambda grid values must be >= 0, got {min(lambdas)}")
    # the trace file only makes sense for a single run
    cfg = cfg.model_copy(update={"trace_path": None})
    grid = [hp.model_copy(update={"alpha": float(a), "lam": float(lam)})
            for lam in lambdas for a in alphas]
    jobs_list = [
        (lambda h=h: _sweep_row(data, h, cfg, truth, partition_ids, threshold, modularity_on))
        for h in grid
    ]
    logger.info(f"Sweep over {len(lambdas)} lambda x {len(alphas)} alpha values with {jobs} job(s)")
    rows = asyncio.run(_run_rows(jobs_list, max(1, jobs), progress))
    best = best_row(rows)
    if best is not None:
        logger.info(
            f"Best row: lambda={best['lambda']:.6g} alpha={best['alpha']:.6g} "
            f"f_score={best['f_score']:.4f} modularity={best['modularity']:.4f}"
        )
    return rows


def best_row(rows: Sequence[dict]) -> dict | None:
    """Highest F-score, ties broken by modularity, then by grid order."""

    def key(item):
        idx, row = item
        fs = row.get("f_score", math.nan)
        mod = row.get("modularity", math.nan)
        return (
            -math.inf if math.isnan(fs) else fs,
            -math.inf if math.isnan(mod) else mod,
            -idx,
        )

    scored = [(i, r) for i, r in enumerate(rows) if not math.isnan(r.get("f_score", math.nan))]
    if not scored:
        return None
    return max(scored, key=key)[1]
