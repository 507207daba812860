# synth.py
#
# purpose: seeded synthetic instances that mirror the sector experiment at desk scale.
#   truth graph: dense random blocks (one per cluster), a weak bridge chain so the
#                graph is connected, and extra edges tying clusters 0 and 1 together
#                so that the signals alone confuse them.
#   signals:     zero-mean Gaussian with precision L(w_true), sampled on the p-1
#                non-null eigenvectors (every sample is orthogonal to 1).
#   metadata:    embeddings around equidistant cluster centroids, so the metadata
#                separates the clusters the signals confuse. By default the last
#                cluster shares cluster 0's centroid: there only the signals help.
#
# All randomness comes from one numpy Generator(PCG64(seed)).
#
from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.spatial.distance import squareform

from config import SynthConfig
from data_io import (
    LearnedGraph,
    PricePanel,
    export_graph,
    prices_from_returns,
    write_distance_matrix,
    write_embeddings,
    write_labels,
    write_prices,
    write_signals,
)
from errors import GenerationError
from graph_core import edge_endpoints, is_connected, laplacian_op, n_edges
from side_info import EmbeddingSet, pairwise_sq_dists

logger = logging.getLogger(__name__)

CONFUSED_PAIR = (0, 1)


@dataclass(frozen=True)
class SynthInstance:
    labels: tuple[str, ...]
    w_true: np.ndarray
    signals: np.ndarray  # p x n
    embeddings: EmbeddingSet
    z: np.ndarray
    partition: dict[str, str]
    seed: int


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def node_labels(p: int) -> tuple[str, ...]:
    width = len(str(p - 1))
    return tuple(f"n{i:0{width}d}" for i in range(p))


def cluster_assignment(sizes: list[int]) -> np.ndarray:
    return np.repeat(np.arange(len(sizes)), sizes)


def sample_truth_graph(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """One draw of the block graph; may be disconnected (the caller retries)."""
    ids = cluster_assignment(cfg.cluster_sizes)
    lo, hi = edge_endpoints(cfg.p)
    m = n_edges(cfg.p)
    same = ids[lo] == ids[hi]
    w = np.zeros(m)

    intra = same & (rng.random(m) < cfg.p_intra)
    w[intra] = rng.uniform(cfg.weight_low, cfg.weight_high, size=int(intra.sum()))

    if cfg.clusters >= 2:
        a, b = CONFUSED_PAIR
        cross = ((ids[lo] == a) & (ids[hi] == b)) | ((ids[lo] == b) & (ids[hi] == a))
        confused = cross & (rng.random(m) < cfg.p_confused)
        w[confused] = cfg.confused_weight

    # weak chain between consecutive clusters
    starts = np.concatenate([[0], np.cumsum(cfg.cluster_sizes)])
    for c in range(cfg.clusters - 1):
        u = int(rng.integers(starts[c], starts[c + 1]))
        v = int(rng.integers(starts[c + 1], starts[c + 2]))
        k = u * (2 * cfg.p - u - 1) // 2 + (v - u - 1)
        w[k] = max(w[k], cfg.bridge_weight)
    return w


def sample_gmrf(w: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """n samples x ~ N(0, L(w)^+), as columns of a p x n matrix."""
    vals, vecs = linalg.eigh(laplacian_op(w))
    vals, vecs = vals[1:], vecs[:, 1:]
    if vals[0] <= 1e-12 * vals[-1]:
        raise GenerationError("Laplacian has more than one zero eigenvalue; graph is disconnected")
    X = vecs @ (rng.standard_normal((vals.size, n)) / np.sqrt(vals)[:, None])
    # remove rounding residue along the null direction
    return X - X.mean(axis=0, keepdims=True)


def sample_embeddings(cfg: SynthConfig, ids: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Centroids scaled basis vectors (squared distance d_out); jitter gives E||y_i - y_j||^2 = d_in.

    With ``shared_centroid`` the last cluster sits on cluster 0's centroid.
    """
    centroids = np.zeros((cfg.clusters, cfg.dim))
    centroids[np.arange(cfg.clusters), np.arange(cfg.clusters)] = np.sqrt(cfg.d_out / 2.0)
    if cfg.shared_centroid and cfg.clusters >= 3:
        centroids[-1] = centroids[0]
    home = centroids[ids]
    if cfg.noise > 0 and cfg.clusters > 1:
        # noise pulls each node toward a random other cluster
        shift = rng.integers(1, cfg.clusters, size=ids.size)
        other = centroids[(ids + shift) % cfg.clusters]
        home = (1.0 - cfg.noise) * home + cfg.noise * other
    jitter = rng.standard_normal((ids.size, cfg.dim)) * np.sqrt(cfg.d_in / (2.0 * cfg.dim))
    return home + jitter


def generate_instance(cfg: SynthConfig) -> SynthInstance:
    rng = make_rng(cfg.seed)
    for attempt in range(1, cfg.max_retries + 1):
        w = sample_truth_graph(cfg, rng)
        if is_connected(w):
            break
        logger.debug(f"truth graph draw {attempt} disconnected, resampling")
    else:
        raise GenerationError(
            f"no connected truth graph after {cfg.max_retries} draws (p_intra={cfg.p_intra})"
        )
    labels = node_labels(cfg.p)
    ids = cluster_assignment(cfg.cluster_sizes)
    X = sample_gmrf(w, cfg.n, rng)
    emb = EmbeddingSet(labels, sample_embeddings(cfg, ids, rng))
    partition = {lab: f"s{c}" for lab, c in zip(labels, ids, strict=True)}
    logger.info(
        f"Synthetic instance: p={cfg.p}, clusters={cfg.cluster_sizes}, "
        f"edges={int(np.count_nonzero(w))}, n={cfg.n}, seed={cfg.seed}"
    )
    return SynthInstance(labels, w, X, emb, pairwise_sq_dists(emb), partition, cfg.seed)


def write_instance(inst: SynthInstance, outdir: str) -> dict[str, str]:
    """Write an instance in the ingestion formats; returns role -> path."""
    dates = tuple(f"d{t:04d}" for t in range(inst.signals.shape[1] + 1))
    paths = {
        "signals": write_signals(inst.labels, inst.signals, os.path.join(outdir, "signals.csv")),
        "prices": write_prices(
            PricePanel(inst.labels, dates, prices_from_returns(inst.signals)),
            os.path.join(outdir, "prices.csv"),
        ),
        "embeddings": write_embeddings(inst.embeddings, os.path.join(outdir, "embeddings.csv")),
        "distances": write_distance_matrix(inst.labels, squareform(inst.z),
                                           os.path.join(outdir, "distances.csv")),
        "labels": write_labels(inst.partition, os.path.join(outdir, "labels.csv")),
        "truth": export_graph(
            LearnedGraph.from_weights(inst.labels, inst.w_true, hyperparameters={"seed": inst.seed}),
            os.path.join(outdir, "truth.json"),
        ),
    }
    logger.info(f"Wrote synthetic instance to {outdir}")
    return paths
