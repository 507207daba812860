# side_info.py
#
# Node metadata -> squared embedding distances z, the closed-form Gaussian
# kernel graph exp(-z/sigma2) (minimizer of the metadata-only objective), and
# sigma2 bandwidth heuristics. File parsing lives in data_io.py.

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from errors import DegenerateMetadataError, DomainError, IngestionError, LabelMismatchError
from graph_core import check_symmetric

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmbeddingSet:
    labels: tuple[str, ...]
    vectors: np.ndarray  # p x d

    def __post_init__(self):
        vecs = np.asarray(self.vectors, dtype=float)
        if vecs.ndim != 2 or vecs.shape[1] < 1:
            raise IngestionError(f"embeddings must be a p x d array with d >= 1, got shape {vecs.shape}")
        if vecs.shape[0] != len(self.labels):
            raise IngestionError(f"{vecs.shape[0]} embedding rows for {len(self.labels)} labels")
        if len(set(self.labels)) != len(self.labels):
            raise IngestionError("duplicate node labels in embeddings")
        if not np.all(np.isfinite(vecs)):
            raise IngestionError("embeddings contain non-finite values")
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "vectors", vecs)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def align_labels(source: Sequence[str], target: Sequence[str], what: str = "metadata") -> np.ndarray:
    """Positions of ``target`` labels inside ``source``; any missing/extra label is an error."""
    src, tgt = list(source), list(target)
    missing = sorted(set(tgt) - set(src))
    extra = sorted(set(src) - set(tgt))
    if missing or extra:
        raise LabelMismatchError(
            f"{what} labels do not match the signal nodes: missing={missing[:10]} extra={extra[:10]}"
        )
    pos = {lab: k for k, lab in enumerate(src)}
    return np.array([pos[lab] for lab in tgt], dtype=int)


def reorder(emb: EmbeddingSet, labels: Sequence[str]) -> EmbeddingSet:
    idx = align_labels(emb.labels, labels, what="embedding")
    return EmbeddingSet(tuple(labels), emb.vectors[idx])


def pairwise_sq_dists(emb: EmbeddingSet) -> np.ndarray:
    """z_k = ||y_i - y_j||^2 in canonical edge order (same order as np.triu_indices)."""
    return pdist(emb.vectors, metric="sqeuclidean")


def distances_from_matrix(Z, labels: Sequence[str] | None = None,
                          order: Sequence[str] | None = None) -> np.ndarray:
    """Upper-triangular part of a square distance matrix, optionally re-indexed by label."""
    Z = check_symmetric(Z, name="distance matrix")
    if np.any(np.diag(Z) != 0):
        raise IngestionError("distance matrix must have a zero diagonal")
    if np.any(Z < 0):
        raise IngestionError("distance matrix has negative entries")
    if order is not None:
        if labels is None:
            raise DomainError("labels are required to reorder a distance matrix")
        idx = align_labels(labels, order, what="distance-matrix")
        Z = Z[np.ix_(idx, idx)]
    lo, hi = np.triu_indices(Z.shape[0], k=1)
    return Z[lo, hi].copy()


def gaussian_kernel_weights(z, sigma2: float) -> np.ndarray:
    """w_k = exp(-z_k / sigma2), the unique minimizer of w^T z + sigma2 * sum w (log w - 1)."""
    if not sigma2 > 0:
        raise DomainError(f"sigma2 must be > 0, got {sigma2}")
    return np.exp(-np.asarray(z, dtype=float) / sigma2)


def sigma2_heuristic(z, method: str = "median") -> float:
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        raise DegenerateMetadataError("empty distance vector")
    if method == "median":
        value = float(np.median(z))
    elif method == "mean":
        value = float(np.mean(z))
    else:
        raise DomainError(f"unknown sigma2 heuristic {method!r} (use 'median' or 'mean')")
    if not value > 0:
        raise DegenerateMetadataError(
            f"{method} of metadata distances is {value}; all (or most) nodes share the same embedding"
        )
    logger.info(f"sigma2 from {method} heuristic: {value:.6g}")
    return value
