# graph_core.py
#
# purpose: the combinatorial Laplacian parameterization every other module
#          builds on. edge weights live in a length-m vector w (m = p(p-1)/2)
#          and L(w) is assembled from it.
#
# key components: edge_index / edge_pair (1-based canonical map, k = i - j +
#                 (j-1)(2p-j)/2 for i > j), laplacian_op, incidence_matrices,
#                 adjoint_diag (diag(E^T S E)), is_connected.
#
# design rationale: storage is 0-based and follows np.triu_indices(p, 1), which
#                   enumerates pairs in exactly the canonical order. E and G are
#                   only materialized for tests and small p; the solver goes
#                   through the edge-indexed formulas (R_k = S_ii + S_jj - 2 S_ij).
#
from __future__ import annotations

import functools
from typing import NamedTuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from errors import DomainError, InvalidEdgeError, SymmetryError

SYMMETRY_RTOL = 1e-10


def n_edges(p: int) -> int:
    return p * (p - 1) // 2


def n_nodes(m: int) -> int:
    """Node count p for a weight vector of length m; raises if m is not triangular."""
    p = int(round((1 + np.sqrt(1 + 8 * m)) / 2))
    if p < 2 or n_edges(p) != m:
        raise DomainError(f"weight vector length {m} is not p(p-1)/2 for any p >= 2")
    return p


@functools.lru_cache(maxsize=64)
def edge_endpoints(p: int) -> tuple[np.ndarray, np.ndarray]:
    """0-based (lo, hi) node arrays of every edge in canonical order.

    Edge k (0-based) joins node lo[k] < hi[k]; in the 1-based notation of
    edge_index, j = lo + 1 and i = hi + 1.
    """
    lo, hi = np.triu_indices(p, k=1)
    lo.setflags(write=False)
    hi.setflags(write=False)
    return lo, hi


def edge_index(i: int, j: int, p: int) -> int:
    """1-based index k of edge (i, j), i > j, both 1-based node ids."""
    if not (1 <= j < i <= p):
        raise InvalidEdgeError(i, j, p)
    return i - j + (j - 1) * (2 * p - j) // 2


def edge_pair(k: int, p: int) -> tuple[int, int]:
    """Inverse of edge_index: 1-based k -> (i, j) with i > j."""
    m = n_edges(p)
    if not (1 <= k <= m):
        raise DomainError(f"edge index {k} out of range [1, {m}] for p={p}")
    lo, hi = edge_endpoints(p)
    return int(hi[k - 1]) + 1, int(lo[k - 1]) + 1


def as_weights(w, p: int | None = None) -> np.ndarray:
    """Validate a weight vector (length p(p-1)/2, nonnegative) and return it as float array."""
    arr = np.asarray(w, dtype=float)
    if arr.ndim != 1:
        raise DomainError(f"weight vector must be 1-D, got shape {arr.shape}")
    expected = n_edges(p) if p is not None else None
    if expected is not None and arr.size != expected:
        raise DomainError(f"weight vector has length {arr.size}, expected {expected} for p={p}")
    if expected is None:
        n_nodes(arr.size)
    if not np.all(np.isfinite(arr)):
        raise DomainError("weight vector contains non-finite entries")
    if np.any(arr < 0):
        k = int(np.argmin(arr))
        raise DomainError(f"negative edge weight {arr[k]!r} at edge {k + 1}")
    return arr


def laplacian_op(w) -> np.ndarray:
    """L(w): off-diagonal (i, j) entry is -w_k, diagonal is the weighted degree."""
    w = as_weights(w)
    p = n_nodes(w.size)
    lo, hi = edge_endpoints(p)
    L = np.zeros((p, p))
    L[lo, hi] = -w
    L[hi, lo] = -w
    np.fill_diagonal(L, -L.sum(axis=1))
    return L


def adjacency(w) -> np.ndarray:
    w = as_weights(w)
    p = n_nodes(w.size)
    lo, hi = edge_endpoints(p)
    A = np.zeros((p, p))
    A[lo, hi] = w
    A[hi, lo] = w
    return A


def laplacian_plus_j(w) -> np.ndarray:
    """L(w) + J with J = (1/p) 11^T."""
    L = laplacian_op(w)
    return L + 1.0 / L.shape[0]


class IncidenceMatrices(NamedTuple):
    E: np.ndarray  # p x m, column k = e_i - e_j (i > j)
    G: np.ndarray  # p x (m+1), [E, 1]


def incidence_matrices(p: int) -> IncidenceMatrices:
    if p < 2:
        raise DomainError(f"need p >= 2, got {p}")
    lo, hi = edge_endpoints(p)
    m = lo.size
    E = np.zeros((p, m))
    cols = np.arange(m)
    E[hi, cols] = 1.0
    E[lo, cols] = -1.0
    G = np.hstack([E, np.ones((p, 1))])
    return IncidenceMatrices(E, G)


def check_symmetric(S, rtol: float = SYMMETRY_RTOL, name: str = "matrix") -> np.ndarray:
    """Return (S + S^T)/2 after checking max|S - S^T| <= rtol * max|S|."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise SymmetryError(f"{name} must be square, got shape {S.shape}")
    scale = float(np.max(np.abs(S))) if S.size else 0.0
    gap = float(np.max(np.abs(S - S.T))) if S.size else 0.0
    if gap > rtol * max(scale, np.finfo(float).tiny):
        raise SymmetryError(f"{name} is not symmetric: max|S - S^T| = {gap:.3e} (scale {scale:.3e})")
    return 0.5 * (S + S.T)


def adjoint_diag(S, p: int | None = None, rtol: float = SYMMETRY_RTOL) -> np.ndarray:
    """diag(E^T S E): entry k is S_ii + S_jj - 2 S_ij for edge k = (i, j).

    This is the adjoint of laplacian_op, so tr(S L(w)) = <adjoint_diag(S), w>.
    """
    S = check_symmetric(S, rtol=rtol)
    if p is not None and S.shape[0] != p:
        raise DomainError(f"matrix is {S.shape[0]}x{S.shape[0]}, expected p={p}")
    lo, hi = edge_endpoints(S.shape[0])
    d = np.diag(S)
    return d[lo] + d[hi] - 2.0 * S[lo, hi]


def is_connected(w, threshold: float = 0.0) -> bool:
    """True when the graph of edges with weight > threshold is connected."""
    w = as_weights(w)
    p = n_nodes(w.size)
    lo, hi = edge_endpoints(p)
    keep = w > threshold
    graph = coo_matrix((np.ones(int(keep.sum())), (lo[keep], hi[keep])), shape=(p, p))
    n_comp, _ = connected_components(graph, directed=False)
    return bool(n_comp == 1)


def laplacian_rank(w, tol: float | None = None) -> int:
    return int(np.linalg.matrix_rank(laplacian_op(w), tol=tol, hermitian=True))


def edge_quadratic_forms(M: np.ndarray) -> np.ndarray:
    """xi_k^T M xi_k = M_ii + M_jj - M_ij - M_ji for every edge, without a symmetry check."""
    lo, hi = edge_endpoints(M.shape[0])
    d = np.diag(M)
    return d[lo] + d[hi] - M[lo, hi] - M[hi, lo]
