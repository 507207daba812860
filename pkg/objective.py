# objective.py
#
# purpose: evaluates the fused objective the MM solver descends on:
#              f(w) = alpha*f1(w) + (1-alpha)*f2(w) + alpha*f3(w)
#          f1: -log det(L(w) + J) + tr(S L(w))      (Laplacian-constrained GGM)
#          f2: w^T z + sigma2 * sum w (log w - 1)    (metadata kernel term)
#          f3: sum scad(w)                           (sparsity penalty)
#
# dependencies: numpy, scipy.linalg (cholesky for the log-det), graph_core.
#
# design rationale: log det goes through a Cholesky factor of L(w)+J, never an
#                   explicit determinant; a failed factorization means the graph
#                   of positive weights is disconnected and is reported with the
#                   offending iterate. w log w is floored at WEIGHT_FLOOR so zero
#                   weights evaluate to (almost) their limit value instead of -inf.
#
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from config import HyperParams
from errors import DomainError, NotPositiveDefiniteError
from graph_core import (
    adjoint_diag,
    as_weights,
    check_symmetric,
    edge_quadratic_forms,
    laplacian_plus_j,
    n_edges,
)

logger = logging.getLogger(__name__)

WEIGHT_FLOOR = 1e-12
PSD_RTOL = 1e-8


@dataclass(frozen=True)
class ProblemData:
    """Sample covariance S, metadata distances z (None when only signals are used), and R = diag(E^T S E)."""

    S: np.ndarray
    z: np.ndarray | None
    p: int
    R: np.ndarray

    @classmethod
    def build(cls, S, z=None) -> ProblemData:
        S = repair_psd(check_symmetric(S, name="sample covariance"))
        p = S.shape[0]
        if p < 2:
            raise DomainError(f"need at least 2 nodes, got p={p}")
        if z is not None:
            z = np.asarray(z, dtype=float)
            if z.shape != (n_edges(p),):
                raise DomainError(f"distance vector has shape {z.shape}, expected ({n_edges(p)},)")
            if np.any(z < 0) or not np.all(np.isfinite(z)):
                raise DomainError("distance vector must be finite and nonnegative")
        return cls(S=S, z=z, p=p, R=adjoint_diag(S))

    def require_z(self) -> np.ndarray:
        if self.z is None:
            raise DomainError("metadata distances are required when alpha < 1")
        return self.z


def repair_psd(S: np.ndarray, rtol: float = PSD_RTOL) -> np.ndarray:
    """Clip eigenvalues in [-rtol*lambda_max, 0) to zero; anything more negative is an error."""
    vals, vecs = linalg.eigh(S)
    if vals.size == 0 or vals[0] >= 0:
        return S
    top = max(float(vals[-1]), 0.0)
    if vals[0] < -rtol * top:
        raise DomainError(
            f"sample covariance is not positive semidefinite: eigenvalue {vals[0]:.3e} (max {top:.3e})"
        )
    logger.debug(f"Clipping {int(np.sum(vals < 0))} slightly negative eigenvalues of S")
    vals = np.clip(vals, 0.0, None)
    out = (vecs * vals) @ vecs.T
    return 0.5 * (out + out.T)


# --- SCAD penalty ---


def _check_scad_args(x, lam: float, a: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("SCAD is defined on x >= 0")
    if lam < 0:
        raise DomainError(f"lambda must be >= 0, got {lam}")
    if a <= 2:
        raise DomainError(f"SCAD shape a must be > 2, got {a}")
    return x


def _scalar_or_array(x_in, out: np.ndarray):
    return float(out) if np.ndim(x_in) == 0 else out


def scad(x, lam: float, a: float):
    """SCAD penalty: lam*x on [0, lam], quadratic blend on (lam, a*lam], (a+1)lam^2/2 beyond."""
    x_arr = _check_scad_args(x, lam, a)
    mid = (-(x_arr**2) + 2 * a * lam * x_arr - lam**2) / (2 * (a - 1))
    out = np.where(
        x_arr <= lam,
        lam * x_arr,
        np.where(x_arr <= a * lam, mid, (a + 1) * lam**2 / 2),
    )
    return _scalar_or_array(x, out)


def scad_grad(x, lam: float, a: float):
    x_arr = _check_scad_args(x, lam, a)
    out = np.where(
        x_arr <= lam,
        lam,
        np.where(x_arr <= a * lam, (a * lam - x_arr) / (a - 1), 0.0),
    )
    return _scalar_or_array(x, np.asarray(out, dtype=float))


# --- objective terms ---


def spd_factor(w) -> tuple[np.ndarray, bool]:
    """Cholesky factor of L(w) + J in scipy's cho_factor format."""
    w = np.asarray(w, dtype=float)
    try:
        return linalg.cho_factor(laplacian_plus_j(w), lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as e:
        raise NotPositiveDefiniteError(
            f"L(w) + J is not positive definite (graph not connected?): {e}", w=w
        ) from e


def logdet_from_factor(factor: tuple[np.ndarray, bool]) -> float:
    c, _ = factor
    return 2.0 * float(np.sum(np.log(np.diag(c))))


def f1(w, S, R: np.ndarray | None = None) -> float:
    w = as_weights(w)
    if R is None:
        R = adjoint_diag(S)
    factor = spd_factor(w)
    return float(R @ w) - logdet_from_factor(factor)


def _edge_values(w) -> np.ndarray:
    """Per-edge values of any length: 1-D, finite, nonnegative."""
    arr = np.asarray(w, dtype=float)
    if arr.ndim != 1:
        raise DomainError(f"weight vector must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("weight vector contains non-finite entries")
    if np.any(arr < 0):
        k = int(np.argmin(arr))
        raise DomainError(f"negative edge weight {arr[k]!r} at edge {k + 1}")
    return arr


def f2(w, z, sigma2: float) -> float:
    w = _edge_values(w)
    z = np.asarray(z, dtype=float)
    if z.shape != w.shape:
        raise DomainError(f"distance vector has shape {z.shape}, weights have {w.shape}")
    wf = np.maximum(w, WEIGHT_FLOOR)
    return float(z @ w + sigma2 * np.sum(wf * (np.log(wf) - 1.0)))


def f3(w, lam: float, a: float) -> float:
    w = _edge_values(w)
    if lam == 0:
        return 0.0
    return float(np.sum(scad(w, lam, a)))


def objective(w, data: ProblemData, hp: HyperParams) -> float:
    """alpha*f1 + (1-alpha)*f2 + alpha*f3; endpoint terms with zero weight are skipped."""
    w = as_weights(w, data.p)
    total = 0.0
    if hp.alpha > 0:
        total += hp.alpha * (f1(w, data.S, data.R) + f3(w, hp.lam, hp.scad_a))
    if hp.alpha < 1:
        total += (1.0 - hp.alpha) * f2(w, data.require_z(), hp.sigma2)
    return total


def smooth_gradient(w, data: ProblemData, hp: HyperParams) -> np.ndarray:
    """Gradient of alpha*f1 + (1-alpha)*f2 at an interior point w > 0.

    The f1 part is R - diag(E^T (L(w)+J)^{-1} E).
    """
    w = as_weights(w, data.p)
    grad = np.zeros_like(w)
    if hp.alpha > 0:
        factor = spd_factor(w)
        M = linalg.cho_solve(factor, np.eye(data.p))
        grad += hp.alpha * (data.R - edge_quadratic_forms(M))
    if hp.alpha < 1:
        grad += (1.0 - hp.alpha) * (data.require_z() + hp.sigma2 * np.log(w))
    return grad
