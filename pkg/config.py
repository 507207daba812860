# config.py
#
# purpose: typed configuration objects (pydantic) and environment-backed defaults.
#
# Env vars (all optional, read after load_dotenv()):
# - LOG_LEVEL: logging level for the CLI (default INFO).
# - MM_EPSILON, MM_MAXITER: solver stopping rule (default 1e-6, 1000).
# - MM_CUBIC_METHOD: 'companion' (default) or 'bisection'.
# - SCAD_A: SCAD shape parameter (default 3.7).
# - BIN_THRESHOLD: relative edge-detection threshold (default 1e-4).
# - SWEEP_JOBS: parallel sweep rows (default 1).
#
from __future__ import annotations

import os
from typing import Literal

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

load_dotenv()

__version__ = "0.1.0"


def env_str(name: str, default: str) -> str:
    return os.environ.get(name, default).strip()


def env_float(name: str, default: float) -> float:
    return float(os.environ.get(name, str(default)))


def env_int(name: str, default: int) -> int:
    return int(os.environ.get(name, str(default)))


DEFAULT_SCAD_A = 3.7
DEFAULT_THRESHOLD = 1e-4


class HyperParams(BaseModel):
    """Objective hyperparameters: fusion weight, kernel width, sparsity and SCAD shape."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    alpha: float = Field(..., ge=0.0, le=1.0)
    sigma2: float = Field(1.0, gt=0.0)
    lam: float = Field(0.0, ge=0.0, alias="lambda")
    scad_a: float = Field(default_factory=lambda: env_float("SCAD_A", DEFAULT_SCAD_A), gt=2.0)


class SolverConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(default_factory=lambda: env_float("MM_EPSILON", 1e-6), gt=0.0)
    maxiter: int = Field(default_factory=lambda: env_int("MM_MAXITER", 1000), ge=1)
    # None means the all-ones start vector
    w_init: list[float] | None = None
    weight_floor: float = Field(1e-10, gt=0.0)
    weight_cap: float = Field(1e6, gt=0.0)
    cubic_method: Literal["companion", "bisection"] = Field(
        default_factory=lambda: env_str("MM_CUBIC_METHOD", "companion")
    )
    trace_path: str | None = None

    @field_validator("w_init")
    @classmethod
    def _positive_start(cls, v: list[float] | None) -> list[float] | None:
        if v is not None and any(not x > 0 for x in v):
            raise ValueError("w_init entries must be > 0")
        return v


def default_solver_config(**overrides) -> SolverConfig:
    return SolverConfig(**overrides)


class SynthConfig(BaseModel):
    """Synthetic instance generator settings.

    Clusters 0 and 1 are the "signal-confusable" pair: extra inter-cluster edges
    of weight ``confused_weight`` tie them together in the true graph, while the
    metadata keeps them apart. With ``shared_centroid`` (three or more clusters)
    the last cluster reuses cluster 0's metadata centroid, so only the signals
    can tell those two apart.
    """

    model_config = ConfigDict(frozen=True)

    p: int = Field(30, ge=2)
    clusters: int = Field(3, ge=1)
    cluster_sizes: list[int] | None = None
    p_intra: float = Field(0.7, ge=0.0, le=1.0)
    weight_low: float = Field(0.5, gt=0.0)
    weight_high: float = Field(1.5, gt=0.0)
    p_confused: float = Field(0.15, ge=0.0, le=1.0)
    confused_weight: float = Field(0.6, ge=0.0)
    bridge_weight: float = Field(0.02, gt=0.0)
    n: int = Field(200, ge=1)
    dim: int = Field(8, ge=1)
    d_in: float = Field(1.0, ge=0.0)
    d_out: float = Field(80.0, gt=0.0)
    noise: float = Field(0.0, ge=0.0, le=1.0)
    shared_centroid: bool = True
    seed: int = 0
    max_retries: int = Field(50, ge=1)

    @model_validator(mode="after")
    def _resolve_sizes(self) -> SynthConfig:
        if self.cluster_sizes is None:
            if self.clusters > self.p:
                raise ValueError(f"cannot split p={self.p} nodes into {self.clusters} clusters")
            base, extra = divmod(self.p, self.clusters)
            sizes = [base + (1 if c < extra else 0) for c in range(self.clusters)]
            object.__setattr__(self, "cluster_sizes", sizes)
        elif sum(self.cluster_sizes) != self.p or any(s < 1 for s in self.cluster_sizes):
            raise ValueError(f"cluster sizes {self.cluster_sizes} must be positive and sum to p={self.p}")
        else:
            object.__setattr__(self, "clusters", len(self.cluster_sizes))
        if self.weight_high < self.weight_low:
            raise ValueError("weight_high must be >= weight_low")
        if self.d_out <= self.d_in:
            raise ValueError("d_out must exceed d_in")
        if self.dim < self.clusters:
            raise ValueError(f"dim={self.dim} cannot hold {self.clusters} equidistant cluster centroids")
        return self
