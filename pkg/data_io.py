# data_io.py
#
# purpose: file formats in and out of the solver.
#
# inputs (CSV, '.' decimal separator, first row is a header):
#   prices      node,<date_0>,<date_1>,...      closing prices, > 0, no gaps
#   signals     node,<t_1>,...,<t_n>            already-transformed signals
#   embeddings  node,<c_1>,...,<c_d>            metadata embedding vectors
#   distances   node,<label_1>,...,<label_p>    square, symmetric, zero diagonal
#   labels      node,sector                     ground-truth partition
#
# outputs: learned graph document (JSON: nodes, edges, hyperparameters,
#          convergence), flat edge-list CSV, sweep report CSV, run manifest.
#
# design rationale: every join is by node label, never by row position. floats
#                   are written with 17 significant digits so round-trips are
#                   lossless and byte-stable.
#
from __future__ import annotations

import json
import logging
import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from errors import GraphParseError, IngestionError
from graph_core import edge_endpoints, n_edges
from path_utils import ensure_parent, normalize_path
from side_info import EmbeddingSet, align_labels

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
GRAPH_FORMAT_VERSION = 1


# --- CSV ingestion ---


def _read_labeled_csv(path: str, what: str) -> pd.DataFrame:
    path = normalize_path(path)
    try:
        df = pd.read_csv(path, index_col=0, dtype=str)
    except FileNotFoundError as e:
        raise IngestionError(f"{what} file not found", path=path) from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise IngestionError(f"cannot parse {what} CSV: {e}", path=path) from e
    df.index = df.index.astype(str).str.strip()
    df.columns = [str(c).strip() for c in df.columns]
    if df.index.has_duplicates:
        dup = df.index[df.index.duplicated()].unique().tolist()
        raise IngestionError(f"duplicate node labels in {what}: {dup[:10]}", path=path)
    if df.shape[0] == 0 or df.shape[1] == 0:
        raise IngestionError(f"{what} CSV has no data", path=path)
    bad = df.apply(pd.to_numeric, errors="coerce").isna()
    if bad.to_numpy().any():
        r, c = np.argwhere(bad.to_numpy())[0]
        raise IngestionError(
            f"missing or non-numeric {what} value at node '{df.index[r]}', column '{df.columns[c]}'",
            path=path,
        )
    logger.info(f"Read {what}: {df.shape[0]} nodes x {df.shape[1]} columns from {path}")
    # str -> float is correctly rounded, so %.17g output reads back bit for bit
    return df.astype(float)


@dataclass(frozen=True)
class PricePanel:
    labels: tuple[str, ...]
    dates: tuple[str, ...]
    prices: np.ndarray  # p x (n+1)


def read_prices(path: str) -> PricePanel:
    df = _read_labeled_csv(path, "prices")
    return PricePanel(tuple(df.index), tuple(df.columns), df.to_numpy())


def read_signals(path: str) -> tuple[tuple[str, ...], np.ndarray]:
    df = _read_labeled_csv(path, "signals")
    return tuple(df.index), df.to_numpy()


def read_embeddings(path: str) -> EmbeddingSet:
    df = _read_labeled_csv(path, "embeddings")
    return EmbeddingSet(tuple(df.index), df.to_numpy())


def read_distance_matrix(path: str) -> tuple[tuple[str, ...], np.ndarray]:
    df = _read_labeled_csv(path, "distance matrix")
    if df.shape[0] != df.shape[1]:
        raise IngestionError(f"distance matrix is {df.shape[0]}x{df.shape[1]}, not square", path=path)
    rows = list(df.index)
    idx = align_labels(list(df.columns), rows, what="distance-matrix column")
    return tuple(rows), df.to_numpy()[:, idx]


def read_labels(path: str) -> dict[str, str]:
    path = normalize_path(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError as e:
        raise IngestionError("labels file not found", path=path) from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise IngestionError(f"cannot parse labels CSV: {e}", path=path) from e
    if df.shape[1] < 2:
        raise IngestionError("labels CSV needs two columns: node, sector", path=path)
    nodes = df.iloc[:, 0].str.strip()
    sectors = df.iloc[:, 1].str.strip()
    if nodes.duplicated().any():
        raise IngestionError(f"duplicate nodes in labels: {nodes[nodes.duplicated()].tolist()[:10]}", path=path)
    if (nodes == "").any() or (sectors == "").any():
        raise IngestionError("empty node or sector label", path=path)
    return dict(zip(nodes, sectors, strict=True))


# --- transforms ---


def log_returns(panel: PricePanel | np.ndarray) -> np.ndarray:
    """X[i, t] = log P[i, t] - log P[i, t-1]; one column fewer than the price panel."""
    if isinstance(panel, PricePanel):
        prices, labels, dates = panel.prices, panel.labels, panel.dates
    else:
        prices = np.asarray(panel, dtype=float)
        labels = dates = None
    if prices.ndim != 2 or prices.shape[1] < 2:
        raise IngestionError(f"need at least two price columns, got shape {prices.shape}")
    nonpos = np.argwhere(~(prices > 0))
    if nonpos.size:
        r, c = nonpos[0]
        node = labels[r] if labels else r
        date = dates[c] if dates else c
        raise IngestionError(f"nonpositive price {prices[r, c]!r} at node '{node}', column '{date}'")
    return np.diff(np.log(prices), axis=1)


def prices_from_returns(X: np.ndarray, start: float = 100.0) -> np.ndarray:
    """Inverse of log_returns: start * exp(cumsum), with the start price as column 0."""
    X = np.asarray(X, dtype=float)
    cum = np.concatenate([np.zeros((X.shape[0], 1)), np.cumsum(X, axis=1)], axis=1)
    return start * np.exp(cum)


def sample_covariance(X, center: bool = False) -> np.ndarray:
    """S = (1/n) sum_t x_t x_t^T. No mean removal unless ``center`` (zero-mean model)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 1:
        raise IngestionError(f"signal matrix must be p x n with n >= 1, got shape {X.shape}")
    if center:
        X = X - X.mean(axis=1, keepdims=True)
    S = X @ X.T / X.shape[1]
    return 0.5 * (S + S.T)


# --- CSV writers ---


def _write_frame(df: pd.DataFrame, path: str, index: bool = True) -> str:
    out = ensure_parent(path)
    df.to_csv(out, index=index, index_label="node" if index else None, float_format=FLOAT_FORMAT,
              na_rep="nan", lineterminator="\n")
    return out


def write_matrix_csv(labels: Sequence[str], values: np.ndarray, columns: Sequence[str], path: str) -> str:
    return _write_frame(pd.DataFrame(np.asarray(values, dtype=float), index=list(labels),
                                     columns=list(columns)), path)


def write_prices(panel: PricePanel, path: str) -> str:
    return write_matrix_csv(panel.labels, panel.prices, panel.dates, path)


def write_signals(labels: Sequence[str], X: np.ndarray, path: str) -> str:
    return write_matrix_csv(labels, X, [f"t{t + 1}" for t in range(X.shape[1])], path)


def write_embeddings(emb: EmbeddingSet, path: str) -> str:
    return write_matrix_csv(emb.labels, emb.vectors, [f"c{c + 1}" for c in range(emb.dim)], path)


def write_distance_matrix(labels: Sequence[str], Z: np.ndarray, path: str) -> str:
    return write_matrix_csv(labels, Z, labels, path)


def write_labels(partition: dict[str, str], path: str) -> str:
    df = pd.DataFrame({"node": list(partition), "sector": list(partition.values())})
    return _write_frame(df, path, index=False)


# --- learned graph document ---


class Edge(BaseModel):
    model_config = ConfigDict(frozen=True)

    source: str
    target: str
    weight: float = Field(..., gt=0.0)


class LearnedGraph(BaseModel):
    """Node labels, weighted edges and the provenance of a learned graph."""

    model_config = ConfigDict(extra="ignore")

    format_version: int = GRAPH_FORMAT_VERSION
    nodes: list[str]
    edges: list[Edge] = Field(default_factory=list)
    hyperparameters: dict[str, Any] = Field(default_factory=dict)
    convergence: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_edges(self) -> LearnedGraph:
        names = set(self.nodes)
        if len(names) != len(self.nodes):
            raise ValueError("duplicate node labels")
        for e in self.edges:
            if e.source not in names or e.target not in names:
                raise ValueError(f"edge ({e.source}, {e.target}) references an unknown node")
            if e.source == e.target:
                raise ValueError(f"self-loop on node {e.source}")
        return self

    @classmethod
    def from_weights(cls, labels: Sequence[str], w: np.ndarray, threshold: float = 0.0,
                     hyperparameters: dict | None = None, convergence: dict | None = None) -> LearnedGraph:
        labels = list(labels)
        lo, hi = edge_endpoints(len(labels))
        edges = [
            Edge(source=labels[i], target=labels[j], weight=float(wk))
            for i, j, wk in zip(lo, hi, w, strict=True)
            if wk > threshold
        ]
        return cls(nodes=labels, edges=edges, hyperparameters=hyperparameters or {},
                   convergence=convergence or {})

    def to_weights(self, order: Sequence[str] | None = None) -> np.ndarray:
        """Dense weight vector in canonical order over ``order`` (default: self.nodes)."""
        order = list(order) if order is not None else list(self.nodes)
        align_labels(self.nodes, order, what="graph node")
        pos = {lab: k for k, lab in enumerate(order)}
        p = len(order)
        w = np.zeros(n_edges(p))
        for e in self.edges:
            a, b = sorted((pos[e.source], pos[e.target]))
            # canonical 0-based position of pair (a, b), a < b
            w[a * (2 * p - a - 1) // 2 + (b - a - 1)] = e.weight
        return w


def export_graph(g: LearnedGraph, path: str) -> str:
    out = ensure_parent(path)
    with open(out, "w", encoding="utf-8") as f:
        f.write(g.model_dump_json(indent=2))
        f.write("\n")
    logger.info(f"Wrote graph ({len(g.nodes)} nodes, {len(g.edges)} edges) to {out}")
    return out


def import_graph(path: str) -> LearnedGraph:
    path = normalize_path(path)
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except FileNotFoundError as e:
        raise GraphParseError("graph file not found", path=path) from e
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise GraphParseError(e.msg, path=path, line=e.lineno, column=e.colno) from e
    if not isinstance(raw, dict):
        raise GraphParseError("top-level value must be an object", path=path, line=1, column=1)
    unknown = sorted(set(raw) - set(LearnedGraph.model_fields))
    if unknown:
        logger.warning(f"Ignoring unknown fields in {path}: {unknown}")
    try:
        return LearnedGraph.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        loc = tuple(first.get("loc", ()))
        where = ".".join(str(x) for x in loc)
        line = column = None
        if loc:
            offset = _json_offset(text, loc)
            line = text.count("\n", 0, offset) + 1
            column = offset - text.rfind("\n", 0, offset)
        raise GraphParseError(f"{where}: {first.get('msg')}" if where else str(first.get("msg")),
                              path=path, line=line, column=column) from e


_WS = re.compile(r"\s*")


def _json_offset(text: str, loc: tuple) -> int:
    """Character offset of the value at ``loc`` (keys and list indices) in a JSON document.

    Stops at the deepest container reached when a key or index is absent.
    """
    decoder = json.JSONDecoder()
    pos = _WS.match(text, 0).end()
    for part in loc:
        opener = text[pos:pos + 1]
        if opener not in ("{", "["):
            break
        start, pos = pos, _WS.match(text, pos + 1).end()
        index, found = 0, False
        while text[pos:pos + 1] not in ("}", "]", ""):
            if opener == "{":
                key, pos = decoder.raw_decode(text, pos)
                pos = _WS.match(text, pos).end() + 1  # ':'
                pos = _WS.match(text, pos).end()
                hit = key == part
            else:
                hit = index == part
                index += 1
            if hit:
                found = True
                break
            _, pos = decoder.raw_decode(text, pos)
            pos = _WS.match(text, pos).end()
            if text[pos:pos + 1] == ",":
                pos = _WS.match(text, pos + 1).end()
        if not found:
            return start
    return pos


def export_edge_csv(g: LearnedGraph, path: str) -> str:
    df = pd.DataFrame([e.model_dump() for e in g.edges], columns=["source", "target", "weight"])
    return _write_frame(df, path, index=False)


# --- reports and manifests ---

REPORT_COLUMNS = ["lambda", "alpha", "f_score", "modularity", "iters", "termination"]


def write_report_csv(rows: Iterable[dict], path: str, timings: bool = False) -> str:
    columns = REPORT_COLUMNS[:-1] + (["millis"] if timings else []) + REPORT_COLUMNS[-1:]
    out = _write_frame(pd.DataFrame(list(rows)).reindex(columns=columns), path, index=False)
    logger.info(f"Wrote report to {out}")
    return out


def read_report_csv(path: str) -> pd.DataFrame:
    return pd.read_csv(normalize_path(path))


class RunManifest(BaseModel):
    """Everything needed to reproduce one CLI run."""

    command: str
    tool_version: str
    seed: int | None = None
    inputs: dict[str, str] = Field(default_factory=dict)  # path -> sha256
    parameters: dict[str, Any] = Field(default_factory=dict)
    outputs: list[str] = Field(default_factory=list)
    timings: dict[str, float] = Field(default_factory=dict)


def write_manifest(manifest: RunManifest, path: str) -> str:
    out = ensure_parent(path)
    with open(out, "w", encoding="utf-8") as f:
        f.write(manifest.model_dump_json(indent=2))
        f.write("\n")
    return out
