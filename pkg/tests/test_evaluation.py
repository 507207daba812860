import itertools
import math

import numpy as np
import pytest

from config import HyperParams, SolverConfig
from errors import DomainError, LabelMismatchError, UndefinedModularityError
from evaluation import (
    alpha_sweep,
    best_row,
    binarize,
    cluster_ids,
    components_clustering,
    f_score,
    modularity,
    parse_grid,
    score_graph,
    sector_block_truth,
)
from graph_core import adjacency, edge_index, n_edges
from mm_solver import run_mm
from objective import ProblemData


def block_weights(sizes: list[int], value: float = 1.0) -> np.ndarray:
    p = sum(sizes)
    ids = np.repeat(np.arange(len(sizes)), sizes)
    lo, hi = np.triu_indices(p, 1)
    return np.where(ids[lo] == ids[hi], value, 0.0)


# --- binarize / F-score ---


def test_binarize_relative_threshold():
    assert binarize([1.0, 0.5, 1e-9], 1e-4) == frozenset({0, 1})
    assert binarize([1.0, 0.0, 1e-9], 0.0) == frozenset({0, 2})
    assert binarize(np.zeros(3), 1e-4) == frozenset()
    with pytest.raises(DomainError):
        binarize([1.0], -1.0)


def test_binarize_is_scale_invariant():
    rng = np.random.default_rng(0)
    w = rng.exponential(1.0, n_edges(8))
    assert binarize(w, 0.1) == binarize(1000.0 * w, 0.1)


def test_f_score_examples():
    truth = frozenset({0, 1, 2})
    assert f_score(truth, truth) == 1.0
    assert f_score(frozenset({0, 1, 5}), frozenset({0, 1, 2})) == pytest.approx(4 / 6)
    assert f_score(frozenset({3, 4}), truth) == 0.0
    assert f_score(frozenset(), frozenset()) == 1.0


def test_f_score_matches_formula_exhaustively():
    universe = range(4)
    subsets = [frozenset(c) for r in range(5) for c in itertools.combinations(universe, r)]
    for est, tru in itertools.product(subsets, repeat=2):
        tp, fp, fn = len(est & tru), len(est - tru), len(tru - est)
        expected = 1.0 if tp + fp + fn == 0 else 2 * tp / (2 * tp + fp + fn)
        assert f_score(est, tru) == pytest.approx(expected)
        assert f_score(est, tru) == pytest.approx(f_score(tru, est))


def test_sector_block_truth_sizes():
    part = {f"n{i}": f"s{i // 10}" for i in range(30)}
    assert len(sector_block_truth(part)) == 135
    singletons = {f"n{i}": f"s{i}" for i in range(5)}
    assert sector_block_truth(singletons) == frozenset()
    one = {f"n{i}": "s" for i in range(6)}
    assert sector_block_truth(one) == frozenset(range(15))


def test_cluster_ids_requires_total_partition():
    with pytest.raises(LabelMismatchError):
        cluster_ids({"a": "x"}, ["a", "b"])
    with pytest.raises(LabelMismatchError):
        cluster_ids({"a": "x", "b": "y", "c": "z"}, ["a", "b"])


# --- modularity ---


def brute_force_modularity(w: np.ndarray, ids: np.ndarray) -> float:
    A = adjacency(w)
    d = A.sum(axis=1)
    two_w = A.sum()
    total = 0.0
    for i in range(A.shape[0]):
        for j in range(A.shape[0]):
            if ids[i] == ids[j]:
                total += A[i, j] - d[i] * d[j] / two_w
    return total / two_w


def test_modularity_two_disjoint_edges():
    w = np.zeros(n_edges(4))
    w[edge_index(2, 1, 4) - 1] = 1.0
    w[edge_index(4, 3, 4) - 1] = 1.0
    assert modularity(w, np.array([0, 0, 1, 1])) == pytest.approx(0.5)


def test_modularity_single_cluster_is_zero():
    rng = np.random.default_rng(1)
    assert modularity(rng.uniform(0, 1, n_edges(6)), np.zeros(6, int)) == pytest.approx(0.0, abs=1e-15)


def test_modularity_matches_brute_force():
    rng = np.random.default_rng(2)
    for _ in range(50):
        p = int(rng.integers(2, 13))
        w = rng.uniform(0, 1, n_edges(p)) * (rng.random(n_edges(p)) < 0.6)
        if w.sum() == 0:
            w[0] = 1.0
        ids = rng.integers(0, 3, p)
        q = modularity(w, ids)
        assert q == pytest.approx(brute_force_modularity(w, ids), abs=1e-12)
        assert -0.5 - 1e-12 <= q <= 1.0
        assert modularity(7.5 * w, ids) == pytest.approx(q, abs=1e-12)


def test_modularity_with_label_partition():
    w = block_weights([2, 2])
    part = {"a": "x", "b": "x", "c": "y", "d": "y"}
    assert modularity(w, part, ["a", "b", "c", "d"]) == pytest.approx(0.5)


def test_modularity_undefined_for_empty_graph():
    with pytest.raises(UndefinedModularityError):
        modularity(np.zeros(3), np.array([0, 1, 2]))


# --- clustering ---


def test_components_clustering():
    part = components_clustering(block_weights([3, 2, 4]), 1e-4)
    assert len(set(part.values())) == 3
    assert part["0"] == part["2"] != part["3"]
    assert len(set(components_clustering(np.zeros(n_edges(5))).values())) == 5
    assert len(set(components_clustering(np.ones(n_edges(5))).values())) == 1


def test_score_graph_perfect_block_recovery():
    w = block_weights([3, 3])
    part = {str(i): f"s{i // 3}" for i in range(6)}
    labels = [str(i) for i in range(6)]
    metrics = score_graph(w, sector_block_truth(part, labels), cluster_ids(part, labels))
    assert metrics["f_score"] == 1.0
    assert metrics["detected_clusters"] == 2
    assert not metrics["connected"]
    assert metrics["laplacian_rank"] == 4
    assert metrics["modularity"] == pytest.approx(0.5)


# --- grids ---


def test_parse_grid_forms():
    assert parse_grid("0:1:0.2") == [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
    log = parse_grid("log:0.1:10:20")
    assert len(log) == 20
    assert log[0] == pytest.approx(0.1) and log[-1] == pytest.approx(10.0)
    np.testing.assert_allclose(np.diff(np.log(log)), np.log(100) / 19)
    assert parse_grid("lin:0:1:3") == [0.0, 0.5, 1.0]
    assert parse_grid("0.5, 0.25") == [0.5, 0.25]
    assert parse_grid("0.3") == [0.3]


@pytest.mark.parametrize("spec", ["log:0:1:5", "1:0:0.1", "0:1:0", "abc", "lin:0:1", ""])
def test_parse_grid_rejects_bad_specs(spec):
    with pytest.raises(DomainError):
        parse_grid(spec)


# --- sweep ---


def small_problem(seed: int = 3) -> ProblemData:
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((5, 40))
    return ProblemData.build(X @ X.T / 40, rng.uniform(0, 2, n_edges(5)))


def test_alpha_sweep_endpoints_match_single_runs():
    data = small_problem()
    hp = HyperParams(alpha=0.0, sigma2=1.0, lam=0.05)
    cfg = SolverConfig(maxiter=200)
    truth = frozenset(range(4))
    rows = alpha_sweep(data, hp, [0.0, 1.0], cfg, truth=truth, partition_ids=np.array([0, 0, 1, 1, 1]))
    assert [r["alpha"] for r in rows] == [0.0, 1.0]
    for row in rows:
        w, trace = run_mm(data, hp.model_copy(update={"alpha": row["alpha"]}), cfg)
        assert row["iters"] == trace.iterations
        assert row["f_score"] == f_score(binarize(w), truth)
        assert row["termination"] == trace.termination


def test_alpha_sweep_row_order_and_parallelism_do_not_change_results():
    data = small_problem()
    hp = HyperParams(alpha=0.0, sigma2=1.0)
    cfg = SolverConfig(maxiter=100)
    ids = np.array([0, 0, 1, 1, 1])
    truth = frozenset({0, 1, 9})
    forward = alpha_sweep(data, hp, [0.0, 0.5, 1.0], cfg, truth=truth, partition_ids=ids, jobs=1)
    backward = alpha_sweep(data, hp, [1.0, 0.5, 0.0], cfg, truth=truth, partition_ids=ids, jobs=3)

    def strip(row: dict) -> dict:
        return {k: v for k, v in row.items() if k != "millis"}

    assert [strip(r) for r in forward] == [strip(r) for r in reversed(backward)]


def test_alpha_sweep_records_row_errors_without_aborting():
    data = ProblemData.build(np.eye(4))  # no metadata: alpha < 1 rows fail
    rows = alpha_sweep(data, HyperParams(alpha=1.0), [0.5, 1.0], SolverConfig(maxiter=20))
    assert rows[0]["termination"].startswith("error: DomainError")
    assert math.isnan(rows[0]["f_score"])
    assert not rows[1]["termination"].startswith("error")


def test_alpha_sweep_lambda_grid_is_outer_loop():
    data = small_problem()
    rows = alpha_sweep(data, HyperParams(alpha=0.0), [0.0, 1.0], SolverConfig(maxiter=10),
                       lambdas=[0.1, 1.0])
    assert [(r["lambda"], r["alpha"]) for r in rows] == [(0.1, 0.0), (0.1, 1.0), (1.0, 0.0), (1.0, 1.0)]
    with pytest.raises(DomainError):
        alpha_sweep(data, HyperParams(alpha=0.0), [1.5], SolverConfig())


def test_best_row_prefers_f_score_then_modularity():
    rows = [
        {"alpha": 0.0, "f_score": 0.5, "modularity": 0.1},
        {"alpha": 0.5, "f_score": 0.8, "modularity": 0.2},
        {"alpha": 0.7, "f_score": 0.8, "modularity": 0.3},
        {"alpha": 1.0, "f_score": math.nan, "modularity": math.nan},
    ]
    assert best_row(rows)["alpha"] == 0.7
    assert best_row([{"f_score": math.nan}]) is None
