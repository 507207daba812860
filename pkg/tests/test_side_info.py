import math

import numpy as np
import pytest

from errors import DegenerateMetadataError, DomainError, IngestionError, LabelMismatchError, SymmetryError
from graph_core import edge_endpoints
from side_info import (
    EmbeddingSet,
    align_labels,
    distances_from_matrix,
    gaussian_kernel_weights,
    pairwise_sq_dists,
    reorder,
    sigma2_heuristic,
)


def test_pairwise_sq_dists_examples():
    assert pairwise_sq_dists(EmbeddingSet(("a", "b"), np.array([[0.0, 0.0], [3.0, 4.0]])))[0] == 25.0
    same = EmbeddingSet(("a", "b", "c"), np.ones((3, 4)))
    np.testing.assert_array_equal(pairwise_sq_dists(same), 0.0)


def test_pairwise_sq_dists_matches_double_loop():
    rng = np.random.default_rng(0)
    Y = rng.standard_normal((7, 3))
    z = pairwise_sq_dists(EmbeddingSet(tuple("abcdefg"), Y))
    lo, hi = edge_endpoints(7)
    expected = [float(np.sum((Y[i] - Y[j]) ** 2)) for i, j in zip(lo, hi, strict=True)]
    np.testing.assert_allclose(z, expected, rtol=0, atol=1e-12)


def test_embedding_set_validation():
    with pytest.raises(IngestionError):
        EmbeddingSet(("a", "b"), np.ones((3, 2)))
    with pytest.raises(IngestionError):
        EmbeddingSet(("a", "a"), np.ones((2, 2)))
    with pytest.raises(IngestionError):
        EmbeddingSet(("a", "b"), np.array([[1.0, np.nan], [0.0, 0.0]]))


def test_reorder_joins_by_label():
    emb = EmbeddingSet(("b", "a", "c"), np.array([[2.0], [1.0], [3.0]]))
    out = reorder(emb, ["a", "b", "c"])
    np.testing.assert_array_equal(out.vectors[:, 0], [1.0, 2.0, 3.0])
    with pytest.raises(LabelMismatchError):
        reorder(emb, ["a", "b", "d"])
    with pytest.raises(LabelMismatchError):
        align_labels(["a", "b", "c"], ["a", "b"])


def test_distances_from_matrix_reorders_and_validates():
    Z = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 3.0], [2.0, 3.0, 0.0]])
    np.testing.assert_array_equal(distances_from_matrix(Z), [1.0, 2.0, 3.0])
    # rows labelled x, y, w; requested order w, x, y
    np.testing.assert_array_equal(
        distances_from_matrix(Z, ["x", "y", "w"], order=["w", "x", "y"]), [2.0, 3.0, 1.0]
    )
    bad = Z.copy()
    bad[0, 0] = 0.5
    with pytest.raises(IngestionError):
        distances_from_matrix(bad)
    bad = Z.copy()
    bad[0, 1] = 5.0
    with pytest.raises(SymmetryError):
        distances_from_matrix(bad)


def test_gaussian_kernel_weights():
    np.testing.assert_array_equal(gaussian_kernel_weights(np.zeros(3), 1.5), 1.0)
    assert gaussian_kernel_weights([2.0], 2.0)[0] == pytest.approx(math.exp(-1))
    rng = np.random.default_rng(1)
    z = rng.uniform(0, 5, 20)
    w = gaussian_kernel_weights(z, 0.8)
    np.testing.assert_allclose(z + 0.8 * np.log(w), 0.0, atol=1e-12)
    # sigma2 scaling equals inverse scaling of z
    np.testing.assert_allclose(gaussian_kernel_weights(z, 2 * 0.8), gaussian_kernel_weights(z / 2, 0.8))
    with pytest.raises(DomainError):
        gaussian_kernel_weights(z, 0.0)


def test_sigma2_heuristic():
    assert sigma2_heuristic([1.0, 2.0, 3.0], "median") == 2.0
    assert sigma2_heuristic([1.0, 2.0, 3.0], "mean") == 2.0
    with pytest.raises(DegenerateMetadataError):
        sigma2_heuristic([0.0, 0.0])
    with pytest.raises(DomainError):
        sigma2_heuristic([1.0], "mode")
