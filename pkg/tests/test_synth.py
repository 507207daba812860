import os

import numpy as np
import pytest
from pydantic import ValidationError

from config import SynthConfig
from data_io import import_graph, read_labels, read_signals
from errors import GenerationError
from graph_core import is_connected, laplacian_op
from synth import generate_instance, make_rng, sample_gmrf, sample_truth_graph, write_instance


def test_same_seed_same_instance():
    cfg = SynthConfig(p=12, clusters=3, n=50, seed=11)
    a, b = generate_instance(cfg), generate_instance(cfg)
    np.testing.assert_array_equal(a.w_true, b.w_true)
    np.testing.assert_array_equal(a.signals, b.signals)
    np.testing.assert_array_equal(a.embeddings.vectors, b.embeddings.vectors)
    c = generate_instance(cfg.model_copy(update={"seed": 12}))
    assert not np.array_equal(a.signals, c.signals)


def test_instance_shapes_and_partition():
    inst = generate_instance(SynthConfig(p=10, clusters=3, n=20, seed=0))
    assert inst.signals.shape == (10, 20)
    assert inst.w_true.shape == (45,)
    assert inst.z.shape == (45,)
    assert inst.embeddings.vectors.shape == (10, 8)
    assert sorted(set(inst.partition.values())) == ["s0", "s1", "s2"]
    assert is_connected(inst.w_true)


def test_gmrf_samples_are_orthogonal_to_ones():
    inst = generate_instance(SynthConfig(p=15, clusters=3, n=100, seed=3))
    np.testing.assert_allclose(inst.signals.sum(axis=0), 0.0, atol=1e-10)


def test_gmrf_energy_matches_degrees_of_freedom():
    rng = make_rng(5)
    w = np.zeros(45)
    while not is_connected(w):
        w = sample_truth_graph(SynthConfig(p=10, clusters=2, seed=5), rng)
    X = sample_gmrf(w, 10_000, rng)
    L = laplacian_op(w)
    energy = np.einsum("it,ij,jt->t", X, L, X)
    # E[x' L x] = tr(L L^+) = p - 1
    assert 0.95 <= energy.mean() / 9 <= 1.05


def test_sample_covariance_converges_to_pseudoinverse():
    rng = make_rng(8)
    w = rng.uniform(0.5, 1.5, 28)
    n = 10_000
    X = sample_gmrf(w, n, rng)
    err = np.abs(X @ X.T / n - np.linalg.pinv(laplacian_op(w)))
    assert err.max() <= 10 / np.sqrt(n)


def test_disconnected_blocks_give_generation_error():
    cfg = SynthConfig(p=6, clusters=2, p_intra=0.0, p_confused=0.0, max_retries=3, seed=0)
    with pytest.raises(GenerationError):
        generate_instance(cfg)


def test_config_validation():
    with pytest.raises(ValidationError):
        SynthConfig(p=1)
    with pytest.raises(ValidationError):
        SynthConfig(p=4, clusters=5)
    with pytest.raises(ValidationError):
        SynthConfig(p=6, cluster_sizes=[2, 2])
    with pytest.raises(ValidationError):
        SynthConfig(d_in=5.0, d_out=4.0)
    assert SynthConfig(p=7, clusters=3).cluster_sizes == [3, 2, 2]


def test_embeddings_separate_clusters_on_average():
    inst = generate_instance(SynthConfig(p=30, clusters=3, n=10, noise=0.0, seed=2))
    ids = np.array([int(inst.partition[lab][1:]) for lab in inst.labels])
    lo, hi = np.triu_indices(30, 1)
    same = ids[lo] == ids[hi]
    assert inst.z[same].mean() < inst.z[~same].mean()


def test_shared_centroid_hides_last_cluster_from_metadata():
    cfg = SynthConfig(p=30, clusters=3, n=10, seed=2)
    inst = generate_instance(cfg)
    ids = np.array([int(inst.partition[lab][1:]) for lab in inst.labels])
    lo, hi = np.triu_indices(30, 1)
    between_01 = (ids[lo] == 0) & (ids[hi] == 1)
    between_02 = (ids[lo] == 0) & (ids[hi] == 2)
    assert inst.z[between_02].max() < inst.z[between_01].min()

    apart = generate_instance(cfg.model_copy(update={"shared_centroid": False}))
    assert apart.z[between_02].mean() > 0.5 * cfg.d_out


def test_write_instance_files(tmp_path):
    inst = generate_instance(SynthConfig(p=8, clusters=2, n=15, seed=4))
    paths = write_instance(inst, str(tmp_path))
    assert set(paths) == {"signals", "prices", "embeddings", "distances", "labels", "truth"}
    assert all(os.path.exists(p) for p in paths.values())

    labels, X = read_signals(paths["signals"])
    assert labels == inst.labels
    np.testing.assert_array_equal(X, inst.signals)
    assert read_labels(paths["labels"]) == inst.partition
    np.testing.assert_array_equal(import_graph(paths["truth"]).to_weights(), inst.w_true)
