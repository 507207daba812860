import pytest

from fusion_benchmark import bench_seed, summarize

# The full 20-seed experiment takes minutes; run it with `pytest -m slow`.
pytestmark = pytest.mark.slow


def test_interior_alpha_helps_on_confused_clusters():
    results = [bench_seed(seed, jobs=2) for seed in range(20)]
    summary = summarize(results)
    at_least = sum(r["at_least_endpoints"] for r in results)
    beats = sum(r["beats_endpoints"] for r in results)
    assert at_least >= 16, summary
    assert beats >= 10, summary
