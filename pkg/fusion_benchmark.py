#!/usr/bin/env python3
"""
fusion_benchmark.py

Synthetic fusion experiment: for each seed, generate a 3-cluster instance whose
signals confuse clusters 0 and 1 while the metadata separates them (and the
metadata in turn merges cluster 2 into cluster 0, which the signals split), sweep alpha
over 0, 0.1, ..., 1 and compare the best interior alpha against the two
single-source endpoints (alpha=0 metadata only, alpha=1 signals only).

Usage:
  uv run python fusion_benchmark.py

Environment overrides:
  BENCH_SEEDS     -> number of seeds (default: 20)
  BENCH_LAMBDA    -> SCAD lambda for every run (default: 0.1)
  BENCH_JOBS      -> parallel sweep rows (default: $SWEEP_JOBS or 1)
  BIN_THRESHOLD   -> relative edge threshold (default: 1e-4)

Results are saved to outputs/bench/fusion_benchmark.{md,json}.
"""
from __future__ import annotations

import json
import logging
import os
import sys
import time
from pathlib import Path

from config import DEFAULT_THRESHOLD, HyperParams, SynthConfig, default_solver_config, env_float, env_int
from data_io import sample_covariance
from evaluation import alpha_sweep, cluster_ids, sector_block_truth
from objective import ProblemData
from side_info import sigma2_heuristic
from synth import generate_instance

logger = logging.getLogger("fusion_benchmark")

REPO_ROOT = Path(__file__).resolve().parent
OUT_DIR = REPO_ROOT / "outputs" / "bench"

ALPHAS = [round(0.1 * k, 1) for k in range(11)]
N_SEEDS = env_int("BENCH_SEEDS", 20)
LAMBDA = env_float("BENCH_LAMBDA", 0.1)
JOBS = env_int("BENCH_JOBS", env_int("SWEEP_JOBS", 1))
THRESHOLD = env_float("BIN_THRESHOLD", DEFAULT_THRESHOLD)


def bench_seed(seed: int, lam: float = LAMBDA, threshold: float = THRESHOLD, jobs: int = JOBS) -> dict:
    inst = generate_instance(SynthConfig(p=30, clusters=3, n=200, seed=seed))
    data = ProblemData.build(sample_covariance(inst.signals), inst.z)
    hp = HyperParams(alpha=1.0, sigma2=sigma2_heuristic(inst.z), lam=lam)
    truth = sector_block_truth(inst.partition, inst.labels)
    ids = cluster_ids(inst.partition, inst.labels)

    t0 = time.perf_counter()
    rows = alpha_sweep(data, hp, ALPHAS, default_solver_config(), truth=truth,
                       partition_ids=ids, threshold=threshold, jobs=jobs)
    seconds = time.perf_counter() - t0

    by_alpha = {r["alpha"]: r for r in rows}
    interior = [r for r in rows if 0.0 < r["alpha"] < 1.0]
    best = max(interior, key=lambda r: r["f_score"])
    endpoint = max(by_alpha[0.0]["f_score"], by_alpha[1.0]["f_score"])
    return {
        "seed": seed,
        "seconds": round(seconds, 3),
        "f_alpha0": by_alpha[0.0]["f_score"],
        "f_alpha1": by_alpha[1.0]["f_score"],
        "best_alpha": best["alpha"],
        "f_best_interior": best["f_score"],
        "at_least_endpoints": best["f_score"] >= endpoint,
        "beats_endpoints": best["f_score"] > endpoint,
        "rows": rows,
    }


def summarize(results: list[dict]) -> dict:
    ok = [r for r in results if "error" not in r]
    n = max(len(ok), 1)
    return {
        "seeds": len(results),
        "failed": len(results) - len(ok),
        "share_at_least_endpoints": sum(r["at_least_endpoints"] for r in ok) / n,
        "share_beats_endpoints": sum(r["beats_endpoints"] for r in ok) / n,
        "total_seconds": round(sum(r.get("seconds", 0.0) for r in ok), 3),
    }


def main() -> int:
    logging.basicConfig(level=os.environ.get("LOG_LEVEL", "INFO").upper(),
                        format="%(asctime)s - %(levelname)s - %(message)s")
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    logger.info(f"Fusion benchmark: {N_SEEDS} seeds, lambda={LAMBDA}, threshold={THRESHOLD}, jobs={JOBS}")

    results = []
    for seed in range(N_SEEDS):
        try:
            results.append(bench_seed(seed))
        except KeyboardInterrupt:
            raise
        except Exception as e:
            logger.error(f"Seed {seed} failed: {e}", exc_info=True)
            results.append({"seed": seed, "error": str(e)})
    summary = summarize(results)

    json_path = OUT_DIR / "fusion_benchmark.json"
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump({"summary": summary, "alphas": ALPHAS, "lambda": LAMBDA,
                   "threshold": THRESHOLD, "results": results}, f, indent=2)
    logger.info(f"Saved JSON results to {json_path}")

    md_path = OUT_DIR / "fusion_benchmark.md"
    with open(md_path, "w", encoding="utf-8") as f:
        f.write("# Fusion Benchmark (synthetic, p=30, 3 clusters, n=200)\n\n")
        f.write(f"lambda={LAMBDA}, threshold={THRESHOLD}, alphas={ALPHAS}\n\n")
        f.write("| seed | F(alpha=0) | F(alpha=1) | best interior alpha | F(best) |\n")
        f.write("|---|---|---|---|---|\n")
        for r in results:
            if "error" in r:
                f.write(f"| {r['seed']} | error: {r['error']} | | | |\n")
                continue
            f.write(f"| {r['seed']} | {r['f_alpha0']:.4f} | {r['f_alpha1']:.4f} | "
                    f"{r['best_alpha']} | {r['f_best_interior']:.4f} |\n")
        f.write(f"\nInterior alpha >= both endpoints: {summary['share_at_least_endpoints']:.0%} of seeds\n")
        f.write(f"Interior alpha > both endpoints: {summary['share_beats_endpoints']:.0%} of seeds\n")
    logger.info(f"Saved Markdown table to {md_path}")

    print("\n=== Summary ===")
    print(f"- seeds: {summary['seeds']} (failed {summary['failed']})")
    print(f"- interior >= endpoints: {summary['share_at_least_endpoints']:.0%}")
    print(f"- interior > endpoints:  {summary['share_beats_endpoints']:.0%}")
    print(f"- total time: {summary['total_seconds']}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
