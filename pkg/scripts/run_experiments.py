#!/usr/bin/env python3
"""Run the full benchmark experiment suite, filling the results cache.

This is the expensive part of the acceptance suite (the paper's protocol
costs ~21 core-seconds per S30 spin-anneal run; the full set of batches
is several CPU-hours).  Batches land in the results cache keyed by
configuration + solver code fingerprint, so the acceptance tests and the
CLI replay them instantly afterwards.  Safe to interrupt and restart:
completed batches are skipped.

Usage: python scripts/run_experiments.py [--workers N] [--only PREFIX]
"""

import argparse
import sys
import time

from hpfold import bench


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--workers", type=int, default=2)
    ap.add_argument("--only", default="", help="run only experiments whose name starts with this")
    args = ap.parse_args()

    experiments = []
    for label in bench.HITRATE_SEQUENCES:
        experiments.append((f"qubo-{label}", bench.qubo_hitrate_config(label, workers=args.workers)))
    for label in bench.HITRATE_SEQUENCES:
        experiments.append((f"chain-{label}", bench.chain_hitrate_config(label, workers=args.workers)))
    for case in ("lambda2=100", "lambda3=100", "lambda1=0.5"):
        experiments.append((f"sweep-{case}", bench.lambda_case_config(case, workers=args.workers)))

    todo = [(name, cfg) for name, cfg in experiments if name.startswith(args.only)]
    total_est = sum(bench.estimate_cpu_seconds(cfg) for _, cfg in todo)
    print(f"{len(todo)} experiments, ~{total_est/3600:.1f} CPU-core-hours estimated "
          f"(calibrated to the publication's timings; this build runs faster)")
    t0 = time.time()
    for i, (name, cfg) in enumerate(todo, 1):
        t1 = time.time()
        summary = bench.run_batch_cached(cfg, budget_seconds=float("inf"))
        status = "cached" if summary.from_cache else f"{time.time()-t1:7.0f}s"
        print(f"[{i:2d}/{len(todo)}] {name:<18} {summary.hits:4d}/{cfg.n_runs} hits "
              f"rate={summary.hit_rate:.3f}+-{summary.std_error:.3f}  [{status}]",
              flush=True)
    print(f"done in {(time.time()-t0)/3600:.2f} h wall")
    return 0


if __name__ == "__main__":
    sys.exit(main())
