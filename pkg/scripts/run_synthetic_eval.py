#!/usr/bin/env python3
"""Accuracy experiment: roofline predictor vs linear baseline.

Generates a synthetic query suite on the analytical device, predicts time at
every allocation in the grid with both models, scores them against the
device's ground truth, and prints the error distribution summary. Optionally
dumps the raw error samples as CSV for external plotting.
"""

import argparse
import sys

from roofcast.core import ResourceAllocation, default_hardware_spec, load_hardware_spec
from roofcast.evalkit import (
    ErrorSample,
    error_cdf,
    generate_synthetic,
    oracle_actual_time,
    write_samples_csv,
)
from roofcast.ingest import aggregate
from roofcast.scaling import linear_baseline, slowdown_unified


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--n-queries", type=int, default=240)
    parser.add_argument("--grid", default="0.125,0.25,0.375,0.5,0.75",
                        help="comma-separated uniform allocation fractions")
    parser.add_argument("--hw", help="hardware spec YAML (default: bundled A100)")
    parser.add_argument("--samples-out", help="write raw error samples CSV here")
    args = parser.parse_args()

    hw = load_hardware_spec(args.hw) if args.hw else default_hardware_spec()
    grid = [float(f) for f in args.grid.split(",")]
    device, profiles = generate_synthetic(args.seed, args.n_queries, hw)

    roofline_samples, linear_samples = [], []
    for profile in profiles:
        metrics = aggregate(profile, hw)
        t0 = metrics.total_duration
        for f in grid:
            alloc = ResourceAllocation(f, f, f, f)
            actual = oracle_actual_time(device, profile, alloc)
            predicted = slowdown_unified(metrics, t0, hw, alloc).predicted_time
            label = f"{profile.query_id}@{f:g}"
            roofline_samples.append(ErrorSample(label, predicted, actual))
            linear_samples.append(
                ErrorSample(label, linear_baseline(t0, f), actual))

    rl = error_cdf(roofline_samples)
    lin = error_cdf(linear_samples)
    n = len(roofline_samples)
    print(f"queries: {args.n_queries}  grid: {grid}  samples per model: {n}")
    print(f"{'model':<10} {'median':>8} {'p95':>8}")
    print(f"{'roofline':<10} {rl.median_pct:>7.2f}% {rl.p95_pct:>7.2f}%")
    print(f"{'linear':<10} {lin.median_pct:>7.2f}% {lin.p95_pct:>7.2f}%")

    if args.samples_out:
        tagged = ([ErrorSample(f"roofline:{s.label}", s.estimated, s.actual)
                   for s in roofline_samples]
                  + [ErrorSample(f"linear:{s.label}", s.estimated, s.actual)
                     for s in linear_samples])
        with open(args.samples_out, "wb") as sink:
            write_samples_csv(tagged, sink)
        print(f"wrote {2 * n} samples to {args.samples_out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
