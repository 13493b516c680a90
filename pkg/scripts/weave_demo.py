#!/usr/bin/env python3
"""Weave a single point toward a Bernoulli target and report convergence.

Runs the full pipeline in process: block selection, schedule construction,
concatenation, shadowing, and the empirical-distance trace at each level
boundary.
"""

import argparse
import sys

from orbitweave.measures import TestFunctionFamily, bernoulli
from orbitweave.systems import full_shift
from orbitweave.weaving import run_weave


def run(args):
    shift = full_shift(2)
    family = TestFunctionFamily("cylinder", 16, 2)
    schedule, families, outcome = run_weave(
        shift, bernoulli(args.p), family, k_max=args.k_max, gamma=args.gamma,
        block_length=args.block_length, epsilon=0.25, budget=args.budget,
        seed=args.seed, min_total_length=args.min_total_length)
    print(f"levels: {schedule.k_max}  total length: {schedule.total_length}")
    print(f"N = {schedule.N}")
    print(f"Y = {schedule.Y}")
    print(f"T = {schedule.T}")
    print(f"per-block shadowing deviation: {outcome.per_block_deviation:g} "
          f"(guarantee {schedule.splice_guarantee:g})")
    print("convergence trace (prefix length, weak* distance):")
    for n, d in outcome.convergence:
        print(f"  {n:8d}  {d:.6f}")
    print(f"final distance: {outcome.final_distance:.6f}")
    return 0 if outcome.final_distance <= args.bound else 1


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--p", type=float, default=0.7,
                        help="Bernoulli parameter of the target measure")
    parser.add_argument("--k-max", type=int, default=3)
    parser.add_argument("--gamma", type=float, default=0.25)
    parser.add_argument("--block-length", type=int, default=16)
    parser.add_argument("--budget", type=int, default=400)
    parser.add_argument("--min-total-length", type=int, default=50_000)
    parser.add_argument("--bound", type=float, default=0.05)
    parser.add_argument("--seed", type=int, default=11)
    sys.exit(run(parser.parse_args()))
