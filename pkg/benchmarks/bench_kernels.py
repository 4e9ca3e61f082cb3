#!/usr/bin/env python3
"""Timing comparison of the compiled replay kernel against the NumPy fallback.

Runs both backends in-process on identical random event arrays and
reports the best-of-N wall time per configuration, for the plain replay
and the replay-with-readouts variants.

Usage:
    python3 benchmarks/bench_kernels.py [--nodes 16] [--k 8] [--repeats 5]
"""

import argparse
import time

import numpy as np

from tgaffinity import _kernels
from tgaffinity._kernels import pykernels


def make_case(rng, num_nodes, num_events):
    srcs = rng.integers(0, num_nodes, num_events).astype(np.int64)
    dsts = rng.integers(0, num_nodes, num_events).astype(np.int64)
    values = rng.standard_normal(num_events)
    return srcs, dsts, values


def time_replay(fn, num_nodes, k, srcs, dsts, values, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        memory = np.zeros((num_nodes, num_nodes * k))
        t0 = time.perf_counter()
        fn(memory, srcs, dsts, values, k)
        best = min(best, time.perf_counter() - t0)
        result = memory
    return best, result


def time_readouts(fn, num_nodes, k, srcs, dsts, values, weights, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        memory = np.zeros((num_nodes, num_nodes * k))
        out = np.zeros((len(srcs), num_nodes))
        t0 = time.perf_counter()
        fn(memory, srcs, dsts, values, k, weights, out)
        best = min(best, time.perf_counter() - t0)
        result = out
    return best, result


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--nodes", type=int, default=16)
    parser.add_argument("--k", type=int, default=8)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument(
        "--events",
        type=lambda s: [int(tok) for tok in s.split(",")],
        default=[10_000, 100_000, 1_000_000],
    )
    args = parser.parse_args()

    print(f"dispatched backend: {_kernels.BACKEND}")
    if _kernels.BACKEND == "python":
        print("note: compiled core not built; both columns run the NumPy fallback")
    print(f"nodes={args.nodes} k={args.k} best of {args.repeats}\n")

    rng = np.random.default_rng(0)
    weights = np.full(args.k, 1.0 / args.k)
    header = f"{'events':>10} {'kernel':>14} {'python (s)':>12} {'dispatch (s)':>13} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for num_events in args.events:
        srcs, dsts, values = make_case(rng, args.nodes, num_events)

        t_py, mem_py = time_replay(
            pykernels.replay_block_memory, args.nodes, args.k, srcs, dsts, values, args.repeats
        )
        t_c, mem_c = time_replay(
            _kernels.replay_block_memory, args.nodes, args.k, srcs, dsts, values, args.repeats
        )
        assert np.array_equal(mem_py, mem_c), "backends disagree on replay"
        print(f"{num_events:>10} {'replay':>14} {t_py:>12.4f} {t_c:>13.4f} {t_py / t_c:>8.1f}x")

        t_py, out_py = time_readouts(
            pykernels.replay_block_memory_with_readouts,
            args.nodes, args.k, srcs, dsts, values, weights, args.repeats,
        )
        t_c, out_c = time_readouts(
            _kernels.replay_block_memory_with_readouts,
            args.nodes, args.k, srcs, dsts, values, weights, args.repeats,
        )
        assert np.allclose(out_py, out_c, atol=1e-12), "backends disagree on readouts"
        print(f"{num_events:>10} {'readouts':>14} {t_py:>12.4f} {t_c:>13.4f} {t_py / t_c:>8.1f}x")


if __name__ == "__main__":
    main()
