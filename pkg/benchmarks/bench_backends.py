"""Benchmark the compiled kernels against the pure-Python fallback.

Runs the same seeded trials through both backends, verifies the trajectories
agree bit for bit, and reports wall-clock times and speedups.

    python benchmarks/bench_backends.py [--quick]
"""

import argparse
import time

import numpy as np

import trimgossip as tg
from trimgossip import backend
from trimgossip.data import TrimSpec, range_dataset
from trimgossip.engine import TrialRecorder, run_trial
from trimgossip.graphs import TopologySpec, build_graph


def cases(quick: bool):
    n = 100
    T = 5_000 if quick else 20_000
    trials = 2 if quick else 5
    trim = TrimSpec(alpha=0.2, n=n)
    return T, trials, {
        "gorank": lambda: tg.GoRank(),
        "gorank-async": lambda: tg.AsyncGoRank(),
        "baseline": lambda: tg.TokenBaseline(),
        "baselinepp": lambda: tg.BaselinePP(),
        "gotrim+gorank": lambda: tg.GoTrim(trim, tg.GoRank()),
        "gotrim+baselinepp": lambda: tg.GoTrim(trim, tg.BaselinePP()),
        "average": lambda: tg.GossipAverage(),
        "clipped": lambda: tg.ClippedGossip(tau=2.0),
    }


def time_backend(name, factory, graph, data, T, trials):
    backend.set_backend(name)
    sample_times = [T]
    best = float("inf")
    last = None
    start = time.perf_counter()
    for trial in range(trials):
        t0 = time.perf_counter()
        last = run_trial(factory(), graph, data, T, TrialRecorder(sample_times), seed=trial)
        best = min(best, time.perf_counter() - t0)
    total = time.perf_counter() - start
    return best, total / trials, last


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="smaller horizon for a fast look")
    args = parser.parse_args()

    T, trials, protocols = cases(args.quick)
    graph = build_graph(TopologySpec("watts_strogatz", 100, k=4, p=0.2, seed=42))
    data = range_dataset(100)

    backends = ["python"] + (["compiled"] if backend.HAVE_COMPILED else [])
    if not backend.HAVE_COMPILED:
        print("compiled extension not available; timing the fallback only\n")
    print(f"n={graph.n}, |E|={graph.num_edges}, T={T}, best of {trials} trials\n")
    header = f"{'protocol':<18}" + "".join(f"{b + ' (s)':>14}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}{'identical':>11}"
    print(header)
    print("-" * len(header))
    for name, factory in protocols.items():
        times, trajs = {}, {}
        for b in backends:
            times[b], _, trajs[b] = time_backend(b, factory, graph, data, T, trials)
        row = f"{name:<18}" + "".join(f"{times[b]:>14.4f}" for b in backends)
        if len(backends) == 2:
            same = all(np.array_equal(trajs["compiled"].series[k],
                                      trajs["python"].series[k], equal_nan=True)
                       for k in trajs["compiled"].series)
            row += f"{times['python'] / times['compiled']:>9.1f}x{str(same):>11}"
        print(row)
    backend.set_backend("compiled" if backend.HAVE_COMPILED else "python")


if __name__ == "__main__":
    main()
