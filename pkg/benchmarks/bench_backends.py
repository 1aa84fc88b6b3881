"""Timing comparison of the compiled and pure-python path integrators.

Usage: python benchmarks/bench_backends.py [--paths 50]
"""

import argparse
import time

from bubbleflow._backend import get_backend
from bubbleflow.dynamics import simulate_path
from bubbleflow.network import make_network
from bubbleflow.params import NETWORK_PRESETS, ModelParams


def bench(backend: str, dist, params, n_paths: int) -> float:
    simulate_path(params, dist, 0, backend=backend)   # warm-up
    t0 = time.perf_counter()
    for j in range(n_paths):
        simulate_path(params, dist, j, backend=backend)
    return (time.perf_counter() - t0) / n_paths


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--paths", type=int, default=25)
    args = ap.parse_args()
    params = ModelParams()
    backends = ["python"]
    try:
        get_backend("compiled")
        backends.insert(0, "compiled")
    except Exception:
        print("compiled backend not built; timing python only")

    print(f"{'network':8s} {'kmax':>6s} " +
          " ".join(f"{b + ' [ms/path]':>20s}" for b in backends) +
          f" {'speedup':>9s}")
    for name in ("er1.9", "er3.2", "sf2.5", "sf2.2"):
        kind, p = NETWORK_PRESETS[name]
        dist = make_network(kind, p, params.nodes)
        times = {b: bench(b, dist, params, args.paths) for b in backends}
        row = f"{name:8s} {dist.kmax:6d} "
        row += " ".join(f"{times[b] * 1e3:20.2f}" for b in backends)
        if len(backends) == 2:
            row += f" {times['python'] / times['compiled']:8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
