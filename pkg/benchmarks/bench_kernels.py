#!/usr/bin/env python3
"""Throughput comparison of the numba kernels against the numpy fallback.

Run from the repository root:

    python benchmarks/bench_kernels.py [--replicas 4000] [--steps 10000]

The numba path is what ERGOQUEUE_NO_NUMBA leaves behind when unset; the
numpy column is the fallback selected by ERGOQUEUE_NO_NUMBA=1.  Both
paths produce identical arrays (also asserted here).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from ergoqueue import _kernels


def _time(fn, *args, repeat: int = 3) -> tuple[float, object]:
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--replicas", type=int, default=4000)
    ap.add_argument("--steps", type=int, default=10_000)
    args = ap.parse_args()

    R, n = args.replicas, args.steps
    rng = np.random.default_rng(0)
    xi = rng.normal(-0.5, 1.0, size=(R, n))
    w0 = np.zeros(R)
    snaps = np.array([n // 100, n // 10, n], dtype=np.int64)
    u = rng.random((R, n))
    cum = np.array([[0.8, np.inf], [0.3, np.inf]])
    init = rng.integers(0, 2, size=R).astype(np.int64)
    eps = rng.normal(0.0, 0.6, size=(R, n))
    x0 = rng.normal(0.0, 1.0, size=R)

    cases = [
        ("lindley_snapshots", (xi, w0, snaps)),
        ("threshold_counts", (xi, w0, 1.0, snaps)),
        ("backward_sup", (xi,)),
        ("prefix_min_snapshots", (xi, snaps)),
        ("markov_states", (u, cum, init)),
        ("ar1_scan", (eps, x0, 0.8)),
    ]

    have_numba = _kernels.backend() == "numba"
    print(f"active backend: {_kernels.backend()}  ({R} replicas x {n} steps)")
    header = f"{'kernel':<22}{'numpy s':>10}" + (f"{'numba s':>10}{'speedup':>9}" if have_numba else "")
    print(header)
    for name, call_args in cases:
        np_time, np_out = _time(_kernels.NUMPY_IMPLS[name], *call_args)
        line = f"{name:<22}{np_time:>10.3f}"
        if have_numba:
            fn = getattr(_kernels, name)
            fn(*call_args)  # compile outside the timed region
            nb_time, nb_out = _time(fn, *call_args)
            same = all(
                np.array_equal(a, b)
                for a, b in zip(np.atleast_1d(np_out), np.atleast_1d(nb_out))
            ) if isinstance(np_out, tuple) else np.array_equal(np_out, nb_out)
            line += f"{nb_time:>10.3f}{np_time / nb_time:>8.1f}x"
            if not same:
                line += "  MISMATCH"
        print(line)


if __name__ == "__main__":
    main()
