"""Hot inner loops: numba implementations with a pure-numpy fallback.

The backend is chosen once at import time.  Setting the environment
variable ``ERGOQUEUE_NO_NUMBA=1`` (or running without numba installed)
selects the numpy path.  Both paths perform the same floating-point
operations in the same order per element, so they produce identical
arrays; ``tests/test_kernels.py`` asserts this and
``benchmarks/bench_kernels.py`` compares their throughput.

Kernels are deterministic transforms; all random numbers are drawn
outside (see :mod:`ergoqueue.rng`).
"""

from __future__ import annotations

import os
import warnings

import numpy as np

_DISABLED = os.environ.get("ERGOQUEUE_NO_NUMBA", "").strip() not in ("", "0")

try:  # pragma: no cover - exercised via env flag in tests
    if _DISABLED:
        raise ImportError("numba disabled by ERGOQUEUE_NO_NUMBA")
    # harmless on images whose TBB predates the threading layer; the
    # workqueue fallback is used instead
    warnings.filterwarnings("ignore", message=".*TBB.*", module="numba.*")
    from numba import njit, prange

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        def wrap(fn):
            return fn

        return wrap

    prange = range  # type: ignore[assignment]


def backend() -> str:
    """Name of the active kernel backend ('numba' or 'numpy')."""
    return "numba" if _HAVE_NUMBA else "numpy"


def set_workers(n: int) -> None:
    """Bound the kernel-internal thread count by n (numba backend only).

    Replica blocks are processed sequentially and parallelism lives
    inside the kernels, so results never depend on this setting.
    """
    if _HAVE_NUMBA and n >= 1:
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


# ---------------------------------------------------------------------------
# numpy reference implementations (vectorized across replicas, loop over time)
# ---------------------------------------------------------------------------


def _lindley_snapshots_np(xi, w0, snaps):
    R, n = xi.shape
    out = np.empty((R, snaps.size))
    w = w0.astype(np.float64).copy()
    k = 0
    for t in range(n):
        w = np.maximum(w + xi[:, t], 0.0)
        if k < snaps.size and t + 1 == snaps[k]:
            out[:, k] = w
            k += 1
    return out


def _lindley_path_np(xi, w0):
    n = xi.size
    w = np.empty(n + 1)
    w[0] = w0
    cur = w0
    for t in range(n):
        cur = cur + xi[t]
        if cur < 0.0:
            cur = 0.0
        w[t + 1] = cur
    return w


def _threshold_counts_np(xi, w0, thr, snaps):
    R, n = xi.shape
    out = np.empty((R, snaps.size), dtype=np.int64)
    w = w0.astype(np.float64).copy()
    c = np.zeros(R, dtype=np.int64)
    k = 0
    for t in range(n):
        w = np.maximum(w + xi[:, t], 0.0)
        c += w >= thr
        if k < snaps.size and t + 1 == snaps[k]:
            out[:, k] = c
            k += 1
    return out


def _backward_sup_np(xi):
    R, n = xi.shape
    s = np.zeros(R)
    best = np.zeros(R)
    last = np.zeros(R, dtype=np.int64)
    for t in range(n):
        s = s + xi[:, t]
        better = s > best
        best = np.where(better, s, best)
        last = np.where(better, t + 1, last)
    return best, last


def _prefix_min_snapshots_np(xi, snaps):
    R, n = xi.shape
    out = np.empty((R, snaps.size))
    s = np.zeros(R)
    m = np.full(R, np.inf)
    k = 0
    for t in range(n):
        s = s + xi[:, t]
        m = np.minimum(m, s)
        if k < snaps.size and t + 1 == snaps[k]:
            out[:, k] = m
            k += 1
    return out


def _markov_states_np(u, cum, init):
    R, n = u.shape
    states = np.empty((R, n + 1), dtype=np.int64)
    states[:, 0] = init
    for t in range(n):
        rows = cum[states[:, t]]
        states[:, t + 1] = np.sum(rows <= u[:, t][:, None], axis=1)
    return states


def _ar1_scan_np(eps, x0, phi):
    R, n = eps.shape
    x = np.empty((R, n + 1))
    x[:, 0] = x0
    for t in range(n):
        x[:, t + 1] = phi * x[:, t] + eps[:, t]
    return x


# ---------------------------------------------------------------------------
# numba implementations (loop over replicas in parallel, scan time inside)
# ---------------------------------------------------------------------------

if _HAVE_NUMBA:

    @njit(parallel=True, cache=True)
    def _lindley_snapshots_nb(xi, w0, snaps):
        R, n = xi.shape
        K = snaps.size
        out = np.empty((R, K))
        for r in prange(R):
            w = w0[r]
            k = 0
            for t in range(n):
                w = w + xi[r, t]
                if w < 0.0:
                    w = 0.0
                if k < K and t + 1 == snaps[k]:
                    out[r, k] = w
                    k += 1
        return out

    @njit(cache=True)
    def _lindley_path_nb(xi, w0):
        n = xi.size
        w = np.empty(n + 1)
        w[0] = w0
        cur = w0
        for t in range(n):
            cur = cur + xi[t]
            if cur < 0.0:
                cur = 0.0
            w[t + 1] = cur
        return w

    @njit(parallel=True, cache=True)
    def _threshold_counts_nb(xi, w0, thr, snaps):
        R, n = xi.shape
        K = snaps.size
        out = np.empty((R, K), dtype=np.int64)
        for r in prange(R):
            w = w0[r]
            c = 0
            k = 0
            for t in range(n):
                w = w + xi[r, t]
                if w < 0.0:
                    w = 0.0
                if w >= thr:
                    c += 1
                if k < K and t + 1 == snaps[k]:
                    out[r, k] = c
                    k += 1
        return out

    @njit(parallel=True, cache=True)
    def _backward_sup_nb(xi):
        R, n = xi.shape
        best = np.zeros(R)
        last = np.zeros(R, dtype=np.int64)
        for r in prange(R):
            s = 0.0
            b = 0.0
            li = 0
            for t in range(n):
                s = s + xi[r, t]
                if s > b:
                    b = s
                    li = t + 1
            best[r] = b
            last[r] = li
        return best, last

    @njit(parallel=True, cache=True)
    def _prefix_min_snapshots_nb(xi, snaps):
        R, n = xi.shape
        K = snaps.size
        out = np.empty((R, K))
        for r in prange(R):
            s = 0.0
            m = np.inf
            k = 0
            for t in range(n):
                s = s + xi[r, t]
                if s < m:
                    m = s
                if k < K and t + 1 == snaps[k]:
                    out[r, k] = m
                    k += 1
        return out

    @njit(parallel=True, cache=True)
    def _markov_states_nb(u, cum, init):
        R, n = u.shape
        K = cum.shape[1]
        states = np.empty((R, n + 1), dtype=np.int64)
        for r in prange(R):
            st = init[r]
            states[r, 0] = st
            for t in range(n):
                uu = u[r, t]
                j = 0
                while j < K and cum[st, j] <= uu:
                    j += 1
                st = j
                states[r, t + 1] = st
        return states

    @njit(parallel=True, cache=True)
    def _ar1_scan_nb(eps, x0, phi):
        R, n = eps.shape
        x = np.empty((R, n + 1))
        for r in prange(R):
            cur = x0[r]
            x[r, 0] = cur
            for t in range(n):
                cur = phi * cur + eps[r, t]
                x[r, t + 1] = cur
        return x

    lindley_snapshots = _lindley_snapshots_nb
    lindley_path = _lindley_path_nb
    threshold_counts = _threshold_counts_nb
    backward_sup = _backward_sup_nb
    prefix_min_snapshots = _prefix_min_snapshots_nb
    markov_states = _markov_states_nb
    ar1_scan = _ar1_scan_nb
else:
    lindley_snapshots = _lindley_snapshots_np
    lindley_path = _lindley_path_np
    threshold_counts = _threshold_counts_np
    backward_sup = _backward_sup_np
    prefix_min_snapshots = _prefix_min_snapshots_np
    markov_states = _markov_states_np
    ar1_scan = _ar1_scan_np

# Reference implementations are always importable for cross-checks.
NUMPY_IMPLS = {
    "lindley_snapshots": _lindley_snapshots_np,
    "lindley_path": _lindley_path_np,
    "threshold_counts": _threshold_counts_np,
    "backward_sup": _backward_sup_np,
    "prefix_min_snapshots": _prefix_min_snapshots_np,
    "markov_states": _markov_states_np,
    "ar1_scan": _ar1_scan_np,
}
