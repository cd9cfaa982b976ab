"""The numba kernels and the numpy fallback must agree exactly."""

import numpy as np
import pytest

from ergoqueue import _kernels

RNG = np.random.default_rng(12345)
XI = RNG.normal(-0.3, 1.0, size=(200, 400))
W0 = np.abs(RNG.normal(0.0, 2.0, size=200))
SNAPS = np.array([1, 7, 50, 400], dtype=np.int64)


def pairs(name, *args):
    active = getattr(_kernels, name)(*args)
    reference = _kernels.NUMPY_IMPLS[name](*args)
    return active, reference


def assert_same(a, b):
    if isinstance(a, tuple):
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)
    else:
        np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize(
    "name,args",
    [
        ("lindley_snapshots", (XI, W0, SNAPS)),
        ("threshold_counts", (XI, W0, 0.5, SNAPS)),
        ("backward_sup", (XI,)),
        ("prefix_min_snapshots", (XI, SNAPS)),
        ("lindley_path", (XI[0], 0.0)),
    ],
)
def test_backends_agree(name, args):
    assert_same(*pairs(name, *args))


def test_markov_states_agree():
    u = RNG.random((100, 300))
    cum = np.array([[0.6, 0.9, np.inf], [0.1, 0.5, np.inf], [0.3, 0.4, np.inf]])
    init = RNG.integers(0, 3, size=100).astype(np.int64)
    assert_same(*pairs("markov_states", u, cum, init))


def test_ar1_scan_agree():
    eps = RNG.normal(0.0, 0.6, size=(50, 200))
    x0 = RNG.normal(0.0, 1.0, size=50)
    assert_same(*pairs("ar1_scan", eps, x0, 0.8))


def test_lindley_snapshots_matches_path():
    # the snapshot kernel must agree with the scalar path recursion
    waits = _kernels.NUMPY_IMPLS["lindley_path"](XI[3], W0[3])
    snap = _kernels.NUMPY_IMPLS["lindley_snapshots"](XI[3:4], W0[3:4], SNAPS)[0]
    np.testing.assert_array_equal(snap, waits[SNAPS])


def test_threshold_counts_matches_path():
    waits = _kernels.NUMPY_IMPLS["lindley_path"](XI[5], W0[5])
    counts = _kernels.NUMPY_IMPLS["threshold_counts"](XI[5:6], W0[5:6], 0.5, SNAPS)[0]
    expect = [(waits[1 : n + 1] >= 0.5).sum() for n in SNAPS]
    np.testing.assert_array_equal(counts, expect)


def test_backward_sup_matches_numpy_cummax():
    best, last = _kernels.NUMPY_IMPLS["backward_sup"](XI)
    csum = np.cumsum(XI, axis=1)
    np.testing.assert_allclose(best, np.maximum(csum.max(axis=1), 0.0), atol=1e-12)
    # last-increase index: argmax of the running max among positive sups
    row = 11
    if best[row] > 0:
        assert last[row] == np.argmax(csum[row]) + 1


def test_prefix_min_matches_numpy_cummin():
    mins = _kernels.NUMPY_IMPLS["prefix_min_snapshots"](XI, SNAPS)
    cmin = np.minimum.accumulate(np.cumsum(XI, axis=1), axis=1)
    np.testing.assert_allclose(mins, cmin[:, SNAPS - 1], atol=1e-12)
