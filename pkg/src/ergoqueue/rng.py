"""Splittable random streams keyed by (seed, role, replica index).

Every stochastic routine draws from a PCG64 substream addressed by a
(role, index) spawn key under one master seed.  Streams for distinct
keys are independent and a given key always reproduces the same
sequence, so replicas can be generated in any order, in any chunking,
on any number of workers, with identical results.
"""

from __future__ import annotations

import numpy as np
from numpy.random import PCG64, Generator, SeedSequence

# Stream roles.  Values are part of the reproducibility contract: changing
# them changes every sampled path.
ENV = 0
SERVICE = 1
LOYNES_ENV = 2
LOYNES_SERVICE = 3
BOROVKOV_ENV = 4
BOROVKOV_SERVICE = 5
INIT_WAIT = 6
BOOTSTRAP = 7
ALPHA_MOMENT = 8
CGF = 9
BOROVKOV_ENV_FWD = 10
BOROVKOV_SERVICE_FWD = 11


def substream(seed: int, role: int, index: int = 0) -> Generator:
    """Return the generator for stream (seed, role, index)."""
    return Generator(PCG64(SeedSequence(entropy=seed, spawn_key=(role, index))))


def replica_blocks(replicas: int, n_steps: int) -> list[tuple[int, int]]:
    """Split replica indices into memory-bounded [lo, hi) blocks.

    Block size is a deterministic function of the horizon only (about
    64 MB of float64 per (block, horizon) matrix), never of the worker
    count, so blocking cannot influence results.
    """
    block = int(np.clip(2**23 // max(n_steps, 1), 32, 16384))
    return [(lo, min(lo + block, replicas)) for lo in range(0, replicas, block)]
