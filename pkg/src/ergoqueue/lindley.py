"""Waiting-time recursion, Loynes backward construction, Borovkov bound.

The chain is W_{n+1} = (W_n + S_n - Z_{n+1})_+ with i.i.d. services S and
a stationary environment Z independent of S.  Increments are indexed
xi_n = S_n - Z_{n+1}; the backward sums Y_n = sum_{k=1}^n xi_{-k} and the
forward walk X_n = sum_{k=1}^n xi_k are derived views over the same
streams.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels, env_processes, rng, service_laws
from .empirical import EmpiricalLaw
from .errors import ConfigError, DomainError, StabilityError


@dataclass(frozen=True)
class QueueModel:
    """An environment process paired with an i.i.d. service law."""

    env: env_processes.EnvironmentSpec
    service: service_laws.ServiceSpec

    def is_subcritical(self) -> bool:
        return self.service.mean() < self.env.stationary_mean()

    def require_subcritical(self):
        if not self.is_subcritical():
            ms, mz = self.service.mean(), self.env.stationary_mean()
            kind = "critical" if ms == mz else "supercritical"
            raise StabilityError(
                f"{kind} model: E[S]={ms:.6g} >= E[Z]={mz:.6g}"
            )


@dataclass(frozen=True)
class Seeds:
    """Master seeds for the environment and service streams."""

    env: int
    service: int

    @classmethod
    def of(cls, seeds) -> "Seeds":
        if isinstance(seeds, Seeds):
            return seeds
        return cls(env=int(seeds), service=int(seeds))


@dataclass(frozen=True)
class Trajectory:
    """One realization W_0..W_n with the seeds that reproduce it."""

    waits: np.ndarray
    env_seed: int
    service_seed: int
    model: QueueModel
    w0: float

    def __post_init__(self):
        if self.waits[0] != self.w0 or np.any(self.waits < 0):
            raise ConfigError("trajectory must start at w0 and stay nonnegative")

    def __len__(self) -> int:
        return self.waits.size


@dataclass(frozen=True)
class LoynesResult:
    """Empirical law of W_0' plus the stabilization diagnostic."""

    law: EmpiricalLaw
    late_fraction: float
    stabilized: bool


def lindley_step(w: float, s: float, z: float) -> float:
    """One update (w + s - z)_+."""
    return max(w + s - z, 0.0)


def _run_blocks(blocks, fn, workers: int):
    """Evaluate fn(lo, hi) over blocks in order.

    Parallelism lives inside the kernels (numba prange over replicas);
    ``workers`` bounds that thread count.  Blocks run sequentially: the
    numba workqueue layer does not tolerate concurrent entry, and the
    generation side is interpreter-bound anyway.  Per-replica streams
    plus the ordered merge make results independent of the setting.
    """
    _kernels.set_workers(workers)
    return [fn(lo, hi) for lo, hi in blocks]


def _xi_block(model: QueueModel, n: int, seeds: Seeds, lo: int, hi: int) -> np.ndarray:
    """Forward increments xi_0..xi_{n-1} for replicas [lo, hi)."""
    z = env_processes.sample_paths_block(model.env, n + 1, seeds.env, lo, hi)
    s = np.empty((hi - lo, n))
    for i in range(hi - lo):
        g = rng.substream(seeds.service, rng.SERVICE, lo + i)
        s[i] = service_laws.sample_block(model.service, g, n)
    s -= z[:, 1:]
    return s


def simulate(model: QueueModel, w0: float, n: int, seeds) -> Trajectory:
    """Evolve one trajectory of length n from W_0 = w0."""
    if n < 1:
        raise ConfigError("horizon must be >= 1")
    seeds = Seeds.of(seeds)
    xi = _xi_block(model, n, seeds, 0, 1)[0]
    waits = _kernels.lindley_path(xi, float(w0))
    return Trajectory(
        waits=waits,
        env_seed=seeds.env,
        service_seed=seeds.service,
        model=model,
        w0=float(w0),
    )


def functional_average(traj: Trajectory, w0_threshold: float, n: int) -> float:
    """Fraction of W_1..W_n at or above the threshold."""
    if not 1 <= n <= len(traj) - 1:
        raise DomainError(f"n must be in [1, {len(traj) - 1}]")
    return float(np.mean(traj.waits[1 : n + 1] >= w0_threshold))


def wait_snapshots(
    model: QueueModel,
    snapshots,
    replicas: int,
    seeds,
    w0=0.0,
    workers: int = 1,
) -> np.ndarray:
    """W_n across replicas at each snapshot step, as a (replicas, K) array.

    ``w0`` may be a scalar or a per-replica array (used for coupled and
    stationary-start experiments).
    """
    seeds = Seeds.of(seeds)
    snaps = np.unique(np.asarray(snapshots, dtype=np.int64))
    if snaps.size == 0 or snaps[0] < 1:
        raise ConfigError("snapshot steps must be >= 1")
    n = int(snaps[-1])
    w0_arr = np.broadcast_to(np.asarray(w0, dtype=float), (replicas,))

    def block(lo, hi):
        xi = _xi_block(model, n, seeds, lo, hi)
        return _kernels.lindley_snapshots(xi, np.ascontiguousarray(w0_arr[lo:hi]), snaps)

    parts = _run_blocks(rng.replica_blocks(replicas, n), block, workers)
    return np.concatenate(parts, axis=0)


def threshold_count_snapshots(
    model: QueueModel,
    threshold: float,
    snapshots,
    replicas: int,
    seeds,
    workers: int = 1,
) -> np.ndarray:
    """Counts #{1 <= k <= n : W_k >= threshold} per replica and snapshot n."""
    seeds = Seeds.of(seeds)
    snaps = np.unique(np.asarray(snapshots, dtype=np.int64))
    n = int(snaps[-1])

    def block(lo, hi):
        xi = _xi_block(model, n, seeds, lo, hi)
        w0 = np.zeros(hi - lo)
        return _kernels.threshold_counts(xi, w0, float(threshold), snaps)

    parts = _run_blocks(rng.replica_blocks(replicas, n), block, workers)
    return np.concatenate(parts, axis=0)


def _loynes_samples(
    model: QueueModel, horizon: int, replicas: int, seeds: Seeds, workers: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per replica: sup of backward partial sums and its last-increase step."""
    rev = env_processes.reversed_spec(model.env)

    def block(lo, hi):
        # reversed-path column k holds Z_{-k}; services column k holds S_{-k-1},
        # so xi_{-k} = s[:, k-1] - z[:, k-1] entrywise.
        z = env_processes.sample_paths_block(
            rev, horizon, seeds.env, lo, hi, role=rng.LOYNES_ENV
        )
        s = np.empty((hi - lo, horizon))
        for i in range(hi - lo):
            g = rng.substream(seeds.service, rng.LOYNES_SERVICE, lo + i)
            s[i] = service_laws.sample_block(model.service, g, horizon)
        return _kernels.backward_sup(s - z)

    parts = _run_blocks(rng.replica_blocks(replicas, horizon), block, workers)
    sups = np.concatenate([p[0] for p in parts])
    last = np.concatenate([p[1] for p in parts])
    return sups, last


def loynes_backward(
    model: QueueModel,
    horizon: int,
    replicas: int,
    seeds,
    workers: int = 1,
) -> LoynesResult:
    """Sample the stationary waiting time as sup of backward partial sums.

    Requires a subcritical model.  The result carries the fraction of
    replicas whose running maximum last moved in the final 10% of the
    horizon; above 1% the law is flagged as not stabilized.
    """
    model.require_subcritical()
    if horizon < 10:
        raise ConfigError("loynes horizon must be >= 10")
    seeds = Seeds.of(seeds)
    sups, last = _loynes_samples(model, horizon, replicas, seeds, workers)
    late = float(np.mean(last > horizon - horizon // 10))
    stabilized = late < 0.01
    if not stabilized:
        warnings.warn(
            f"loynes running max still moving late (fraction {late:.3f}); "
            "increase the horizon",
            RuntimeWarning,
            stacklevel=2,
        )
    return LoynesResult(
        law=EmpiricalLaw.from_samples(sups), late_fraction=late, stabilized=stabilized
    )


def borovkov_indicators(
    model: QueueModel,
    n_list,
    replicas: int,
    seeds,
    loynes_horizon: int = 1000,
    workers: int = 1,
) -> np.ndarray:
    """Indicator matrix of min_{0<k<n} X_k > max(W_1, W_0' + xi_0) per n.

    Each replica shares one two-sided environment realization across all
    n: the backward side feeds W_0', the forward side drives both the
    X-walk and W_1 = (xi_0)_+.
    """
    model.require_subcritical()
    seeds = Seeds.of(seeds)
    ns = np.unique(np.asarray(n_list, dtype=np.int64))
    if ns[0] < 2:
        raise DomainError("Borovkov bound needs n >= 2 (the min over 0<k<n is empty)")
    n_max = int(ns[-1])

    def block(lo, hi):
        B = hi - lo
        z_back, z_fwd = env_processes.sample_two_sided_block(
            model.env,
            loynes_horizon,
            n_max,
            seeds.env,
            lo,
            hi,
            role_back=rng.BOROVKOV_ENV,
            role_fwd=rng.BOROVKOV_ENV_FWD,
        )
        s_back = np.empty((B, loynes_horizon))
        s_fwd = np.empty((B, n_max))
        for i in range(B):
            gb = rng.substream(seeds.service, rng.BOROVKOV_SERVICE, lo + i)
            s_back[i] = service_laws.sample_block(model.service, gb, loynes_horizon)
            gf = rng.substream(seeds.service, rng.BOROVKOV_SERVICE_FWD, lo + i)
            s_fwd[i] = service_laws.sample_block(model.service, gf, n_max)
        w0p = _kernels.backward_sup(s_back - z_back)[0]
        xi_fwd = s_fwd - z_fwd
        xi0 = xi_fwd[:, 0]
        thresh = np.maximum(np.maximum(xi0, 0.0), w0p + xi0)
        mins = _kernels.prefix_min_snapshots(
            np.ascontiguousarray(xi_fwd[:, 1:]), ns - 1
        )
        return mins > thresh[:, None]

    parts = _run_blocks(rng.replica_blocks(replicas, loynes_horizon + n_max), block, workers)
    return np.concatenate(parts, axis=0)


def borovkov_rhs(
    model: QueueModel,
    n: int,
    replicas: int,
    seeds,
    loynes_horizon: int = 1000,
    workers: int = 1,
) -> tuple[float, float]:
    """Monte Carlo estimate of the Borovkov right-hand side with stderr."""
    if n < 2:
        raise DomainError("Borovkov bound needs n >= 2")
    if replicas < 100:
        raise ConfigError("borovkov_rhs needs replicas >= 100")
    ind = borovkov_indicators(
        model, [n], replicas, seeds, loynes_horizon=loynes_horizon, workers=workers
    )[:, 0]
    p = float(ind.mean())
    return p, math.sqrt(p * (1.0 - p) / replicas)
