"""Empirical-law machinery: sorted samples, CDF/tail queries, KS and TV.

The total-variation convention here is the full signed-measure variation
|mu1 - mu2|(X), taking values in [0, 2]; binned laws on a shared edge set
make it sum |p_i - q_i|.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class EmpiricalLaw:
    """Sorted-sample representation of a law on [0, inf)."""

    samples: np.ndarray
    binning: tuple[np.ndarray, np.ndarray] | None = field(default=None)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.size == 0:
            raise ConfigError("empirical law needs at least one sample")
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise ConfigError("samples must be finite and >= 0")
        if np.any(np.diff(s) < 0):
            s = np.sort(s)
        object.__setattr__(self, "samples", s)
        if self.binning is not None:
            edges, masses = self.binning
            if abs(float(np.sum(masses)) - 1.0) > 1e-12:
                raise ConfigError("bin masses must sum to 1 within 1e-12")
            object.__setattr__(self, "binning", (np.asarray(edges), np.asarray(masses)))

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "EmpiricalLaw":
        return cls(samples=np.sort(np.asarray(samples, dtype=float)))

    @property
    def n(self) -> int:
        return self.samples.size

    def cdf(self, x) -> np.ndarray | float:
        """Fraction of samples <= x."""
        return np.searchsorted(self.samples, x, side="right") / self.n

    def tail(self, w0: float) -> float:
        """Fraction of samples >= w0 (closed indicator convention)."""
        return float(self.n - np.searchsorted(self.samples, w0, side="left")) / self.n

    def mean(self) -> float:
        return float(self.samples.mean())

    def quantile_edges(self, n_bins: int) -> np.ndarray:
        """Equal-mass bin edges: [0, interior quantiles, inf], deduplicated."""
        if n_bins < 2:
            raise ConfigError("need at least 2 bins")
        qs = np.quantile(self.samples, np.arange(1, n_bins) / n_bins)
        edges = np.concatenate(([0.0], np.unique(qs), [np.inf]))
        return np.unique(edges)


def tail_estimate(law: EmpiricalLaw, w0: float) -> float:
    """Fraction of samples at or above w0."""
    return law.tail(w0)


def ks_distance(a: EmpiricalLaw, b: EmpiricalLaw) -> float:
    """Two-sample Kolmogorov-Smirnov distance, sup over the merged sample."""
    grid = np.concatenate((a.samples, b.samples))
    return float(np.max(np.abs(a.cdf(grid) - b.cdf(grid))))


def bin_masses(samples: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Histogram masses on [e_i, e_{i+1}) bins; everything lands in range."""
    idx = np.searchsorted(edges, samples, side="right") - 1
    idx = np.clip(idx, 0, len(edges) - 2)
    return np.bincount(idx, minlength=len(edges) - 1) / samples.size


def tv_binned(a: EmpiricalLaw, b: EmpiricalLaw, edges) -> float:
    """Signed-measure total variation between binned laws, in [0, 2].

    Samples outside the edge range are counted in the first/last bin and
    flagged with a RuntimeWarning.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ConfigError("edges must be strictly increasing with >= 2 entries")
    for law in (a, b):
        if law.samples[0] < edges[0] or law.samples[-1] >= edges[-1]:
            warnings.warn(
                "samples outside bin range counted in overflow bins",
                RuntimeWarning,
                stacklevel=2,
            )
            break
    pa = bin_masses(a.samples, edges)
    pb = bin_masses(b.samples, edges)
    return float(np.abs(pa - pb).sum())


def binned_law(samples: np.ndarray, edges: np.ndarray) -> EmpiricalLaw:
    """EmpiricalLaw carrying its binned representation."""
    s = np.sort(np.asarray(samples, dtype=float))
    masses = bin_masses(s, np.asarray(edges, dtype=float))
    return EmpiricalLaw(samples=s, binning=(np.asarray(edges, dtype=float), masses))


def step_function_average(
    waits: np.ndarray, breakpoints: np.ndarray, values: np.ndarray
) -> float:
    """Average of a bounded tabulated step function over wait samples.

    The function equals values[i] on [breakpoints[i], breakpoints[i+1]) with
    an implicit leading interval [0, breakpoints[0]) mapped to values[0]
    when breakpoints[0] > 0; intervals are closed on the left, matching the
    threshold-indicator convention.
    """
    bp = np.asarray(breakpoints, dtype=float)
    vals = np.asarray(values, dtype=float)
    if bp.size + 1 != vals.size:
        raise DomainError("need len(values) == len(breakpoints) + 1")
    idx = np.searchsorted(bp, waits, side="right")
    return float(vals[idx].mean())
