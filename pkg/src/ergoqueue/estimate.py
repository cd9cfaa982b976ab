"""Theorem-level experiments: TV decay, rate fits, LLN, Borovkov margins.

Total variation between the law of W_n and the long-horizon reference
law is estimated on equal-mass bins built from the reference sample
(bin count replicas^(1/3)); the measurable noise floor is the TV of the
two halves of the reference sample against each other, and only points
above twice that floor enter rate fits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import lindley, rng
from .empirical import EmpiricalLaw, binned_law, ks_distance, tail_estimate, tv_binned
from .errors import ConfigError, FitError
from .lindley import QueueModel, Seeds

__all__ = [
    "EmpiricalLaw",
    "RateFit",
    "TvCurvePoint",
    "TvDecayResult",
    "binned_law",
    "ks_distance",
    "tv_binned",
    "tail_estimate",
    "tv_decay_curve",
    "fit_rate",
    "lln_curve",
    "borovkov_compare",
]

_BOOTSTRAP_REPS = 100


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of ln TV = ln c1 - c2 n^p."""

    c1: float
    c2: float
    exponent: float
    r_squared: float
    residuals: np.ndarray = field(repr=False)
    n_points: int = 0

    def predict(self, n) -> np.ndarray:
        return self.c1 * np.exp(-self.c2 * np.asarray(n, dtype=float) ** self.exponent)


@dataclass(frozen=True)
class TvCurvePoint:
    n: int
    tv: float
    stderr: float


@dataclass(frozen=True)
class TvDecayResult:
    points: list[TvCurvePoint]
    noise_floor: float
    edges: np.ndarray
    reference: EmpiricalLaw
    reference_kind: str

    def above_floor(self) -> list[TvCurvePoint]:
        return [p for p in self.points if p.tv > 2.0 * self.noise_floor]


def _bootstrap_tv(idx_a: np.ndarray, idx_b: np.ndarray, n_bins: int, g) -> float:
    """Stderr of binned TV under joint replica resampling."""
    R = idx_a.size
    vals = np.empty(_BOOTSTRAP_REPS)
    for b in range(_BOOTSTRAP_REPS):
        take = g.integers(0, R, size=R)
        pa = np.bincount(idx_a[take], minlength=n_bins) / R
        pb = np.bincount(idx_b[take], minlength=n_bins) / R
        vals[b] = np.abs(pa - pb).sum()
    return float(vals.std(ddof=1))


def tv_decay_curve(
    model: QueueModel,
    n_grid,
    replicas: int,
    n_star: int | None = None,
    seeds=0,
    cert=None,
    workers: int = 1,
    reference: str = "forward",
    loynes_horizon: int = 2000,
) -> TvDecayResult:
    """TV distance between L(W_n) and the reference law, per n in the grid.

    The reference is the empirical law of W_{n_star} (default 20x the
    largest grid n, at least 10^4) or, with reference='loynes', the
    backward-construction law.  ``cert`` is carried for report metadata
    only.  Returns bootstrap stderrs and the split-half noise floor.
    """
    del cert  # metadata only; the curve itself never needs it
    model.require_subcritical()
    ns = np.unique(np.asarray(n_grid, dtype=np.int64))
    if ns.size == 0 or ns[0] < 1:
        raise ConfigError("n_grid must contain steps >= 1")
    if replicas < 1000:
        raise ConfigError("tv_decay_curve needs replicas >= 1000 for the bin rule")
    if n_star is None:
        n_star = max(20 * int(ns[-1]), 10_000)
    seeds = Seeds.of(seeds)

    if reference == "forward":
        if n_star <= ns[-1]:
            raise ConfigError("n_star must exceed the largest grid n")
        snaps = np.unique(np.concatenate((ns, [n_star])))
        waits = lindley.wait_snapshots(model, snaps, replicas, seeds, workers=workers)
        ref_samples = waits[:, -1]
    elif reference == "loynes":
        snaps = ns
        waits = lindley.wait_snapshots(model, snaps, replicas, seeds, workers=workers)
        ref_samples = lindley.loynes_backward(
            model, loynes_horizon, replicas, seeds, workers=workers
        ).law.samples
    else:
        raise ConfigError("reference must be 'forward' or 'loynes'")

    ref = EmpiricalLaw.from_samples(ref_samples)
    n_bins = max(int(math.ceil(replicas ** (1.0 / 3.0))), 2)
    edges = ref.quantile_edges(n_bins)
    n_bins = edges.size - 1
    ref_idx = np.clip(np.searchsorted(edges, ref_samples, side="right") - 1, 0, n_bins - 1)
    ref_mass = np.bincount(ref_idx, minlength=n_bins) / replicas

    # measured noise floor: half of the reference sample vs the other half
    half = replicas // 2
    pa = np.bincount(ref_idx[:half], minlength=n_bins) / half
    pb = np.bincount(ref_idx[half : 2 * half], minlength=n_bins) / half
    floor = float(np.abs(pa - pb).sum())

    g = rng.substream(seeds.env, rng.BOOTSTRAP, 0)
    points = []
    for j, n in enumerate(ns):
        w_n = waits[:, j]
        idx = np.clip(np.searchsorted(edges, w_n, side="right") - 1, 0, n_bins - 1)
        mass = np.bincount(idx, minlength=n_bins) / replicas
        tv = float(np.abs(mass - ref_mass).sum())
        se = _bootstrap_tv(idx, ref_idx, n_bins, g)
        points.append(TvCurvePoint(n=int(n), tv=tv, stderr=se))
    return TvDecayResult(
        points=points,
        noise_floor=floor,
        edges=edges,
        reference=ref,
        reference_kind=reference,
    )


def fit_rate(curve, exponent="free", noise_floor: float = 0.0) -> RateFit:
    """Fit ln TV = ln c1 - c2 n^p over curve points above the noise floor.

    ``curve`` is a TvDecayResult or an iterable of (n, tv[, stderr]).
    With exponent='free', p is grid-searched over {0.1, ..., 1.0} for the
    best r^2.  Needs at least 4 usable points.
    """
    if isinstance(curve, TvDecayResult):
        noise_floor = max(noise_floor, curve.noise_floor)
        pts = [(p.n, p.tv) for p in curve.points]
    else:
        pts = [(row[0], row[1]) for row in curve]
    usable = [(n, tv) for n, tv in pts if tv > 2.0 * noise_floor and tv > 0.0]
    if len(usable) < 4:
        raise FitError(
            f"only {len(usable)} usable points above the noise floor; need >= 4"
        )
    n_arr = np.array([n for n, _ in usable], dtype=float)
    y = np.log(np.array([tv for _, tv in usable]))

    def fit_p(p: float):
        x = n_arr**p
        A = np.column_stack((np.ones_like(x), -x))
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        resid = y - A @ coef
        ss_res = float(resid @ resid)
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
        return coef, resid, r2

    if exponent == "free":
        best = None
        for p in np.arange(0.1, 1.0 + 1e-9, 0.1):
            coef, resid, r2 = fit_p(float(p))
            if best is None or r2 > best[3]:
                best = (float(p), coef, resid, r2)
        p, coef, resid, r2 = best
    else:
        p = float(exponent)
        if not 0.0 < p <= 1.0:
            raise FitError("exponent must lie in (0, 1]")
        coef, resid, r2 = fit_p(p)
    c1 = math.exp(float(coef[0]))
    c2 = float(coef[1])
    if c1 <= 0 or c2 <= 0:
        raise FitError(f"fit left the model class: c1={c1:.4g}, c2={c2:.4g}")
    return RateFit(
        c1=c1,
        c2=c2,
        exponent=p,
        r_squared=max(0.0, min(1.0, r2)),
        residuals=resid,
        n_points=len(usable),
    )


def lln_curve(
    model: QueueModel,
    w0_threshold: float,
    n_grid,
    replicas: int,
    seeds=0,
    reference: EmpiricalLaw | None = None,
    workers: int = 1,
) -> list[dict]:
    """Running averages of the threshold indicator across replicas.

    Returns one row per n: the cross-replica mean and standard deviation
    of (Phi(W_1)+...+Phi(W_n))/n with Phi = 1{w >= w0}, plus the
    reference value of Phi under ``reference`` when given.
    """
    model.require_subcritical()
    ns = np.unique(np.asarray(n_grid, dtype=np.int64))
    counts = lindley.threshold_count_snapshots(
        model, w0_threshold, ns, replicas, seeds, workers=workers
    )
    ref_val = reference.tail(w0_threshold) if reference is not None else math.nan
    rows = []
    for j, n in enumerate(ns):
        frac = counts[:, j] / float(n)
        rows.append(
            {
                "n": int(n),
                "mean": float(frac.mean()),
                "stdev": float(frac.std(ddof=1)),
                "ref": ref_val,
            }
        )
    return rows


def borovkov_compare(
    model: QueueModel,
    n_grid,
    replicas: int,
    seeds=0,
    n_star: int | None = None,
    loynes_horizon: int = 1000,
    workers: int = 1,
) -> list[dict]:
    """Check TV(L(W_n), ref) <= 2 * Borovkov RHS at each n in the grid.

    The factor 2 reconciles the per-set bound with the signed-measure TV
    convention.  Rows carry margin = 2*rhs - tv and the combined stderr;
    the inequality passes when margin >= -3 * stderr_combined.
    """
    ns = np.unique(np.asarray(n_grid, dtype=np.int64))
    if ns[0] < 2:
        raise ConfigError("Borovkov comparison needs n >= 2")
    decay = tv_decay_curve(
        model, ns, replicas, n_star=n_star, seeds=seeds, workers=workers
    )
    ind = lindley.borovkov_indicators(
        model, ns, replicas, seeds, loynes_horizon=loynes_horizon, workers=workers
    )
    rows = []
    for j, n in enumerate(ns):
        p = float(ind[:, j].mean())
        se_rhs = math.sqrt(p * (1.0 - p) / replicas)
        pt = decay.points[j]
        margin = 2.0 * p - pt.tv
        se_comb = math.sqrt((2.0 * se_rhs) ** 2 + pt.stderr**2)
        rows.append(
            {
                "n": int(n),
                "tv": pt.tv,
                "rhs": p,
                "rhs_stderr": se_rhs,
                "margin": margin,
                "stderr_combined": se_comb,
                "noise_floor": decay.noise_floor,
                "passed": bool(margin >= -3.0 * se_comb),
            }
        )
    return rows
