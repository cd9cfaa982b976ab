"""I.i.d. service-time laws: sampling, MGF, density, and density floors.

Supported families keep every quantity the certification chain needs in
closed form: the MGF and its truncation tails for the drift quadrature,
the CDF for exact minorization probabilities, and exact infima of the
density over compact intervals for the small-set constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import ConfigError, DomainError

INF = float("inf")

# Families whose density is nonincreasing with an exponential floor
# f(s) >= C4 * exp(-C5 s); required for the light-tail-environment mode.
_FLOOR_FAMILIES = ("exponential", "gamma", "exponential_mixture")


@dataclass(frozen=True)
class ServiceSpec:
    """Descriptor of the i.i.d. service law S0.

    family: 'exponential' (rate), 'gamma' (shape, rate),
    'uniform_shifted' (a, b), 'exponential_mixture' (weights, rates),
    or 'deterministic' (value).  ``theorem_mode`` selects which extra
    invariants are enforced: 'bounded_env' needs the density positive on
    compacts, 'light_tail_env' needs a nonincreasing density with an
    exponential floor (C4, C5).
    """

    family: str
    rate: float = 0.0
    shape: float = 1.0
    a: float = 0.0
    b: float = 0.0
    weights: tuple[float, ...] = ()
    rates: tuple[float, ...] = ()
    value: float = 0.0
    theorem_mode: str | None = None
    # Derived at validation; exponential floor constants (light-tail mode).
    c4: float = field(default=0.0, init=False)
    c5: float = field(default=0.0, init=False)

    def __post_init__(self):
        f = self.family
        if f == "exponential":
            if self.rate <= 0:
                raise ConfigError("exponential service needs rate > 0")
            c4 = c5 = self.rate
        elif f == "gamma":
            if self.rate <= 0 or self.shape <= 0:
                raise ConfigError("gamma service needs shape > 0 and rate > 0")
            if self.shape == 1.0:
                c4 = c5 = self.rate
            elif self.shape < 1.0:
                # f(s) e^{c5 s} is minimized at s* = (1-k)/(c5-mu); take c5 = 2 mu.
                c5 = 2.0 * self.rate
                s_star = (1.0 - self.shape) / (c5 - self.rate)
                c4 = self.density(s_star) * math.exp(c5 * s_star)
            else:
                c4 = c5 = 0.0  # density vanishes at 0: no floor
        elif f == "uniform_shifted":
            if not (0.0 <= self.a < self.b):
                raise ConfigError("uniform_shifted service needs 0 <= a < b")
            c4 = c5 = 0.0
        elif f == "exponential_mixture":
            w = np.asarray(self.weights, dtype=float)
            r = np.asarray(self.rates, dtype=float)
            if w.size == 0 or w.size != r.size:
                raise ConfigError("mixture needs equal-length weights and rates")
            if np.any(w <= 0) or np.any(r <= 0):
                raise ConfigError("mixture weights and rates must be positive")
            if abs(w.sum() - 1.0) > 1e-12:
                raise ConfigError("mixture weights must sum to 1")
            # f(s) >= (sum_i w_i mu_i) e^{-max(mu) s}, tight at s = 0.
            c5 = float(r.max())
            c4 = float((w * r).sum())
        elif f == "deterministic":
            if self.value < 0:
                raise ConfigError("deterministic service needs value >= 0")
            c4 = c5 = 0.0
        else:
            raise ConfigError(f"unknown service family {f!r}")
        object.__setattr__(self, "c4", c4)
        object.__setattr__(self, "c5", c5)

        if self.theorem_mode not in (None, "bounded_env", "light_tail_env"):
            raise ConfigError(f"unknown theorem_mode {self.theorem_mode!r}")
        if self.theorem_mode == "light_tail_env":
            if f not in _FLOOR_FAMILIES or self.c4 <= 0:
                raise ConfigError(
                    "light_tail_env mode needs a nonincreasing density with an "
                    f"exponential floor; family {f!r} has none"
                )
        if self.theorem_mode == "bounded_env" and f == "deterministic":
            raise ConfigError("deterministic service has no density")

    @property
    def mgf_sup(self) -> float:
        """Supremum beta0 of the MGF domain (may be inf)."""
        if self.family in ("exponential", "gamma"):
            return self.rate
        if self.family == "exponential_mixture":
            return float(min(self.rates))
        return INF

    def mean(self) -> float:
        if self.family == "exponential":
            return 1.0 / self.rate
        if self.family == "gamma":
            return self.shape / self.rate
        if self.family == "uniform_shifted":
            return 0.5 * (self.a + self.b)
        if self.family == "exponential_mixture":
            return float(sum(w / r for w, r in zip(self.weights, self.rates)))
        return self.value


def mgf(spec: ServiceSpec, beta: float) -> float:
    """Exact E[exp(beta * S)].  Raises DomainError for beta >= beta0."""
    if beta >= spec.mgf_sup:
        raise DomainError(
            f"beta={beta} outside MGF domain [0, {spec.mgf_sup}) of {spec.family}"
        )
    if beta == 0.0:
        return 1.0
    if spec.family == "exponential":
        return spec.rate / (spec.rate - beta)
    if spec.family == "gamma":
        return (spec.rate / (spec.rate - beta)) ** spec.shape
    if spec.family == "uniform_shifted":
        return (math.exp(beta * spec.b) - math.exp(beta * spec.a)) / (
            beta * (spec.b - spec.a)
        )
    if spec.family == "exponential_mixture":
        return float(
            sum(w * r / (r - beta) for w, r in zip(spec.weights, spec.rates))
        )
    return math.exp(beta * spec.value)


def mgf_tail(spec: ServiceSpec, beta: float, t: float) -> float:
    """Exact integral of exp(beta*s) f(s) over [t, inf).

    Used to pick quadrature truncation points with a controlled error.
    """
    if beta >= spec.mgf_sup:
        raise DomainError("beta outside MGF domain")
    if t <= 0.0:
        return mgf(spec, beta)
    if spec.family == "exponential":
        mu = spec.rate
        return mu / (mu - beta) * math.exp(-(mu - beta) * t)
    if spec.family == "gamma":
        k, mu = spec.shape, spec.rate
        return (mu / (mu - beta)) ** k * float(special.gammaincc(k, (mu - beta) * t))
    if spec.family == "uniform_shifted":
        if t >= spec.b:
            return 0.0
        lo = max(t, spec.a)
        if beta == 0.0:
            return (spec.b - lo) / (spec.b - spec.a)
        return (math.exp(beta * spec.b) - math.exp(beta * lo)) / (
            beta * (spec.b - spec.a)
        )
    if spec.family == "exponential_mixture":
        return float(
            sum(
                w * r / (r - beta) * math.exp(-(r - beta) * t)
                for w, r in zip(spec.weights, spec.rates)
            )
        )
    # deterministic
    return math.exp(beta * spec.value) if spec.value >= t else 0.0


def density(spec: ServiceSpec, s: float) -> float:
    """Density f(s) for s >= 0."""
    if s < 0:
        raise DomainError("service support is [0, inf)")
    if spec.family == "exponential":
        return spec.rate * math.exp(-spec.rate * s)
    if spec.family == "gamma":
        k, mu = spec.shape, spec.rate
        if s == 0.0:
            if k < 1.0:
                return INF
            return mu if k == 1.0 else 0.0
        return math.exp(
            k * math.log(mu) + (k - 1.0) * math.log(s) - mu * s - special.gammaln(k)
        )
    if spec.family == "uniform_shifted":
        return 1.0 / (spec.b - spec.a) if spec.a <= s <= spec.b else 0.0
    if spec.family == "exponential_mixture":
        return float(
            sum(w * r * math.exp(-r * s) for w, r in zip(spec.weights, spec.rates))
        )
    raise DomainError("deterministic service has no density")


def cdf(spec: ServiceSpec, s: float) -> float:
    """Distribution function P(S <= s), defined on all of R."""
    if s <= 0:
        return 1.0 if (spec.family == "deterministic" and spec.value <= s) else 0.0
    if spec.family == "exponential":
        return -math.expm1(-spec.rate * s)
    if spec.family == "gamma":
        return float(special.gammainc(spec.shape, spec.rate * s))
    if spec.family == "uniform_shifted":
        if s <= spec.a:
            return 0.0
        return min((s - spec.a) / (spec.b - spec.a), 1.0)
    if spec.family == "exponential_mixture":
        return float(
            sum(-w * math.expm1(-r * s) for w, r in zip(spec.weights, spec.rates))
        )
    return 1.0 if spec.value <= s else 0.0


def interval_prob(spec: ServiceSpec, lo: float, hi: float) -> float:
    """P(lo <= S <= hi) without cancellation in the deep tail.

    The survival-difference form keeps full relative precision even when
    both endpoints sit far in the tail, which the minorization check
    relies on.
    """
    if hi <= lo:
        return 0.0
    if lo <= 0:
        return cdf(spec, hi)
    if spec.family == "exponential":
        return math.exp(-spec.rate * lo) * -math.expm1(-spec.rate * (hi - lo))
    if spec.family == "exponential_mixture":
        return float(
            sum(
                w * math.exp(-r * lo) * -math.expm1(-r * (hi - lo))
                for w, r in zip(spec.weights, spec.rates)
            )
        )
    if spec.family == "gamma":
        k, mu = spec.shape, spec.rate
        return float(special.gammaincc(k, mu * lo) - special.gammaincc(k, mu * hi))
    return cdf(spec, hi) - cdf(spec, lo)


def density_infimum(spec: ServiceSpec, lo: float, hi: float) -> float:
    """Exact infimum of the density over [lo, hi].

    All supported densities are monotone on each side of at most one
    interior mode, so the infimum sits at an endpoint (or is 0 where the
    interval leaves the support).
    """
    if not (0.0 <= lo <= hi):
        raise DomainError("need 0 <= lo <= hi")
    if math.isinf(hi):
        raise DomainError("density_infimum needs a bounded interval")
    if spec.family in ("exponential", "exponential_mixture"):
        return density(spec, hi)
    if spec.family == "gamma":
        if spec.shape <= 1.0:
            return density(spec, hi)
        return min(density(spec, lo), density(spec, hi))
    if spec.family == "uniform_shifted":
        if lo < spec.a or hi > spec.b:
            return 0.0
        return 1.0 / (spec.b - spec.a)
    raise DomainError("deterministic service has no density")


def sample_service(spec: ServiceSpec, rng: np.random.Generator) -> float:
    """One service-time draw from a caller-provided stream."""
    return float(sample_block(spec, rng, 1)[0])


def sample_block(spec: ServiceSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    """n i.i.d. draws from one stream (the replica-level sampler)."""
    if spec.family == "exponential":
        return rng.standard_exponential(n) / spec.rate
    if spec.family == "gamma":
        return rng.standard_gamma(spec.shape, n) / spec.rate
    if spec.family == "uniform_shifted":
        return spec.a + (spec.b - spec.a) * rng.random(n)
    if spec.family == "exponential_mixture":
        edges = np.cumsum(np.asarray(spec.weights))
        comp = np.searchsorted(edges, rng.random(n), side="right")
        comp = np.minimum(comp, len(spec.rates) - 1)
        rates = np.asarray(spec.rates)[comp]
        return rng.standard_exponential(n) / rates
    return np.full(n, spec.value)
