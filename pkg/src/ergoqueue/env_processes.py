"""Stationary ergodic inter-arrival processes and their cumulant limits.

Three families are supported:

* ``iid``: independent draws from a marginal law,
* ``markov_modulated``: a finite irreducible aperiodic chain started from
  its stationary vector, emitting one inter-arrival value per state,
* ``copula_ar1``: a latent stationary Gaussian AR(1) (unit variance)
  pushed through the normal CDF and the inverse CDF of a target
  marginal, giving exact stationary marginals with serial dependence.

Every path is a pure function of (spec, seed, length); see
:mod:`ergoqueue.rng` for the stream layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from . import _kernels, rng
from .errors import ConfigError, DomainError, NumericsError, UnsupportedExactError

INF = float("inf")

IID = "iid"
MARKOV_MODULATED = "markov_modulated"
COPULA_AR1 = "copula_ar1"


# ---------------------------------------------------------------------------
# marginal laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Marginal:
    """Marginal inter-arrival law with closed-form inverse CDF.

    families: 'constant' (value), 'exponential' (rate), 'uniform' (a, b),
    'double_exp_tail' (c2, c3).  The last one is the light-tail family
    P(Z >= z) = exp(-c2 (e^{c3 z} - 1)), i.e. Z = ln(1 + E/c2)/c3 with E
    unit exponential, which meets the doubly-exponential tail bound
    C1 exp(-c2 e^{c3 z}) with C1 = e^{c2}.
    """

    family: str
    value: float = 0.0
    rate: float = 0.0
    a: float = 0.0
    b: float = 0.0
    c2: float = 0.0
    c3: float = 0.0

    def __post_init__(self):
        f = self.family
        if f == "constant":
            if self.value < 0:
                raise ConfigError("constant marginal needs value >= 0")
        elif f == "exponential":
            if self.rate <= 0:
                raise ConfigError("exponential marginal needs rate > 0")
        elif f == "uniform":
            if not (0.0 <= self.a < self.b):
                raise ConfigError("uniform marginal needs 0 <= a < b")
        elif f == "double_exp_tail":
            if self.c2 <= 0 or self.c3 <= 0:
                raise ConfigError("double_exp_tail marginal needs c2, c3 > 0")
        else:
            raise ConfigError(f"unknown marginal family {f!r}")

    @property
    def bound(self) -> float:
        """Almost-sure upper bound M on Z (inf when unbounded)."""
        if self.family == "constant":
            return self.value
        if self.family == "uniform":
            return self.b
        return INF

    def mean(self) -> float:
        if self.family == "constant":
            return self.value
        if self.family == "exponential":
            return 1.0 / self.rate
        if self.family == "uniform":
            return 0.5 * (self.a + self.b)
        return _det_mean(self.c2, self.c3)

    def mgf(self, alpha: float) -> float:
        """E[exp(alpha Z)].  Exact; quadrature for the light-tail family."""
        if alpha == 0.0:
            return 1.0
        if self.family == "constant":
            return math.exp(alpha * self.value)
        if self.family == "exponential":
            if alpha >= self.rate:
                raise DomainError(
                    f"alpha={alpha} outside MGF domain (-inf, {self.rate})"
                )
            return self.rate / (self.rate - alpha)
        if self.family == "uniform":
            return (math.exp(alpha * self.b) - math.exp(alpha * self.a)) / (
                alpha * (self.b - self.a)
            )
        return _det_mgf(self.c2, self.c3, alpha)

    def ppf(self, u: np.ndarray) -> np.ndarray:
        """Inverse CDF, vectorized over u in [0, 1)."""
        if self.family == "constant":
            return np.full_like(np.asarray(u, dtype=float), self.value)
        if self.family == "exponential":
            return -np.log1p(-u) / self.rate
        if self.family == "uniform":
            return self.a + (self.b - self.a) * u
        return np.log1p(-np.log1p(-u) / self.c2) / self.c3

    def sample(self, g: np.random.Generator, n: int) -> np.ndarray:
        """n i.i.d. draws from one stream (faster than ppf of uniforms)."""
        if self.family == "constant":
            return np.full(n, self.value)
        if self.family == "exponential":
            return g.standard_exponential(n) / self.rate
        if self.family == "uniform":
            return self.a + (self.b - self.a) * g.random(n)
        return np.log1p(g.standard_exponential(n) / self.c2) / self.c3

    def tail_constants(self) -> tuple[float, float, float] | None:
        """(C1, C2, C3) of the doubly-exponential tail bound, if declared."""
        if self.family == "double_exp_tail":
            return (math.exp(self.c2), self.c2, self.c3)
        return None


@lru_cache(maxsize=64)
def _det_mean(c2: float, c3: float) -> float:
    val, _ = integrate.quad(
        lambda e: math.log1p(e / c2) / c3 * math.exp(-e),
        0.0,
        INF,
        epsabs=1e-13,
        epsrel=1e-12,
        limit=200,
    )
    return val


@lru_cache(maxsize=256)
def _det_mgf(c2: float, c3: float, alpha: float) -> float:
    p = alpha / c3
    val, _ = integrate.quad(
        lambda e: (1.0 + e / c2) ** p * math.exp(-e),
        0.0,
        INF,
        epsabs=1e-13,
        epsrel=1e-12,
        limit=200,
    )
    return val


# ---------------------------------------------------------------------------
# environment specs and paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnvironmentSpec:
    """Descriptor of the stationary inter-arrival process (Z_n)."""

    family: str
    iid_law: Marginal | None = None
    states: tuple[float, ...] = ()
    transition: tuple[tuple[float, ...], ...] = ()
    ar_coefficient: float = 0.0
    marginal: Marginal | None = None

    def __post_init__(self):
        if self.family == IID:
            if self.iid_law is None:
                raise ConfigError("iid environment needs iid_law")
        elif self.family == MARKOV_MODULATED:
            self._validate_chain()
        elif self.family == COPULA_AR1:
            if self.marginal is None:
                raise ConfigError("copula_ar1 environment needs a marginal")
            if not abs(self.ar_coefficient) < 1.0:
                raise ConfigError("copula_ar1 needs |ar_coefficient| < 1")
        else:
            raise ConfigError(f"unknown environment family {self.family!r}")

    def _validate_chain(self):
        P = self.transition_matrix()
        z = np.asarray(self.states, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ConfigError("transition matrix must be square")
        if z.size != P.shape[0]:
            raise ConfigError("states and transition sizes differ")
        if np.any(z < 0):
            raise ConfigError("state inter-arrival values must be >= 0")
        if np.any(P < 0):
            raise ConfigError("transition entries must be >= 0")
        if np.max(np.abs(P.sum(axis=1) - 1.0)) > 1e-12:
            raise ConfigError("transition rows must sum to 1 within 1e-12")
        eig = np.linalg.eigvals(P)
        n_unit = int(np.sum(np.abs(eig - 1.0) < 1e-9))
        gap = 1.0 - np.sort(np.abs(eig))[-2] if P.shape[0] > 1 else 1.0
        if n_unit != 1 or gap <= 1e-12:
            raise ConfigError(
                "transition must be irreducible and aperiodic "
                f"(unit eigenvalues: {n_unit}, spectral gap: {gap:.3g})"
            )
        if np.any(_solve_stationary(P) <= 0):
            raise ConfigError("stationary vector must be strictly positive")

    def transition_matrix(self) -> np.ndarray:
        return np.asarray(self.transition, dtype=float)

    def state_values(self) -> np.ndarray:
        return np.asarray(self.states, dtype=float)

    @property
    def bound(self) -> float:
        """Almost-sure upper bound M on Z (inf when unbounded)."""
        if self.family == MARKOV_MODULATED:
            return float(np.max(self.states))
        law = self.iid_law if self.family == IID else self.marginal
        return law.bound

    def stationary_mean(self) -> float:
        if self.family == MARKOV_MODULATED:
            return float(_solve_stationary(self.transition_matrix()) @ self.state_values())
        law = self.iid_law if self.family == IID else self.marginal
        return law.mean()

    def tail_constants(self) -> tuple[float, float, float] | None:
        if self.family == MARKOV_MODULATED:
            return None
        law = self.iid_law if self.family == IID else self.marginal
        return law.tail_constants()


@dataclass(frozen=True)
class EnvPath:
    """One realization of (Z_0, ..., Z_{n-1})."""

    values: np.ndarray
    seed: int
    spec: EnvironmentSpec


def _solve_stationary(P: np.ndarray) -> np.ndarray:
    """Unique solution of pi P = pi, sum(pi) = 1 (dense linear solve)."""
    k = P.shape[0]
    A = P.T - np.eye(k)
    A[-1, :] = 1.0
    b = np.zeros(k)
    b[-1] = 1.0
    try:
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise ConfigError("no unique stationary distribution") from exc


def stationary_distribution(spec: EnvironmentSpec):
    """Stationary vector (markov_modulated) or the marginal descriptor."""
    if spec.family == MARKOV_MODULATED:
        return _solve_stationary(spec.transition_matrix())
    return spec.iid_law if spec.family == IID else spec.marginal


def reversed_spec(spec: EnvironmentSpec) -> EnvironmentSpec:
    """Spec of the time-reversed stationary process.

    IID is its own reversal; the stationary Gaussian AR(1) copula is
    time-reversible by construction; the finite chain reverses through
    P*_ij = pi_j P_ji / pi_i.
    """
    if spec.family != MARKOV_MODULATED:
        return spec
    P = spec.transition_matrix()
    pi = _solve_stationary(P)
    if np.any(pi <= 0):
        raise ConfigError("zero stationary mass in some state")
    P_rev = (P.T * pi[None, :]) / pi[:, None]
    P_rev /= P_rev.sum(axis=1, keepdims=True)  # remove float drift in row sums
    return EnvironmentSpec(
        family=MARKOV_MODULATED,
        states=spec.states,
        transition=tuple(tuple(row) for row in P_rev),
    )


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def _cum_rows(P: np.ndarray) -> np.ndarray:
    cum = np.cumsum(P, axis=1)
    cum[:, -1] = INF  # guards searchsorted overflow from float row sums
    return cum


def sample_paths_block(
    spec: EnvironmentSpec,
    n: int,
    seed: int,
    lo: int,
    hi: int,
    role: int = rng.ENV,
) -> np.ndarray:
    """Paths (Z_0..Z_{n-1}) for replicas [lo, hi) as an (hi-lo, n) array."""
    B = hi - lo
    if spec.family == IID:
        out = np.empty((B, n))
        for i in range(B):
            g = rng.substream(seed, role, lo + i)
            out[i] = spec.iid_law.sample(g, n)
        return out
    if spec.family == MARKOV_MODULATED:
        P = spec.transition_matrix()
        pi = _solve_stationary(P)
        cum_pi = np.cumsum(pi)
        cum_pi[-1] = INF
        cum = _cum_rows(P)
        u = np.empty((B, n))
        for i in range(B):
            u[i] = rng.substream(seed, role, lo + i).random(n)
        init = np.searchsorted(cum_pi, u[:, 0], side="right")
        states = _kernels.markov_states(
            np.ascontiguousarray(u[:, 1:]), cum, init.astype(np.int64)
        )
        return spec.state_values()[states]
    # copula_ar1: latent stationary AR(1), unit stationary variance
    phi = spec.ar_coefficient
    c = math.sqrt(1.0 - phi * phi)
    eps = np.empty((B, n - 1) if n > 1 else (B, 0))
    x0 = np.empty(B)
    for i in range(B):
        g = rng.substream(seed, role, lo + i)
        x0[i] = g.standard_normal()
        if n > 1:
            eps[i] = c * g.standard_normal(n - 1)
    x = _kernels.ar1_scan(eps, x0, phi) if n > 1 else x0[:, None]
    u = special.ndtr(x)
    return spec.marginal.ppf(np.clip(u, 0.0, 1.0 - 1e-16))


def sample_path(spec: EnvironmentSpec, n: int, seed: int) -> EnvPath:
    """One stationary path of length n (replica 0 of the env stream)."""
    if n < 1:
        raise ConfigError("path length must be >= 1")
    values = sample_paths_block(spec, n, seed, 0, 1)[0]
    return EnvPath(values=values, seed=seed, spec=spec)


def sample_two_sided_block(
    spec: EnvironmentSpec,
    n_back: int,
    n_fwd: int,
    seed: int,
    lo: int,
    hi: int,
    role_back: int,
    role_fwd: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Two-sided stationary extension per replica.

    Returns (z_back, z_fwd) where z_back[:, k] = Z_{-k} for k = 0..n_back-1
    (so column 0 is Z_0) and z_fwd[:, j] = Z_{j+1} for j = 0..n_fwd-1.
    The backward run uses the reversed kernel; forward and backward are
    conditionally independent given Z_0.
    """
    B = hi - lo
    if spec.family == IID:
        z_back = sample_paths_block(spec, n_back, seed, lo, hi, role=role_back)
        z_fwd = sample_paths_block(spec, n_fwd, seed, lo, hi, role=role_fwd)
        return z_back, z_fwd
    if spec.family == MARKOV_MODULATED:
        P = spec.transition_matrix()
        pi = _solve_stationary(P)
        cum_pi = np.cumsum(pi)
        cum_pi[-1] = INF
        cum_fwd = _cum_rows(P)
        cum_rev = _cum_rows(reversed_spec(spec).transition_matrix())
        ub = np.empty((B, n_back))
        uf = np.empty((B, n_fwd))
        for i in range(B):
            ub[i] = rng.substream(seed, role_back, lo + i).random(n_back)
            uf[i] = rng.substream(seed, role_fwd, lo + i).random(n_fwd)
        init = np.searchsorted(cum_pi, ub[:, 0], side="right").astype(np.int64)
        st_back = _kernels.markov_states(
            np.ascontiguousarray(ub[:, 1:]), cum_rev, init
        )
        st_fwd = _kernels.markov_states(np.ascontiguousarray(uf), cum_fwd, init)
        zvals = spec.state_values()
        return zvals[st_back], zvals[st_fwd[:, 1:]]
    # copula_ar1: reversible latent chain, run AR(1) both ways from x0
    phi = spec.ar_coefficient
    c = math.sqrt(1.0 - phi * phi)
    x0 = np.empty(B)
    eb = np.empty((B, n_back - 1) if n_back > 1 else (B, 0))
    ef = np.empty((B, n_fwd))
    for i in range(B):
        gb = rng.substream(seed, role_back, lo + i)
        x0[i] = gb.standard_normal()
        if n_back > 1:
            eb[i] = c * gb.standard_normal(n_back - 1)
        ef[i] = c * rng.substream(seed, role_fwd, lo + i).standard_normal(n_fwd)
    xb = _kernels.ar1_scan(eb, x0, phi) if n_back > 1 else x0[:, None]
    xf = _kernels.ar1_scan(ef, x0, phi)

    def to_z(x):
        return spec.marginal.ppf(np.clip(special.ndtr(x), 0.0, 1.0 - 1e-16))

    return to_z(xb), to_z(xf[:, 1:])


# ---------------------------------------------------------------------------
# scaled cumulant generating function
# ---------------------------------------------------------------------------


def perron_root(mat: np.ndarray, tol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Largest positive eigenvalue of a primitive nonnegative matrix.

    Power iteration with L1 normalization; the iterates of a primitive
    matrix converge geometrically at the spectral-gap ratio.
    """
    v = np.full(mat.shape[0], 1.0 / mat.shape[0])
    lam = 0.0
    for _ in range(max_iter):
        w = mat @ v
        lam_new = float(w.sum())
        if lam_new <= 0 or not math.isfinite(lam_new):
            raise NumericsError("power iteration left the positive cone")
        v = w / lam_new
        if abs(lam_new - lam) <= tol * lam_new:
            return lam_new
        lam = lam_new
    raise NumericsError(f"power iteration did not converge in {max_iter} steps")


def tilted_matrix(spec: EnvironmentSpec, alpha: float) -> np.ndarray:
    """M(alpha)_ij = P_ij exp(alpha z_j): reward on the destination state."""
    if spec.family != MARKOV_MODULATED:
        raise DomainError("tilted matrix only defined for markov_modulated")
    return spec.transition_matrix() * np.exp(alpha * spec.state_values())[None, :]


def exact_cgf_limit(spec: EnvironmentSpec, alpha: float) -> float:
    """Gamma(alpha) = lim (1/n) ln E[exp(alpha(Z_1+...+Z_n))], exactly.

    IID: ln E[exp(alpha Z)].  Markov modulated: log Perron root of the
    tilted matrix.  The copula family has no exact form; use
    :func:`mc_cgf_estimate`.
    """
    if alpha == 0.0:
        return 0.0
    if spec.family == IID:
        return math.log(spec.iid_law.mgf(alpha))
    if spec.family == MARKOV_MODULATED:
        return math.log(perron_root(tilted_matrix(spec, alpha)))
    raise UnsupportedExactError(
        "no exact cumulant limit for copula_ar1; use mc_cgf_estimate"
    )


def mc_cgf_estimate(
    spec: EnvironmentSpec,
    alpha: float,
    n: int,
    replicas: int,
    seed: int,
) -> tuple[float, float]:
    """Finite-n Monte Carlo proxy for Gamma(alpha) with a delta-method stderr.

    Computes (1/n) ln(mean over replicas of exp(alpha * sum Z)) with the
    largest exponent subtracted before exponentiating.
    """
    if n < 1 or replicas < 2:
        raise ConfigError("need n >= 1 and replicas >= 2")
    sums = np.empty(replicas)
    for lo, hi in rng.replica_blocks(replicas, n):
        z = sample_paths_block(spec, n, seed, lo, hi, role=rng.CGF)
        sums[lo:hi] = z.sum(axis=1)
    L = alpha * sums
    if not np.all(np.isfinite(L)):
        bad = L[~np.isfinite(L)][0]
        raise NumericsError(f"non-finite exponent {bad} in CGF estimator")
    M = float(L.max())
    w = np.exp(L - M)
    m = float(w.mean())
    estimate = (M + math.log(m)) / n
    stderr = float(w.std(ddof=1)) / (m * math.sqrt(replicas)) / n
    return estimate, stderr
