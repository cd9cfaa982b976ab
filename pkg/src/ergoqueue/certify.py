"""Drift and minorization certificates for the waiting-time chain.

The chain W is viewed as a Markov chain driven by services in the random
environment Z, with kernel Q(z, w, A) = P((w + S - z)_+ in A).  The
certificate realizes the assumption chain with the Lyapunov function
V(w) = exp(bbar w) - 1 and the envelope gamma(z) = K(z) =
exp(-bbar z) E[exp(bbar S)]:

* contraction rate lambda(beta) = Gamma(-beta) + ln E[exp(beta S)], with
  bbar the grid minimizer of lambda and gbar = exp-scale long-run factor;
* small set [0, h] with h = ln(2/eps + 1)/bbar, eps = (1/sqrt(gbar)-1)/2,
  R = 2/eps, minorization measure Leb(. intersect [h, h+1]);
* alpha(z) constant (bounded environments, via the density infimum) or
  1 - C4 exp(-C5 (z + h + 1)) (light-tailed environments, via the
  exponential density floor).

`verify_drift` and `verify_minorization` check the two inequalities on
grids with quadrature and exact CDF arithmetic; `alpha_moment_curve`
measures E^{1/n^theta}[alpha(Z_0)^n] against the analytic proof bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import env_processes, rng, service_laws
from .env_processes import EnvironmentSpec
from .errors import CertifyError, ConfigError, DomainError, NumericsError
from .service_laws import ServiceSpec

CONSTANT_BOUNDED = "ConstantBounded"
EXPONENTIAL_UNBOUNDED = "ExponentialUnbounded"

_THETA_GRID = tuple(round(0.1 * k, 1) for k in range(1, 10))
_DEFAULT_BETA_SUP = 10.0  # units of 1/E[S]; right edge when the MGF never blows up


@dataclass(frozen=True)
class DriftCertificate:
    """Machine-checkable bundle realizing the assumption chain."""

    beta_bar: float
    mS: float
    gamma_bar: float
    epsilon: float
    R: float
    h: float
    alpha_mode: str
    theta: float
    kappa_exp: float
    lambda_at_beta_bar: float
    alpha_const: float = math.nan  # bounded mode only
    C4: float = math.nan  # unbounded mode only
    C5: float = math.nan
    env_tail_certified: bool = False

    def __post_init__(self):
        checks = [
            self.beta_bar > 0,
            0.0 < self.gamma_bar < 1.0,
            self.lambda_at_beta_bar < 0,
            0.0 < self.epsilon < 1.0 / math.sqrt(self.gamma_bar) - 1.0,
            0.0 < self.theta < 1.0,
        ]
        if not all(checks):
            raise CertifyError(f"inconsistent certificate: {self}")
        for lhs, rhs, what in [
            (self.epsilon, (1.0 / math.sqrt(self.gamma_bar) - 1.0) / 2.0, "epsilon"),
            (self.R, 2.0 / self.epsilon, "R"),
            (self.h, math.log(2.0 / self.epsilon + 1.0) / self.beta_bar, "h"),
            (math.expm1(self.beta_bar * self.h), self.R, "V(h) = R"),
            (self.kappa_exp, 1.0 / (3.0 * (1.0 - self.theta)), "kappa"),
        ]:
            if abs(lhs - rhs) > 1e-9 * max(1.0, abs(rhs)):
                raise CertifyError(f"certificate identity {what} violated: {lhs} != {rhs}")
        if self.alpha_mode == CONSTANT_BOUNDED:
            if not 0.0 < self.alpha_const < 1.0:
                raise CertifyError("bounded mode needs alpha_const in (0, 1)")
        elif self.alpha_mode == EXPONENTIAL_UNBOUNDED:
            if not (self.C4 > 0 and self.C5 > 0):
                raise CertifyError("unbounded mode needs C4, C5 > 0")
        else:
            raise CertifyError(f"unknown alpha mode {self.alpha_mode!r}")

    def alpha(self, z) -> np.ndarray | float:
        """alpha(z): constant in bounded mode, 1 - C4 exp(-C5(z+h+1)) otherwise."""
        if self.alpha_mode == CONSTANT_BOUNDED:
            if np.isscalar(z):
                return self.alpha_const
            return np.full_like(np.asarray(z, dtype=float), self.alpha_const)
        return 1.0 - self.C4 * np.exp(-self.C5 * (np.asarray(z, dtype=float) + self.h + 1.0))

    def to_dict(self) -> dict:
        d = {
            "beta_bar": self.beta_bar,
            "mS": self.mS,
            "gamma_bar": self.gamma_bar,
            "epsilon": self.epsilon,
            "R": self.R,
            "h": self.h,
            "alpha_mode": self.alpha_mode,
            "theta": self.theta,
            "kappa_exp": self.kappa_exp,
            "lambda_at_beta_bar": self.lambda_at_beta_bar,
            "env_tail_certified": self.env_tail_certified,
        }
        if self.alpha_mode == CONSTANT_BOUNDED:
            d["alpha_const"] = self.alpha_const
        else:
            d["C4"], d["C5"] = self.C4, self.C5
        return d


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of one grid check: worst margin plus its error allowance."""

    name: str
    grid: str
    worst_margin: float
    error_allowance: float
    passed: bool
    worst_node: tuple = ()
    notes: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "grid": self.grid,
            "worst_margin": self.worst_margin,
            "error_allowance": self.error_allowance,
            "passed": self.passed,
            "worst_node": list(self.worst_node),
            "notes": self.notes,
        }


def _env_mgf(env: EnvironmentSpec, alpha: float) -> float:
    """Exact E[exp(alpha Z_0)] under the stationary marginal."""
    if env.family == env_processes.MARKOV_MODULATED:
        pi = env_processes.stationary_distribution(env)
        return float(pi @ np.exp(alpha * env.state_values()))
    law = env.iid_law if env.family == env_processes.IID else env.marginal
    return law.mgf(alpha)


def lambda_fn(env: EnvironmentSpec, svc: ServiceSpec, beta: float) -> float:
    """lambda(beta) = Gamma(-beta) + ln E[exp(beta S_0)] (exact route)."""
    if beta <= 0:
        if beta == 0:
            return 0.0
        raise DomainError("lambda is evaluated for beta > 0")
    return env_processes.exact_cgf_limit(env, -beta) + math.log(
        service_laws.mgf(svc, beta)
    )


def lambda_slope_at_zero(env: EnvironmentSpec, svc: ServiceSpec) -> float:
    """lambda'(0) = E[S_0] - E[Z_0]; negative exactly when subcritical."""
    return svc.mean() - env.stationary_mean()


def _beta_grid_sup(svc: ServiceSpec) -> float:
    b0 = svc.mgf_sup
    if math.isinf(b0):
        b0 = _DEFAULT_BETA_SUP / max(svc.mean(), 1e-12)
    return 0.9 * b0


def find_beta_bar(
    env: EnvironmentSpec, svc: ServiceSpec, grid_step: float = 0.01
) -> tuple[float, float]:
    """Grid minimizer of lambda over (0, 0.9 beta0], requiring lambda < -1e-6.

    Deterministic: ties break to the smallest beta.  Raises CertifyError
    distinguishing a non-subcritical model (slope at 0 is >= 0) from a
    grid too coarse to see the negative dip.
    """
    if grid_step <= 0:
        raise ConfigError("grid_step must be positive")
    sup = _beta_grid_sup(svc)
    betas = np.arange(grid_step, sup + 1e-12, grid_step)
    if betas.size == 0:
        raise ConfigError("empty beta grid; decrease grid_step")
    vals = np.array([lambda_fn(env, svc, float(b)) for b in betas])
    k = int(np.argmin(vals))
    if vals[k] >= -1e-6:
        slope = lambda_slope_at_zero(env, svc)
        if slope >= 0:
            kind = "critical" if slope == 0 else "supercritical"
            raise CertifyError(f"cannot certify: {kind} model (lambda'(0) = {slope:.6g})")
        raise CertifyError(
            "cannot certify: lambda'(0) < 0 but no grid point has lambda < -1e-6; "
            "refine the grid"
        )
    return float(betas[k]), float(vals[k])


def gamma_K(z: float, cert: DriftCertificate) -> float:
    """gamma(z) = K(z) = exp(-beta_bar z) E[exp(beta_bar S_0)]."""
    if z < 0:
        raise DomainError("z must be >= 0")
    return math.exp(-cert.beta_bar * z) * cert.mS


def contractivity_gamma_bar(
    env: EnvironmentSpec,
    cert: DriftCertificate,
    method: str = "exact",
    n: int = 400,
    replicas: int = 20_000,
    seed: int = 0,
):
    """Long-run contraction factor gbar of K(Z_0) prod gamma(Z_k).

    exact: mS * E[exp(-bbar Z)] (iid) or mS times the Perron root of the
    (-bbar)-tilted matrix (markov modulated); the bounded prefactor K(Z_0)
    does not move the n-th-root limit.  mc: finite-n log estimate with a
    delta-method stderr, returned as (value, stderr).
    """
    b = cert.beta_bar
    if method == "exact":
        if env.family == env_processes.COPULA_AR1:
            raise DomainError(
                "no exact contraction factor for copula_ar1; use method='mc'"
            )
        if env.family == env_processes.IID:
            return cert.mS * env.iid_law.mgf(-b)
        return cert.mS * env_processes.perron_root(
            env_processes.tilted_matrix(env, -b)
        )
    if method != "mc":
        raise ConfigError("method must be 'exact' or 'mc'")
    est, se = env_processes.mc_cgf_estimate(env, -b, n, replicas, seed)
    val = cert.mS * math.exp(est)
    return val, val * se  # delta method on mS * exp(estimate)


def _alpha_moment_log_means(
    cert_c4: float,
    cert_c5: float,
    h: float,
    env: EnvironmentSpec,
    n_list: np.ndarray,
    mc_samples: int,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """log E[alpha(Z)^n] over a shared stationary sample, with log-stderr."""
    g = rng.substream(seed, rng.ALPHA_MOMENT, 0)
    if env.family == env_processes.MARKOV_MODULATED:
        pi = env_processes.stationary_distribution(env)
        z = env.state_values()[g.choice(pi.size, size=mc_samples, p=pi)]
    else:
        law = env.iid_law if env.family == env_processes.IID else env.marginal
        z = law.ppf(g.random(mc_samples))
    log_alpha = np.log1p(-cert_c4 * np.exp(-cert_c5 * (z + h + 1.0)))
    log_means = np.empty(n_list.size)
    log_errs = np.empty(n_list.size)
    for i, n in enumerate(n_list):
        L = n * log_alpha
        M = L.max()
        w = np.exp(L - M)
        m = w.mean()
        log_means[i] = M + math.log(m)
        log_errs[i] = w.std(ddof=1) / (m * math.sqrt(mc_samples))
    return log_means, log_errs


def alpha_moment_curve(
    cert: DriftCertificate,
    env: EnvironmentSpec,
    theta: float,
    n_list,
    mc_samples: int = 100_000,
    seed: int = 0,
    h_const: float | None = None,
) -> list[dict]:
    """Curve n -> E^{1/n^theta}[alpha(Z_0)^n], with the analytic proof bound.

    Bounded mode returns the closed form alpha^{n^{1-theta}}.  Unbounded
    mode estimates the moment by a log-sum-exp stabilized Monte Carlo over
    the stationary marginal and, when the environment declares tail
    constants (C1, C2, C3), evaluates the proof's upper bound
    H ln(n) exp(-C6 n^{1-C5 H}) + C1 exp(-C2 n^{C3 H}) with
    C6 = C4 exp(-C5 (h+1)), transformed by the same 1/n^theta power.
    H defaults to 1/(2 C5) so that C5 H < 1.
    """
    if not 0.0 < theta < 1.0:
        raise DomainError("theta must be in (0, 1)")
    ns = np.unique(np.asarray(n_list, dtype=np.int64))
    if np.any(ns < 1):
        raise DomainError("n_list entries must be >= 1")
    rows: list[dict] = []
    if cert.alpha_mode == CONSTANT_BOUNDED:
        for n in ns:
            rows.append(
                {
                    "n": int(n),
                    "value": cert.alpha_const ** (float(n) ** (1.0 - theta)),
                    "stderr_log": 0.0,
                    "bound": math.nan,
                    "flagged": False,
                }
            )
        return rows

    log_means, log_errs = _alpha_moment_log_means(
        cert.C4, cert.C5, cert.h, env, ns, mc_samples, seed
    )
    tails = env.tail_constants()
    H = h_const if h_const is not None else 1.0 / (2.0 * cert.C5)
    if H * cert.C5 >= 1.0:
        raise DomainError("need C5 * H < 1 for the proof bound")
    C6 = cert.C4 * math.exp(-cert.C5 * (cert.h + 1.0))
    for i, n in enumerate(ns):
        nf = float(n)
        scale = nf**theta
        value = math.exp(log_means[i] / scale)
        bound = math.nan
        if tails is not None:
            C1, C2, C3 = tails
            t1 = -C6 * nf ** (1.0 - cert.C5 * H) + (
                math.log(H * math.log(nf)) if H * math.log(nf) > 0 else -math.inf
            )
            t2 = math.log(C1) - C2 * nf ** (C3 * H)
            log_bound = max(t1, t2) + math.log1p(math.exp(-abs(t1 - t2)))
            bound = math.exp(log_bound / scale)
        rows.append(
            {
                "n": int(n),
                "value": value,
                "stderr_log": float(log_errs[i]),
                "bound": bound,
                "flagged": bool(log_errs[i] > 0.5),
            }
        )
    return rows


def _select_theta(
    c4: float, c5: float, h: float, env: EnvironmentSpec, seed: int
) -> float:
    """Largest theta in {0.1..0.9} with a decreasing measured moment curve."""
    ns = np.unique(np.round(np.logspace(0, 5, 16)).astype(np.int64))
    log_means, _ = _alpha_moment_log_means(c4, c5, h, env, ns, 50_000, seed)
    best = _THETA_GRID[0]
    for theta in _THETA_GRID:
        curve = log_means / ns.astype(float) ** theta
        if np.all(np.diff(curve) < 0):
            best = theta
    return best


def build_certificate(
    env: EnvironmentSpec,
    svc: ServiceSpec,
    theta: float | None = None,
    grid_step: float = 0.01,
    seed: int = 0,
) -> DriftCertificate:
    """Assemble and validate the full certificate for a concrete model.

    Bounded environments (finite M) get the constant-alpha small set from
    the density infimum over [0, M+h+1]; unbounded ones need the service
    floor (C4, C5) and use alpha(z) = 1 - C4 exp(-C5 (z+h+1)).  theta
    defaults to 1/2 in bounded mode; in unbounded mode the largest
    decreasing-curve value from {0.1..0.9} is measured and reported.
    """
    if env.family == env_processes.COPULA_AR1:
        raise CertifyError(
            "exact contraction factor unavailable for copula_ar1 environments; "
            "certificates need an exact gamma_bar"
        )
    beta_bar, lam = find_beta_bar(env, svc, grid_step)
    mS = service_laws.mgf(svc, beta_bar)
    gamma_bar = (
        mS * env.iid_law.mgf(-beta_bar)
        if env.family == env_processes.IID
        else mS * env_processes.perron_root(env_processes.tilted_matrix(env, -beta_bar))
    )
    if gamma_bar >= 1.0:
        raise CertifyError(f"gamma_bar = {gamma_bar:.6g} >= 1; no contraction")
    eps = (1.0 / math.sqrt(gamma_bar) - 1.0) / 2.0
    R = 2.0 / eps
    h = math.log(2.0 / eps + 1.0) / beta_bar

    bounded = math.isfinite(env.bound)
    if bounded:
        floor = service_laws.density_infimum(svc, 0.0, env.bound + h + 1.0)
        alpha_const = 1.0 - floor * 1.0  # unit Lebesgue mass of [h, h+1]
        if not 0.0 < alpha_const < 1.0:
            raise CertifyError(
                "minorization unobtainable: density infimum "
                f"{floor:.6g} over [0, {env.bound + h + 1.0:.6g}]"
            )
        return DriftCertificate(
            beta_bar=beta_bar,
            mS=mS,
            gamma_bar=gamma_bar,
            epsilon=eps,
            R=R,
            h=h,
            alpha_mode=CONSTANT_BOUNDED,
            alpha_const=alpha_const,
            theta=0.5 if theta is None else theta,
            kappa_exp=1.0 / (3.0 * (1.0 - (0.5 if theta is None else theta))),
            lambda_at_beta_bar=lam,
        )

    if svc.c4 <= 0 or svc.c5 <= 0:
        raise CertifyError(
            "minorization unobtainable: unbounded environment needs a service "
            "density with an exponential floor (C4, C5)"
        )
    if 1.0 - svc.c4 * math.exp(-svc.c5 * (h + 1.0)) <= 0.0:
        raise CertifyError("alpha(0) <= 0: floor constants too large for this h")
    if theta is None:
        theta = _select_theta(svc.c4, svc.c5, h, env, seed)
    return DriftCertificate(
        beta_bar=beta_bar,
        mS=mS,
        gamma_bar=gamma_bar,
        epsilon=eps,
        R=R,
        h=h,
        alpha_mode=EXPONENTIAL_UNBOUNDED,
        C4=svc.c4,
        C5=svc.c5,
        theta=theta,
        kappa_exp=1.0 / (3.0 * (1.0 - theta)),
        lambda_at_beta_bar=lam,
        env_tail_certified=env.tail_constants() is not None,
    )


# ---------------------------------------------------------------------------
# numerical verification
# ---------------------------------------------------------------------------


def _qv_quadrature(
    svc: ServiceSpec, beta: float, w: float, z: float, precision: float
) -> tuple[float, float]:
    """[Q(z)V](w) = E[exp(beta (w+S-z)_+)] - 1 by adaptive quadrature.

    The expectation splits at the kink s = z - w into a flat piece
    (integral of the density alone) and an exponential piece; the scale
    factor exp(beta (w - z)) is pulled out of the latter so both pieces
    are integrated at controlled absolute error regardless of how large
    exp(beta w) gets.  The truncation point grows until the exact MGF
    tail contributes less than precision/10.
    """
    kink = z - w
    scale = math.exp(beta * (w - z))
    s_max = max(kink, 0.0) + 1.0
    if svc.family == "uniform_shifted":
        s_max = svc.b
    else:
        while scale * service_laws.mgf_tail(svc, beta, s_max) > precision / 10.0:
            s_max *= 2.0
            if s_max > 1e9:
                raise NumericsError("quadrature truncation point diverged")

    def flat(s: float) -> float:
        return service_laws.density(svc, s)

    def tilted(s: float) -> float:
        return service_laws.density(svc, s) * math.exp(beta * s)

    val = 0.0
    err = 0.0
    lo = 0.0
    if kink > 0.0:
        hi = min(kink, s_max)
        v, e = integrate.quad(
            flat, 0.0, hi, epsabs=precision / 4.0, epsrel=1e-12, limit=200
        )
        val += v
        err += e
        lo = hi
    if lo < s_max:
        v, e = integrate.quad(
            tilted, lo, s_max, epsabs=precision / 4.0, epsrel=1e-12, limit=200
        )
        val += scale * v
        err += scale * e
    # absolute error below precision where the value is O(1); at larger
    # magnitudes only precision relative to the scale factor is attainable
    budget = precision * max(1.0, scale)
    if not math.isfinite(val) or err > budget:
        raise NumericsError(f"quadrature failed: value {val}, error {err}")
    return val - 1.0, err


def verify_drift(
    cert: DriftCertificate,
    env: EnvironmentSpec,
    svc: ServiceSpec,
    z_grid,
    w_grid,
    precision: float = 1e-8,
) -> VerificationReport:
    """Check [Q(z)V](w) <= gamma(z) V(w) + K(z) on the grid.

    The left side is evaluated by quadrature against the service density
    with absolute error <= precision; the report passes when the worst
    margin clears -precision.
    """
    z_grid = np.asarray(z_grid, dtype=float)
    w_grid = np.asarray(w_grid, dtype=float)
    if z_grid.size == 0 or w_grid.size == 0 or precision <= 0:
        raise ConfigError("need nonempty grids and precision > 0")
    b = cert.beta_bar
    worst = math.inf
    worst_node = ()
    allowance = precision
    for z in z_grid:
        gz = gamma_K(float(z), cert)
        for w in w_grid:
            lhs, err = _qv_quadrature(svc, b, float(w), float(z), precision)
            allowance = max(allowance, err)
            rhs = gz * math.expm1(b * float(w)) + gz
            margin = rhs - lhs
            if margin < worst:
                worst = margin
                worst_node = (float(z), float(w))
    return VerificationReport(
        name="drift",
        grid=f"{z_grid.size} z-nodes x {w_grid.size} w-nodes",
        worst_margin=float(worst),
        error_allowance=float(allowance),
        passed=bool(worst + allowance >= 0.0),
        worst_node=worst_node,
    )


def verify_minorization(
    cert: DriftCertificate,
    env: EnvironmentSpec,
    svc: ServiceSpec,
    z_samples,
    n_intervals: int = 32,
    w_points: int = 50,
) -> VerificationReport:
    """Check Q(z, w, A) >= (1 - alpha(z)) Leb(A) on subintervals of [h, h+1].

    Q is computed exactly from the service CDF (no Monte Carlo noise): for
    A = [a, b] with a >= h > 0, Q(z, w, A) = F_S(b+z-w) - F_S(a+z-w).
    w runs over an endpoint-inclusive grid of [0, h].
    """
    if not 1 <= n_intervals <= 64:
        raise ConfigError("n_intervals must be in [1, 64]")
    z_samples = np.asarray(z_samples, dtype=float)
    h = cert.h
    edges = h + np.linspace(0.0, 1.0, n_intervals + 1)
    ws = np.linspace(0.0, h, w_points)
    worst = math.inf
    worst_node = ()
    for z in z_samples:
        need = (1.0 - float(cert.alpha(float(z)))) / n_intervals
        for w in ws:
            shift = float(z) - float(w)
            for j in range(n_intervals):
                q = service_laws.interval_prob(
                    svc, edges[j] + shift, edges[j + 1] + shift
                )
                margin = q - need
                if margin < worst:
                    worst = margin
                    worst_node = (float(z), float(w), float(edges[j]))
    return VerificationReport(
        name="minorization",
        grid=f"{z_samples.size} z x {w_points} w x {n_intervals} intervals",
        worst_margin=float(worst),
        error_allowance=0.0,
        passed=bool(worst >= 0.0),
        worst_node=worst_node,
    )
