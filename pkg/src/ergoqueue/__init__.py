"""Simulation and numerical certification of G/GI/1 queues with
dependent stationary inter-arrival times."""

from ._kernels import backend
from .empirical import EmpiricalLaw, ks_distance, tail_estimate, tv_binned
from .env_processes import (
    EnvironmentSpec,
    EnvPath,
    Marginal,
    exact_cgf_limit,
    mc_cgf_estimate,
    reversed_spec,
    sample_path,
    stationary_distribution,
)
from .errors import (
    CertifyError,
    ConfigError,
    DomainError,
    ErgoqueueError,
    FitError,
    NumericsError,
    StabilityError,
    UnsupportedExactError,
)
from .lindley import (
    LoynesResult,
    QueueModel,
    Seeds,
    Trajectory,
    borovkov_rhs,
    functional_average,
    lindley_step,
    loynes_backward,
    simulate,
)
from .service_laws import ServiceSpec, density, density_infimum, mgf, sample_service

__version__ = "0.1.0"
