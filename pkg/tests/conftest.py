"""Shared demo models.

mm1: Exp(1) arrivals / Exp(2) service, the closed-form oracle model
  (stationary tail 0.5 exp(-w), mean wait 0.5).
bounded_mm: two-state Markov-modulated arrivals with values (1, 3),
  sticky fast state, Exp(2) service; bounded environment (M = 3).
light_tail: doubly-exponential-tail arrivals with Exp(1) service, the
  unbounded-environment certificate demo.
"""

import pytest

from ergoqueue import env_processes as ep
from ergoqueue import lindley as lc
from ergoqueue import service_laws as sl

BOUNDED_P = ((0.98, 0.02), (0.30, 0.70))
LIGHT_TAIL_C2 = 1e-4
LIGHT_TAIL_C3 = 2.0


@pytest.fixture(scope="session")
def mm1():
    env = ep.EnvironmentSpec(
        family="iid", iid_law=ep.Marginal(family="exponential", rate=1.0)
    )
    svc = sl.ServiceSpec(family="exponential", rate=2.0, theorem_mode="light_tail_env")
    return lc.QueueModel(env=env, service=svc)


@pytest.fixture(scope="session")
def bounded_mm():
    env = ep.EnvironmentSpec(
        family="markov_modulated", states=(1.0, 3.0), transition=BOUNDED_P
    )
    svc = sl.ServiceSpec(family="exponential", rate=2.0, theorem_mode="bounded_env")
    return lc.QueueModel(env=env, service=svc)


@pytest.fixture(scope="session")
def light_tail():
    env = ep.EnvironmentSpec(
        family="iid",
        iid_law=ep.Marginal(
            family="double_exp_tail", c2=LIGHT_TAIL_C2, c3=LIGHT_TAIL_C3
        ),
    )
    svc = sl.ServiceSpec(family="exponential", rate=1.0, theorem_mode="light_tail_env")
    return lc.QueueModel(env=env, service=svc)


@pytest.fixture(scope="session")
def copula():
    env = ep.EnvironmentSpec(
        family="copula_ar1",
        ar_coefficient=0.6,
        marginal=ep.Marginal(family="uniform", a=0.5, b=1.5),
    )
    svc = sl.ServiceSpec(family="exponential", rate=2.0)
    return lc.QueueModel(env=env, service=svc)


@pytest.fixture(scope="session")
def deterministic_stable():
    """S = 1, Z = 2: every wait is zero."""
    env = ep.EnvironmentSpec(family="iid", iid_law=ep.Marginal(family="constant", value=2.0))
    svc = sl.ServiceSpec(family="deterministic", value=1.0)
    return lc.QueueModel(env=env, service=svc)


@pytest.fixture(scope="session")
def deterministic_growing():
    """S = 2, Z = 1: supercritical, waits grow by one per step."""
    env = ep.EnvironmentSpec(family="iid", iid_law=ep.Marginal(family="constant", value=1.0))
    svc = sl.ServiceSpec(family="deterministic", value=2.0)
    return lc.QueueModel(env=env, service=svc)
