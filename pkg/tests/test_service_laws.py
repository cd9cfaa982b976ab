"""Service-law oracles: closed-form MGFs, densities, infima, floors."""

import math

import numpy as np
import pytest
from scipy import integrate

from ergoqueue import rng
from ergoqueue import service_laws as sl
from ergoqueue.errors import ConfigError, DomainError

EXP2 = sl.ServiceSpec(family="exponential", rate=2.0)
UNI = sl.ServiceSpec(family="uniform_shifted", a=0.0, b=1.0)
GAMMA2 = sl.ServiceSpec(family="gamma", shape=2.0, rate=1.0)
MIX = sl.ServiceSpec(family="exponential_mixture", weights=(0.5, 0.5), rates=(1.0, 4.0))


def test_mgf_at_zero_is_one():
    for spec in (EXP2, UNI, GAMMA2, MIX, sl.ServiceSpec(family="deterministic", value=3.0)):
        assert sl.mgf(spec, 0.0) == 1.0


def test_mgf_exponential_closed_form():
    assert sl.mgf(EXP2, 0.5) == pytest.approx(4.0 / 3.0, rel=1e-15)


def test_mgf_domain_boundary():
    with pytest.raises(DomainError):
        sl.mgf(EXP2, 2.0)
    with pytest.raises(DomainError):
        sl.mgf(MIX, 1.0)  # sup is the smallest rate


def test_mgf_convexity_at_zero():
    # E[e^{bS}] >= 1 + b E[S] on a grid
    for spec in (EXP2, UNI, GAMMA2, MIX):
        m = spec.mean()
        for b in np.linspace(0.01, 0.9 * min(spec.mgf_sup, 5.0), 25):
            assert sl.mgf(spec, float(b)) >= 1.0 + b * m - 1e-9


def test_density_values():
    assert sl.density(EXP2, 0.0) == 2.0
    assert sl.density(UNI, 0.5) == 1.0
    assert sl.density(GAMMA2, 0.0) == 0.0


def test_density_integrates_to_one():
    for spec, hi in ((EXP2, 40.0), (UNI, 1.0), (GAMMA2, 60.0), (MIX, 60.0)):
        val, _ = integrate.quad(lambda s: sl.density(spec, s), 0.0, hi, limit=200)
        assert val == pytest.approx(1.0, abs=1e-6)


def test_density_infimum_oracles():
    assert sl.density_infimum(EXP2, 0.0, 3.0) == pytest.approx(2.0 * math.exp(-6.0), rel=1e-12)
    assert sl.density_infimum(UNI, 0.0, 0.5) == 1.0
    assert sl.density_infimum(UNI, 0.0, 2.0) == 0.0  # interval leaves the support


def test_density_infimum_bounds_density():
    g = np.random.default_rng(7)
    for spec in (EXP2, GAMMA2, MIX):
        lo, hi = 0.25, 4.0
        inf = sl.density_infimum(spec, lo, hi)
        for s in lo + (hi - lo) * g.random(100):
            assert inf <= sl.density(spec, float(s)) + 1e-12


def test_density_infimum_unbounded_interval_rejected():
    with pytest.raises(DomainError):
        sl.density_infimum(EXP2, 0.0, math.inf)


def test_exponential_floor_on_grid():
    # f(s) >= C4 exp(-C5 s) over [0, 50] for the light-tail families
    for spec in (EXP2, MIX):
        s = np.linspace(0.0, 50.0, 1000)
        floor = spec.c4 * np.exp(-spec.c5 * s)
        dens = np.array([sl.density(spec, float(v)) for v in s])
        assert np.all(dens >= floor - 1e-15)


def test_gamma_shape_above_one_rejected_for_light_tail():
    with pytest.raises(ConfigError):
        sl.ServiceSpec(family="gamma", shape=2.0, rate=1.0, theorem_mode="light_tail_env")


def test_interval_prob_matches_cdf_and_tail():
    for spec in (EXP2, GAMMA2, MIX, UNI):
        for lo, hi in ((0.0, 0.7), (0.5, 1.0), (2.0, 2.5)):
            direct = sl.cdf(spec, hi) - sl.cdf(spec, lo)
            assert sl.interval_prob(spec, lo, hi) == pytest.approx(direct, abs=1e-12)
    # deep tail keeps relative precision
    p = sl.interval_prob(EXP2, 30.0, 30.5)
    expect = math.exp(-60.0) * -math.expm1(-1.0)
    assert p == pytest.approx(expect, rel=1e-12)


def test_mgf_tail_closed_forms():
    for spec in (EXP2, GAMMA2, MIX):
        b = 0.4
        val, _ = integrate.quad(
            lambda s: math.exp(b * s) * sl.density(spec, s), 3.0, 80.0, limit=200
        )
        assert sl.mgf_tail(spec, b, 3.0) == pytest.approx(val, rel=1e-9)
    assert sl.mgf_tail(UNI, 0.3, 1.0) == 0.0


def test_sampling_mean_and_support():
    g = rng.substream(3, rng.SERVICE, 0)
    x = sl.sample_block(EXP2, g, 1_000_000)
    assert abs(x.mean() - 0.5) < 3.0 * 0.5 / 1000.0  # 3 sigma of the MC error
    u = sl.sample_block(UNI, rng.substream(3, rng.SERVICE, 1), 10_000)
    assert u.min() >= 0.0 and u.max() <= 1.0


def test_gamma_shape_one_equals_exponential():
    # distributional equality via KS on 1e5 draws
    from ergoqueue.empirical import EmpiricalLaw, ks_distance

    g1 = sl.ServiceSpec(family="gamma", shape=1.0, rate=2.0)
    a = sl.sample_block(g1, rng.substream(11, rng.SERVICE, 0), 100_000)
    b = sl.sample_block(EXP2, rng.substream(12, rng.SERVICE, 0), 100_000)
    ks = ks_distance(EmpiricalLaw.from_samples(a), EmpiricalLaw.from_samples(b))
    assert ks < 0.01


def test_sample_service_single_draw_reproducible():
    a = sl.sample_service(EXP2, rng.substream(5, rng.SERVICE, 9))
    b = sl.sample_service(EXP2, rng.substream(5, rng.SERVICE, 9))
    assert a == b and a >= 0.0


def test_mixture_weights_validated():
    with pytest.raises(ConfigError):
        sl.ServiceSpec(family="exponential_mixture", weights=(0.5, 0.4), rates=(1.0, 2.0))


def test_deterministic_has_no_density():
    det = sl.ServiceSpec(family="deterministic", value=1.0)
    with pytest.raises(DomainError):
        sl.density(det, 0.5)
    assert sl.mgf(det, 0.7) == pytest.approx(math.exp(0.7))
