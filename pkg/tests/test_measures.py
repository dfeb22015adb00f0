import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from blockmeasures.model import (BUILTINS, DomainError, IncompatibleVolumeError, builtin)
from blockmeasures.measures import (MarginalLaw, SamplingError, SectorWeight, blocking_log_density_ratio,
                                    blocking_window, f_factorial, log_blocking_density, marginal_law,
                                    marginal_pmf, partition, sample_blocking, sample_conserved_n,
                                    sample_marginal, sample_sector_many, sector_weight, shift_identity_rhs,
                                    site_law, theta_sequence)
from blockmeasures.state import Configuration, apply_move, conserved_n, shift
from blockmeasures.verify.identities import sector_marginals

ASEP = builtin("asep", 0.7)
K2 = builtin("k_exclusion", 0.7, K=2)


def theta_grid(model):
    lo, hi = model.theta_bounds()
    if math.isfinite(hi):
        return [hi - d for d in (0.05, 0.3, 1.0, 2.5, 6.0)]
    return [-3.0, -1.0, 0.0, 1.2, 3.0]


def test_f_factorial_examples():
    assert f_factorial(ASEP, 0) == 1.0
    assert f_factorial(builtin("independent_walkers", 0.7), 3) == pytest.approx(6.0)
    bl = builtin("bricklayers", 0.7, beta=math.log(2))
    assert f_factorial(bl, -1) == pytest.approx(math.sqrt(2), rel=1e-14)
    with pytest.raises(DomainError):
        f_factorial(ASEP, 2)


def test_partition_examples():
    assert partition(ASEP, 0.0) == pytest.approx(2.0)
    zrp = builtin("zrp_rate1", 0.7)
    assert partition(zrp, math.log(0.5)) == pytest.approx(2.0, rel=1e-14)
    with pytest.raises(DomainError):
        partition(zrp, 0.1)
    with pytest.raises(DomainError):
        partition(zrp, 0.0)


def test_marginal_pmf_examples():
    zrp = builtin("zrp_rate1", 0.7)
    law = marginal_law(zrp, math.log(0.5))
    for z in range(12):
        assert marginal_pmf(law, z) == pytest.approx(0.5 ** (z + 1), rel=1e-13)
    for th in (-2.0, 0.0, 0.8):
        assert marginal_pmf(marginal_law(ASEP, th), 1) == pytest.approx(math.exp(th) / (1 + math.exp(th)))
    assert site_law(ASEP, 0.0, 0).pmf(1) == pytest.approx(0.5)


@pytest.mark.parametrize("name", BUILTINS)
def test_normalization_every_builtin(name):
    m = builtin(name, 0.7)
    for th in theta_grid(m):
        law = MarginalLaw(m, th)
        total = math.fsum(law.pmf_table)
        assert abs(total - 1.0) <= 1e-12 + law.tail


@pytest.mark.parametrize("name", ["asep", "k_exclusion"])
def test_two_marginal_forms_agree(name):
    m = builtin(name, 0.7)
    for th in theta_grid(m):
        law = MarginalLaw(m, th)
        for z in law.values:
            a, b = law.log_pmf_forms(int(z))
            assert a == pytest.approx(b, abs=1e-12)
            assert a == pytest.approx(law.log_pmf(int(z)), abs=1e-12)


def test_theta_sequence_examples():
    assert theta_sequence(ASEP, 0.0, 2) == pytest.approx(2 * math.log(7 / 3))
    assert theta_sequence(ASEP, 1.7, 0) == 1.7
    zrp = builtin("zrp_rate1", 0.7)
    with pytest.raises(IncompatibleVolumeError):
        theta_sequence(zrp, None, 1)


def test_density_ratio_examples(rng):
    z = Configuration.from_sites(ASEP, {-3: 1, 0: 0, 1: 0, 4: 0})
    assert blocking_log_density_ratio(ASEP, 0.3, z, z) == 0.0
    n = conserved_n(z)
    lr = ASEP.log_ratio
    assert blocking_log_density_ratio(ASEP, 0.3, shift(z, 1), z) == pytest.approx(n * lr + 0.3, abs=1e-12)

    zrp = builtin("zrp_rate1", 0.7)
    w = Configuration.from_sites(zrp, {-2: 1, 0: 3})
    for i in (-4, -2, 0):
        more = Configuration.from_sites(zrp, {**w.as_dict(), i: w.at(i) + 1})
        expect = zrp.theta(i) - math.log(zrp.f(w.at(i) + 1))
        assert blocking_log_density_ratio(zrp, None, more, w) == pytest.approx(expect, abs=1e-12)


def test_shift_rhs_examples():
    g = Configuration.ground(ASEP)
    assert shift_identity_rhs(ASEP, 0.0, g, 0) == 0.0
    assert shift_identity_rhs(ASEP, 0.0, g, 1) == 0.0
    z = Configuration.from_sites(K2, {1: 1})
    assert conserved_n(z) == 1
    assert shift_identity_rhs(K2, 0.0, z, 2) == pytest.approx(0.0, abs=1e-15)


def configs(model):
    return st.builds(lambda lo, v: Configuration(lo, tuple(v), model.lattice, model.occupancy),
                     st.integers(-10, 5), st.lists(st.integers(0, int(model.omega_max)), max_size=12))


@given(configs(ASEP), st.integers(-5, 5), st.floats(-1.5, 1.5))
def test_shift_identity_asep(z, j, c):
    lhs = blocking_log_density_ratio(ASEP, c, shift(z, j), z)
    assert lhs == pytest.approx(shift_identity_rhs(ASEP, c, z, j), abs=1e-12 * max(1.0, abs(lhs)))


@given(configs(K2), st.integers(-5, 5), st.floats(-1.5, 1.5))
def test_shift_identity_k2(z, j, c):
    lhs = blocking_log_density_ratio(K2, c, shift(z, j), z)
    assert lhs == pytest.approx(shift_identity_rhs(K2, c, z, j), abs=1e-12 * max(1.0, abs(lhs)))


@given(configs(ASEP), st.floats(-1, 1))
def test_absolute_density_consistent_with_ratio(z, c):
    g = Configuration.ground(ASEP)
    lz, tz = log_blocking_density(ASEP, c, z)
    lg, tg = log_blocking_density(ASEP, c, g)
    assert lz - lg == pytest.approx(blocking_log_density_ratio(ASEP, c, z, g), abs=1e-10 + tz + tg)


def test_ground_density_matches_product_oracle():
    """Independent oracle: the product of Bernoulli masses over a wide window."""
    c = 0.4
    g = Configuration.ground(ASEP)
    direct = 0.0
    for i in range(-200, 201):
        rho = 1.0 / (1.0 + math.exp(-(c + i * ASEP.log_ratio)))
        direct += math.log1p(-rho) if i <= 0 else math.log(rho)
    val, tail = log_blocking_density(ASEP, c, g)
    assert val == pytest.approx(direct, abs=1e-13 + tail)


def test_sector_weight_k_value():
    sw = SectorWeight(0.8, 0.0)
    assert sw.K == pytest.approx(2.5317401904617327, rel=1e-15)
    assert sector_weight(sw, 0) == pytest.approx(1 / sw.K, rel=1e-15)


@given(st.floats(0.52, 0.98), st.floats(-2.0, 2.0))
def test_sector_normaliser_matches_theta_function(p, c):
    """K^c equals a Jacobi theta value: sum X^{j^2} Y^{2j} with X = sqrt(q/p), Y^2 = X e^{-c}."""
    X = mpmath.sqrt((1 - mpmath.mpf(p)) / p)
    z = -1j * mpmath.log(X * mpmath.exp(-c)) / 2
    oracle = mpmath.re(mpmath.jtheta(3, z, X))
    sw = SectorWeight(p, c)
    assert sw.K == pytest.approx(float(oracle), rel=1e-13)


@given(st.floats(0.52, 0.98), st.floats(-2.0, 2.0), st.integers(-8, 8))
def test_sector_weight_ratio(p, c, n):
    sw = SectorWeight(p, c)
    ratio = sw.log_weight(n) - sw.log_weight(n - 1)
    assert ratio == pytest.approx(n * math.log((1 - p) / p) - c, abs=1e-12)


@given(st.floats(0.52, 0.98), st.integers(-8, 8))
def test_sector_weight_symmetry_at_zero_c(p, n):
    sw = SectorWeight(p, 0.0)
    assert sw.log_weight(n) == pytest.approx(sw.log_weight(-n - 1), abs=1e-12)


@given(st.floats(0.52, 0.95), st.floats(-2.0, 2.0))
def test_sector_weights_sum_to_one(p, c):
    sw = SectorWeight(p, c)
    total = math.fsum(sw.weight(n) for n in range(-60, 61))
    assert total == pytest.approx(1.0, abs=1e-12 + sw.tail)


def test_sample_marginal_means():
    rng = np.random.Generator(np.random.PCG64(3))
    zrp = builtin("zrp_rate1", 0.7)
    law = marginal_law(zrp, math.log(0.5))
    x = law.sample(rng, 100_000)
    sd = math.sqrt(2.0 / 100_000)  # Geometric(1/2) variance is 2
    assert abs(x.mean() - 1.0) < 3 * sd
    y = marginal_law(ASEP, 0.0).sample(rng, 100_000)
    assert abs(y.mean() - 0.5) < 3 * math.sqrt(0.25 / 100_000)
    assert marginal_law(ASEP, -30.0).sample(rng, 10_000).sum() == 0
    assert isinstance(sample_marginal(law, rng), int)


def test_blocking_window_tail_is_certified():
    lo, hi = blocking_window(ASEP, 0.0, 1e-12)
    assert -lo == hi and 30 <= hi <= 36

    def tail(L):
        return math.fsum(1 / (1 + math.exp(-i * ASEP.log_ratio)) for i in range(-L - 400, -L))

    assert tail(-lo) < 1e-12
    with pytest.raises(DomainError):
        blocking_window(ASEP, 0.0, 0.0)


def test_blocking_samples_have_finite_counts(rng):
    zrp = builtin("zrp_rate1", 0.7)
    lo, hi = blocking_window(zrp, None, 1e-12)
    assert hi == 0
    seen_ground = False
    for _ in range(200):
        z = sample_blocking(zrp, None, 1e-12, rng)
        assert z.hi == 0 and sum(z.values) < 10**6
        seen_ground |= not any(z.values)
    assert seen_ground


def test_asep_ground_is_hit(rng):
    g = Configuration.ground(ASEP)
    hits = sum(sample_blocking(ASEP, 0.0, 1e-12, rng) == g for _ in range(300))
    # mu^0(ground) = 1/K^0 times the conditional ground mass; well above 1%
    assert hits > 0


def test_sector_acceptance_rate(rng):
    sw = SectorWeight(0.7, 0.0)
    count = 2500
    draws, tries = sample_sector_many(ASEP, 0.0, 0, count, rng)
    assert all(conserved_n(z) == 0 for z in draws)
    w = sw.weight(0)
    # tries is negative binomial: mean count/w, sd sqrt(count (1-w))/w
    sd = math.sqrt(count * (1 - w)) / w
    assert abs(tries - count / w) < 3 * sd


def test_sector_marginal_site_zero(rng):
    draws, _ = sample_sector_many(ASEP, 0.0, 0, 10_000, rng)
    freq = np.mean([z.at(0) for z in draws])
    exact = sector_marginals(0.7, 0, [0], window=6)[0]
    assert abs(freq - exact) < 3 * math.sqrt(exact * (1 - exact) / len(draws))


def test_sector_sampling_is_c_independent():
    rng = np.random.Generator(np.random.PCG64(8))
    a, _ = sample_sector_many(ASEP, -1.0, 1, 4000, rng)
    b, _ = sample_sector_many(ASEP, 1.0, 1, 4000, rng)
    fa = np.mean([z.at(1) for z in a])
    fb = np.mean([z.at(1) for z in b])
    sd = math.sqrt(0.25 / 4000 * 2)
    assert abs(fa - fb) < 3.5 * sd


def test_sampling_error_reports_rate(rng):
    with pytest.raises(SamplingError) as err:
        sample_sector_many(ASEP, 0.0, 9, 1, rng, max_tries=500)
    assert err.value.tries == 500
    assert err.value.acceptance_rate == 0.0


def test_sector_mass_matches_empirical_n(rng):
    ns = sample_conserved_n(ASEP, 0.0, 20_000, rng)
    sw = SectorWeight(0.7, 0.0)
    for n in (-1, 0, 1):
        w = sw.weight(n)
        assert abs(np.mean(ns == n) - w) < 3.5 * math.sqrt(w * (1 - w) / len(ns))


def test_move_changes_density_by_rate_ratio():
    """Detailed balance on the infinite lattice for a single bulk move."""
    z = Configuration.from_sites(ASEP, {-1: 1, 0: 0, 2: 0})
    w = apply_move(z, -1, 0)
    r = blocking_log_density_ratio(ASEP, 0.5, w, z)
    assert r == pytest.approx(math.log(0.7 / 0.3), abs=1e-12)


def test_density_of_shifted_ground():
    g = Configuration.ground(ASEP)
    for j in (-3, -1, 2, 4):
        s = shift(g, j)
        lhs = log_blocking_density(ASEP, 0.2, s)[0] - log_blocking_density(ASEP, 0.2, g)[0]
        assert lhs == pytest.approx(shift_identity_rhs(ASEP, 0.2, g, j), abs=1e-12)
        assert blocking_log_density_ratio(ASEP, 0.2, s, g) == pytest.approx(lhs, abs=1e-12)
