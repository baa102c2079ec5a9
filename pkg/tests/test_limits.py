import math
from fractions import Fraction

import numpy as np
import pytest

from rwrslab.base import lazy_walk_z1, lazy_walk_z2
from rwrslab.limits import (KestenSpitzerSampler, MomentOrderError, MomentTable,
                            binned_occupation, compute_limit_constants,
                            enumerated_mean_quenched_variance,
                            enumerated_mean_quenched_variance_exact,
                            j1_closed_form, j1_quadrature, jk_monte_carlo,
                            kesten_spitzer_sample, lambda_constant,
                            lambda_constant_from_density,
                            lambda_enumeration_oracle, lattice_lambda,
                            limit_law_sample_d1,
                            pairsum_mean_quenched_variance_exact, sigma2_d2,
                            simplex_integral_check, two_to_one_mappings)
from rwrslab.scenery import SceneryModel


# ---------------------------------------------------------------------------
# scalar constants
# ---------------------------------------------------------------------------

def test_j1_algebraic_identities():
    j1 = j1_closed_form()
    assert abs(j1 - 8.0 / (3.0 * math.sqrt(2.0 * math.pi))) < 1e-15
    assert j1 == pytest.approx(1.0638437, abs=5e-6)


def test_j1_quadrature_oracle():
    assert abs(j1_quadrature() - j1_closed_form()) < 1e-6


def test_lambda_constant_values_and_errors():
    assert lambda_constant(1.0, 1.0) == pytest.approx(math.sqrt(math.pi))
    assert lambda_constant(2.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        lambda_constant(0.0, 1.0)
    with pytest.raises(ValueError):
        lambda_constant(1.0, -1.0)


def test_lambda_two_expressions_agree():
    # sqrt(pi) s2/s1 == sqrt(2) pi s2 g(0) whenever g(0) = 1/(sqrt(2 pi) s1)
    for s1 in (0.5, 1.0, 1.7):
        for s2 in (0.3, 1.0, 2.2):
            g0 = 1.0 / (math.sqrt(2 * math.pi) * s1)
            assert abs(lambda_constant(s1, s2)
                       - lambda_constant_from_density(g0, s2)) < 1e-12


def test_sigma2_d2_values():
    assert sigma2_d2(1 / math.pi, 1.0) == pytest.approx(2 / math.pi)
    assert sigma2_d2(1.0, 0.0) == 0.0
    assert sigma2_d2(0.5, 2.0) == pytest.approx(2 * sigma2_d2(0.5, 1.0))
    with pytest.raises(ValueError):
        sigma2_d2(0.0, 1.0)


def test_compute_limit_constants_d1_and_d2():
    c1 = compute_limit_constants(lazy_walk_z1(), SceneryModel())
    assert c1.sigma1.value == pytest.approx(math.sqrt(2 / 3))
    assert c1.lam.value == pytest.approx(lattice_lambda(math.sqrt(2 / 3), 1.0))
    c2 = compute_limit_constants(lazy_walk_z2(), SceneryModel(dimension=2))
    assert c2.g0.value == pytest.approx(3 / (2 * math.pi))
    assert c2.sigma2.value == pytest.approx(3 / math.pi)


# ---------------------------------------------------------------------------
# enumeration calibration
# ---------------------------------------------------------------------------

def test_exhaustive_equals_pairsum_exactly():
    lazy = lazy_walk_z1()
    simple = lazy_walk_z1(p_hold=0.0)
    for n in (2, 4, 7, 10):
        assert enumerated_mean_quenched_variance_exact(lazy, n) \
            == pairsum_mean_quenched_variance_exact(lazy, n)
    assert enumerated_mean_quenched_variance_exact(simple, 10) \
        == pairsum_mean_quenched_variance_exact(simple, 10)
    # two positions of a +-1 walk never coincide
    assert enumerated_mean_quenched_variance_exact(simple, 2) == Fraction(2, 1)


def test_float_enumeration_matches_exact():
    lazy = lazy_walk_z1()
    for n in (3, 6, 9):
        assert enumerated_mean_quenched_variance(lazy, n) == pytest.approx(
            float(enumerated_mean_quenched_variance_exact(lazy, n)), rel=1e-12)


def test_lambda_enumeration_oracle_matches_formula():
    lam_star = lambda_enumeration_oracle(lazy_walk_z1())
    lam = lattice_lambda(math.sqrt(2 / 3), 1.0)
    assert abs(lam_star - lam) / lam < 0.03


# ---------------------------------------------------------------------------
# two-to-one pairings and higher moments
# ---------------------------------------------------------------------------

def test_pairing_counts():
    for k in (1, 2, 3, 4):
        v = two_to_one_mappings(k)
        assert v.shape == (math.factorial(2 * k) // 2**k, 2 * k)
        assert np.all(np.sort(v, axis=1) == np.repeat(
            np.arange(1, k + 1), 2)[None, :])
    assert len(two_to_one_mappings(2)) == 6
    # the k = 5 enumeration cap of the moment integral
    assert len(two_to_one_mappings(5)) == 113400


def test_jk_bounds_and_errors():
    with pytest.raises(MomentOrderError):
        jk_monte_carlo(6, 10**4)
    with pytest.raises(ValueError):
        jk_monte_carlo(2, 100)
    with pytest.raises(ValueError):
        jk_monte_carlo(0, 10**4)


def test_jk_first_moment_every_seed():
    j1 = j1_closed_form()
    for seed in (0, 1, 2):
        est, se = jk_monte_carlo(1, 2 * 10**4, seed=seed)
        assert abs(est - j1) <= 3 * se


def test_moment_growth_is_bounded():
    # computable shadow of the analytic moment bound: (J_k/k!)^{1/k} stays
    # bounded over k = 1..4 (the sequence actually decreases, since J_k grows
    # far slower than k! at these orders); spread stays under a factor 3
    table = MomentTable()
    table.add(1, j1_closed_form(), 0.0, "closed-form")
    for k in (2, 3, 4):
        est, se = jk_monte_carlo(k, 2 * 10**4, seed=3)
        table.add(k, est, se, "monte-carlo")
    ratios = table.growth_ratios()
    assert np.all(ratios <= ratios[0] * 1.05)
    assert ratios.max() / ratios.min() < 3.0


def test_moment_table_rejects_nonpositive():
    with pytest.raises(ValueError):
        MomentTable().add(1, 0.0, 0.0, "x")


def test_simplex_integral_values():
    for k, exact in ((1, math.pi), (2, math.pi**2 / 2), (3, math.pi**3 / 6)):
        est, ex, se = simplex_integral_check(k, 200000, seed=4)
        assert ex == pytest.approx(exact)
        assert abs(est - ex) <= 4 * se
    with pytest.raises(ValueError):
        simplex_integral_check(5, 10**4)


# ---------------------------------------------------------------------------
# Brownian local-time sampler
# ---------------------------------------------------------------------------

def test_sampler_validation():
    with pytest.raises(ValueError):
        KestenSpitzerSampler(steps=100)
    with pytest.raises(ValueError):
        KestenSpitzerSampler(steps=10**4, dx=0.5)


def test_binned_occupation_total_mass_is_one():
    rng = np.random.default_rng(0)
    pos = np.cumsum(rng.standard_normal(10**4)) / 100.0
    dx = 0.0075
    ell = binned_occupation(pos, dx)
    assert float(ell.sum() * dx) == pytest.approx(1.0, abs=1e-12)


def test_sampler_draws_are_positive_and_deterministic():
    sampler = KestenSpitzerSampler(seed=6)
    a = kesten_spitzer_sample(sampler, 32)
    b = kesten_spitzer_sample(sampler, 32)
    assert np.array_equal(a, b)
    assert np.all(a > 0)


def test_limit_law_sample_properties():
    consts = compute_limit_constants(lazy_walk_z1(), SceneryModel())
    sampler = KestenSpitzerSampler(seed=6)
    lam = consts.lam.value
    draws = limit_law_sample_d1(consts, sampler, 4000, seed=2)
    # mean zero by symmetry; second moment Lambda * J1 by independence
    assert abs(draws.mean()) < 4 * draws.std() / math.sqrt(len(draws))
    second = (draws**2).mean()
    target = lam * j1_closed_form()
    se = (draws**2).std(ddof=1) / math.sqrt(len(draws))
    assert abs(second - target) <= 3 * se + 0.02 * target


def test_limit_law_degenerate_lambda():
    consts = compute_limit_constants(lazy_walk_z1(), SceneryModel())
    consts.lam.value = 0.0
    sampler = KestenSpitzerSampler(seed=6)
    draws = limit_law_sample_d1(consts, sampler, 64, seed=2)
    assert not draws.any()


def test_limit_law_accepts_bank():
    consts = compute_limit_constants(lazy_walk_z1(), SceneryModel())
    sampler = KestenSpitzerSampler(seed=6)
    bank = kesten_spitzer_sample(sampler, 64)
    draws = limit_law_sample_d1(consts, sampler, 64, seed=2, l_values=bank)
    assert len(draws) == 64
    with pytest.raises(ValueError):
        limit_law_sample_d1(consts, sampler, 128, l_values=bank)
