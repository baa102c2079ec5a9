"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one pass/fail line per checked statistic (visible with
``pytest tests/test_acceptance.py -v -s``).  The heavy simulations run once
per session through the shipped config files, so these tests exercise the
same code path as ``rwrslab run``.
"""

import math
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from scipy.special import factorial

from rwrslab.base import (BaseObservable, lazy_walk_z1, lazy_walk_z2,
                          mllt_diagnostic, simulate_cocycle)
from rwrslab.experiments import l_bank, load_config, run_experiment
from rwrslab.limits import (enumerated_mean_quenched_variance_exact,
                            j1_closed_form, jk_monte_carlo,
                            kesten_spitzer_sample, KestenSpitzerSampler,
                            pairsum_mean_quenched_variance_exact)
from rwrslab.scenery import SceneryModel
from rwrslab.stats import TestReport
from rwrslab.sums import quenched_variance_closed, quenched_variance_mc

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

BROWNIAN_PATHS = 10**5
BROWNIAN_STEPS = 10**4
BROWNIAN_SEED = 20240601


def _run(name, tmp_path_factory):
    cfg = load_config(CONFIGS / f"{name}.toml")
    out = tmp_path_factory.mktemp(name)
    result, _ = run_experiment(cfg, out)
    return result


def _assert_reports(reports):
    for rep in reports:
        print(rep.line())
    assert all(rep.passed for rep in reports), \
        "; ".join(r.line() for r in reports if not r.passed)


@pytest.fixture(scope="session")
def bank():
    return l_bank(BROWNIAN_PATHS, BROWNIAN_STEPS, None, BROWNIAN_SEED)


@pytest.fixture(scope="session")
def constants_result(tmp_path_factory):
    return _run("constants", tmp_path_factory)


@pytest.fixture(scope="session")
def d1_result(tmp_path_factory):
    return _run("d1-kesten-spitzer", tmp_path_factory)


@pytest.fixture(scope="session")
def variance_result(tmp_path_factory):
    return _run("variance-law", tmp_path_factory)


@pytest.fixture(scope="session")
def d2_result(tmp_path_factory):
    return _run("d2-clt", tmp_path_factory)


@pytest.fixture(scope="session")
def diagnostics_result(tmp_path_factory):
    return _run("diagnostics", tmp_path_factory)


# ---------------------------------------------------------------------------
# criterion 1: constants suite
# ---------------------------------------------------------------------------

def test_criterion_1_constants_suite(constants_result):
    _assert_reports(constants_result.reports)
    assert abs(constants_result.constants["J1"]
               - 4 * math.sqrt(2) / (3 * math.sqrt(math.pi))) < 1e-12


# ---------------------------------------------------------------------------
# criterion 2: moment consistency
# ---------------------------------------------------------------------------

def test_criterion_2_moment_consistency(bank):
    j1 = j1_closed_form()
    est1, se1 = jk_monte_carlo(1, 10**5, seed=41)
    reports = [TestReport("J1 Monte Carlo vs closed form (3 sigma)",
                          abs(est1 - j1), 3 * se1, sample_sizes=(10**5,))]

    l2 = bank**2
    l2_mean = float(l2.mean())
    reports.append(TestReport("sampler E[L^2] vs J1 (2%)",
                              abs(l2_mean - j1) / j1, 0.02,
                              sample_sizes=(len(bank),)))

    l4 = bank**4
    l4_mean = float(l4.mean())
    l4_se = float(l4.std(ddof=1) / math.sqrt(len(bank)))
    est2, se2 = jk_monte_carlo(2, 4 * 10**5, seed=43)
    combined = math.sqrt(se2**2 + l4_se**2)
    reports.append(TestReport("J2 Monte Carlo vs Brownian E[L^4] (3 sigma)",
                              abs(est2 - l4_mean), 3 * combined,
                              sample_sizes=(4 * 10**5, len(bank))))
    _assert_reports(reports)


def test_sampler_refinement_invariant():
    # E[L^2] at steps M and 4M agree within three combined standard errors
    coarse = kesten_spitzer_sample(KestenSpitzerSampler(steps=BROWNIAN_STEPS,
                                                        seed=51), 20000)
    fine = kesten_spitzer_sample(KestenSpitzerSampler(steps=4 * BROWNIAN_STEPS,
                                                      seed=52), 8000)
    m_c, m_f = (coarse**2).mean(), (fine**2).mean()
    se = math.sqrt((coarse**2).var(ddof=1) / len(coarse)
                   + (fine**2).var(ddof=1) / len(fine))
    rep = TestReport("sampler refinement: |E[L^2](M) - E[L^2](4M)|",
                     abs(m_c - m_f), 3 * se)
    _assert_reports([rep])


# ---------------------------------------------------------------------------
# criteria 3 and 6: the d=1 limit law and the joint convergence
# ---------------------------------------------------------------------------

def test_criterion_3_d1_kesten_spitzer_law(d1_result):
    wanted = [r for r in d1_result.reports if not r.name.startswith("joint")]
    assert len(wanted) == 3      # KS, slope, doubling universality
    _assert_reports(wanted)


def test_criterion_6_joint_convergence(d1_result):
    joint = [r for r in d1_result.reports if r.name.startswith("joint")]
    assert len(joint) == 2
    _assert_reports(joint)


# ---------------------------------------------------------------------------
# criterion 4: quenched variance law
# ---------------------------------------------------------------------------

def test_criterion_4_variance_law(variance_result):
    _assert_reports(variance_result.reports)


# ---------------------------------------------------------------------------
# criterion 5: d=2 central limit theorem
# ---------------------------------------------------------------------------

def test_criterion_5_d2_clt(d2_result):
    _assert_reports(d2_result.reports)


# ---------------------------------------------------------------------------
# criterion 7: hypothesis diagnostics
# ---------------------------------------------------------------------------

def _lazy_z1_point_prob(p_hold, n, z):
    q = (1.0 - p_hold) / 2.0
    total = 0.0
    for h in range(n + 1):
        m = n - h
        if (m + z) % 2 or abs(z) > m:
            continue
        a = (m + z) // 2
        total += (factorial(n, exact=True) // (factorial(h, exact=True)
                  * factorial(a, exact=True) * factorial(m - a, exact=True))) \
            * p_hold**h * q**m
    return total


def test_criterion_7_mllt_exact_oracle():
    # the diagnostic's exact mode equals the binomial enumeration oracle
    system = lazy_walk_z1()
    worst = 0.0
    for n in range(2, 13):
        for z in (0, 1, -2):
            rows = mllt_diagnostic(system, BaseObservable(), BaseObservable(),
                                   ((-0.5, 0.5),), (z / math.sqrt(n),), [n],
                                   trials=0, exact=True)
            oracle = math.sqrt(n) * _lazy_z1_point_prob(system.p_hold, n, z)
            worst = max(worst, abs(rows[0].estimate - oracle))
    rep = TestReport("MLLT exact mode vs binomial oracle (n <= 12)", worst, 1e-12)
    _assert_reports([rep])


def test_criterion_7_diagnostics_suite(diagnostics_result):
    _assert_reports(diagnostics_result.reports)
    bg = diagnostics_result.constants["bg_condition"]
    print(f"    bg condition at R = K ln(mass): "
          f"{bg['median_K_ln_mass']} (threshold {bg['threshold']:.4f}, reported)")


# ---------------------------------------------------------------------------
# criterion 8: oracle equivalence
# ---------------------------------------------------------------------------

def test_criterion_8_closed_form_vs_monte_carlo():
    rng = np.random.default_rng(2718)
    worst_z = 0.0
    for case in range(20):
        d = 1 if case % 3 else 2
        system = lazy_walk_z1() if d == 1 else lazy_walk_z2()
        if case % 2:
            model = SceneryModel(marginal=("rademacher", "gaussian")[case % 4 == 1],
                                 variance=float(rng.uniform(0.5, 2.0)),
                                 dimension=d)
        else:
            model = SceneryModel(kind="moving-average", marginal="gaussian",
                                 variance=float(rng.uniform(0.5, 2.0)),
                                 decay=0.5, radius=6 if d == 1 else 3,
                                 dimension=d)
        traj = simulate_cocycle(system, seed=int(rng.integers(2**31)),
                                n=256 if d == 1 else 128)
        closed = quenched_variance_closed(traj, model)
        mc = quenched_variance_mc(traj, model, fiber_trials=2000,
                                  seed=int(rng.integers(2**31)))
        worst_z = max(worst_z, abs(closed.value - mc.value) / mc.se)
    rep = TestReport("closed-form vs MC quenched variance, worst |z| of 20",
                     worst_z, 3.0)
    _assert_reports([rep])


def test_criterion_8_exhaustive_path_expectation():
    simple = lazy_walk_z1(p_hold=0.0)
    lazy = lazy_walk_z1()
    exact_matches = all(
        enumerated_mean_quenched_variance_exact(simple, n)
        == pairsum_mean_quenched_variance_exact(simple, n)
        for n in range(2, 11))
    lazy_matches = all(
        enumerated_mean_quenched_variance_exact(lazy, n)
        == pairsum_mean_quenched_variance_exact(lazy, n)
        for n in range(2, 11))
    rep = TestReport("exhaustive-path E[V_N] equals pair-sum expectation "
                     "exactly (N <= 10)",
                     0.0 if (exact_matches and lazy_matches) else 1.0, 0.5)
    _assert_reports([rep])
    # spot value: the 2^9 simple-walk paths at N=10 give a clean rational
    assert enumerated_mean_quenched_variance_exact(simple, 10) \
        == Fraction(835, 32)
