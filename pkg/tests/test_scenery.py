import math

import numpy as np
import pytest
from scipy.stats import chi2

from rwrslab.scenery import (SceneryField, SceneryModel, correlation,
                             correlation_sum, empirical_correlation,
                             scenery_value, varsigma2)


def test_iid_rademacher_support():
    fld = SceneryField(SceneryModel(variance=4.0), seed=1)
    vals = fld.values(np.arange(-200, 200))
    assert set(np.unique(vals)) == {-2.0, 2.0}


def test_scalar_query_deterministic_and_cached():
    fld = SceneryField(SceneryModel(), seed=9)
    assert scenery_value(fld, 17) == scenery_value(fld, 17)
    assert scenery_value(fld, 17) == fld.values(np.array([17]))[0]


def test_moving_average_radius_zero_reduces_to_iid_gaussian():
    model = SceneryModel(kind="moving-average", marginal="gaussian", radius=0,
                         variance=1.0)
    fld = SceneryField(model, seed=4)
    vals = fld.values(np.arange(5000))
    assert abs(vals.mean()) < 0.05
    assert abs(vals.std() - 1.0) < 0.05
    # adjacent sites share no kernel taps, so they are exactly independent
    assert correlation(model, 1) == 0.0


def test_correlation_closed_forms_iid():
    model = SceneryModel(variance=2.5)
    assert correlation(model, 0) == 2.5
    assert correlation(model, 3) == 0.0
    assert correlation_sum(model) == 2.5


def test_correlation_is_symmetric_and_dominated_by_origin():
    model = SceneryModel(kind="moving-average", marginal="gaussian",
                         decay=0.5, radius=16)
    for z in range(1, 10):
        assert correlation(model, z) == pytest.approx(correlation(model, -z))
        assert abs(correlation(model, z)) <= correlation(model, 0)
    assert correlation(model, 0) == pytest.approx(model.variance)


def test_moving_average_correlation_decays_exponentially():
    model = SceneryModel(kind="moving-average", marginal="gaussian",
                         decay=0.5, radius=16)
    for z in range(1, 2 * model.radius):
        assert abs(correlation(model, z)) <= model.variance * math.exp(
            -model.decay * z) * (2 * model.radius + 1)


def test_moving_average_empirical_matches_closed_form():
    model = SceneryModel(kind="moving-average", marginal="gaussian",
                         decay=0.5, radius=8)
    for z in (0, 1, 2, 5):
        est, se = empirical_correlation(model, z, samples=20000, seed=2)
        assert abs(est - correlation(model, z)) <= 3 * se


def test_varsigma2_values():
    assert varsigma2(SceneryModel(variance=1.0), 1.0) == 1.0
    assert varsigma2(SceneryModel(variance=1.0), 0.0) == 0.0
    model = SceneryModel(kind="moving-average", marginal="gaussian",
                         decay=0.5, radius=16)
    assert varsigma2(model) >= 0.0


def test_varsigma2_block_sum_oracle():
    # long-run variance of block sums over disjoint fields approaches the
    # correlation sum
    model = SceneryModel(kind="moving-average", marginal="gaussian",
                         decay=0.5, radius=8)
    m_block = 256
    sites = np.arange(-m_block, m_block + 1)
    sums = np.empty(8000)
    for i in range(len(sums)):
        fld = SceneryField(model, seed=100000 + i)
        sums[i] = fld.values(sites).sum()
    est = sums.var(ddof=1) / len(sites)
    target = varsigma2(model)
    assert abs(est - target) / target < 0.03


def test_stationarity_chi_square_homogeneity():
    # counts of +sigma per site across seeds are homogeneous at the 1% level
    model = SceneryModel()
    n_sites, n_seeds = 100, 400
    counts = np.zeros(n_sites)
    for s in range(n_seeds):
        fld = SceneryField(model, seed=7000 + s)
        counts += fld.values(np.arange(n_sites)) > 0
    expected = counts.mean()
    stat = float(np.sum((counts - expected) ** 2 / (n_seeds * 0.25)))
    assert stat < chi2.ppf(0.99, df=n_sites - 1)


def test_seed_independence_cross_correlation():
    model = SceneryModel()
    sites = np.arange(20000)
    a = SceneryField(model, seed=1).values(sites)
    b = SceneryField(model, seed=2).values(sites)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.03


def test_model_validation():
    with pytest.raises(ValueError):
        SceneryModel(kind="white")
    with pytest.raises(ValueError):
        SceneryModel(variance=0.0)
    with pytest.raises(ValueError):
        SceneryModel(kind="moving-average", decay=-1.0)


def test_dimension_mismatch_rejected():
    fld = SceneryField(SceneryModel(dimension=2), seed=0)
    with pytest.raises(ValueError):
        fld.values(np.arange(10))


def test_field_rectangle_dump(tmp_path):
    from rwrslab.scenery import field_to_csv
    fld = SceneryField(SceneryModel(dimension=2), seed=3)
    out = tmp_path / "field.csv"
    field_to_csv(fld, (-1, -1), (1, 2), out)
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "z0 z1 value"
    assert len(lines) == 1 + 3 * 4
    z0, z1, val = lines[1].split()
    assert float(val) == fld.value((int(z0), int(z1)))
