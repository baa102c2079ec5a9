"""Statistical verdicts: KS distances, scaling fits, independence checks.

Everything here is a pure function of its input samples.  KS statistics are
the exact sup-differences (not asymptotic approximations); the classical
Kolmogorov quantiles are provided for thresholding.  Rank correlation is
Spearman's rho without tie correction (the inputs are continuous statistics).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

KS_C95 = 1.3581  # Kolmogorov 95% quantile coefficient


@dataclass
class EmpiricalDistribution:
    """Sorted sample values; at least two of them."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size < 2:
            raise ValueError("need at least two sample values")
        self.values = np.sort(v)

    @property
    def count(self) -> int:
        return self.values.size


@dataclass
class TestReport:
    """One statistic with its threshold; passes iff value <= threshold."""

    __test__ = False        # not a pytest collectible

    name: str
    value: float
    threshold: float
    sample_sizes: tuple[int, ...] = ()
    seeds: tuple[int, ...] = ()
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = bool(self.value <= self.threshold)

    def as_dict(self):
        return {"name": self.name, "value": self.value, "threshold": self.threshold,
                "passed": self.passed, "sample_sizes": list(self.sample_sizes),
                "seeds": list(self.seeds)}

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: {self.value:.6g} <= {self.threshold:.6g}"


def ks_two_sample(a: EmpiricalDistribution, b: EmpiricalDistribution) -> float:
    """Exact sup-difference of the two empirical CDFs."""
    if a.count < 50 or b.count < 50:
        raise ValueError("two-sample KS needs at least 50 points per sample")
    grid = np.concatenate([a.values, b.values])
    cdf_a = np.searchsorted(a.values, grid, side="right") / a.count
    cdf_b = np.searchsorted(b.values, grid, side="right") / b.count
    return float(np.abs(cdf_a - cdf_b).max())


def ks_vs_normal(a: EmpiricalDistribution, mean: float, sd: float) -> float:
    """Exact sup-difference of the empirical CDF against N(mean, sd^2)."""
    if sd <= 0:
        raise ValueError("sd must be positive")
    cdf = ndtr((a.values - mean) / sd)
    n = a.count
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def ks_two_sample_threshold(n: int, m: int, c: float = KS_C95) -> float:
    """Classical large-sample quantile c * sqrt((n + m) / (n m))."""
    return c * math.sqrt((n + m) / (n * m))


def ks_one_sample_threshold(n: int, c: float = KS_C95) -> float:
    return c / math.sqrt(n)


def scaling_exponent_fit(n_grid, values, ln_correction: bool = False):
    """Least-squares slope of log(value) against log N.

    Returns (slope, stderr) or (slope, stderr, ln_coeff) when a log log N
    correction column is requested.  The grid must be geometric with at
    least five points and the values positive.
    """
    n_grid = np.asarray(n_grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if n_grid.size < 5:
        raise ValueError("need at least five grid points")
    ratios = n_grid[1:] / n_grid[:-1]
    if not np.allclose(ratios, ratios[0], rtol=1e-9):
        raise ValueError("grid must be geometric")
    if np.any(values <= 0):
        raise ValueError("values must be positive for a log-log fit")
    x = np.log(n_grid)
    y = np.log(values)
    cols = [np.ones_like(x), x]
    if ln_correction:
        cols.append(np.log(x))
    design = np.column_stack(cols)
    coef, res, _, _ = np.linalg.lstsq(design, y, rcond=None)
    dof = max(x.size - design.shape[1], 1)
    resid = y - design @ coef
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(design.T @ design)
    slope, stderr = float(coef[1]), float(math.sqrt(max(cov[1, 1], 0.0)))
    if ln_correction:
        return slope, stderr, float(coef[2])
    return slope, stderr


def rank_correlation(x, y) -> float:
    """Spearman rho: Pearson correlation of the rank sequences."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 3:
        raise ValueError("need paired samples of equal size >= 3")
    rx = np.empty(x.size)
    ry = np.empty(y.size)
    rx[np.argsort(x, kind="stable")] = np.arange(x.size)
    ry[np.argsort(y, kind="stable")] = np.arange(y.size)
    rx -= rx.mean()
    ry -= ry.mean()
    return float((rx @ ry) / math.sqrt((rx @ rx) * (ry @ ry)))


@dataclass
class JointTestReport:
    """Joint-convergence verdict: Gaussian marginal plus independence."""

    ks_report: TestReport
    corr_report: TestReport

    @property
    def passed(self) -> bool:
        return self.ks_report.passed and self.corr_report.passed

    def as_dict(self):
        return {"ks": self.ks_report.as_dict(), "corr": self.corr_report.as_dict(),
                "passed": self.passed}


def joint_independence_test(pairs, ks_threshold: float = 0.05,
                            corr_threshold: float = 0.05,
                            seeds: tuple[int, ...] = ()) -> JointTestReport:
    """Test (V_N / (Lambda N^{3/2}), S_N) pairs for the product limit.

    The second coordinate must be standard normal (KS) and the coordinates
    uncorrelated in rank; both must pass.
    """
    pairs = np.asarray(pairs, dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError("pairs must be an (n, 2) array")
    if pairs.shape[0] < 10**3:
        raise ValueError("need at least 1e3 pairs")
    v, s = pairs[:, 0], pairs[:, 1]
    ks = ks_vs_normal(EmpiricalDistribution(s), 0.0, 1.0)
    rho = abs(rank_correlation(v, s))
    n = pairs.shape[0]
    return JointTestReport(
        ks_report=TestReport("joint: S_N marginal vs N(0,1)", ks, ks_threshold,
                             sample_sizes=(n,), seeds=seeds),
        corr_report=TestReport("joint: |rank corr(V_N, S_N)|", rho, corr_threshold,
                               sample_sizes=(n,), seeds=seeds))
