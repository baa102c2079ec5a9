"""Limit-law constants and the local-time moment machinery.

The one-dimensional limit is Sigma * L * N(0,1) with L = sqrt(int ell^2) the
quadratic functional of Brownian local time at time 1; the two-dimensional
limit is a plain Gaussian.  This module computes the constants both ways:

* closed forms (first moment of L^2, the simplex integral, the variance
  constants Lambda and Sigma^2);
* independent numerics (deterministic quadrature, exhaustive-enumeration
  calibration with Richardson extrapolation, simplex Monte Carlo, a binned
  Brownian local-time sampler, and the moment integrals over two-to-one
  index pairings).

Convention note: with lattice cocycles and Z^d sceneries, the constant that
normalizes the quenched variance is varsigma2^2 / varsigma1 (the continuous
form carries an extra sqrt(pi) that belongs to the R^d fiber integral).  The
enumeration oracle pins this down; see lattice_lambda.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import integrate

from .base import BaseSystem
from .rng import STREAM_BROWNIAN, STREAM_QUADRATURE, generator
from .scenery import SceneryModel, correlation

SQRT_PI = math.sqrt(math.pi)
_PHI0 = 1.0 / math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# scalar constants
# ---------------------------------------------------------------------------

def j1_closed_form() -> float:
    """First moment of L^2: 4 sqrt(2) / (3 sqrt(pi))."""
    return 4.0 * math.sqrt(2.0) / (3.0 * SQRT_PI)


def j1_quadrature(tol: float = 1e-10) -> float:
    """Deterministic quadrature of the first-moment double integral.

    The raw integral is 2 * int_w int_{0<t1<t2<1} t1^{-1/2} (t2-t1)^{-1/2}
    phi(w/sqrt(t1)) phi(0).  Substituting t1 = a^2, t2 - t1 = b^2, w = a v
    removes the endpoint singularities and leaves a smooth integrand
    8 phi(0) a phi(v) over {a, b > 0, a^2 + b^2 < 1} x R.
    """
    val, _ = integrate.tplquad(
        lambda v, b, a: 8.0 * _PHI0 * a * math.exp(-0.5 * v * v) / math.sqrt(2.0 * math.pi),
        0.0, 1.0,
        lambda a: 0.0, lambda a: math.sqrt(max(1.0 - a * a, 0.0)),
        lambda a, b: -9.0, lambda a, b: 9.0,
        epsabs=tol, epsrel=tol)
    return val


def lambda_constant(sigma1: float, varsigma2_sq: float) -> float:
    """Continuous-convention variance constant sqrt(pi) * varsigma2^2 / varsigma1."""
    if sigma1 <= 0:
        raise ValueError("sigma1 must be positive")
    if varsigma2_sq < 0:
        raise ValueError("varsigma2^2 must be nonnegative")
    return SQRT_PI * varsigma2_sq / sigma1


def lambda_constant_from_density(g0: float, varsigma2_sq: float) -> float:
    """Equivalent form sqrt(2) pi varsigma2^2 g(0); agrees with lambda_constant."""
    return math.sqrt(2.0) * math.pi * varsigma2_sq * g0


def lattice_lambda(sigma1: float, varsigma2_sq_lattice: float) -> float:
    """Discrete-convention constant: the calibrated varsigma2^2 is the lattice
    correlation sum divided by sqrt(pi), which cancels the continuous factor."""
    return lambda_constant(sigma1, varsigma2_sq_lattice / SQRT_PI)


def sigma2_d2(g0: float, varsigma2_sq: float) -> float:
    """Asymptotic variance of S_N / sqrt(N ln N): 2 g(0) varsigma2^2."""
    if not (math.isfinite(g0) and math.isfinite(varsigma2_sq)) or g0 <= 0:
        raise ValueError("need finite inputs with g0 > 0")
    return 2.0 * g0 * varsigma2_sq


@dataclass
class ConstantValue:
    value: float
    provenance: str            # analytic | quadrature | derived-oracle
    error: float = 0.0

    def as_dict(self):
        return {"value": self.value, "provenance": self.provenance, "error": self.error}


@dataclass
class LimitConstants:
    """The constants of one (system, scenery) pair, with provenance."""

    sigma1: ConstantValue
    g0: ConstantValue
    varsigma2_sq: ConstantValue
    lam: ConstantValue
    sigma2: ConstantValue | None = None   # d = 2 only

    def as_dict(self):
        out = {"sigma1": self.sigma1.as_dict(), "g0": self.g0.as_dict(),
               "varsigma2_sq": self.varsigma2_sq.as_dict(), "lambda": self.lam.as_dict()}
        if self.sigma2 is not None:
            out["sigma2"] = self.sigma2.as_dict()
        return out


def compute_limit_constants(system: BaseSystem, model: SceneryModel) -> LimitConstants:
    """Assemble the analytic constants for a base system and scenery model."""
    from .base import gaussian_density_at
    from .scenery import varsigma2 as _vs2
    cov = system.step_covariance()
    g0 = gaussian_density_at(cov)
    vs2 = _vs2(model)
    if system.dimension == 1:
        s1 = math.sqrt(cov[0, 0])
        lam = lattice_lambda(s1, vs2)
        return LimitConstants(
            sigma1=ConstantValue(s1, "analytic"),
            g0=ConstantValue(g0, "analytic"),
            varsigma2_sq=ConstantValue(vs2, "analytic"),
            lam=ConstantValue(lam, "analytic"))
    s1 = math.sqrt(cov[0, 0])
    return LimitConstants(
        sigma1=ConstantValue(s1, "analytic"),
        g0=ConstantValue(g0, "analytic"),
        varsigma2_sq=ConstantValue(vs2, "analytic"),
        lam=ConstantValue(lattice_lambda(s1, vs2), "analytic"),
        sigma2=ConstantValue(sigma2_d2(g0, vs2), "analytic"))


# ---------------------------------------------------------------------------
# exhaustive-enumeration calibration of Lambda
# ---------------------------------------------------------------------------

def _enumerate_paths(system: BaseSystem, n: int) -> tuple[np.ndarray, np.ndarray]:
    """All positive-probability step-id sequences of length n-1, with weights."""
    if system.kind == "doubling-map":
        raise ValueError("enumeration calibrates walk bases")
    support = np.nonzero(system.step_probs() > 0)[0]
    ids = np.array(list(itertools.product(support.tolist(), repeat=n - 1)),
                   dtype=np.int64).reshape(-1, n - 1)
    probs = system.step_probs()[ids].prod(axis=1) if n > 1 else np.ones(1)
    return ids, probs


def enumerated_mean_quenched_variance(system: BaseSystem, n: int,
                                      model: SceneryModel | None = None) -> float:
    """E[V_n] by exhaustive path enumeration (paths of n positions)."""
    ids, probs = _enumerate_paths(system, n)
    vecs = system.step_vectors()
    steps = vecs[ids]                                   # (P, n-1, d)
    pos = np.concatenate([np.zeros((ids.shape[0], 1, system.dimension), np.int64),
                          np.cumsum(steps, axis=1)], axis=1)
    if model is None or model.kind == "iid":
        var = 1.0 if model is None else model.variance
        eq = np.all(pos[:, :, None, :] == pos[:, None, :, :], axis=3)
        v = var * eq.sum(axis=(1, 2)).astype(float)
    else:
        if system.dimension != 1:
            raise ValueError("moving-average enumeration implemented for d=1")
        diffs = pos[:, :, None, :] - pos[:, None, :, :]
        reach = 2 * model.radius
        table = np.array([correlation(model, [o])
                          for o in range(-reach - n, reach + n + 1)])
        v = table[diffs[..., 0] + reach + n].sum(axis=(1, 2))
    return float(np.dot(probs, v))


def enumerated_mean_quenched_variance_exact(system: BaseSystem, n: int) -> Fraction:
    """Exact rational E[V_n] (iid unit scenery) by path enumeration."""
    ids, _ = _enumerate_paths(system, n)
    vecs = system.step_vectors()
    pos = np.concatenate([np.zeros((ids.shape[0], 1, system.dimension), np.int64),
                          np.cumsum(vecs[ids], axis=1)], axis=1)
    eq = np.all(pos[:, :, None, :] == pos[:, None, :, :], axis=3).sum(axis=(1, 2))
    probs = system.step_probs()
    support = probs[probs > 0]
    if not np.allclose(support, support[0]):
        raise ValueError("exact enumeration assumes a uniform step alphabet")
    return Fraction(int(eq.sum()), support.size ** (n - 1))


def pairsum_mean_quenched_variance_exact(system: BaseSystem, n: int) -> Fraction:
    """Exact rational E[V_n] via stationary pair probabilities.

    Independent of enumeration: E[V_n] = sum_{n1,n2} P(tau_{|n1-n2|} = 0)
    with return probabilities from rational convolution powers.
    """
    probs = _rational_step_pmf(system)
    dist = {tuple([0] * system.dimension): Fraction(1)}
    total = Fraction(n)     # diagonal terms
    for m in range(1, n):
        dist = _convolve_rational(dist, probs)
        p0 = dist.get(tuple([0] * system.dimension), Fraction(0))
        total += 2 * (n - m) * p0
    return total


def _rational_step_pmf(system: BaseSystem) -> dict:
    d = system.dimension
    if system.kind == "doubling-map":
        raise ValueError("walks only")
    p = Fraction(system.p_hold).limit_denominator(10**9)
    q = (1 - p) / (2 * d)
    pmf = {tuple([0] * d): p}
    for j in range(d):
        for sgn in (1, -1):
            site = [0] * d
            site[j] = sgn
            pmf[tuple(site)] = q
    return pmf


def _convolve_rational(dist: dict, pmf: dict) -> dict:
    out: dict = {}
    for site, pr in dist.items():
        for step, ps in pmf.items():
            key = tuple(a + b for a, b in zip(site, step))
            out[key] = out.get(key, Fraction(0)) + pr * ps
    return out


def richardson_extrapolate(h: np.ndarray, y: np.ndarray, degree: int = 4) -> float:
    """Intercept of a polynomial fit y ~ c0 + c1 h + ... + c_m h^m."""
    coeffs = np.polyfit(h, y, deg=degree)
    return float(coeffs[-1])


def lambda_enumeration_oracle(system: BaseSystem, n_max: int = 10,
                              degree: int = 3) -> float:
    """Calibrated Lambda*: Richardson-extrapolated E[V_N] / (N^{3/2} J_1).

    Exhaustive enumeration gives E[V_N] exactly for N <= n_max; the ratio
    E[V_N]/N^{3/2} has an expansion in integer powers of h = N^{-1/2}, so a
    polynomial fit in h recovers the limit Lambda * J_1.  Degree 3 balances
    series truncation against extrapolation amplification on the short grid
    (higher degrees chase the tail and overshoot).
    """
    ns = np.arange(2, n_max + 1)
    y = np.array([enumerated_mean_quenched_variance(system, int(n)) / n**1.5
                  for n in ns])
    h = 1.0 / np.sqrt(ns.astype(float))
    return richardson_extrapolate(h, y, degree=degree) / j1_closed_form()


# ---------------------------------------------------------------------------
# higher moments J_k over two-to-one index pairings
# ---------------------------------------------------------------------------

MAX_MOMENT_ORDER = 5


class MomentOrderError(ValueError):
    """Raised beyond the exhaustive-enumeration cap on the pairing set."""


def two_to_one_mappings(k: int) -> np.ndarray:
    """All maps v: {1..2k} -> {1..k} with every value hit exactly twice.

    Returned as an ((2k)!/2^k, 2k) array; deterministic lexicographic order.
    """
    out: list[tuple[int, ...]] = []
    counts = [0] * (k + 1)

    def rec(prefix):
        if len(prefix) == 2 * k:
            out.append(tuple(prefix))
            return
        for val in range(1, k + 1):
            if counts[val] < 2:
                counts[val] += 1
                prefix.append(val)
                rec(prefix)
                prefix.pop()
                counts[val] -= 1

    rec([])
    return np.array(out, dtype=np.int64)


def _pairing_determinants(v: np.ndarray, gaps: np.ndarray) -> np.ndarray:
    """det of the anchored chain quadratic form, batched over gap samples."""
    n, two_k = gaps.shape
    k = two_k // 2
    a_mat = np.zeros((n, k, k))
    prev = 0
    for j in range(two_k):
        cur = int(v[j])
        coef = 1.0 / gaps[:, j]
        if prev == 0:
            a_mat[:, cur - 1, cur - 1] += coef
        elif cur != prev:
            a_mat[:, cur - 1, cur - 1] += coef
            a_mat[:, prev - 1, prev - 1] += coef
            a_mat[:, cur - 1, prev - 1] -= coef
            a_mat[:, prev - 1, cur - 1] -= coef
        prev = cur
    return np.linalg.det(a_mat)


def jk_monte_carlo(k: int, samples: int, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo J_k = E[(L^2)^k] over the simplex-times-Gaussian integral.

    The Gaussian block over w integrates exactly per sample (the chain of
    kernels is an unnormalized Gaussian whose mass is (2 pi)^{-k/2}
    det^{-1/2} of the anchored quadratic form), so sampling is only over the
    ordered times; their gaps are drawn Dirichlet(1/2,...,1/2; 1), which
    absorbs the prod (t_j - t_{j-1})^{-1/2} singularities into the proposal.
    The pairing set V is enumerated exhaustively, (2k)!/2^k maps.
    """
    if k < 1:
        raise ValueError("moment order must be positive")
    if k > MAX_MOMENT_ORDER:
        raise MomentOrderError(
            f"|V| = (2k)!/2^k blows up combinatorially; k <= {MAX_MOMENT_ORDER}")
    if samples < 10**4:
        raise ValueError("need at least 1e4 samples")
    rng = generator(seed, STREAM_QUADRATURE)
    alpha = np.array([0.5] * (2 * k) + [1.0])
    gaps = rng.dirichlet(alpha, size=samples)[:, : 2 * k]
    gaps = np.maximum(gaps, 1e-300)
    total = np.zeros(samples)
    for v in two_to_one_mappings(k):
        total += 1.0 / np.sqrt(_pairing_determinants(v, gaps))
    scale = (2.0 * math.pi) ** (k / 2.0) / math.factorial(k)
    est = scale * float(total.mean())
    se = scale * float(total.std(ddof=1) / math.sqrt(samples))
    return est, se


@dataclass
class MomentTable:
    """k -> J_k with provenance and Monte Carlo errors."""

    orders: list[int] = field(default_factory=list)
    values: list[float] = field(default_factory=list)
    errors: list[float] = field(default_factory=list)
    methods: list[str] = field(default_factory=list)

    def add(self, k: int, value: float, error: float, method: str):
        if value <= 0:
            raise ValueError("J_k must be positive")
        self.orders.append(k)
        self.values.append(value)
        self.errors.append(error)
        self.methods.append(method)

    def growth_ratios(self) -> np.ndarray:
        """(J_k / k!)^{1/k}: bounded iff the moment generating bound holds."""
        return np.array([(v / math.factorial(k)) ** (1.0 / k)
                         for k, v in zip(self.orders, self.values)])

    def as_dict(self):
        return {str(k): {"value": v, "error": e, "method": m}
                for k, v, e, m in zip(self.orders, self.values,
                                      self.errors, self.methods)}


def simplex_integral_check(k: int, samples: int, seed: int = 0) -> tuple[float, float, float]:
    """MC estimate of int_{0<t_1<...<t_{2k}<1} prod (t_j - t_{j-1})^{-1/2} dt.

    Substituting gap_j = u_j^2 turns the integral into 4^k times the volume
    of the positive-orthant unit 2k-ball, so the estimator is a clean
    acceptance frequency.  Returns (estimate, exact pi^k/k!, standard error).
    """
    if not 1 <= k <= 4:
        raise ValueError("simplex check supports k in 1..4")
    rng = generator(seed, STREAM_QUADRATURE, 100 + k)
    u = rng.random((samples, 2 * k))
    accept = (u * u).sum(axis=1) < 1.0
    p_hat = float(accept.mean())
    est = 4.0**k * p_hat
    se = 4.0**k * math.sqrt(max(p_hat * (1 - p_hat), 1.0 / samples) / samples)
    exact = math.pi**k / math.factorial(k)
    return est, exact, se


# ---------------------------------------------------------------------------
# Brownian local-time sampler
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KestenSpitzerSampler:
    """Binned occupation sampler for L = sqrt(int ell_x^2 dx) at time 1.

    The default bin width 0.75 / sqrt(steps) balances the two discretization
    errors, which have opposite signs: bin smoothing deflates sum ell^2 by
    O(dx), discrete-time pileup inflates it by O(1/(steps * dx)).  Both ends
    of the balance are exercised by the refinement invariant in the tests.
    """

    steps: int = 10**4
    dx: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.steps < 10**4:
            raise ValueError("need at least 1e4 Brownian steps")
        if self.dx is None:
            object.__setattr__(self, "dx", 0.75 / math.sqrt(self.steps))
        if not 0 < self.dx <= self.steps ** -0.25:
            raise ValueError("bin width must satisfy 0 < dx <= steps^(-1/4)")


def binned_occupation(positions: np.ndarray, dx: float) -> np.ndarray:
    """Occupation density ell_hat per dx-cell of one discrete path.

    ell_hat[b] = (fraction of time in cell b) / dx, so sum ell_hat * dx = 1
    exactly for every path.
    """
    bins = np.floor(np.asarray(positions) / dx).astype(np.int64)
    counts = np.bincount(bins - bins.min())
    return counts / (len(positions) * dx)


def kesten_spitzer_sample(sampler: KestenSpitzerSampler, n_samples: int,
                          chunk: int = 512) -> np.ndarray:
    """Draw n_samples values of L.

    Each sample simulates a standard Brownian path on [0,1] by Gaussian
    increments, bins the occupation measure into dx cells and returns
    sqrt(sum ell_hat^2 dx).  The occupation measure has total mass 1 per
    path by construction; the binning bias is O(dx) and the time
    discretization bias O(1/(steps * dx)), both controlled by the
    refinement invariant tested alongside.
    """
    m_steps, dx = sampler.steps, sampler.dx
    out = np.empty(n_samples)
    scale = 1.0 / math.sqrt(m_steps)
    done = 0
    chunk_i = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        rng = generator(sampler.seed, STREAM_BROWNIAN, chunk_i)
        incs = rng.standard_normal((m, m_steps))
        np.multiply(incs, scale, out=incs)
        pos = np.cumsum(incs, axis=1)
        for i in range(m):
            ell = binned_occupation(pos[i], dx)
            out[done + i] = math.sqrt(np.dot(ell, ell) * dx)
        done += m
        chunk_i += 1
    return out


def limit_law_sample_d1(constants: LimitConstants, sampler: KestenSpitzerSampler,
                        n_samples: int, seed: int = 0,
                        l_values: np.ndarray | None = None) -> np.ndarray:
    """Draws of the d=1 limit sqrt(Lambda) * L * Z, L and Z independent.

    ``l_values`` may supply a precomputed bank of L draws (they are expensive);
    otherwise the sampler generates fresh ones.
    """
    lam = constants.lam.value
    if lam < 0:
        raise ValueError("Lambda must be nonnegative")
    if l_values is None:
        l_values = kesten_spitzer_sample(sampler, n_samples)
    else:
        if len(l_values) < n_samples:
            raise ValueError("provided L bank is too small")
        l_values = np.asarray(l_values)[:n_samples]
    rng = generator(seed, STREAM_BROWNIAN, 10**6)
    z = rng.standard_normal(n_samples)
    return math.sqrt(lam) * l_values * z
