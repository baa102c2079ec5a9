"""Ergodic sums along the skew product and their quenched variance.

With the product observable H(x, y) = A(x) B(y), A constant and B the
scenery value at the origin, the ergodic sum over one base orbit is the
scenery summed along the cocycle path,

    S_N = sum_{n < N} A * xi_{tau_n} = A * sum_z ell_z xi_z,

so everything here runs on exact site counts.  The quenched variance
V_N(x) = int S_N^2 dnu has the closed form sum_{z,z'} ell_z ell_{z'}
rho(z - z'), which is exact for iid and truncated-kernel models; a Monte
Carlo version over fresh fiber seeds exists purely as an independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import (BaseSystem, CocycleTrajectory, OccupationProfile,
                   _walk_step_ids_batch, exact_site_counts)
from .rng import STREAM_BASE, STREAM_FIBER, generator
from .scenery import SceneryField, SceneryModel, correlation


class UnsupportedObservableError(ValueError):
    """Raised when an operation needs the constant-base product form."""


@dataclass(frozen=True)
class Observable:
    """Product observable H(x, y) = A(x) * B(y).

    ``base_const`` is the constant base part A (1 by default); ``base_fn``
    may carry a non-constant base observable, which the closed-form variance
    path refuses.  B is always the scenery value at the origin; ``centered``
    records that the fiber marginal has mean zero.
    """

    base_const: float = 1.0
    base_fn: object = None
    centered: bool = True


def ergodic_sum(traj: CocycleTrajectory, fld: SceneryField,
                h: Observable = Observable()) -> float:
    """S_N = sum_n A * B(scenery at tau_n), via site counts."""
    if h.base_fn is not None:
        raise UnsupportedObservableError("ergodic sums support constant base parts only")
    prof = exact_site_counts(traj)
    vals = fld.values(prof.sites)
    return h.base_const * float(np.dot(prof.counts, vals))


@dataclass
class QuenchedVariance:
    value: float
    method: str            # closed-form | monte-carlo
    se: float = 0.0


def _counts_on_grid(prof: OccupationProfile) -> tuple[np.ndarray, np.ndarray]:
    """Dense count array over the bounding box, plus the box origin."""
    lo = prof.sites.min(axis=0)
    shape = tuple(prof.sites.max(axis=0) - lo + 1)
    grid = np.zeros(shape, dtype=np.float64)
    grid[tuple((prof.sites - lo).T)] = prof.counts
    return grid, lo


def quenched_variance_closed(traj: CocycleTrajectory, model: SceneryModel,
                             h: Observable = Observable()) -> QuenchedVariance:
    """Exact V_N = A^2 sum_{z,z'} ell_z ell_{z'} rho(z - z')."""
    if h.base_fn is not None:
        raise UnsupportedObservableError(
            "closed-form quenched variance needs the constant-base product form")
    prof = exact_site_counts(traj)
    if model.kind == "iid":
        v = model.variance * float(np.dot(prof.counts, prof.counts))
        return QuenchedVariance(value=h.base_const**2 * v, method="closed-form")
    # rho is supported on |u| <= 2R; correlate the dense count grid with it
    grid, _ = _counts_on_grid(prof)
    reach = 2 * model.radius
    d = grid.ndim
    total = 0.0
    axes = [np.arange(-reach, reach + 1)] * d
    offsets = np.array(np.meshgrid(*axes, indexing="ij")).reshape(d, -1).T
    for u in offsets:
        rho = correlation(model, u)
        if rho == 0.0:
            continue
        src = tuple(slice(max(0, -ui), grid.shape[k] - max(0, ui))
                    for k, ui in enumerate(u))
        dst = tuple(slice(max(0, ui), grid.shape[k] - max(0, -ui))
                    for k, ui in enumerate(u))
        total += rho * float(np.sum(grid[src] * grid[dst]))
    return QuenchedVariance(value=h.base_const**2 * total, method="closed-form")


def quenched_variance_mc(traj: CocycleTrajectory, model: SceneryModel,
                         fiber_trials: int, seed: int = 0,
                         h: Observable = Observable()) -> QuenchedVariance:
    """Monte Carlo V_N: average S_N^2 over fresh fiber seeds, fixed path."""
    if fiber_trials < 100:
        raise ValueError("need at least 100 fiber trials")
    prof = exact_site_counts(traj)
    sq = np.empty(fiber_trials)
    for i in range(fiber_trials):
        fld = SceneryField(model, seed=_fiber_seed(seed, i))
        s = h.base_const * float(np.dot(prof.counts, fld.values(prof.sites)))
        sq[i] = s * s
    return QuenchedVariance(value=float(sq.mean()), method="monte-carlo",
                            se=float(sq.std(ddof=1) / math.sqrt(fiber_trials)))


def _fiber_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence(entropy=master,
                                      spawn_key=(STREAM_FIBER, index)).generate_state(1)[0])


# ---------------------------------------------------------------------------
# covariance decay of the skew product
# ---------------------------------------------------------------------------

@dataclass
class CovarianceRow:
    k: int
    scaled_cov: float      # k^{d/2} * cov(k)
    se: float
    target: float          # g(0) * varsigma2^2


def covariance_decay(system: BaseSystem, model: SceneryModel, k_grid,
                     trials: int, seed: int = 0, path_factor: int = 4,
                     h: Observable = Observable()) -> list[CovarianceRow]:
    """Estimate k^{d/2} * int H H o F^k dzeta on a grid of lags.

    Each trial runs one (base orbit, fiber) pair of length path_factor *
    max(k) and averages xi_{tau_m} xi_{tau_{m+k}} over all time origins m,
    which is unbiased by stationarity and far tighter than a single-origin
    estimate.  Standard errors come from the spread across trials.
    """
    k_grid = list(k_grid)
    if sorted(set(k_grid)) != k_grid or not k_grid or k_grid[0] < 8:
        raise ValueError("lag grid must be increasing with smallest lag >= 8")
    if system.kind == "doubling-map":
        raise ValueError("covariance decay runs on walk bases")
    if h.base_fn is not None:
        raise UnsupportedObservableError("constant base parts only")
    from .base import gaussian_density_at
    from .scenery import varsigma2
    d = system.dimension
    amp = h.base_const**2
    n_path = path_factor * k_grid[-1]
    target = gaussian_density_at(system.step_covariance()) \
        * varsigma2(model, h.base_const)
    per_trial = np.empty((trials, len(k_grid)))
    for i in range(trials):
        rng = generator(seed, STREAM_BASE, i)
        ids = _walk_step_ids_batch(system, rng, 1, n_path)[0]
        path = np.vstack([np.zeros(d, dtype=np.int64),
                          np.cumsum(system.step_vectors()[ids], axis=0)])[:n_path]
        fld = SceneryField(model, seed=_fiber_seed(seed, i))
        xi = fld.values(path)
        for j, k in enumerate(k_grid):
            per_trial[i, j] = amp * float(np.dot(xi[:-k], xi[k:])) / (n_path - k)
    rows = []
    for j, k in enumerate(k_grid):
        scale = k ** (d / 2.0)
        m = float(per_trial[:, j].mean())
        se = float(per_trial[:, j].std(ddof=1) / math.sqrt(trials))
        rows.append(CovarianceRow(k=k, scaled_cov=scale * m, se=scale * se,
                                  target=target))
    return rows


# ---------------------------------------------------------------------------
# occupation measures and the moment condition
# ---------------------------------------------------------------------------

@dataclass
class NormalizedOccupationMeasure:
    """Occupation measure of the path, normalized per limit-theorem mode."""

    sites: np.ndarray
    multiplicities: np.ndarray
    normalization: float
    n: int

    @property
    def total_mass(self) -> float:
        return self.n / self.normalization


def build_measure(traj: CocycleTrajectory, mode: str,
                  v_n: float | None = None) -> NormalizedOccupationMeasure:
    """Atoms at the path points; normalization sqrt(N ln N) or sqrt(V_N)."""
    prof = exact_site_counts(traj)
    if mode == "d2":
        norm = math.sqrt(traj.n * math.log(traj.n))
    elif mode == "d1-self-normalized":
        if v_n is None or v_n <= 0.0:
            raise ValueError("self-normalized measure needs V_N > 0")
        norm = math.sqrt(v_n)
    else:
        raise ValueError(f"unknown measure mode {mode!r}")
    return NormalizedOccupationMeasure(sites=prof.sites,
                                       multiplicities=prof.counts,
                                       normalization=norm, n=traj.n)


def bg_condition_b(traj: CocycleTrajectory, r: int, radius: float,
                   normalization: float) -> float:
    """Moment-condition statistic of the occupation measure.

    Returns normalization^{-r/2} * sum_n Card^{r-1}(j < N : |tau_j - tau_n|
    <= radius), sup norm.  Small values certify the separation condition the
    self-normalized CLT needs.
    """
    if r < 3:
        raise ValueError("the condition is stated for r >= 3")
    if radius <= 0 or normalization <= 0:
        raise ValueError("radius and normalization must be positive")
    prof = exact_site_counts(traj)
    rad = int(math.floor(radius))
    grid, lo = _counts_on_grid(prof)
    window = _box_window_sum(grid, rad)
    # sum over time indices n equals sum over sites weighted by exact counts
    card = window[tuple((prof.sites - lo).T)]
    total = float(np.dot(prof.counts, card ** (r - 1)))
    return normalization ** (-r / 2.0) * total


def _box_window_sum(grid: np.ndarray, rad: int) -> np.ndarray:
    """Sum of grid over the centered (2 rad + 1)^d sup-norm box, per cell."""
    if rad == 0:
        return grid.copy()
    out = grid
    for axis in range(grid.ndim):
        pad_shape = list(out.shape)
        pad_shape[axis] = rad
        z = np.zeros(pad_shape)
        padded = np.concatenate([z, out, z], axis=axis)
        one = list(out.shape)
        one[axis] = 1
        prefix = np.concatenate([np.zeros(one), np.cumsum(padded, axis=axis)],
                                axis=axis)
        n = out.shape[axis]
        hi = np.take(prefix, np.arange(n) + 2 * rad + 1, axis=axis)
        lo = np.take(prefix, np.arange(n), axis=axis)
        out = hi - lo
    return out
