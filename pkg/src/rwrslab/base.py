"""Base systems and their cocycles.

Three base systems drive the skew products:

* ``lazy-walk-z1``: steps -1/0/+1 on Z with hold probability p;
* ``lazy-walk-z2``: hold p, otherwise a uniform nearest-neighbour move on Z^2;
* ``doubling-map``: x -> 2x mod 1 on [0,1) with an integer-valued, zero-mean
  step function given by breakpoints and values.

The doubling map is realized through its symbolic dynamics: the orbit of a
Lebesgue-random point is read off a seeded iid bit stream (float iteration of
x -> 2x collapses onto 0, and so does a 64-bit shift register).  Orbit points
are reconstructed from a sliding 53-bit window only when the step function
has non-dyadic breakpoints.

Besides simulation, this module carries the exact machinery used as oracles
elsewhere: convolution powers of the step distribution, exact local-time
profiles, closed-form step autocovariances of the doubling map, and the two
empirical hypothesis diagnostics (local-limit and anticoncentration).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .rng import STREAM_BASE, STREAM_DIAGNOSTIC, generator

_WINDOW_BITS = 53
_DOUBLING_AUTOCOV_CUTOFF = 50

KINDS = ("lazy-walk-z1", "lazy-walk-z2", "doubling-map")


class DegenerateSystemError(ValueError):
    """Raised when a base system violates its construction invariants."""


# ---------------------------------------------------------------------------
# systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BaseSystem:
    """A base map with an integer-valued skewing cocycle.

    Walks carry ``p_hold``; the doubling map carries the step function
    (``breakpoints`` strictly increasing in (0,1), ``values`` one longer,
    integer, with zero Lebesgue mean).
    """

    kind: str
    dimension: int
    p_hold: float = 0.0
    breakpoints: tuple[float, ...] = ()
    values: tuple[int, ...] = ()
    label: str = "base"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DegenerateSystemError(f"unknown base system kind {self.kind!r}")
        if self.kind == "doubling-map":
            if self.dimension != 1:
                raise DegenerateSystemError("doubling-map cocycles are one-dimensional")
            if len(self.values) != len(self.breakpoints) + 1:
                raise DegenerateSystemError("need one more value than breakpoints")
            edges = (0.0,) + self.breakpoints + (1.0,)
            if any(b <= a for a, b in zip(edges, edges[1:])):
                raise DegenerateSystemError("breakpoints must be strictly increasing in (0,1)")
            if any(v != int(v) for v in self.values):
                raise DegenerateSystemError("cocycle values must be integers")
            mean = sum(v * (b - a) for v, a, b in zip(self.values, edges, edges[1:]))
            if abs(mean) > 1e-12:
                raise DegenerateSystemError(f"cocycle has non-zero mean {mean:.3g}")
        else:
            if not 0.0 <= self.p_hold < 1.0:
                raise DegenerateSystemError("hold probability must lie in [0, 1)")
            if self.dimension not in (1, 2):
                raise DegenerateSystemError("walks are supported on Z^1 and Z^2")

    # step alphabet: id 0 holds, ids 1..2d are +-e_1, +-e_2
    def step_vectors(self) -> np.ndarray:
        d = self.dimension
        vecs = np.zeros((2 * d + 1, d), dtype=np.int64)
        for j in range(d):
            vecs[1 + 2 * j, j] = 1
            vecs[2 + 2 * j, j] = -1
        return vecs

    def step_probs(self) -> np.ndarray:
        d = self.dimension
        q = (1.0 - self.p_hold) / (2 * d)
        return np.array([self.p_hold] + [q] * (2 * d))

    def step_covariance(self) -> np.ndarray:
        """Exact per-step covariance matrix of the cocycle increment."""
        if self.kind == "doubling-map":
            return np.array([[doubling_step_variance(self)]])
        vecs = self.step_vectors().astype(float)
        probs = self.step_probs()
        return np.einsum("s,si,sj->ij", probs, vecs, vecs)

    def max_step(self) -> int:
        if self.kind == "doubling-map":
            return int(max(abs(v) for v in self.values))
        return 1


def lazy_walk_z1(p_hold: float = 1.0 / 3.0) -> BaseSystem:
    return BaseSystem(kind="lazy-walk-z1", dimension=1, p_hold=p_hold)


def lazy_walk_z2(p_hold: float = 1.0 / 3.0) -> BaseSystem:
    return BaseSystem(kind="lazy-walk-z2", dimension=2, p_hold=p_hold)


def doubling_map(breakpoints=(0.5,), values=(1, -1)) -> BaseSystem:
    # values validated (integer lattice) in BaseSystem, not coerced here
    return BaseSystem(
        kind="doubling-map", dimension=1,
        breakpoints=tuple(float(b) for b in breakpoints),
        values=tuple(values),
    )


def doubling_map_thirds() -> BaseSystem:
    """Aperiodic doubling cocycle: +1, 0, -1 on thirds of the circle."""
    return doubling_map(breakpoints=(1.0 / 3.0, 2.0 / 3.0), values=(1, 0, -1))


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass
class CocycleTrajectory:
    """Cocycle path tau_0..tau_{N-1}; tau_0 = 0 always.

    ``values`` is (N,) int64 in dimension one and (N, 2) in dimension two.
    ``step_ids`` (walks) and ``orbit`` (doubling map) keep enough of the base
    orbit for base observables; both are optional.
    """

    values: np.ndarray
    seed: int
    dimension: int
    step_ids: np.ndarray | None = None
    orbit: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _walk_step_ids(system: BaseSystem, rng: np.random.Generator, n: int) -> np.ndarray:
    # draw order (uniforms, then directions) is part of the determinism contract
    u = rng.random(n)
    dirs = rng.integers(0, 2 * system.dimension, size=n)
    return np.where(u < system.p_hold, 0, 1 + dirs).astype(np.int64)


def _doubling_bits(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(0, 2, size=n, dtype=np.uint8)


def doubling_orbit_from_bits(bits: np.ndarray, n: int) -> np.ndarray:
    """Orbit points x_0..x_{n-1} from the binary digit stream of x_0."""
    if bits.shape[0] < n + _WINDOW_BITS - 1:
        raise ValueError("bit stream too short for requested orbit length")
    kernel = 2.0 ** -(np.arange(1, _WINDOW_BITS + 1, dtype=np.float64))
    windows = np.lib.stride_tricks.sliding_window_view(bits, _WINDOW_BITS)[:n]
    return windows.astype(np.float64) @ kernel


def _doubling_steps(system: BaseSystem, bits: np.ndarray, n: int,
                    want_orbit: bool = False) -> tuple[np.ndarray, np.ndarray | None]:
    if system.breakpoints == (0.5,) and not want_orbit:
        vals = np.array(system.values, dtype=np.int64)
        return vals[bits[:n]], None
    x = doubling_orbit_from_bits(bits, n)
    idx = np.searchsorted(np.asarray(system.breakpoints), x, side="right")
    vals = np.array(system.values, dtype=np.int64)
    return vals[idx], x


def steps_to_path(steps: np.ndarray, dimension: int,
                  vectors: np.ndarray | None = None) -> np.ndarray:
    """Prefix sums with tau_0 = 0 prepended; ``steps`` are ids if vectors given."""
    if vectors is not None:
        steps = vectors[steps]
    if dimension == 1:
        out = np.zeros(steps.shape[0] + 1, dtype=np.int64)
        np.cumsum(steps.reshape(-1), out=out[1:])
    else:
        out = np.zeros((steps.shape[0] + 1, dimension), dtype=np.int64)
        np.cumsum(steps, axis=0, out=out[1:])
    return out


def simulate_cocycle(system: BaseSystem, seed: int, n: int) -> CocycleTrajectory:
    """Simulate tau_0..tau_{n-1}. Deterministic function of (system, seed, n)."""
    if n < 1:
        raise ValueError("trajectory length must be at least 1")
    rng = generator(seed, STREAM_BASE)
    if system.kind == "doubling-map":
        bits = _doubling_bits(rng, n + _WINDOW_BITS)
        steps, orbit = _doubling_steps(system, bits, n, want_orbit=True)
        values = steps_to_path(steps[: n - 1], 1)
        return CocycleTrajectory(values=values, seed=seed, dimension=1, orbit=orbit)
    ids = _walk_step_ids(system, rng, n)
    values = steps_to_path(ids[: n - 1], system.dimension, system.step_vectors())
    return CocycleTrajectory(values=values, seed=seed, dimension=system.dimension,
                             step_ids=ids)


def doubling_trajectory_from_point(system: BaseSystem, x0: Fraction | float,
                                   n: int) -> CocycleTrajectory:
    """Exact doubling orbit from a given initial point (rational arithmetic)."""
    if system.kind != "doubling-map":
        raise ValueError("only doubling-map systems have explicit orbits")
    x = Fraction(x0).limit_denominator(10**12) if not isinstance(x0, Fraction) else x0
    breaks = [Fraction(b).limit_denominator(10**12) for b in system.breakpoints]
    orbit, steps = [], []
    for _ in range(n):
        orbit.append(float(x))
        piece = sum(1 for b in breaks if x >= b)
        steps.append(system.values[piece])
        x = (2 * x) % 1
    values = steps_to_path(np.array(steps[: n - 1], dtype=np.int64), 1)
    return CocycleTrajectory(values=values, seed=-1, dimension=1,
                             orbit=np.array(orbit))


def trajectory_to_csv(traj: CocycleTrajectory, path) -> None:
    """Dump (n, tau_n) columns for debugging."""
    vals = traj.values.reshape(traj.n, -1)
    cols = np.column_stack([np.arange(traj.n), vals])
    np.savetxt(path, cols, fmt="%d", header="n tau", comments="")


# ---------------------------------------------------------------------------
# occupation profiles
# ---------------------------------------------------------------------------

@dataclass
class OccupationProfile:
    """Counts over visited window centers.

    ``radius`` 1 is the sup-norm window count Card(n < N : |tau_n - t| <= 1);
    radius 0 is the exact-visit count.  Sites with zero count are omitted.
    """

    sites: np.ndarray          # (k, d) int64
    counts: np.ndarray         # (k,) int64
    radius: int
    n: int

    def count(self, site) -> int:
        site = np.atleast_1d(np.asarray(site, dtype=np.int64))
        hit = np.all(self.sites == site[None, :], axis=1)
        idx = np.nonzero(hit)[0]
        return int(self.counts[idx[0]]) if idx.size else 0

    def as_dict(self) -> dict:
        keys = (tuple(s) if s.size > 1 else int(s[0]) for s in self.sites)
        return {k: int(c) for k, c in zip(keys, self.counts)}

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _site_matrix(traj: CocycleTrajectory) -> np.ndarray:
    return traj.values.reshape(traj.n, -1)


def exact_site_counts(traj: CocycleTrajectory) -> OccupationProfile:
    """Exact visit counts: sum of counts equals the path length."""
    pts = _site_matrix(traj)
    sites, counts = np.unique(pts, axis=0, return_counts=True)
    return OccupationProfile(sites=sites, counts=counts.astype(np.int64),
                             radius=0, n=traj.n)


def local_time_profile(traj: CocycleTrajectory) -> OccupationProfile:
    """Window counts ell(t) = Card(n < N : |tau_n - t| <= 1), sup-norm."""
    exact = exact_site_counts(traj)
    d = exact.sites.shape[1]
    offsets = np.array(np.meshgrid(*([[-1, 0, 1]] * d), indexing="ij")).reshape(d, -1).T
    smeared = (exact.sites[:, None, :] + offsets[None, :, :]).reshape(-1, d)
    weights = np.repeat(exact.counts, offsets.shape[0])
    sites, inv = np.unique(smeared, axis=0, return_inverse=True)
    counts = np.bincount(inv, weights=weights).astype(np.int64)
    return OccupationProfile(sites=sites, counts=counts, radius=1, n=traj.n)


# ---------------------------------------------------------------------------
# exact step-distribution machinery (oracle side of the diagnostics)
# ---------------------------------------------------------------------------

def walk_distribution(system: BaseSystem, n: int,
                      initial: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Exact distribution of tau_n by convolution powers.

    Returns (origin, probs): in d=1 ``probs[i]`` is P(tau_n = origin + i);
    in d=2 ``probs`` is a (2n+1, 2n+1) array indexed the same way per axis.
    Walks only.
    """
    if system.kind == "doubling-map":
        raise ValueError("exact distributions are implemented for walks only")
    d, p = system.dimension, system.p_hold
    q = (1.0 - p) / (2 * d)
    if d == 1:
        pmf = np.array([q, p, q])
        dist = np.array([1.0]) if initial is None else initial
        for _ in range(n):
            dist = np.convolve(dist, pmf)
        origin = -(dist.shape[0] - 1) // 2
        return origin, dist
    dist = np.ones((1, 1)) if initial is None else initial
    for _ in range(n):
        m = dist.shape[0]
        new = np.zeros((m + 2, m + 2))
        new[1:-1, 1:-1] += p * dist
        new[:-2, 1:-1] += q * dist
        new[2:, 1:-1] += q * dist
        new[1:-1, :-2] += q * dist
        new[1:-1, 2:] += q * dist
        dist = new
    origin = -(dist.shape[0] - 1) // 2
    return origin, dist


def walk_point_probability(system: BaseSystem, n: int, z) -> float:
    """Exact P(tau_n = z) for a walk."""
    origin, dist = walk_distribution(system, n)
    z = np.atleast_1d(np.asarray(z, dtype=np.int64))
    idx = z - origin
    if np.any(idx < 0) or np.any(idx >= dist.shape[0]):
        return 0.0
    return float(dist[tuple(idx)]) if system.dimension == 2 else float(dist[idx[0]])


def doubling_step_autocovariance(system: BaseSystem, k: int) -> float:
    """Exact c_k = int s(x) s(2^k x mod 1) dx for a piecewise-constant step s.

    Uses the transfer-operator average g_k(u) = 2^{-k} sum_j s((j+u)/2^k),
    which is piecewise constant in u with at most one breakpoint per
    breakpoint of s; both factors are integrated on the common refinement.
    """
    edges = np.array((0.0,) + system.breakpoints + (1.0,))
    vals = np.array(system.values, dtype=float)
    if k == 0:
        return float(np.sum(vals**2 * np.diff(edges)))
    pow2 = 2.0**k
    u_breaks = np.unique(np.concatenate([edges, (pow2 * edges[1:-1]) % 1.0, [0.0, 1.0]]))
    total = 0.0
    for lo, hi in zip(u_breaks[:-1], u_breaks[1:]):
        mid = 0.5 * (lo + hi)
        counts = np.ceil(pow2 * edges[1:] - mid) - np.ceil(pow2 * edges[:-1] - mid)
        g_val = float(np.dot(counts, vals)) / pow2
        s_val = vals[np.searchsorted(edges[1:-1], mid, side="right")]
        total += s_val * g_val * (hi - lo)
    return total


def doubling_step_variance(system: BaseSystem) -> float:
    """Green-Kubo variance c_0 + 2 sum_k c_k of the doubling cocycle.

    The tail is bounded by the 2^{-k} decay of the transfer average, so the
    truncation error at the cutoff is far below double precision.
    """
    var = doubling_step_autocovariance(system, 0)
    for k in range(1, _DOUBLING_AUTOCOV_CUTOFF + 1):
        var += 2.0 * doubling_step_autocovariance(system, k)
    return var


# ---------------------------------------------------------------------------
# diffusivity
# ---------------------------------------------------------------------------

@dataclass
class DiffusivityEstimate:
    """Diffusive normalization of a base system.

    ``covariance`` is the exact (analytic or Green-Kubo) per-step covariance;
    ``empirical_variance``/``empirical_se`` come from Var(tau_N)/N over Monte
    Carlo trials and exist as a cross-check.
    """

    covariance: np.ndarray
    g0: float
    method: str
    empirical_variance: np.ndarray
    empirical_se: np.ndarray

    @property
    def sigma1(self) -> float:
        if self.covariance.shape[0] != 1:
            raise ValueError("sigma1 is the scalar standard deviation, d=1 only")
        return float(np.sqrt(self.covariance[0, 0]))


def gaussian_density_at(cov: np.ndarray, z: np.ndarray | None = None) -> float:
    """Value of the centered Gaussian density with covariance ``cov``."""
    cov = np.atleast_2d(cov)
    d = cov.shape[0]
    det = float(np.linalg.det(cov))
    if det <= 0:
        raise DegenerateSystemError("degenerate step covariance")
    norm = (2.0 * math.pi) ** (-d / 2.0) / math.sqrt(det)
    if z is None:
        return norm
    z = np.atleast_1d(np.asarray(z, dtype=float))
    quad = float(z @ np.linalg.solve(cov, z))
    return norm * math.exp(-0.5 * quad)


def estimate_diffusivity(system: BaseSystem, trials: int, n: int,
                         seed: int = 0) -> DiffusivityEstimate:
    """Exact diffusivity plus a Monte Carlo cross-check.

    Walks get the analytic step covariance; the doubling map gets the exact
    Green-Kubo series.  The empirical covariance of tau_n/sqrt(n) over
    ``trials`` trajectories is attached with its standard error.
    """
    if trials < 100:
        raise ValueError("need at least 100 trials for the empirical cross-check")
    cov = system.step_covariance()
    method = "green-kubo" if system.kind == "doubling-map" else "analytic"
    endpoints = np.empty((trials, system.dimension))
    for i in range(trials):
        rng = generator(seed, STREAM_BASE, i)
        if system.kind == "doubling-map":
            bits = _doubling_bits(rng, n + _WINDOW_BITS)
            steps, _ = _doubling_steps(system, bits, n)
            endpoints[i, 0] = steps.sum()
        else:
            ids = _walk_step_ids(system, rng, n)
            endpoints[i] = system.step_vectors()[ids].sum(axis=0)
    scaled = endpoints / math.sqrt(n)
    emp_cov = np.atleast_2d(np.cov(scaled, rowvar=False))
    if np.linalg.det(emp_cov) <= 0:
        raise DegenerateSystemError("degenerate empirical covariance")
    # relative error of a sample variance is ~ sqrt(2/(trials-1)) near normal
    emp_se = np.abs(emp_cov) * math.sqrt(2.0 / (trials - 1))
    return DiffusivityEstimate(covariance=cov, g0=gaussian_density_at(cov),
                               method=method, empirical_variance=emp_cov,
                               empirical_se=emp_se)


# ---------------------------------------------------------------------------
# base observables for the diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BaseObservable:
    """Small family of base-space observables the diagnostics support.

    ``const``: the constant ``value``;
    ``symbol``: a weight per step symbol (walks, evaluated on the current step);
    ``interval``: the indicator of [a, b) on the circle (doubling map).
    """

    kind: str = "const"
    value: float = 1.0
    weights: tuple[float, ...] = ()
    a: float = 0.0
    b: float = 1.0

    def mean(self, system: BaseSystem) -> float:
        if self.kind == "const":
            return self.value
        if self.kind == "symbol":
            return float(np.dot(self.weights, system.step_probs()))
        if self.kind == "interval":
            return self.b - self.a
        raise ValueError(f"unknown observable kind {self.kind!r}")


CONST_ONE = BaseObservable()


def _observable_mc_weights(obs: BaseObservable, step_ids: np.ndarray | None,
                           orbit_points: np.ndarray | None) -> np.ndarray | float:
    if obs.kind == "const":
        return obs.value
    if obs.kind == "symbol":
        return np.asarray(obs.weights)[step_ids]
    return ((orbit_points >= obs.a) & (orbit_points < obs.b)).astype(float)


# ---------------------------------------------------------------------------
# mixing local limit diagnostic
# ---------------------------------------------------------------------------

@dataclass
class MlltRow:
    n: int
    estimate: float
    se: float
    target: float
    warn: bool


def _cube_bounds(cube, dimension: int) -> np.ndarray:
    bounds = np.atleast_2d(np.asarray(cube, dtype=float))
    if bounds.shape != (dimension, 2) or np.any(bounds[:, 1] <= bounds[:, 0]):
        raise ValueError("cube must give one (lo, hi) pair per dimension with lo < hi")
    return bounds


def _mllt_exact_value(system: BaseSystem, a0: BaseObservable, a1: BaseObservable,
                      bounds: np.ndarray, z: np.ndarray, n: int) -> float:
    # A1 reads the step symbol at time n, independent of tau_n; A0 weights the
    # first step, so it enters as a reweighted one-step initial distribution.
    probs = system.step_probs()
    if a0.kind == "interval" or a1.kind == "interval":
        raise ValueError("exact mode supports walks (const/symbol observables) only")
    w0 = np.full(probs.shape, a0.value) if a0.kind == "const" else np.asarray(a0.weights)
    mu_a1 = a1.mean(system)
    vecs = system.step_vectors()
    d = system.dimension
    if d == 1:
        init = np.zeros(3)
        for s, w in enumerate(w0):
            init[vecs[s, 0] + 1] += probs[s] * w
    else:
        init = np.zeros((3, 3))
        for s, w in enumerate(w0):
            init[vecs[s, 0] + 1, vecs[s, 1] + 1] += probs[s] * w
    origin, dist = walk_distribution(system, n - 1, initial=init)
    shift = z * math.sqrt(n)
    lo, hi = bounds[:, 0] + shift, bounds[:, 1] + shift
    axes = [np.arange(origin, origin + dist.shape[0])] * d
    if d == 1:
        mask = (axes[0] >= lo[0]) & (axes[0] <= hi[0])
        mass = float(dist[mask].sum())
    else:
        mx = (axes[0] >= lo[0]) & (axes[0] <= hi[0])
        my = (axes[1] >= lo[1]) & (axes[1] <= hi[1])
        mass = float(dist[np.ix_(mx, my)].sum())
    return n ** (d / 2.0) * mass * mu_a1


def mllt_diagnostic(system: BaseSystem, a0: BaseObservable, a1: BaseObservable,
                    cube, z, n_grid, trials: int, seed: int = 0,
                    exact: bool = False) -> list[MlltRow]:
    """Local-limit diagnostic: n^{d/2} mu(A0 * A1 o f^n * 1_C(tau_n - z sqrt(n))).

    One row per n, with the Gaussian target g(z) mu(A0) mu(A1) Vol(C).  In
    ``exact`` mode (walks) the value comes from the convolution power of the
    step distribution; otherwise it is a Monte Carlo average over ``trials``
    orbits with binomial-style error bars.  Rows are flagged when the error
    bar is too large to resolve the target.
    """
    n_grid = list(n_grid)
    if any(b >= a for a, b in zip(n_grid[1:], n_grid)):
        raise ValueError("n grid must be increasing")
    d = system.dimension
    bounds = _cube_bounds(cube, d)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    vol = float(np.prod(bounds[:, 1] - bounds[:, 0]))
    cov = system.step_covariance()
    target = gaussian_density_at(cov, z) * a0.mean(system) * a1.mean(system) * vol
    if exact and system.kind == "doubling-map":
        raise ValueError("exact mode is available for walks only")
    rows = []
    for row_i, n in enumerate(n_grid):
        if exact:
            val = _mllt_exact_value(system, a0, a1, bounds, z, n)
            rows.append(MlltRow(n=n, estimate=val, se=0.0, target=target, warn=False))
            continue
        est, se = _mllt_mc_value(system, a0, a1, bounds, z, n, trials, seed, row_i)
        scale = n ** (d / 2.0)
        warn = se * scale > 0.25 * max(abs(target), 1e-12)
        rows.append(MlltRow(n=n, estimate=est * scale, se=se * scale,
                            target=target, warn=warn))
    return rows


def _mllt_mc_value(system, a0, a1, bounds, z, n, trials, seed, row_i,
                   chunk: int = 16384):
    shift = z * math.sqrt(n)
    lo, hi = bounds[:, 0] + shift, bounds[:, 1] + shift
    total, total_sq, done = 0.0, 0.0, 0
    chunk_i = 0
    while done < trials:
        m = min(chunk, trials - done)
        rng = generator(seed, STREAM_BASE, 1000 * row_i + chunk_i)
        if system.kind == "doubling-map":
            bits = rng.integers(0, 2, size=(m, n + _WINDOW_BITS), dtype=np.uint8)
            vals = np.array(system.values, dtype=np.int64)
            if system.breakpoints == (0.5,) and a0.kind != "interval" and a1.kind != "interval":
                tau = vals[bits[:, :n]].sum(axis=1)
                x0 = xn = None
            else:
                kernel = 2.0 ** -(np.arange(1, _WINDOW_BITS + 1))
                win = np.lib.stride_tricks.sliding_window_view(bits, _WINDOW_BITS, axis=1)
                x = win[:, : n + 1].astype(np.float64) @ kernel
                idx = np.searchsorted(np.asarray(system.breakpoints), x, side="right")
                tau = vals[idx[:, :n]].sum(axis=1)
                x0, xn = x[:, 0], x[:, n]
            w = np.asarray(_observable_mc_weights(a0, None, x0)) \
                * np.asarray(_observable_mc_weights(a1, None, xn))
            tau = tau[:, None]
        else:
            ids = _walk_step_ids_batch(system, rng, m, n + 1)
            tau = system.step_vectors()[ids[:, :n]].sum(axis=1)
            w = np.asarray(_observable_mc_weights(a0, ids[:, 0], None)) \
                * np.asarray(_observable_mc_weights(a1, ids[:, n], None))
        inside = np.all((tau >= lo) & (tau <= hi), axis=1)
        contrib = np.broadcast_to(w, (m,)) * inside
        total += contrib.sum()
        total_sq += (contrib**2).sum()
        done += m
        chunk_i += 1
    mean = total / trials
    var = max(total_sq / trials - mean**2, 0.0)
    return mean, math.sqrt(var / trials)


def _walk_step_ids_batch(system, rng, m, n):
    u = rng.random((m, n))
    dirs = rng.integers(0, 2 * system.dimension, size=(m, n))
    return np.where(u < system.p_hold, 0, 1 + dirs).astype(np.int64)


# ---------------------------------------------------------------------------
# anticoncentration diagnostic
# ---------------------------------------------------------------------------

@dataclass
class AnticoncentrationReport:
    p_hat: float
    se: float
    bound: float
    violation: bool


def default_theta(r: float) -> float:
    """Gaussian envelope; any decreasing Theta with finite r^d tail works."""
    return math.exp(-r * r / 8.0)


def anticoncentration_diagnostic(system: BaseSystem, times, centers, trials: int,
                                 seed: int = 0, k_const: float | None = None,
                                 theta=default_theta) -> AnticoncentrationReport:
    """Estimate P(tau_{n_j} in C_j for all j) against the product bound.

    ``centers`` are the unit-cube centers (sup norm, side 1).  The bound is
    K * prod (n_j - n_{j-1})^{-d/2} * Theta(max_j |c_j - c_{j-1}| / sqrt(n_j - n_{j-1}))
    with n_0 = 0, c_0 = 0.  A violation is flagged only beyond three standard
    errors of the estimate.
    """
    times = np.asarray(times, dtype=np.int64)
    if np.any(np.diff(times) <= 0) or times[0] < 1:
        raise ValueError("times must be strictly increasing positive integers")
    d = system.dimension
    centers = np.atleast_2d(np.asarray(centers, dtype=float)).reshape(len(times), d)
    s = len(times)
    if k_const is None:
        k_const = (2.0 if d == 1 else 4.0) ** s

    gaps = np.diff(np.concatenate([[0], times])).astype(float)
    deltas = np.vstack([centers[0], np.diff(centers, axis=0)])
    ratios = np.max(np.abs(deltas), axis=1) / np.sqrt(gaps)
    bound = k_const * float(np.prod(gaps ** (-d / 2.0))) * theta(float(ratios.max()))

    n_max = int(times[-1])
    hits = 0
    done, chunk_i = 0, 0
    while done < trials:
        m = min(32768, trials - done)
        rng = generator(seed, STREAM_DIAGNOSTIC, chunk_i)
        if system.kind == "doubling-map":
            bits = rng.integers(0, 2, size=(m, n_max + _WINDOW_BITS), dtype=np.uint8)
            steps, _ = _doubling_steps_batch(system, bits, n_max)
            paths = np.cumsum(steps, axis=1)[:, times - 1][:, :, None]
        else:
            ids = _walk_step_ids_batch(system, rng, m, n_max)
            paths = np.cumsum(system.step_vectors()[ids], axis=1)[:, times - 1, :]
        ok = np.all(np.abs(paths - centers[None, :, :]) <= 0.5, axis=(1, 2))
        hits += int(ok.sum())
        done += m
        chunk_i += 1
    p_hat = hits / trials
    se = math.sqrt(max(p_hat * (1.0 - p_hat), 1.0 / trials) / trials)
    return AnticoncentrationReport(p_hat=p_hat, se=se, bound=bound,
                                   violation=p_hat - 3.0 * se > bound)


def _doubling_steps_batch(system, bits, n):
    vals = np.array(system.values, dtype=np.int64)
    if system.breakpoints == (0.5,):
        return vals[bits[:, :n]], None
    kernel = 2.0 ** -(np.arange(1, _WINDOW_BITS + 1))
    win = np.lib.stride_tricks.sliding_window_view(bits, _WINDOW_BITS, axis=1)
    x = win[:, :n].astype(np.float64) @ kernel
    idx = np.searchsorted(np.asarray(system.breakpoints), x, side="right")
    return vals[idx], x
