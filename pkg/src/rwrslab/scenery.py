"""Stationary random sceneries over Z^d.

The fiber is a random field {xi_z} generated lazily: the value at a site is a
pure function of (model, fiber seed, site) through the hash PRF, so fields
over an unbounded lattice cost nothing to hold and are safe to query from
parallel trials.  Two models:

* ``iid``: independent marginals, Rademacher or Gaussian, variance sigma^2;
* ``moving-average``: exp(-c|u|) kernel (sup norm, truncated at radius R)
  applied to an iid standard normal white field, normalized back to
  variance sigma^2.  Correlations then decay exponentially and have the
  closed form implemented in :func:`correlation`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng

_WHITE_TAG = 7  # PRF tag of the white noise driving moving averages
_IID_TAG = 3


@dataclass(frozen=True)
class SceneryModel:
    """Scenery distribution: kind, marginal, variance, kernel parameters."""

    kind: str = "iid"                 # iid | moving-average
    marginal: str = "rademacher"      # rademacher | gaussian
    variance: float = 1.0
    decay: float = 0.5                # moving-average kernel rate c
    radius: int = 32                  # moving-average truncation R
    dimension: int = 1

    def __post_init__(self):
        if self.kind not in ("iid", "moving-average"):
            raise ValueError(f"unknown scenery kind {self.kind!r}")
        if self.marginal not in ("rademacher", "gaussian"):
            raise ValueError(f"unknown marginal {self.marginal!r}")
        if self.variance <= 0:
            raise ValueError("scenery variance must be positive")
        if self.kind == "moving-average" and (self.decay <= 0 or self.radius < 0):
            raise ValueError("moving average needs decay > 0 and radius >= 0")

    def kernel_offsets_weights(self) -> tuple[np.ndarray, np.ndarray]:
        """Truncated kernel taps: offsets (m, d) and weights e^{-c|u|}."""
        r, d = self.radius, self.dimension
        axes = [np.arange(-r, r + 1)] * d
        offsets = np.array(np.meshgrid(*axes, indexing="ij")).reshape(d, -1).T
        dist = np.max(np.abs(offsets), axis=1) if d > 1 else np.abs(offsets[:, 0])
        return offsets, np.exp(-self.decay * dist)


def correlation(model: SceneryModel, z) -> float:
    """Closed-form correlation rho(z) of the field.

    iid: sigma^2 at the origin, zero elsewhere.  Moving average:
    sigma^2 * sum_u w(u) w(u+z) / sum_u w(u)^2 over the truncated kernel
    (both taps must lie inside the truncation radius).
    """
    z = np.atleast_1d(np.asarray(z, dtype=np.int64))
    if model.kind == "iid":
        return model.variance if not z.any() else 0.0
    offsets, w = model.kernel_offsets_weights()
    shifted = offsets + z[None, :]
    inside = np.max(np.abs(shifted), axis=1) <= model.radius
    dist = np.max(np.abs(shifted), axis=1)
    overlap = float(np.sum(w[inside] * np.exp(-model.decay * dist[inside])))
    return model.variance * overlap / float(np.sum(w * w))


def correlation_sum(model: SceneryModel) -> float:
    """sum_{z in Z^d} rho(z); the fiber half of the limit constants."""
    if model.kind == "iid":
        return model.variance
    _, w = model.kernel_offsets_weights()
    return model.variance * float(w.sum()) ** 2 / float(np.dot(w, w))


def varsigma2(model: SceneryModel, base_observable_mean: float = 1.0) -> float:
    """Discrete fiber variance constant mu(A)^2 * sum_z rho(z); nonnegative."""
    return base_observable_mean**2 * correlation_sum(model)


@dataclass
class SceneryField:
    """A concrete field: (model, fiber seed) plus a small scalar-query cache."""

    model: SceneryModel
    seed: int
    _cache: dict = field(default_factory=dict, repr=False)

    def values(self, sites: np.ndarray) -> np.ndarray:
        """Field values at ``sites`` ((n,) or (n, d) int64), vectorized."""
        sites = np.asarray(sites, dtype=np.int64)
        if sites.ndim == 1:
            sites = sites[:, None]
        if sites.shape[1] != self.model.dimension:
            raise ValueError("site dimension does not match the scenery model")
        m = self.model
        if m.kind == "iid":
            if m.marginal == "rademacher":
                draws = _rng.hash_sign(self.seed, _IID_TAG, sites)
            else:
                draws = _rng.hash_normal(self.seed, _IID_TAG, sites)
            return math.sqrt(m.variance) * draws
        offsets, w = m.kernel_offsets_weights()
        scale = math.sqrt(m.variance / float(np.dot(w, w)))
        taps = (sites[:, None, :] + offsets[None, :, :]).reshape(-1, sites.shape[1])
        white = _rng.hash_normal(self.seed, _WHITE_TAG, taps).reshape(len(sites), -1)
        return scale * (white @ w)

    def value(self, site) -> float:
        key = tuple(np.atleast_1d(np.asarray(site, dtype=np.int64)).tolist())
        if key not in self._cache:
            self._cache[key] = float(self.values(np.array([key], dtype=np.int64))[0])
        return self._cache[key]


def scenery_value(fld: SceneryField, site) -> float:
    return fld.value(site)


def field_to_csv(fld: SceneryField, lo, hi, path) -> None:
    """Dump field values on the rectangle [lo, hi] (inclusive) for inspection.

    Columns: the site coordinates followed by the value.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=np.int64))
    hi = np.atleast_1d(np.asarray(hi, dtype=np.int64))
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    sites = np.array(np.meshgrid(*axes, indexing="ij")).reshape(len(axes), -1).T
    vals = fld.values(sites)
    header = " ".join(f"z{i}" for i in range(len(axes))) + " value"
    np.savetxt(path, np.column_stack([sites, vals]),
               fmt=["%d"] * len(axes) + ["%.17g"], header=header, comments="")


def empirical_correlation(model: SceneryModel, z, samples: int,
                          seed: int = 0) -> tuple[float, float]:
    """Monte Carlo rho(z) over fresh fields: oracle for the closed form."""
    z = np.atleast_1d(np.asarray(z, dtype=np.int64))
    d = model.dimension
    prods = np.empty(samples)
    # spread the work over base sites of a single wide field per chunk: values
    # at sites far apart are independent copies of the (0, z) pair
    chunk = 4096
    spacing = 4 * (model.radius + int(np.max(np.abs(z))) + 1) if model.kind != "iid" \
        else 2 * int(np.max(np.abs(z))) + 2
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        fld = SceneryField(model, seed=seed + done)
        anchors = np.zeros((m, d), dtype=np.int64)
        anchors[:, 0] = np.arange(m) * spacing
        a = fld.values(anchors)
        b = fld.values(anchors + z[None, :])
        prods[done:done + m] = a * b
        done += m
    est = float(prods.mean())
    se = float(prods.std(ddof=1) / math.sqrt(samples))
    return est, se
