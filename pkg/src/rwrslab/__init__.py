"""Simulation and verification lab for random walks in random scenery.

Skew products F(x, y) = (f x, G_{tau(x)} y) over lazy lattice walks and the
doubling map, with stationary random sceneries in the fiber: simulate the
ergodic sums, compute the limit-law constants two independent ways, and test
the desk-scale distributional limits (the d=1 local-time product law and the
d=2 sqrt(N ln N) central limit theorem).
"""

__version__ = "0.1.0"

from .base import (BaseObservable, BaseSystem, CocycleTrajectory,
                   DiffusivityEstimate, OccupationProfile,
                   anticoncentration_diagnostic, doubling_map,
                   doubling_map_thirds, estimate_diffusivity,
                   exact_site_counts, lazy_walk_z1, lazy_walk_z2,
                   local_time_profile, mllt_diagnostic, simulate_cocycle)
from .limits import (KestenSpitzerSampler, LimitConstants, MomentTable,
                     compute_limit_constants, j1_closed_form, j1_quadrature,
                     jk_monte_carlo, kesten_spitzer_sample, lambda_constant,
                     lambda_enumeration_oracle, lattice_lambda,
                     limit_law_sample_d1, sigma2_d2, simplex_integral_check)
from .scenery import SceneryField, SceneryModel, correlation, varsigma2
from .stats import (EmpiricalDistribution, TestReport, joint_independence_test,
                    ks_two_sample, ks_vs_normal, rank_correlation,
                    scaling_exponent_fit)
from .sums import (NormalizedOccupationMeasure, Observable, QuenchedVariance,
                   bg_condition_b, build_measure, covariance_decay,
                   ergodic_sum, quenched_variance_closed, quenched_variance_mc)
