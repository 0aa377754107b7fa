"""Densities, tilts and conditional laws for power-law Poisson shot noise."""

__version__ = "0.1.0"

from .model import (
    ModelError,
    ModelParams,
    cumulant,
    first_radius_density,
    joint_radii_density,
    make_params,
    mean_tail,
    sigma_tail,
    stable_density_S,
)
from .special import kernel_I, psi0
from .tilt import SupportError, ConvergenceError, TiltState, solve_xi, tilt
from .edgeworth import density_Sbar, density_Y, nf_k, validity_flag
from .oracle import (
    QuadratureSpec,
    cf_Y,
    conditional_cdf_exact,
    density_S_oracle,
    finite_n_density_check,
    invert_density,
    simulate_Sbar,
)
from .nearest import three_point_density_Z, two_point_density_W
from .conditional import ConditionalConfig, conditional_cdf_R1, fhat_R1S, normal_baseline_cdf
from .sampler import dominance_test, gibbs_conditional, gibbs_process, gibbs_radii, pair_resample, sample_radii
