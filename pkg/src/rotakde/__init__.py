"""Rotation-adaptive bivariate kernel density estimation.

A toolkit for densities that factorize into independent symmetric
marginals after an unknown rotation of the plane: higher-order kernels,
separated rotation nets, directional and pairwise kernel estimators,
data-driven (bandwidth, rotation) selection rules, and a reproducible
Monte Carlo pointwise-risk laboratory.
"""

from .errors import (CertificationError, ConfigError, EnvelopeError,
                     GridError, NumericError, QuadratureError)
from .estimators import (BandwidthGrid, auxiliary_estimate, combined_estimate,
                         directional_kde, product_estimate)
from .expectations import (expected_auxiliary, expected_directional,
                           expected_product)
from .kernels import Kernel, build_kernel, capacity_constant, eval_kernel
from .models import (CertificationResult, Marginal, Model, Sample,
                     epsilon_for_capacity, gaussian_marginal, holder_certify,
                     holder_certify_fn, make_model, make_perturbed_marginal,
                     model_density, sample, tau_oracle)
from .risk import (EstimatorSpec, RiskReport, isotropic_baseline,
                   isotropic_default_bandwidth, oracle_estimate,
                   pointwise_risk, rate_study, selection_frequency)
from .rotation import (Rotation, RotationNet, build_net, overlap_coeffs,
                       pseudo_inframetric_check, rho, rotation_from_angle)
from .selectors import (SelectionResult, SplitPlan, adaptive_select,
                        calibrate_a_mult, constant_A, constant_B, c_beta,
                        minimax_select, split_plan, u_hat)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
