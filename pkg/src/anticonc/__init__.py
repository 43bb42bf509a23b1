"""Anti-concentration of Gaussian order statistics and suprema.

Closed-form concentration and variance bounds, reproducible Monte Carlo of
Gaussian fields, exact order-statistic densities, and a harness that checks
the bounds against simulation.
"""

from .bounds import (BoundReport, covering_tail_bound, deng_refined_upper, deng_sigma_bar,
                     equicorrelated_var_sandwich, erf_sandwich_check, max_abs_q_bounds,
                     mode_q_bounds, nazarov_box_upper, order_stat_q_bounds,
                     s_concave_var_mode_window, var_lower_bound, var_upper_bound)
from .concentration import (ConcentrationEstimate, concentration_curve, convolved_mode,
                            empirical_concentration, exact_gaussian_abs_concentration)
from .field_model import (FieldSpec, augment_for_abs, equicorrelated_spec, random_spec,
                          reduce_degenerate, validate_spec)
from .gaussian_num import rectangle_probability
from .order_density import (DensityGrid, check_s_concavity, convolve_box, density_grid,
                            density_iid_closed_form, density_order_statistic, mode_of_grid)
from .rng_sampler import StatisticKind, derive_seed, empirical_moments, sample_many, sample_reduced

__version__ = "0.1.0"
