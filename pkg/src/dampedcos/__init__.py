"""Damped Fourier-cosine (COS) expansions for multivariate integrals ``int w g``."""
from .damping import DampedDensity, build_damped_density, eval_damped_cf
from .engine import (ApproxResult, CosPlan, approximate_integral, build_plan, coefficient,
                     coefficient_tensor, parseval_sum, price_option)
from .errors import *  # noqa: F401,F403
from .models import (CharacteristicModel, DecayExponent, MarketSpec, NormalModel,
                     VarianceGammaModel, axis_moment, bs_log_return_model, cf_l2_norm,
                     vg_log_return_model)
from .oracles import (McResult, high_res_cos_oracle, mc_estimate, normal_cdf_closed_form,
                      required_paths)
from .payoffs import (CDF, AbsMoment, BasketPut, DigitalPut, Payoff, PayoffBounds, VanillaPut,
                      basket_put_transform, digital_put_transform, payoff_bounds,
                      payoff_vk_tilde)
from .pipeline import Problem, Solution, solve
from .tuning import (ConvergenceStudy, TermSelection, Tolerance, convergence_slope_bound,
                     default_alpha, select_n_smoothness_1d, select_n_terms, truncation_range)

__version__ = "0.1.0"
