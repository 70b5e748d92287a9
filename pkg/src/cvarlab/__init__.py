"""CVaR estimation, concentration bounds and CVaR-based best-arm identification."""

from .bandit import BanditEnv, hardness_H, misid_upper_bound, run_cvar_sr, run_uniform, sr_schedule
from .bounds import (
    cvar_bound_heavy,
    cvar_bound_light,
    invert_for_n,
    simplified_light_bound,
    var_bound,
)
from .distributions import (
    Exponential,
    Gaussian,
    Lognormal,
    Pareto,
    StudentT,
    tail_class,
    true_cvar,
    true_var,
)
from .estimators import (
    EstimatorSpec,
    RiskEstimate,
    empirical_cvar,
    empirical_var,
    gaussian_plugin_cvar,
    truncated_cvar,
)

__version__ = "0.1.0"
