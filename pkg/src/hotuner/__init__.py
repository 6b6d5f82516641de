"""
Continuous-time higher-order tuners for regression and model-reference
adaptive control, with Lyapunov diagnostics and a scenario runner.
"""

__version__ = "0.1.0"

from .config import ScenarioConfig
from .diagnostics import (
    Trajectory,
    asymptotic_decay_check,
    attach_lyapunov,
    continuous_regret,
    lp_norm,
    lyapunov_mrac,
    lyapunov_mrac_rate_bound,
    lyapunov_regression,
    lyapunov_regression_rate_bound,
    wibisono_candidate_lyapunov,
)
from .errors import HotunerError
from .integrator import IntegrationConfig, IntegrationResult, Status, convergence_step_check, integrate, richardson_order
from .linalg import is_hurwitz, is_positive_definite, matrix_exponential_action, solve_lyapunov
from .models import PlantModel, RegressionModel, build_f16_plant
from .scenarios import ScenarioResult, builtin_scenarios, quantile_band, run_scenario
from .signals import CommandSignal, SinusoidFeature, StateFeature, StepFeature, pe_gram
from .systems import MracSystem, RegressionSystem, simulate
from .tuners import Law, TunerConfig, TunerState, second_order_form_check
