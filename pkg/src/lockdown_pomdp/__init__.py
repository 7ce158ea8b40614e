"""Partially observed SEIRD epidemic model with threshold lockdown policies."""

from .estimation import (
    FitResult,
    InitializationSpec,
    ParameterGrid,
    RealDataSeries,
    TestingSchedule,
    default_initial_params,
    estimate_testing_probs,
    fit,
    initialize_states,
    simulation_loss,
    smooth_daily_deaths,
    split_new_cases,
    synthetic_series,
    trajectory_loss,
)
from .model import (
    Action,
    CouplingError,
    InvalidParamsError,
    ModelParams,
    ObservedState,
    PopulationState,
    effective_r0,
    is_to_d_prob,
    s_to_l_prob,
    simulate_coupled,
    step_coupled,
    step_observed,
    step_observed_anchored,
    step_population,
)
from .policy import (
    CostConfig,
    PolicyGrid,
    PolicyThresholds,
    evaluate_policy,
    extrapolate_testing_probs,
    immediate_reward,
    optimize_policy,
    policy_action,
    policy_signal,
    state_cost_config,
)
from .rng import RngStream
from .sensitivity import BandResult, perturb_params, sensitivity_band

__version__ = "0.1.0"
