"""Tabular robust Markov games: robust Q-FTRL, exact equilibrium gaps, hard instances."""

from .exact import (cce_gap, enumerate_deviations_oracle, ne_gap, robust_best_response,
                    robust_value_of_policy)
from .game import (GameValidationError, RobustMarkovGame, brute_force_robust_expectation,
                   effective_horizon, load_game, robust_expectation, save_game, validate,
                   worst_case_kernel_row)
from .hard import (HardInstanceParams, closed_form_optimal_value, gilbert_varshamov_pack,
                   hard_rmdp, optimal_theta_policy)
from .policies import (MixturePolicy, ProductMarkovPolicy, build_schedules, ftrl_update,
                       joint_action_distribution, marginal_excluding)
from .qftrl import AlgoConfig, RunOutput, run_robust_qftrl
from .rng import RandomStream

__version__ = "0.1.0"
