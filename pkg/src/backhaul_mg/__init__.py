"""Backhaul management for cache-enabled small cells as a minority game."""

from ._backend import BACKEND
from .allocation import (BackhaulAssignment, DemandModel, allocate, compute_phi,
                         priority_order, required_rates)
from .game import (GameSpec, NoInteriorEquilibrium, bmmg_mixed_strategy, build_game,
                   expected_utility, expected_utility_general, is_pure_ne, solve_fair_pmne,
                   utility_bmmg)
from .learning import (LearnerState, NoiseModel, PowerLaw, StepSchedule, bge_fixed_point,
                       epsilon_bound, rl_step, run_learning, smoothed_best_response,
                       validate_schedule)
from .netmodel import (DegenerateDemandError, DomainError, MmwParams, ResourceBlockSet, Scenario,
                       Sub6Params, Topology, WiredBackhaul, mmw_path_loss, mmw_snr, sub6_sinr,
                       total_rate, wired_share)

__version__ = "0.1.0"
