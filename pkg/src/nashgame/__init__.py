"""Equilibrium payoff sets for two-player nonzero-sum differential games with terminal payoffs.

The pipeline: :mod:`zero_sum` solves security levels and cooperative maxima,
:mod:`nash_set` builds and checks the map of equilibrium payoffs,
:mod:`smooth_verifier` tests candidate value pairs through Hamilton-Jacobi
inequalities, and :mod:`simulator` plays punishment strategies against deviations.
"""

from .config import EXAMPLE_CONFIG, RunConfig, Tolerances, load_config, parse_config
from .errors import (ConfigError, ConstructionError, DomainError, NashGameError, NumericError,
                     PreconditionError, StrategyError)
from .game_model import GameSpec, PayoffSpec, example_game, hamiltonian, isaacs_check, velocity_set
from .grid import Grid
from .nash_set import (NashMap, PayoffCloud, VerifyReport, build_nash_map, check_invariants, directional_derivative,
                       read_map, tangent_velocities, union_maps, verify_map, write_map)
from .simulator import (Partition, PunishmentProfile, Trajectory, deviation_experiment, make_punishment_profile,
                        simulate)
from .smooth_verifier import CandidatePair, catalog_pair, check_corollary, check_proposition2
from .zero_sum import ValueField, query_value, solve_cooperative_max, solve_lower_value

__all__ = [
    "EXAMPLE_CONFIG", "RunConfig", "Tolerances", "load_config", "parse_config",
    "ConfigError", "ConstructionError", "DomainError", "NashGameError", "NumericError", "PreconditionError",
    "StrategyError",
    "GameSpec", "PayoffSpec", "example_game", "hamiltonian", "isaacs_check", "velocity_set", "Grid",
    "NashMap", "PayoffCloud", "VerifyReport", "build_nash_map", "check_invariants", "directional_derivative",
    "read_map", "tangent_velocities", "union_maps", "verify_map", "write_map",
    "Partition", "PunishmentProfile", "Trajectory", "deviation_experiment", "make_punishment_profile", "simulate",
    "CandidatePair", "catalog_pair", "check_corollary", "check_proposition2",
    "ValueField", "query_value", "solve_cooperative_max", "solve_lower_value",
]
