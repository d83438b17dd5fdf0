"""Bayesian machine games: programs as strategies, with computation costs.

The main entry points are :class:`GameSpec` and :func:`expected_utility`
for evaluating profiles, the ``check_*`` functions for equilibrium
notions, the solver for finite games, and :mod:`machinegames.cases` for
the worked examples.
"""

from .complexity import ComplexityFnSpec
from .equilibrium import (
    CandidateClass,
    SpeedupSpec,
    best_response_gap,
    check_coalition_safe,
    check_epsilon_nash,
    check_M_acceptable,
    check_p_robust,
    check_strong_universal_implementation,
    check_universal_implementation,
)
from .errors import MachineGameError
from .game import GameSpec, expected_utility
from .gamefile import dump_game, load_game
from .profile import StrategyProfile, coalition
from .solver import (
    FiniteBayesianGame,
    epsilon_ne_regret,
    induce_finite_game,
    lift_to_sampler_machine,
    solve_support_enumeration,
)
from .vm import BOT, MachineProgram, format_program, parse_program, run_machine

__version__ = "0.1.0"

__all__ = [
    "BOT",
    "CandidateClass",
    "ComplexityFnSpec",
    "FiniteBayesianGame",
    "GameSpec",
    "MachineGameError",
    "MachineProgram",
    "SpeedupSpec",
    "StrategyProfile",
    "best_response_gap",
    "check_M_acceptable",
    "check_coalition_safe",
    "check_epsilon_nash",
    "check_p_robust",
    "check_strong_universal_implementation",
    "check_universal_implementation",
    "coalition",
    "dump_game",
    "epsilon_ne_regret",
    "expected_utility",
    "format_program",
    "induce_finite_game",
    "lift_to_sampler_machine",
    "load_game",
    "parse_program",
    "run_machine",
    "solve_support_enumeration",
]
