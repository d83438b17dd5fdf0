from fractions import Fraction

import pytest

from machinegames import (
    CandidateClass,
    GameSpec,
    SpeedupSpec,
    StrategyProfile,
    best_response_gap,
    check_coalition_safe,
    check_epsilon_nash,
    check_M_acceptable,
    check_p_robust,
)
from machinegames.cases import roshambo_game, universal_family
from machinegames.complexity import ComplexityFnSpec
from machinegames.errors import InvalidSpec, ModeAssumptionViolated
from machinegames.machines import roshambo_class
from machinegames.mediation import functionality_mediator, lambda_machine
from machinegames.vm import program

R, P, S, U = roshambo_class()
RPSU = CandidateClass.uniform("rpsu", [R, P, S, U], 2)
GAME = roshambo_game()


def test_pure_profile_witness():
    rep = check_epsilon_nash(GAME, StrategyProfile((R, R)), 0, RPSU)
    assert not rep.holds
    # paper wins by 1 at the same cost
    assert rep.witness == (1, "P", 1)
    assert rep.subject(1).gap_of("bot") == 0


def test_class_adds_bot_and_incumbent():
    members = RPSU.members(1, R, StrategyProfile((R, R)))
    assert [m.label for m in members] == ["bot", "R", "P", "S", "U"]
    odd = program("odd", 0, 'EMIT "9"', "HALT")
    assert [m.label for m in RPSU.members(1, odd, StrategyProfile((odd, R)))][-1] == "odd"


def test_plain_list_is_taken_as_given():
    rep = best_response_gap(GAME, StrategyProfile((R, P)), 1, [R, P])
    assert [e.label for e in rep.entries] == ["R", "P"]
    assert rep.max_gap == 1 and rep.witness == "P"


def test_ties_go_to_the_incumbent():
    rep = best_response_gap(GAME, StrategyProfile((P, R)), 1, RPSU)
    assert rep.max_gap == 0
    assert rep.witness == "P"


def test_epsilon_threshold():
    prof = StrategyProfile((R, R))
    assert not check_epsilon_nash(GAME, prof, Fraction(99, 100), RPSU).holds
    assert check_epsilon_nash(GAME, prof, 1, RPSU).holds


def test_coalition_safe_benign_controller():
    rep = check_coalition_safe(GAME, StrategyProfile((U, U)), [{1, 2}], 0, RPSU)
    s = rep.subjects[0]
    assert s.incumbent == "benign(U,U)" and s.incumbent_utility == -4
    # abstaining together: both moves invalid, each member scored -1, no cost
    assert s.gap_of("bot") == 2
    # a joint controller of empty threads is still a machine and pays the charge
    assert s.gap_of("joint(bot,bot)") == 0
    assert not rep.holds


def test_favorable_deviator_needs_monotone():
    g = GameSpec.build(name="odd", players=1, input_length=0, types={("",): 1}, utilities=["c1"])
    with pytest.raises(ModeAssumptionViolated):
        check_p_robust(g, StrategyProfile((R,)), SpeedupSpec("2*t"), 0, [R])


def test_speedup_must_be_monotone():
    with pytest.raises(InvalidSpec):
        SpeedupSpec("5 - t").validate(1)


def test_speedup_charge():
    charge = SpeedupSpec("2*t").transform(1)
    assert [charge(c) for c in range(6)] == [0, 1, 1, 2, 2, 3]


def test_p_robust_roshambo():
    # deviations are charged ceil(c/2), so a pure move costs 1 like before
    rep = check_p_robust(GAME, StrategyProfile((U, U)), SpeedupSpec("2*t"), 0, RPSU)
    assert rep.details["speedup_mode"] == "favorable_deviator"
    assert rep.subject(1).gap_of("R") == 1
    assert rep.subject(1).gap_of("U") == 0


def test_explicit_speedups_are_verified():
    faster = ComplexityFnSpec.make("rand_charge", deterministic=1, randomized=1)
    ok = SpeedupSpec("2*t", "explicit_list", ((("default", faster),),))
    rep = check_p_robust(GAME, StrategyProfile((U, U)), ok, 0, RPSU)
    assert len(rep.children) == 1
    slower = ComplexityFnSpec.make("rand_charge", deterministic=3, randomized=3)
    bad = SpeedupSpec("2*t", "explicit_list", ((("default", slower),),))
    with pytest.raises(ModeAssumptionViolated):
        check_p_robust(GAME, StrategyProfile((U, U)), bad, 0, RPSU)


def test_M_acceptable_under_steps():
    F = functionality_mediator("xor", 1)
    g = universal_family(1)[0].with_complexity({"default": ComplexityFnSpec("steps")})
    lam = lambda_machine(1)
    assert check_M_acceptable(g, StrategyProfile((lam, lam)), F).holds
    rep = check_M_acceptable(g, StrategyProfile((lambda_machine(1, True), lam)), F)
    assert not rep.holds and rep.details["witness"]["machine"] == "protocol"
