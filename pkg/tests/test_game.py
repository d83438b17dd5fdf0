import dataclasses
import math
from fractions import Fraction

import pytest

from machinegames import GameSpec, StrategyProfile, expected_utility
from machinegames.cases import roshambo_game
from machinegames.errors import ExactModeOverflow, ModeAssumptionViolated, ProbabilityNotOne, SchemaError
from machinegames.game import TableUtility, action_distribution, total_variation
from machinegames.machines import constant, roshambo_class
from machinegames.vm import BOT

R, P, S, U = roshambo_class()
GAME = roshambo_game()


def value(profile, subject=1, game=GAME):
    return expected_utility(game, StrategyProfile(profile), subject).value


def test_pure_roshambo_payoffs():
    # paper beats rock; both pay the deterministic charge
    assert value((P, R)) == 1 - 1
    assert value((P, R), 2) == -1 - 1
    assert value((R, R)) == -1


def test_uniform_against_pure():
    # win, lose and tie equally likely; the randomized charge is 2
    out = expected_utility(GAME, StrategyProfile((U, R)), 1)
    assert out.value == -2
    assert out.residual == Fraction(1, 256)


def test_bot_forfeits_but_pays_nothing():
    assert value((BOT, R)) == -1
    assert value((R, BOT)) == 1 - 1
    # both invalid: the first player is scored as the loser
    assert value((BOT, BOT)) == -1


def test_coalition_value_defaults_to_member_sum():
    out = expected_utility(GAME, StrategyProfile((U, U)), {1, 2})
    assert out.value == value((U, U), 1) + value((U, U), 2) == -4


def test_probabilities_must_sum_to_one():
    with pytest.raises(ProbabilityNotOne):
        GameSpec.build(name="g", players=1, input_length=1, types={("0",): Fraction(255, 256)},
                       utilities=["0"])


def test_duplicate_types_rejected():
    with pytest.raises(SchemaError):
        GameSpec.build(name="g", players=1, input_length=1,
                       types=[(("0",), Fraction(1, 2)), (("0",), Fraction(1, 2))], utilities=["0"])


def test_truncated_mass_over_tolerance():
    tight = GameSpec.build(name="tight", players=2, input_length=1, types={("", ""): 1},
                           utilities=["0", "0"], rand_cap=2)
    with pytest.raises(ExactModeOverflow):
        expected_utility(tight, StrategyProfile((U, R)), 1)


def test_table_utility():
    table = TableUtility({(("0",), ("1",)): 5, (("1",), ("1",)): 7}, default=None)
    g = GameSpec.build(name="t", players=1, input_length=1,
                       types={("0",): Fraction(1, 2), ("1",): Fraction(1, 2)}, utilities=[table])
    assert expected_utility(g, StrategyProfile((constant("1"),)), 1).value == 6
    with pytest.raises(SchemaError):
        expected_utility(g, StrategyProfile((constant("0"),)), 1)


def test_scaled_game():
    g = GAME.scaled(3, -1)
    assert value((P, R), 2, g) == 3 * value((P, R), 2) - 1
    with pytest.raises(SchemaError):
        GAME.scaled(0)


def test_action_distribution_and_tv():
    d = action_distribution(GAME, StrategyProfile((U, R)))[("", "", "")]
    third = Fraction(1, 3)
    assert d == {("0", "0"): third, ("1", "0"): third, ("2", "0"): third}
    pure = action_distribution(GAME, StrategyProfile((R, R)))[("", "", "")]
    assert total_variation(d, pure) == Fraction(2, 3)


def test_sampled_mode_needs_seed_and_range():
    with pytest.raises(SchemaError):
        expected_utility(GAME, StrategyProfile((U, R)), 1, "sampled")
    bare = dataclasses.replace(GAME, utility_range=None)
    with pytest.raises(ModeAssumptionViolated):
        expected_utility(bare, StrategyProfile((U, R)), 1, "sampled", seed=1)


def test_sampled_estimate_is_reproducible_and_close():
    a = expected_utility(GAME, StrategyProfile((U, R)), 1, "sampled", seed=7, samples=4000)
    b = expected_utility(GAME, StrategyProfile((U, R)), 1, "sampled", seed=7, samples=4000)
    assert a.estimate == b.estimate
    assert abs(a.estimate - (-2)) <= a.half_width
    # Hoeffding on a range of 4 at 99% with 4000 draws
    assert a.half_width == pytest.approx(4 * (math.log(200) / 8000) ** 0.5)
