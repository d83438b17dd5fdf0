import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from machinegames import check_epsilon_nash
from machinegames.cases import roshambo_game
from machinegames.errors import (
    IterationCapExceeded,
    NotComputationallyCheap,
    ProbabilityNotOne,
    SchemaError,
    SizeLimit,
)
from machinegames.machines import constant, roshambo_class
from machinegames.solver import (
    FiniteBayesianGame,
    epsilon_ne_regret,
    induce_finite_game,
    lift_to_sampler_machine,
    lifted_profile,
    solve_support_enumeration,
)
from machinegames.tapes import enumerate_tapes
from machinegames.vm import run_machine

R, P, S, U = roshambo_class()
half = Fraction(1, 2)


def best_reply_gap(tables, mix):
    """Independent two-player check: each player's best pure payoff minus
    the payoff of its mix, against the other's mix."""
    a, b = tables
    x, y = mix
    rows = [sum(a[i][j] * y[j] for j in range(len(y))) for i in range(len(x))]
    cols = [sum(b[i][j] * x[i] for i in range(len(x))) for j in range(len(y))]
    return (max(rows) - sum(p * v for p, v in zip(x, rows)),
            max(cols) - sum(q * v for q, v in zip(y, cols)))


def mixes(eq, fg):
    return [list(dict(eq.strategies[i])[""]) for i in range(2)]


def test_matching_pennies():
    fg = FiniteBayesianGame.normal_form([[[1, -1], [-1, 1]], [[-1, 1], [1, -1]]])
    eq = solve_support_enumeration(fg)
    assert eq.distribution(1) == {"0": half, "1": half}
    assert eq.distribution(2) == {"0": half, "1": half}
    assert eq.residual == 0


def test_coordination_prefers_small_pure_support():
    fg = FiniteBayesianGame.normal_form([[[2, 0], [0, 1]], [[2, 0], [0, 1]]], [("A", "B"), ("A", "B")])
    eq = solve_support_enumeration(fg)
    assert eq.distribution(1) == {"A": 1, "B": 0}


def test_bayesian_game_equilibrium():
    # player 1 knows the state; player 2 wants to match player 1's action
    prior = ((("h", "", ""), Fraction(1, 3)), (("l", "", ""), Fraction(2, 3)))
    pay = {}
    for t, _ in prior:
        for a in itertools.product(range(2), range(2)):
            good = 0 if t[0] == "h" else 1
            pay[(t, a)] = (Fraction(int(a[0] == good)), Fraction(int(a[0] == a[1])))
    fg = FiniteBayesianGame(2, (("h", "l"), ("",)), prior, (("x", "y"), ("x", "y")), pay)
    eq = solve_support_enumeration(fg)
    assert eq.distribution(1, "h") == {"x": 1, "y": 0}
    assert eq.distribution(1, "l") == {"x": 0, "y": 1}
    assert eq.distribution(2) == {"x": 0, "y": 1}


def test_prior_must_sum_to_one():
    with pytest.raises(ProbabilityNotOne):
        FiniteBayesianGame(1, (("",),), ((("", ""), half),), (("a",),), {(("", ""), (0,)): (0,)})


def test_exact_mode_is_two_player_only():
    tab = [[[[0, 0], [0, 0]], [[0, 0], [0, 0]]]] * 3
    with pytest.raises(SizeLimit):
        solve_support_enumeration(FiniteBayesianGame.normal_form(tab))


def test_regret_matching_certifies():
    fg = FiniteBayesianGame.normal_form([[[1, -1], [-1, 1]], [[-1, 1], [1, -1]]])
    eq = epsilon_ne_regret(fg, Fraction(1, 100))
    assert eq.residual <= Fraction(1, 100)
    assert max(best_reply_gap([[[1, -1], [-1, 1]], [[-1, 1], [1, -1]]], mixes(eq, fg))) == eq.residual


def test_regret_cap_reports_best():
    fg = FiniteBayesianGame.normal_form([[[1, -1], [-1, 1]], [[-1, 1], [1, -1]]])
    with pytest.raises(IterationCapExceeded) as err:
        epsilon_ne_regret(fg, Fraction(1, 10**9), max_iterations=10, check_every=5)
    assert err.value.best is not None


def test_costly_randomization_is_not_cheap():
    with pytest.raises(NotComputationallyCheap):
        induce_finite_game(roshambo_game(), [R, P, S])


def test_stripped_roshambo_is_uniform():
    g = roshambo_game(costs=False)
    fg = induce_finite_game(g, [R, P, S, constant("0", "R-again")])
    assert fg.actions[0] == ("R", "P", "S")
    eq = solve_support_enumeration(fg)
    third = Fraction(1, 3)
    assert eq.distribution(1) == {"R": third, "P": third, "S": third}


def test_lifted_profile_is_nash_under_free_randomization():
    g = roshambo_game(free_randomization=True)
    fg = induce_finite_game(g, [R, P, S])
    eq = solve_support_enumeration(fg)
    prof = lifted_profile(g, fg, eq)
    from machinegames import CandidateClass

    assert check_epsilon_nash(g, prof, 0, CandidateClass.uniform("rpsu", [R, P, S, U], 2)).holds


def law(prog, cap):
    out, lost = {}, Fraction(0)
    for _t, w, res in enumerate_tapes(lambda tape: run_machine(prog, "", tape), cap):
        if res is None:
            lost += w
        else:
            out[res.output] = out.get(res.output, Fraction(0)) + w
    return out, lost


def test_sampler_dyadic_law():
    prog = lift_to_sampler_machine([half, Fraction(1, 4), Fraction(1, 4)], base=[R, P, S])
    out, lost = law(prog, 8)
    assert lost == 0
    assert out == {"0": half, "1": Fraction(1, 4), "2": Fraction(1, 4)}


def test_sampler_rejects_bad_weights():
    with pytest.raises(ProbabilityNotOne):
        lift_to_sampler_machine([half, half, half], base=[R, P, S])
    with pytest.raises(SizeLimit):
        lift_to_sampler_machine([Fraction(1, 4099), Fraction(4098, 4099)], base=[R, P])
    with pytest.raises(SchemaError):
        lift_to_sampler_machine([half, half], base=[R])


weights = st.lists(st.integers(0, 12), min_size=1, max_size=4).filter(lambda w: sum(w) > 0)


@settings(max_examples=60, deadline=None)
@given(weights)
def test_sampler_conditional_law_is_exact(ws):
    probs = [Fraction(w, sum(ws)) for w in ws]
    base = [constant(str(k), f"c{k}") for k in range(len(ws))]
    prog = lift_to_sampler_machine(probs, base=base)
    out, lost = law(prog, 8)
    resolved = 1 - lost
    assert lost <= Fraction(1, 2)
    for k, p in enumerate(probs):
        assert out.get(str(k), 0) / resolved == p


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(st.integers(-3, 3), min_size=3, max_size=3), min_size=6, max_size=6))
def test_support_enumeration_finds_an_equilibrium(rows):
    a, b = rows[:3], rows[3:]
    fg = FiniteBayesianGame.normal_form([a, b])
    eq = solve_support_enumeration(fg)
    assert best_reply_gap([a, b], mixes(eq, fg)) == (0, 0)
