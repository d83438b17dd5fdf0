"""Rock-paper-scissors where flipping coins costs more than playing a fixed hand.

Run from the package root:  python3 demos/roshambo.py
"""

from pathlib import Path

from machinegames import check_epsilon_nash, expected_utility, load_game
from machinegames.cases import roshambo_game
from machinegames.machines import roshambo_class
from machinegames.solver import induce_finite_game, lifted_profile, solve_support_enumeration

HERE = Path(__file__).parent

loaded = load_game(HERE / "games" / "roshambo.game")
game, cls = loaded.game, loaded.candidates
print("profile", [loaded.profile.machine(i).label for i in (1, 2)])
print("player 1 utility:", expected_utility(game, loaded.profile, 1).value)

# the uniform sampler is beaten by a deterministic hand once randomness is charged
rep = check_epsilon_nash(game, loaded.profile, 0, cls)
print("0-Nash:", rep.holds, "witness:", rep.witness)

# with randomization free, solve the induced matrix game and lift it back to machines
R, P, S, _ = roshambo_class()
free = roshambo_game(free_randomization=True)
fg = induce_finite_game(free, [R, P, S])
eq = solve_support_enumeration(fg)
print("mixed equilibrium:", eq.distribution(1))
lifted = lifted_profile(free, fg, eq)
print("lifted profile is 0-Nash:", check_epsilon_nash(free, lifted, 0, cls).holds)
