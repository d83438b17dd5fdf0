"""Compare an exact expected utility with a seeded Monte Carlo estimate.

Run from the package root:  python3 demos/sampled_vs_exact.py
"""

from machinegames import StrategyProfile, expected_utility
from machinegames.cases import roshambo_game
from machinegames.machines import roshambo_class

R, P, S, U = roshambo_class()
game = roshambo_game()
profile = StrategyProfile((U, R))

exact = expected_utility(game, profile, 1)
print("exact:", exact.value, "residual", exact.residual)
for seed in range(3):
    est = expected_utility(game, profile, 1, mode="sampled", seed=seed, samples=5000, confidence=0.99)
    print(f"seed {seed}: {float(est.estimate):+.4f} +/- {float(est.half_width):.4f}")
