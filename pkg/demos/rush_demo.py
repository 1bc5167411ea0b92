"""Why telling the line how long it is can hurt.

Three agents with uniform values compete for two slots by choosing how long
to wait. With no announcements the equilibrium is assortative: the two
highest values get the slots every time. Once the designer reveals that the
line has filled up, agents who are still out react by joining at once, and
the allocation turns into a scramble.
"""

from waitline.dist import Uniform
from waitline.engine import GameConfig, run_batch
from waitline.policies import FixedTime, FullRevelation, Trivial
from waitline.strategies import RushReactor, TrivialEq

RUNS = 50_000

F = Uniform()
game = GameConfig(n=3, k=2, F=F, seed=7)
eq = TrivialEq(3, 2, F)

cases = [
    ("no information", Trivial(), eq),
    ("full revelation", FullRevelation(), RushReactor(eq, 2)),
    ("announce at t=0.2", FixedTime(0.2), RushReactor(eq, 2)),
]

print(f"{'policy':<20}{'efficient':>10}{'rushes':>10}{'wait burned':>13}")
for label, policy, strat in cases:
    b = run_batch(game, policy, strat, RUNS)
    print(f"{label:<20}{b.efficiency_frequency:>10.4f}{b.rush_frequency:>10.4f}{b.mean('waits'):>13.4f}")

print()
print("Under full revelation a rush leaves the slots to whoever draws the better")
print("tie-break, not to the highest values, so the efficiency frequency drops below one.")
