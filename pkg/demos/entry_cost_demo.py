"""Entry costs and the value of saying the line is full.

If every attempt to join costs c, a silent designer scares off types just
above c: they might pay and find nothing left. Announcing that the line is
full removes that risk, so every type above c enters and still gets sorted
efficiently.
"""

from waitline.dist import Pareto, Uniform
from waitline.engine import GameConfig, run_batch
from waitline.entrycost import corollary2_comparison, queue_full_equilibrium, reserve_value

c = 0.25
print(f"n=2, k=1, uniform, c={c}: silent designer reserve type = {reserve_value(c, 2, 1, Uniform()):.6f}")

e = queue_full_equilibrium(c, 3, 2, Uniform())
b = run_batch(GameConfig(3, 2, Uniform(), entry_cost=c, seed=5), e.policy, e.strategy, 50_000)
print(f"full-line notice, n=3, k=2: efficiency frequency {b.efficiency_frequency:.4f}")

table = corollary2_comparison(0.2, 3, 2, Pareto(1, 2))
print(f"\nPareto(1, 2), c=0.2 ({table.hazard.value} hazard, prediction: {table.prediction})")
for r in table.rows:
    print(f"  {r.policy_label:<12} surplus {r.surplus:.4f}")
