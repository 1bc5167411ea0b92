"""Does sorting agents by value raise total surplus?

Waiting is wasted, so an efficient allocation pays for itself only if the
values it sorts on are spread out enough. With a rising hazard (uniform
values) a lottery beats assortative allocation; with a falling one (Pareto)
assortative allocation wins.
"""

from waitline.dist import Pareto, Uniform, Weibull
from waitline.welfare import assortative_top_k, random_proportional, welfare_order_check

n, k = 2, 1
for F in (Uniform(), Pareto(1, 2), Weibull(0.5, 1.0)):
    cmp = welfare_order_check(F, n, k, assortative_top_k(n, k, F), random_proportional(n, k))
    print(f"{F!r:<28} assortative={cmp.surplus_a:.4f} lottery={cmp.surplus_b:.4f} -> {cmp.ordering.value} ({cmp.justification})")
