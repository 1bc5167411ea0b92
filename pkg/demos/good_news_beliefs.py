"""Beliefs along one game under the randomised good-news policy.

The designer stays silent until a random moment, and only then reports
whether an item is still left. An agent waiting at the back tracks its
belief about how many items remain. The belief drifts down as the clock
runs and others may have joined; what matters for assortative sorting is
that it never jumps to a more pessimistic view at a single instant, the
moment a message arrives or fails to arrive.
"""

import numpy as np

from waitline.beliefs import ParticleBank, belief_trace, detect_sudden_bad_news
from waitline.dist import Uniform
from waitline.engine import Draws, GameConfig, simulate
from waitline.policies import ContinuousBadNews
from waitline.strategies import CbnEq

game = GameConfig(n=3, k=2, F=Uniform(), seed=11)
policy, strat = ContinuousBadNews(), CbnEq()

rng = np.random.default_rng(11)
batch = simulate(game, policy, strat, Draws.draw(rng, 200, 3))
history = next(batch.history(i) for i in range(len(batch)) if batch.history(i).messages)

print("messages seen:")
for m in history.messages:
    print(f"  t={m.time:.4f} depth={m.depth} payload={m.payload}")

bank = ParticleBank.build(game, policy, strat, 20_000, np.random.default_rng(12))
trace = belief_trace(game, policy, strat, history, bank=bank, times=np.linspace(1, 0, 11), strict=False)

print("\n   time depth  P(1 left)  P(2 left)")
for e in trace:
    print(f"{e.time:7.3f} {e.depth:5d} {e.belief.p[0]:10.3f} {e.belief.p[1]:10.3f}")

flags = detect_sudden_bad_news(trace, z=3)
print("\nsudden bad news:", flags or "none")
