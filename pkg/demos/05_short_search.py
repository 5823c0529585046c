"""A short Bayesian search over the fundamental-drive design space.

Forty evaluations will not reach the deepest valleys, but the trace shows
the mix of space-filling, global and local proposals.
"""
from collections import Counter

from qong import fundamental_design
from qong.optimize import bayes_optimize, default_space

space = default_space("fundamental", fundamental_design())
trace = bayes_optimize(space, budget=40, seed=0)

print("phases:", dict(Counter(e.phase for e in trace.entries)))
print("infeasible:", sum(not e.feasible for e in trace.entries))
print(f"best {trace.best_mdr:.4g} deg/h at", {k: f"{v:.4g}" for k, v in trace.best.point.items()})
