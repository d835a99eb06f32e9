"""Max-cut on a small graph: certified bound, then an actual cut.

The semidefinite relaxation is solved in factored form, starting from
rank 1 and escalating until the dual certificate closes.  Random
hyperplane rounding then turns the factor into a concrete +-1
assignment whose value can be compared against the bound (and, at this
size, against exhaustive enumeration).
"""

import itertools

import numpy as np

from lowrank_sdp import Graph, maxcut_bound, maxcut_round

# a wheel: hub 0 connected to a 6-cycle, mixed weights
n = 7
edges = [(0, k, 1.0) for k in range(1, n)]
edges += [(k, k % 6 + 1, 2.0) for k in range(1, n)]
g = Graph(n, edges)

res, bound = maxcut_bound(g, seed=0)
print(f"solver status   {res.status}")
print(f"final rank      {res.p} (escalated through "
      f"{[p for p, _ in res.rank_history]})")
print(f"upper bound     {bound:.6f}")
print(f"dual smin       {res.certificate.smin:.3e}")

assignment, cut = maxcut_round(g, res.Y_star, trials=200, seed=1)
print(f"rounded cut     {cut:.6f}  (assignment {assignment.astype(int)})")

# exhaustive check, feasible at this size
best = 0.0
for bits in itertools.product((1.0, -1.0), repeat=n - 1):
    s = np.array((1.0,) + bits)
    best = max(best, 0.5 * sum(w * (1 - s[i] * s[j]) for i, j, w in g.edges))
print(f"true max cut    {best:.6f}")
print(f"rounding gap    {best - cut:.6f}, relaxation gap {bound - best:.6f}")
