"""Anatomy of a solve: rank escalation and the dual certificate.

A factored solve works at a fixed width p; optimality of the matrix it
represents is decided by the smallest eigenvalue of the dual slack
operator.  When that eigenvalue is negative its eigenvector shows how
to widen the factor and descend further, so the rank only grows when
the mathematics demands it.

The 5-cycle max-cut relaxation makes every stage visible.  At p = 1
the unit-diagonal constraint pins each row of Y to +-1, a discrete set
with no tangent directions at all, so the inner solver stops at once
and only the certificate can make progress.  At p = 2 the solver lands
on a genuine critical point that is still not optimal.  At p = 3 the
certificate finally closes, on a solution whose matrix has rank 2.
"""

import numpy as np

from lowrank_sdp import Graph, LinearCost, MetaOptions, elliptope, solve

g = Graph(5, [(k, (k + 1) % 5, 1.0) for k in range(5)])
A = -0.25 * g.laplacian
res = solve(elliptope(5), LinearCost(A), MetaOptions(p0=1), seed=4)

print(f"status     {res.status}")
print(f"bound      {-res.objective:.12f}")
print(f"closed form 2.5 + 2.5 cos(pi/5) = {2.5 + 2.5 * np.cos(np.pi / 5):.12f}")

print("\nrank ladder (smin is the smallest dual-slack eigenvalue;")
print("escalation continues while it is meaningfully negative):")
for (p, smin), (_, records) in zip(res.rank_history, res.traces):
    accepted = sum(r.accepted for r in records)
    print(f"  p = {p}: {len(records):2d} steps ({accepted} accepted), "
          f"final grad {records[-1].grad_norm:.1e}, smin = {smin:+.3e}")

w = np.linalg.eigvalsh(res.X())
print(f"\nX spectrum: {np.round(w, 6)}")
print(f"the optimizer needed width {res.p} to escape the width-2 trap,")
print(f"but the solution itself has rank {int(np.sum(w > 1e-6))}")
