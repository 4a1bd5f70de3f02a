"""
Exact optimal transport between small discrete measures
=======================================================

The exact solver returns a vertex of the transportation polytope, so the
plan has at most n + m - 1 nonzero cells. For uniform square marginals the
optimum is a permutation and the assignment path is used automatically.
"""

import numpy as np

from prw import DiscreteMeasure, cost_matrix, solve_exact_ot, wasserstein_1d, wasserstein_p

rng = np.random.default_rng(0)

# two small clouds with unequal weights
mu = DiscreteMeasure(rng.standard_normal((4, 2)), [0.1, 0.2, 0.3, 0.4])
nu = DiscreteMeasure(rng.standard_normal((5, 2)) + 1.0, np.full(5, 0.2))

plan, cost = solve_exact_ot(cost_matrix(mu.atoms, nu.atoms), mu.weights, nu.weights)
print("plan:\n", np.round(plan.matrix, 3))
print("nonzero cells:", np.count_nonzero(plan.matrix), "<= n + m - 1 =", mu.n + nu.n - 1)
print("W_2 =", np.sqrt(cost), "=", wasserstein_p(mu, nu))

# in one dimension the monotone coupling is optimal, no LP needed
x, y = rng.standard_normal(6), rng.standard_normal(8)
wx, wy = np.full(6, 1 / 6), np.full(8, 1 / 8)
C = (x[:, None] - y[None, :]) ** 2
print("1-D closed form:", wasserstein_1d(x, wx, y, wy) ** 2, " LP:", solve_exact_ot(C, wx, wy)[1])
