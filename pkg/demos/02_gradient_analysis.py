"""
Where the negative gradient peaks
=================================

For a negative label the gradient with respect to the logit rises, peaks
at p* and falls again. Predictions beyond p* get less push, which is how
the loss goes easy on likely missing labels. Raising beta1 moves the
peak left.
"""

import numpy as np

from aplloss import APLParams, find_pstar, interaction_difference, negative_gradient_wrt_logit
from aplloss.analysis import interaction_terms

base = dict(gamma_minus=1.8, p_th=0.01)

for beta1 in (1.0, 1.5, 2.0):
    cp = find_pstar(APLParams(beta1=beta1, **base))
    print(f"beta1={beta1}: p* = {cp.p_star:.6f}  (slope residual {cp.residual:.1e})")

# A coarse text profile of the gradient for beta1 = 1.5
params = APLParams(beta1=1.5, **base)
grid = np.linspace(0.05, 0.99, 12)
g = negative_gradient_wrt_logit(grid, params)
for p, v in zip(grid, g):
    print(f"  p={p:.2f}  {'#' * int(40 * v / g.max())}")

# Plain BCE has no interior peak
try:
    find_pstar(APLParams())
except ValueError as exc:
    print("\nBCE:", exc)

# Series coefficients of the positive/negative interaction
print("\ninteraction coefficients:", ", ".join(str(c) for c in interaction_terms(5)))
for p in (0.1, 0.5, 0.9):
    series = interaction_difference(p, 2000)
    print(f"p={p}: series {series:.10f}  p ln p + 1 - p = {p * np.log(p) + 1 - p:.10f}")
