"""
The loss family in a few lines
==============================

BCE, ASL and APL are one function with different parameters. This walk
evaluates each on a handful of probabilities and checks the closed form
against the truncated series.
"""

import numpy as np

from aplloss import APLParams, apl_forward_backward, apl_series_forward, bce

# A few logits and their probabilities, one row per label value
logits = np.array([[-3.0, -1.0, 0.0, 1.0, 3.0]])
probs = 1 / (1 + np.exp(-logits))
print("p      :", np.round(probs[0], 4))

family = {
    "BCE": APLParams(),
    "ASL": APLParams.asl(gamma_plus=0, gamma_minus=4, p_th=0.05),
    "APL": APLParams(alpha1=2, alpha2=1, beta1=1.4, gamma_minus=4, p_th=0.05),
}

# With default parameters APL is exactly BCE
for y in (1, 0):
    labels = np.full(logits.shape, y)
    ref = bce(probs, labels).value
    got = apl_forward_backward(logits, labels, APLParams()).value
    print(f"y={y}: BCE {ref:.6f}  APL(defaults) {got:.6f}")

# Per-label value of each member; note the shifted negatives
print()
print(f"{'loss':<5}{'y':>3}" + "".join(f"{p:>9.3f}" for p in probs[0]))
for name, params in family.items():
    for y in (1, 0):
        row = []
        for x in logits[0]:
            row.append(apl_forward_backward([[x]], [[y]], params).value)
        print(f"{name:<5}{y:>3}" + "".join(f"{v:>9.4f}" for v in row))

# The series with a few hundred terms reproduces the closed form
params = family["APL"].replace(trunc_order=400)
for y in (1, 0):
    labels = np.full(logits.shape, y)
    closed = apl_forward_backward(logits, labels, params).value
    series = apl_series_forward(probs, labels, params)
    print(f"\ny={y}: closed {closed:.10f}  series {series:.10f}")
