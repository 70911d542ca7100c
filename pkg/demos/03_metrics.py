"""
Ranking metrics on a toy batch
==============================

Three samples, four classes. Ties break towards the smaller class index.
"""

import numpy as np

from aplloss.metrics import average_precision_per_class, report

scores = np.array([
    [0.9, 0.2, 0.8, 0.1],
    [0.3, 0.7, 0.7, 0.2],
    [0.1, 0.4, 0.6, 0.9],
])
truth = np.array([
    [1, 0, 0, 0],
    [0, 0, 1, 0],
    [0, 0, 1, 1],
])

rep = report(scores, truth, ks=(1, 2, 3))
for name, value in rep.values.items():
    print(f"{name:<9}{value:.4f}")

# class 1 has no positives and is left out of mAP
print("AP per class:", np.round(average_precision_per_class(scores, truth), 4))
