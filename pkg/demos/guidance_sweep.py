"""
How strongly to guide the horizon level
=======================================

Sweep the guidance weight and watch the gap between the predicted horizon
level and the true horizon mean.
"""

import numpy as np

from dishts.bench import BenchSuite, run_suite, shifted_suite

for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
    suite = shifted_suite(L=96, H=64, seeds=(0,), alpha=alpha)
    res = run_suite(BenchSuite(suite.name, suite.cells, modes=("dish",)))
    gap = np.mean([r["level_gap"] for r in res.runs])
    mse = np.mean([r["mse"] for r in res.runs])
    print(f"alpha={alpha:4.2f}  level gap {gap:.4f}  test MSE {mse:.4f}")
