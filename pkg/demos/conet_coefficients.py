"""
Level and scale coefficients from a lookback window
===================================================

With every weight at 1/L the level is the window mean and the scale is the
population standard deviation. Other initializations learn their own
projection.
"""

import numpy as np

from dishts import LinearConet, conet_forward

x = np.array([[1.0, 10.0], [2.0, 12.0], [3.0, 17.0]])   # L=3 steps, N=2 series

for init in ("avg", "norm", "uniform"):
    conet = LinearConet(N=2, L=3, init=init, seed=0)
    level, scale = conet_forward(conet, x).numpy()
    print(f"{init:>8}: level={np.round(level, 4)} scale={np.round(scale, 4)}")

print("window mean:", x.mean(axis=0), "population std:", np.round(x.std(axis=0), 4))
