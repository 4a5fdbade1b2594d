"""
Time scales, jumps and the dual scale
=====================================

A union of unit intervals spaced by unit gaps mixes dense and scattered
points.  Reflecting it through zero swaps the two jump operators.
"""

import numpy as np

from chronoctl import classify, dual, from_generator, graininess_nu, rho, sigma
from chronoctl.calculus import GridFunction, nabla_derivative
from chronoctl.timescale import build_grid

ts = from_generator("periodic_union", (0, 5), a=1, b=1)
print(ts)

# 1 is right-scattered, 2 is left-scattered
for t in (0, 1, 2, "5/2"):
    print(t, classify(ts, t), "sigma", sigma(ts, t), "rho", rho(ts, t))

# the jump operators trade places on the dual scale
d = dual(ts)
for t in (1, 2, 3):
    assert sigma(ts, t) == -rho(d, -t)
print("nu(2) =", graininess_nu(ts, 2))

# nabla derivative of t^2: 2t on dense parts, t + rho(t) after a gap
grid = build_grid(ts, dense_step=1 / 100)
f = GridFunction(grid, grid.points.reshape(-1, 1, 1) ** 2)
df = nabla_derivative(f)
i = grid.index(2)
print("f nabla at 2:", df.values[i, 0, 0], "(expected", 2 + 1, ")")
print("f nabla at 1/2:", df.values[grid.index(0.5), 0, 0], "(about 1)")
