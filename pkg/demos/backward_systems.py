"""
Backward systems and their forward duals
========================================

A backward (nabla) system is solved from its final time toward the past.
Its dual forward system on the reflected scale produces the same
trajectory, read with time reversed.
"""

import numpy as np

from chronoctl import (
    LinearSystem,
    MatrixExpr,
    dualize_system,
    from_generator,
    solve_backward_ivp,
    solve_forward_ivp,
)
from chronoctl.analysis import controllability_gramian, kalman_controllability

ts = from_generator("periodic_union", (-5, 0), a=1, b=1)
A = [["0", "1"], ["-1", "0"]]
B = [["0"], ["1"]]
sys = LinearSystem("backward", ts, A, B, anchor=0, horizon=-5, dense_step="1/100")

y0 = np.array([1.0, 0.0])
v = MatrixExpr([["sin(s)"]])
back = solve_backward_ivp(sys, y0, v)
print("state at s1 =", back.state.values[0, :, 0])

fwd = solve_forward_ivp(dualize_system(sys), y0, MatrixExpr([["sin(-t)"]]))
# same numbers, same order of operations
print("dual forward at t = 5:", fwd.state.values[-1, :, 0])
print("bitwise equal:", np.array_equal(back.state.values[::-1], fwd.state.values))

# rank tests and the Gramian on the same window
print(kalman_controllability(sys).verdict, "| rank",
      controllability_gramian(sys).rank)
