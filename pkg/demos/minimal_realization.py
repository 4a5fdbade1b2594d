"""
Weighting patterns and minimality
=================================

The input-output kernel of a system is sampled on a grid of pairs and
factored by truncated SVD.  A realization is minimal when the separable
rank of the kernel equals the state dimension.
"""

import numpy as np

from chronoctl import LinearSystem, from_generator, is_minimal, sample_kernel, separable_rank

ts = from_generator("integers", (-5, 0))

# controllable and observable: separable rank 2
sys = LinearSystem("backward", ts, [["0.5", "1"], ["0", "0.25"]], [["0"], ["1"]],
                   [["1", "0"]])
rep = is_minimal(sys)
print("minimal:", rep.minimal, "separable rank", rep.factorization.rank)

# drop the coupling: the input only reaches the unobserved state, so the kernel vanishes
hidden = LinearSystem("backward", ts, [["0.5", "0"], ["0", "0.25"]], [["0"], ["1"]],
                      [["1", "0"]])
rep = is_minimal(hidden)
print("minimal:", rep.minimal, "separable rank", rep.factorization.rank)

# the factors reproduce the sampled kernel
ks = sample_kernel(sys)
fact = separable_rank(ks)
print("singular values:", np.round(fact.singular_values[:4], 6))
print("relative residual:", fact.residual)
