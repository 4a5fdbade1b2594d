"""Linear control systems on time scales, backward (nabla) and forward (delta).

The package is organised bottom up:

``timescale``
    exact time scales, jump operators, grids
``calculus``
    delta/nabla derivatives and integrals of grid functions
``expr``
    expression parser for time-varying matrices
``linsys``
    systems, transition matrices, solvers, duality
``analysis``
    controllability and observability tests, Gramians
``realization``
    weighting patterns, separable rank, minimality
``config``, ``cli``
    JSON configurations and the ``chronoctl`` command
"""

__version__ = "0.1.0"

from .timescale import (  # noqa: E402
    Grid,
    PointClass,
    TimeScale,
    build_grid,
    classify,
    dual,
    from_generator,
    graininess_mu,
    graininess_nu,
    rho,
    sigma,
)
from .calculus import (  # noqa: E402
    GridFunction,
    delta_derivative,
    delta_integral,
    dualize_function,
    nabla_derivative,
    nabla_integral,
)
from .expr import MatrixExpr, eval_matrix, evaluate, parse  # noqa: E402
from .linsys import (  # noqa: E402
    LinearSystem,
    dualize_system,
    exp_backward,
    exp_forward,
    is_progressive,
    is_regressive,
    solve_backward_ivp,
    solve_forward_ivp,
    transition_backward,
    transition_forward,
    variation_of_constants,
)
from .analysis import (  # noqa: E402
    controllability_gramian,
    kalman_controllability,
    kalman_observability,
    observability_gramian,
    pk_controllability,
    reachable_translate_check,
    tv_controllability,
    tv_observability,
)
from .realization import (  # noqa: E402
    is_minimal,
    sample_kernel,
    separable_rank,
    weighting_pattern,
)
