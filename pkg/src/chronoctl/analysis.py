"""Controllability and observability tests for backward linear systems.

Constant-coefficient systems get the Kalman rank tests and the eigenvalue
product variant.  Time-varying systems get the derivative-sequence tests,
which are sufficient conditions only.  Gramians serve as an independent
oracle for either kind.

Forward systems are accepted everywhere: the Kalman tests work on their own
matrices, the other tests run on the dual backward system.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .calculus import GridFunction, nabla_integral
from .linsys import (
    BACKWARD,
    FORWARD,
    LinearSystem,
    NumericalFailure,
    dualize_system,
    path_transition,
    solve_backward_ivp,
    warn_if_not_progressive,
)
from .timescale import exact, rho

__all__ = [
    "RANK_RTOL",
    "RankReport",
    "GramianReport",
    "numerical_rank",
    "kalman_controllability",
    "pk_controllability",
    "kalman_observability",
    "pk_observability",
    "tv_controllability",
    "tv_observability",
    "controllability_gramian",
    "observability_gramian",
    "reachable_translate_check",
]

RANK_RTOL = 1e-9
MAX_DERIVATIVE_ORDER = 3
DEFAULT_DIFF_STEP = Fraction(1, 20)


class TimeVaryingError(ValueError):
    """A constant-coefficient test was given a time-varying system."""


def numerical_rank(M, rtol=RANK_RTOL):
    """Singular values, rank and threshold of ``M``.

    The rank counts singular values above ``rtol`` times the largest one; a
    zero matrix has rank 0.
    """
    M = np.asarray(M)
    if M.size == 0:
        return np.zeros(0), 0, 0.0
    sv = np.linalg.svd(M, compute_uv=False)
    smax = sv[0] if len(sv) else 0.0
    if smax == 0:
        return sv, 0, 0.0
    threshold = rtol * smax
    return sv, int(np.sum(sv > threshold)), float(threshold)


@dataclass(eq=False)
class RankReport:
    """Outcome of a rank test.

    ``sufficient_only`` marks tests whose rank deficiency proves nothing;
    their verdict is then "inconclusive" instead of a negative one.
    """

    test: str
    property: str
    matrix: np.ndarray = field(repr=False)
    singular_values: np.ndarray
    rank: int
    threshold: float
    n: int
    s_c: float | None = None
    order: int | None = None
    sufficient_only: bool = False
    cross_check: RankReport | None = None

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def holds(self) -> bool:
        return self.rank == self.n

    @property
    def verdict(self) -> str:
        if self.holds:
            return self.property
        return "inconclusive" if self.sufficient_only else f"not {self.property}"


def _rank_report(test, prop, M, n, **extra):
    sv, rank, thr = numerical_rank(M)
    return RankReport(test, prop, np.asarray(M), sv, rank, thr, n, **extra)


def _point_count(sys: LinearSystem) -> float:
    lo, hi = sys.interval
    part = sys.ts.restrict(lo, hi)
    if not part.is_discrete:
        return float("inf")
    return len(part.components)


def _constant(sys: LinearSystem, names, test):
    for name in names:
        if not getattr(sys, name).is_constant:
            raise TimeVaryingError(
                f"{name} depends on time; use {test} for time-varying systems")
    if _point_count(sys) < sys.n + 1:
        raise ValueError(f"the working interval needs at least n+1 = {sys.n + 1} points")
    t = float(sys.anchor)
    return [getattr(sys, name)(t) for name in names]


def _eigen_order(A, order=None):
    lam = np.linalg.eigvals(A)
    if order is None:
        return sorted(lam, key=lambda z: (z.real, z.imag))
    return [lam[i] for i in order]


def _pk_products(A, order):
    n = A.shape[0]
    lam = _eigen_order(A, order)
    P = [np.eye(n, dtype=complex)]
    for k in range(n - 1):
        P.append((A - lam[k] * np.eye(n)) @ P[-1])
    return P


def kalman_controllability(sys: LinearSystem) -> RankReport:
    """Rank of ``[B, AB, ..., A^(n-1) B]`` for constant ``A``, ``B``."""
    A, B = _constant(sys, ("A", "B"), "tv_controllability")
    blocks = [B]
    for _ in range(sys.n - 1):
        blocks.append(A @ blocks[-1])
    return _rank_report("kalman_controllability", "controllable", np.hstack(blocks), sys.n)


def pk_controllability(sys: LinearSystem, order=None) -> RankReport:
    """Rank of ``[P_0 B, ..., P_(n-1) B]`` with ``P_(k+1) = (A - λ_(k+1) I) P_k``.

    Parameters
    ----------
    order : sequence of int, optional
        Permutation of the eigenvalues as returned by ``numpy.linalg.eigvals``.
        By default they are sorted by real part, then imaginary part.
    """
    A, B = _constant(sys, ("A", "B"), "tv_controllability")
    P = _pk_products(A, order)
    M = np.hstack([Pk @ B for Pk in P])
    return _rank_report("pk_controllability", "controllable", M, sys.n)


def pk_observability(sys: LinearSystem, order=None) -> RankReport:
    """Rank of the stack ``[C P_0; ...; C P_(n-1)]``."""
    A, C = _constant(sys, ("A", "C"), "tv_observability")
    P = _pk_products(A, order)
    M = np.vstack([C @ Pk for Pk in P])
    return _rank_report("pk_observability", "observable", M, sys.n)


def kalman_observability(sys: LinearSystem) -> RankReport:
    """Rank of the stack ``[C; CA; ...; C A^(n-1)]``.

    The eigenvalue-product variant is computed too and attached as
    ``cross_check``; a disagreement between the two raises a warning.
    """
    A, C = _constant(sys, ("A", "C"), "tv_observability")
    blocks = [C]
    for _ in range(sys.n - 1):
        blocks.append(blocks[-1] @ A)
    report = _rank_report("kalman_observability", "observable", np.vstack(blocks), sys.n)
    report.cross_check = pk_observability(sys)
    if report.cross_check.holds != report.holds:
        warnings.warn("Kalman and eigenvalue-product observability tests disagree",
                      RuntimeWarning, stacklevel=2)
    return report


def _as_backward(sys: LinearSystem, s_c=None):
    if sys.direction == BACKWARD:
        return sys, s_c
    return dualize_system(sys), None if s_c is None else -exact(s_c)


def _stencil(sys: LinearSystem, s_c, r, delta):
    """Nodes ``s_c = z_0 > z_1 > ... > z_r`` for iterated backward differences."""
    comps = sys.ts.components
    nodes = [s_c]
    for _ in range(r):
        z = nodes[-1]
        i = sys.ts.component_index(z)
        a = comps[i][0]
        if z == a:
            if i == 0:
                raise ValueError("difference stencil leaves the time scale; choose a larger s_c")
            nodes.append(comps[i - 1][1])
        else:
            nodes.append(max(z - delta, a))
    return nodes


def _iterated_differences(values, nodes, r):
    """``D^j`` at ``nodes[0]`` for ``j = 0..r`` by repeated backward differences."""
    out = [values[0]]
    level = list(values)
    for _ in range(r):
        level = [(level[k] - level[k + 1]) / float(nodes[k] - nodes[k + 1])
                 for k in range(len(level) - 1)]
        out.append(level[0])
    return out


def _tv_setup(sys, s_c, r, step):
    if not 0 <= r <= MAX_DERIVATIVE_ORDER:
        raise ValueError(f"derivative order r must be in 0..{MAX_DERIVATIVE_ORDER}, got {r}")
    if s_c is None:
        s_c = sys.anchor
    s_c = exact(s_c)
    s1, s0 = sys.interval
    if s_c not in sys.ts:
        raise ValueError(f"s_c = {s_c} is not in the time scale")
    if not s1 < s_c <= s0 or s_c == sys.ts.min:
        raise ValueError(f"s_c = {s_c} must lie in ({s1}, {s0}] away from the window edge")
    i = sys.ts.component_index(s_c)
    a = sys.ts.components[i][0]
    dense = s_c > a
    if step is None:
        delta = DEFAULT_DIFF_STEP
        if dense and r > 0:
            delta = min(delta, (s_c - a) / (2 * r))
    else:
        delta = exact(step)
    richardson = dense and r > 0 and s_c - 2 * r * delta >= a
    return s_c, delta, richardson


def _derivatives(kernel, sys, s_c, r, delta, richardson):
    nodes = _stencil(sys, s_c, r, delta)
    D = _iterated_differences(kernel(nodes), nodes, r)
    if richardson:
        nodes2 = _stencil(sys, s_c, r, 2 * delta)
        D2 = _iterated_differences(kernel(nodes2), nodes2, r)
        D = [D[0]] + [2 * d1 - d2 for d1, d2 in zip(D[1:], D2[1:])]
    return D


def _solve_transition(P, rhs, where):
    try:
        return np.linalg.solve(P, rhs)
    except np.linalg.LinAlgError:
        raise NumericalFailure(
            f"transition matrix is singular near {float(where)}; the system is not "
            "progressive there") from None


def tv_controllability(sys: LinearSystem, s_c=None, r: int = 1, step=None) -> RankReport:
    """Sufficient controllability test for time-varying systems.

    Builds ``K_j = -(∂^j/∇z^j)[Ψ(ρ(s_c), ρ(z)) B(z)]`` at ``z = s_c`` for
    ``j = 0..r`` and checks ``rank [K_0 ... K_r] = n``.

    Parameters
    ----------
    sys : LinearSystem
        Backward system, or a forward system which is dualized first (``s_c``
        is then given in the forward time).
    s_c : time, optional
        Test point in ``(s1, s0]``, defaults to ``s0``.
    r : int
        Highest derivative order, at most 3.
    step : number, optional
        Difference step inside dense intervals.  Defaults to 0.05, shrunk to
        fit the interval containing ``s_c``; one Richardson extrapolation is
        applied when the stencil stays inside that interval.

    Returns
    -------
    RankReport
        Verdict "controllable" on full rank, "inconclusive" otherwise.

    Notes
    -----
    The coefficients are assumed ``r`` times differentiable near ``s_c``;
    this cannot be checked from samples.
    """
    sys, s_c = _as_backward(sys, s_c)
    s_c, delta, richardson = _tv_setup(sys, s_c, r, step)
    w0 = rho(sys.ts, s_c)

    def kernel(nodes):
        out, P, w_prev = [], np.eye(sys.n), w0
        for z in nodes:
            w = rho(sys.ts, z)
            if w < w_prev:
                P = path_transition(sys, w, w_prev) @ P
                w_prev = w
            # Ψ(ρ(s_c), ρ(z)) is the inverse of the forward-in-s product P
            out.append(_solve_transition(P, sys.B(float(z)), z))
        return out

    D = _derivatives(kernel, sys, s_c, r, delta, richardson)
    M = np.hstack([-d for d in D])
    return _rank_report("tv_controllability", "controllable", M, sys.n,
                        s_c=float(s_c), order=r, sufficient_only=True)


def tv_observability(sys: LinearSystem, s_c=None, r: int = 1, step=None) -> RankReport:
    """Sufficient observability test for time-varying systems.

    Stacks ``L_j = -(∂^j/∇z^j)[C(s_c) Ψ(s_c, z)]`` at ``z = s_c`` for
    ``j = 0..r``; arguments and smoothness assumption as in
    :func:`tv_controllability`.
    """
    sys, s_c = _as_backward(sys, s_c)
    s_c, delta, richardson = _tv_setup(sys, s_c, r, step)
    C = sys.C(float(s_c))

    def kernel(nodes):
        out, P, z_prev = [], np.eye(sys.n), nodes[0]
        for z in nodes:
            if z < z_prev:
                P = path_transition(sys, z, z_prev) @ P
                z_prev = z
            out.append(_solve_transition(P.T, C.T, z).T)
        return out

    D = _derivatives(kernel, sys, s_c, r, delta, richardson)
    M = np.vstack([-d for d in D])
    return _rank_report("tv_observability", "observable", M, sys.n,
                        s_c=float(s_c), order=r, sufficient_only=True)


@dataclass(eq=False)
class GramianReport:
    """Gramian over ``[s1, s0]`` with its eigenvalues and numerical rank.

    The rank uses the threshold ``RANK_RTOL`` on the singular values of the
    quadrature factor ``L`` (``W = L L^T``), not on the eigenvalues of ``W``.
    """

    kind: str
    gramian: np.ndarray
    eigenvalues: np.ndarray
    rank: int
    n: int
    interval: tuple[float, float]

    @property
    def holds(self) -> bool:
        return self.rank == self.n

    @property
    def verdict(self) -> str:
        prop = "controllable" if self.kind == "controllability" else "observable"
        return prop if self.holds else f"not {prop}"


def _gramian_factor(sub, jump, dense=None):
    """``L`` with ``L L^T`` equal to the nabla quadrature of ``X X^T``.

    The quadrature weights are nonnegative, so the Gramian is a sum of
    weighted outer products and its rank is read off ``L``, whose
    conditioning is the square root of the Gramian's.
    """
    dense = jump if dense is None else dense
    steps = sub.steps.reshape(-1, 1, 1)
    gap = sub.is_gap.reshape(-1, 1, 1)
    half = np.sqrt(steps / 2)
    blocks = [np.where(gap, np.sqrt(steps) * jump[1:], half * dense[:-1]),
              np.where(gap, 0.0, half * dense[1:])]
    return np.concatenate([np.concatenate(list(b), axis=1) for b in blocks], axis=1)


def _gramian_report(kind, W, L, n, s1, s0):
    W = (W + W.T) / 2
    eig = np.linalg.eigvalsh(W)
    _, rank, _ = numerical_rank(L)
    return GramianReport(kind, W, eig, rank, n, (float(s1), float(s0)))


def _gramian_interval(sys, s1, s0):
    lo, hi = sys.interval
    s1 = lo if s1 is None else exact(s1)
    s0 = hi if s0 is None else exact(s0)
    if not s1 < s0:
        raise ValueError("Gramian interval is degenerate")
    grid = sys.grid
    return s1, s0, grid.index(s1), grid.index(s0)


def controllability_gramian(sys: LinearSystem, s1=None, s0=None) -> GramianReport:
    """``W_c = ∫_(s1)^(s0) Ψ(s1, ρ(ς)) B B^T Ψ(s1, ρ(ς))^T ∇ς``.

    Forward systems are dualized first, with the interval taken from the
    dual system.  A warning is issued for non-progressive systems.
    """
    if sys.direction == FORWARD:
        sys = dualize_system(sys)
    warn_if_not_progressive(sys, "controllability_gramian")
    s1, s0, i1, i0 = _gramian_interval(sys, s1, s0)
    grid = sys.grid
    Psi = sys.transition.over_sources(s1)
    k = np.arange(i1, i0 + 1)
    B = sys.B(grid.points[k])
    dense = Psi[k] @ B
    jump = dense.copy()
    left_scattered = np.concatenate([[False], grid.is_gap[i1:i0]])
    jump[left_scattered] = (Psi[k - 1] @ B)[left_scattered]
    sub = grid.restrict(grid.exact_points[i1], grid.exact_points[i0])
    outer = lambda X: X @ np.swapaxes(X, 1, 2)
    W = nabla_integral(GridFunction(sub, outer(jump)), sub.exact_points[0],
                       sub.exact_points[-1], dense=GridFunction(sub, outer(dense)))
    L = _gramian_factor(sub, jump, dense)
    return _gramian_report("controllability", W, L, sys.n, s1, s0)


def observability_gramian(sys: LinearSystem, s1=None, s0=None) -> GramianReport:
    """``W_o = ∫_(s1)^(s0) Ψ(s, s0)^T C^T C Ψ(s, s0) ∇s``."""
    if sys.direction == FORWARD:
        sys = dualize_system(sys)
    warn_if_not_progressive(sys, "observability_gramian")
    s1, s0, i1, i0 = _gramian_interval(sys, s1, s0)
    grid = sys.grid
    Psi = sys.transition.over_targets(s0)
    k = np.arange(i1, i0 + 1)
    X = sys.C(grid.points[k]) @ Psi[k]
    sub = grid.restrict(grid.exact_points[i1], grid.exact_points[i0])
    W = nabla_integral(GridFunction(sub, np.swapaxes(X, 1, 2) @ X),
                       sub.exact_points[0], sub.exact_points[-1])
    L = _gramian_factor(sub, np.swapaxes(X, 1, 2))
    return _gramian_report("observability", W, L, sys.n, s1, s0)


def reachable_translate_check(sys: LinearSystem, y0, controls, s1=None, tol=1e-9) -> bool:
    """Check that reachable sets from ``y0`` are translates by ``Ψ(s1, s0) y0``.

    For every control the endpoint at ``s1`` started from ``y0`` minus the
    endpoint started from zero must equal ``Ψ(s1, s0) y0``.
    """
    s1 = sys.horizon if s1 is None else s1
    y0 = np.asarray(y0, dtype=float).reshape(sys.n)
    target = sys.transition.matrix(s1, sys.anchor) @ y0
    scale = 1.0 + np.max(np.abs(target), initial=0.0)
    for v in controls:
        a = solve_backward_ivp(sys, y0, v, s1).state.values[0, :, 0]
        b = solve_backward_ivp(sys, np.zeros(sys.n), v, s1).state.values[0, :, 0]
        if np.max(np.abs((a - b) - target), initial=0.0) > tol * scale:
            return False
    return True
