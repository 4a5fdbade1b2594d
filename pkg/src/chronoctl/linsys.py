"""Linear systems on time scales: transition matrices and solutions.

A forward system ``x^Δ = A x + B u`` is stepped from left to right, a
backward system ``y^∇ = A y + B v`` from right to left.  Across a gap the
exact one-step recurrences are used::

    forward:  x(σ(t)) = (I + μ(t) A(t)) x(t) + μ(t) B(t) u(t)
    backward: y(ρ(s)) = (I - ν(s) A(s)) y(s) - ν(s) B(s) v(s)

Neither needs an inverse.  Inside dense intervals the classical equation is
integrated with RK4 on the grid step.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import cached_property

import numpy as np

from .calculus import GridFunction, nabla_integral
from .expr import MatrixExpr
from .timescale import Grid, TimeScale, build_grid, dual, exact

__all__ = [
    "FORWARD",
    "BACKWARD",
    "LinearSystem",
    "Transition",
    "Trajectory",
    "Check",
    "NumericalFailure",
    "dualize_system",
    "transition_forward",
    "transition_backward",
    "exp_forward",
    "exp_backward",
    "solve_forward_ivp",
    "solve_backward_ivp",
    "variation_of_constants",
    "is_progressive",
    "is_regressive",
]

FORWARD = "forward"
BACKWARD = "backward"
_DIRECTIONS = {
    "forward": FORWARD, "forward-delta": FORWARD, "delta": FORWARD,
    "backward": BACKWARD, "backward-nabla": BACKWARD, "nabla": BACKWARD,
}


class NumericalFailure(ArithmeticError):
    """A computation needed an inverse that does not exist."""


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """``(A, B, C, D)`` on a time scale, forward (delta) or backward (nabla).

    ``anchor`` is the initial time (``t0`` forward, ``s0`` backward) and
    ``horizon`` the other end of the working interval.  Defaults: the window
    minimum is the forward anchor, the window maximum the backward anchor.
    ``C`` defaults to the identity and ``D`` to zero.
    """

    direction: str
    ts: TimeScale
    A: MatrixExpr
    B: MatrixExpr
    C: MatrixExpr | None = None
    D: MatrixExpr | None = None
    anchor: Fraction | None = None
    horizon: Fraction | None = None
    dense_step: Fraction | None = None

    def __post_init__(self):
        direction = _DIRECTIONS.get(self.direction)
        if direction is None:
            raise ValueError(f"unknown direction {self.direction!r}")
        A, B = MatrixExpr(self.A), MatrixExpr(self.B)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise ValueError(f"B must have {n} rows, got {B.shape}")
        m = B.shape[1]
        C = MatrixExpr(np.eye(n)) if self.C is None else MatrixExpr(self.C)
        if C.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got {C.shape}")
        p = C.shape[0]
        D = MatrixExpr.zeros(p, m) if self.D is None else MatrixExpr(self.D)
        if D.shape != (p, m):
            raise ValueError(f"D must be {p}x{m}, got {D.shape}")
        lo, hi = self.ts.window
        if self.anchor is None:
            anchor = lo if direction == FORWARD else hi
        else:
            anchor = exact(self.anchor)
        if self.horizon is None:
            horizon = hi if direction == FORWARD else lo
        else:
            horizon = exact(self.horizon)
        for name, x in (("anchor", anchor), ("horizon", horizon)):
            if x not in self.ts:
                raise ValueError(f"{name} {x} is not in the time scale")
        if direction == FORWARD and not anchor < horizon:
            raise ValueError("forward systems need anchor < horizon")
        if direction == BACKWARD and not horizon < anchor:
            raise ValueError("backward systems need horizon < anchor")
        step = None if self.dense_step is None else exact(self.dense_step)
        for name, value in (("direction", direction), ("A", A), ("B", B), ("C", C),
                            ("D", D), ("anchor", anchor), ("horizon", horizon),
                            ("dense_step", step)):
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def interval(self) -> tuple[Fraction, Fraction]:
        return min(self.anchor, self.horizon), max(self.anchor, self.horizon)

    @property
    def is_constant(self) -> bool:
        return all(M.is_constant for M in (self.A, self.B, self.C, self.D))

    @cached_property
    def grid(self) -> Grid:
        return build_grid(self.ts, self.dense_step)

    @cached_property
    def transition(self) -> Transition:
        return Transition(self)

    def frozen(self, s) -> LinearSystem:
        """Constant-coefficient system with every matrix evaluated at ``s``."""
        s = float(s)
        return replace(self, A=MatrixExpr(self.A(s)), B=MatrixExpr(self.B(s)),
                       C=MatrixExpr(self.C(s)), D=MatrixExpr(self.D(s)))

    def with_interval(self, horizon=None, anchor=None) -> LinearSystem:
        return replace(self, horizon=self.horizon if horizon is None else horizon,
                       anchor=self.anchor if anchor is None else anchor)


def dualize_system(sys: LinearSystem) -> LinearSystem:
    """Reflect a system through ``t -> -t`` and flip its direction.

    ``A`` and ``B`` are negated and reflected, ``C`` and ``D`` only
    reflected; the anchor and horizon change sign.
    """
    return LinearSystem(
        direction=BACKWARD if sys.direction == FORWARD else FORWARD,
        ts=dual(sys.ts),
        A=sys.A.reflected().negated(),
        B=sys.B.reflected().negated(),
        C=sys.C.reflected(),
        D=sys.D.reflected(),
        anchor=-sys.anchor,
        horizon=-sys.horizon,
        dense_step=sys.dense_step,
    )


def _rk4_matrix(M0, Mm, M1, d):
    """Propagator of the RK4 step for ``X' = M(t) X`` with signed step ``d``."""
    n = M0.shape[-1]
    eye = np.eye(n)
    d = d.reshape(-1, 1, 1)
    K1 = M0
    K2 = Mm @ (eye + d / 2 * K1)
    K3 = Mm @ (eye + d / 2 * K2)
    K4 = M1 @ (eye + d * K3)
    return eye + d / 6 * (K1 + 2 * K2 + 2 * K3 + K4)


def _rk4_forcing(Mm, M1, f0, fm, f1, d):
    """Zero-state response of one RK4 step for ``y' = M y + f``."""
    d = d.reshape(-1, 1)
    k1 = f0
    k2 = (Mm @ (d / 2 * k1)[..., None])[..., 0] + fm
    k3 = (Mm @ (d / 2 * k2)[..., None])[..., 0] + fm
    k4 = (M1 @ (d * k3)[..., None])[..., 0] + f1
    return d / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _path_arrays(exact_pts, comp):
    pts = np.array([float(x) for x in exact_pts])
    steps = np.array([float(b - a) for a, b in zip(exact_pts, exact_pts[1:])])
    mids = np.array([float((a + b) / 2) for a, b in zip(exact_pts, exact_pts[1:])])
    gap = np.asarray(comp[1:]) != np.asarray(comp[:-1])
    return pts, steps, mids, gap


def _step_operators(A: MatrixExpr, exact_pts, comp, direction, B=None, u_pts=None, u_mids=None):
    """One-step propagators (and zero-state responses) along ascending points.

    Forward operator ``k`` maps the state at point ``k`` to point ``k+1``;
    backward operator ``k`` maps the state at point ``k+1`` to point ``k``.
    """
    pts, steps, mids, gap = _path_arrays(exact_pts, comp)
    Ap, Am = A(pts), A(mids)
    n = A.shape[0]
    eye = np.eye(n)
    if direction == FORWARD:
        start, end, d = Ap[:-1], Ap[1:], steps
        jump_at = slice(0, -1)
    else:
        start, end, d = Ap[1:], Ap[:-1], -steps
        jump_at = slice(1, None)
    R = _rk4_matrix(start, Am, end, d)
    R[gap] = eye + d[gap, None, None] * start[gap]
    if B is None:
        return R, None
    Bp, Bm = B(pts), B(mids)
    fp = (Bp @ u_pts[..., None])[..., 0]
    fm = (Bm @ u_mids[..., None])[..., 0]
    if direction == FORWARD:
        f0, f1 = fp[:-1], fp[1:]
    else:
        f0, f1 = fp[1:], fp[:-1]
    q = _rk4_forcing(Am, end, f0, fm, f1, d)
    q[gap] = d[gap, None] * fp[jump_at][gap]
    return R, q


class Transition:
    """Transition matrices of a system's homogeneous equation on its grid.

    For a forward system ``matrix(t, t0)`` is ``Φ(t, t0)`` with ``t >= t0``;
    for a backward system ``matrix(s, s0)`` is ``Ψ(s, s0)`` with ``s <= s0``.
    """

    def __init__(self, sys: LinearSystem):
        self.system = sys
        self.direction = sys.direction
        self.grid = sys.grid
        self.ops, _ = _step_operators(sys.A, self.grid.exact_points, self.grid.component,
                                      sys.direction)

    @property
    def n(self):
        return self.system.n

    def _check(self, i, j):
        # i: index of the evaluation time, j: index of the initial time
        if self.direction == FORWARD and i < j:
            raise ValueError("forward transition requested backward")
        if self.direction == BACKWARD and i > j:
            raise ValueError("backward transition requested forward")

    def matrix(self, t, t0) -> np.ndarray:
        i, j = self.grid.index(t), self.grid.index(t0)
        self._check(i, j)
        X = np.eye(self.n)
        if self.direction == FORWARD:
            for k in range(j, i):
                X = self.ops[k] @ X
        else:
            for k in range(j - 1, i - 1, -1):
                X = self.ops[k] @ X
        return X

    def over_targets(self, t0) -> np.ndarray:
        """``T(g_k, t0)`` for every grid point ``g_k`` reachable from ``t0``.

        Entries outside the reachable range are NaN.
        """
        j = self.grid.index(t0)
        out = np.full((len(self.grid), self.n, self.n), np.nan)
        X = np.eye(self.n)
        out[j] = X
        if self.direction == FORWARD:
            for k in range(j, len(self.grid) - 1):
                X = self.ops[k] @ X
                out[k + 1] = X
        else:
            for k in range(j - 1, -1, -1):
                X = self.ops[k] @ X
                out[k] = X
        return out

    def over_sources(self, t) -> np.ndarray:
        """``T(t, g_k)`` for every grid point ``g_k`` from which ``t`` is reached."""
        i = self.grid.index(t)
        out = np.full((len(self.grid), self.n, self.n), np.nan)
        X = np.eye(self.n)
        out[i] = X
        if self.direction == FORWARD:
            for k in range(i - 1, -1, -1):
                X = X @ self.ops[k]
                out[k] = X
        else:
            for k in range(i, len(self.grid) - 1):
                X = X @ self.ops[k]
                out[k + 1] = X
        return out


def path_transition(sys: LinearSystem, a, b) -> np.ndarray:
    """Transition between arbitrary scale points, not only grid points.

    Forward systems return ``Φ(b, a)`` for ``a <= b``; backward systems return
    ``Ψ(a, b)`` for ``a <= b``.  The path uses every grid point strictly
    between ``a`` and ``b``.
    """
    ts = sys.ts
    ia, xa = ts._locate(a)
    ib, xb = ts._locate(b)
    if xa > xb:
        raise ValueError("path_transition requires a <= b")
    if xa == xb:
        return np.eye(sys.n)
    inner = [x for x in sys.grid.exact_points if xa < x < xb]
    pts = [xa, *inner, xb]
    comp = [ts.component_index(x) for x in pts]
    ops, _ = _step_operators(sys.A, pts, comp, sys.direction)
    X = np.eye(sys.n)
    if sys.direction == FORWARD:
        for op in ops:
            X = op @ X
    else:
        for op in ops[::-1]:
            X = op @ X
    return X


def transition_forward(sys: LinearSystem, t, t0) -> np.ndarray:
    """Forward transition matrix ``Φ_A(t, t0)``, ``t >= t0``."""
    if sys.direction != FORWARD:
        raise ValueError("transition_forward needs a forward system")
    return sys.transition.matrix(t, t0)


def transition_backward(sys: LinearSystem, s, s0) -> np.ndarray:
    """Backward transition matrix ``Ψ_A(s, s0)``, ``s <= s0``."""
    if sys.direction != BACKWARD:
        raise ValueError("transition_backward needs a backward system")
    return sys.transition.matrix(s, s0)


def _constant_system(direction, A, ts, dense_step):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return LinearSystem(direction, ts, MatrixExpr(A), MatrixExpr(np.zeros((A.shape[0], 1))),
                        dense_step=dense_step)


def exp_forward(A, ts: TimeScale, t, t0, dense_step=None, verify=False) -> np.ndarray:
    """Delta exponential ``e_A(t, t0)`` of a constant matrix.

    With ``verify=True`` the reflected nabla exponential of ``-A`` is
    computed as well and the two must agree to 1e-9.
    """
    sys = _constant_system(FORWARD, A, ts, dense_step)
    X = sys.transition.matrix(t, t0)
    if verify:
        Y = exp_backward(-np.atleast_2d(A), dual(ts), -exact_or_float(t), -exact_or_float(t0),
                         dense_step)
        _assert_close(X, Y, "exponential duality")
    return X


def exp_backward(A, ts: TimeScale, s, s0, dense_step=None, verify=False) -> np.ndarray:
    """Nabla exponential ``ê_A(s, s0)`` of a constant matrix, ``s <= s0``."""
    sys = _constant_system(BACKWARD, A, ts, dense_step)
    X = sys.transition.matrix(s, s0)
    if verify:
        Y = exp_forward(-np.atleast_2d(A), dual(ts), -exact_or_float(s), -exact_or_float(s0),
                        dense_step)
        _assert_close(X, Y, "exponential duality")
    return X


def exact_or_float(t):
    return t if isinstance(t, (float, np.floating)) else exact(t)


def _assert_close(X, Y, what, tol=1e-9):
    err = np.max(np.abs(X - Y)) if X.size else 0.0
    if err > tol * (1.0 + np.max(np.abs(X))):
        raise NumericalFailure(f"{what} violated: deviation {err:.3e}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """State and output samples on the solved interval (ascending times)."""

    state: GridFunction
    output: GridFunction

    @property
    def times(self) -> np.ndarray:
        return self.state.grid.points


def _control_samples(u, m, grid: Grid, full_grid: Grid):
    """Control values at grid points and step midpoints, shapes (N, m), (N-1, m)."""
    pts = grid.points
    mids = np.array([float((a + b) / 2) for a, b in zip(grid.exact_points, grid.exact_points[1:])])
    if u is None:
        return np.zeros((len(pts), m)), np.zeros((len(mids), m))
    if isinstance(u, GridFunction):
        if u.shape[0] != m:
            raise ValueError(f"control has {u.shape[0]} rows, expected {m}")
        if len(u.grid) == len(grid) and np.array_equal(u.grid.points, pts):
            vals = u.values[:, :, 0]
        elif len(u.grid) == len(full_grid) and np.array_equal(u.grid.points, full_grid.points):
            i = full_grid.index(grid.exact_points[0])
            vals = u.values[i : i + len(pts), :, 0]
        else:
            raise ValueError("control is sampled on a different grid")
        return vals, (vals[:-1] + vals[1:]) / 2
    if isinstance(u, MatrixExpr):
        if u.shape != (m, 1):
            raise ValueError(f"control expression must be {m}x1, got {u.shape}")
        return u(pts)[..., 0], u(mids)[..., 0]
    if callable(u):
        def call(x):
            try:
                out = np.asarray(u(x), dtype=float)
                if out.shape[:1] == x.shape:
                    return out.reshape(len(x), m)
            except (TypeError, ValueError):
                pass
            return np.array([np.asarray(u(t), dtype=float).reshape(m) for t in x])
        return call(pts), call(mids)
    vec = np.asarray(u, dtype=float).reshape(m)
    return np.tile(vec, (len(pts), 1)), np.tile(vec, (len(mids), 1))


def _solve(sys: LinearSystem, x0, u, end):
    full = sys.grid
    lo, hi = (sys.anchor, end) if sys.direction == FORWARD else (end, sys.anchor)
    lo_i, hi_i = full.index(lo), full.index(hi)
    if lo_i >= hi_i:
        raise ValueError("solution interval must contain more than one point")
    grid = full.restrict(full.exact_points[lo_i], full.exact_points[hi_i])
    u_pts, u_mids = _control_samples(u, sys.m, grid, full)
    R, q = _step_operators(sys.A, grid.exact_points, grid.component, sys.direction,
                           B=sys.B, u_pts=u_pts, u_mids=u_mids)
    x = np.zeros((len(grid), sys.n))
    x0 = np.asarray(x0, dtype=float).reshape(sys.n)
    if sys.direction == FORWARD:
        x[0] = x0
        for k in range(len(grid) - 1):
            x[k + 1] = R[k] @ x[k] + q[k]
    else:
        x[-1] = x0
        for k in range(len(grid) - 2, -1, -1):
            x[k] = R[k] @ x[k + 1] + q[k]
    pts = grid.points
    y = (sys.C(pts) @ x[..., None])[..., 0] + (sys.D(pts) @ u_pts[..., None])[..., 0]
    return Trajectory(GridFunction(grid, x), GridFunction(grid, y))


def solve_forward_ivp(sys: LinearSystem, x0, u=None, t1=None) -> Trajectory:
    """Forward solution on ``[t0, t1]`` by left-to-right stepping."""
    if sys.direction != FORWARD:
        raise ValueError("solve_forward_ivp needs a forward system")
    return _solve(sys, x0, u, sys.horizon if t1 is None else exact_or_float(t1))


def solve_backward_ivp(sys: LinearSystem, y0, v=None, s1=None) -> Trajectory:
    """Backward solution on ``[s1, s0]`` with ``y(s0) = y0``.

    Parameters
    ----------
    sys : LinearSystem
        A backward system; ``sys.anchor`` is ``s0``.
    y0 : array_like
        State at ``s0``.
    v : MatrixExpr, GridFunction, callable or array_like, optional
        Control.  Expressions and callables are also sampled at step midpoints
        for RK4; grid functions are interpolated linearly there.  ``None``
        means zero control.
    s1 : time, optional
        Left end of the interval, defaults to ``sys.horizon``.

    Returns
    -------
    Trajectory
        States ``y`` and outputs ``γ = C y + D v`` on the grid of ``[s1, s0]``.
    """
    if sys.direction != BACKWARD:
        raise ValueError("solve_backward_ivp needs a backward system")
    return _solve(sys, y0, v, sys.horizon if s1 is None else exact_or_float(s1))


def variation_of_constants(sys: LinearSystem, y0, v, s) -> np.ndarray:
    """Closed-form backward solution at ``s`` (validation path).

    ``y(s) = Ψ(s, s0) y0 - ∫_s^{s0} Ψ(s, ρ(ς)) B(ς) v(ς) ∇ς``.
    """
    if sys.direction != BACKWARD:
        raise ValueError("variation_of_constants needs a backward system")
    grid = sys.grid
    i, i0 = grid.index(s), grid.index(sys.anchor)
    Psi = sys.transition.over_sources(s)
    y0 = np.asarray(y0, dtype=float).reshape(sys.n)
    if i == i0:
        return y0.copy()
    sub = grid.restrict(grid.exact_points[i], grid.exact_points[i0])
    v_pts, _ = _control_samples(v, sys.m, sub, grid)
    k = np.arange(i, i0 + 1)
    Bv = (sys.B(sub.points) @ v_pts[..., None])
    dense_vals = Psi[k] @ Bv
    jump_vals = dense_vals.copy()
    left_scattered = np.concatenate([[False], sub.is_gap])
    prev = np.maximum(k - 1, i)
    jump_vals[left_scattered] = (Psi[prev] @ Bv)[left_scattered]
    f = GridFunction(sub, jump_vals)
    g = GridFunction(sub, dense_vals)
    integral = nabla_integral(f, sub.exact_points[0], sub.exact_points[-1], dense=g)[:, 0]
    return Psi[i0] @ y0 - integral


@dataclass(frozen=True)
class Check:
    """Outcome of a hypothesis check, with the first failing time if any."""

    holds: bool
    witness: float | None = None

    def __bool__(self):
        return self.holds


def _singular(M) -> bool:
    scale = np.prod(np.maximum(np.linalg.norm(M, axis=0), 1e-300))
    return abs(np.linalg.det(M)) <= 1e-12 * scale


def is_progressive(sys: LinearSystem) -> Check:
    """Invertibility of ``I - ν(s) A(s)`` at every left-scattered grid point."""
    if sys.direction != BACKWARD:
        raise ValueError("progressivity is defined for backward systems")
    grid = sys.grid
    nu = grid.nu
    idx = np.nonzero(nu > 0)[0]
    if len(idx) == 0:
        return Check(True)
    M = np.eye(sys.n) - nu[idx, None, None] * sys.A(grid.points[idx])
    for k, Mk in zip(idx, M):
        if _singular(Mk):
            return Check(False, float(grid.points[k]))
    return Check(True)


def is_regressive(sys: LinearSystem) -> Check:
    """Invertibility of ``I + μ(t) A(t)`` at every right-scattered grid point."""
    if sys.direction != FORWARD:
        raise ValueError("regressivity is defined for forward systems")
    grid = sys.grid
    mu = grid.mu
    idx = np.nonzero(mu > 0)[0]
    if len(idx) == 0:
        return Check(True)
    M = np.eye(sys.n) + mu[idx, None, None] * sys.A(grid.points[idx])
    for k, Mk in zip(idx, M):
        if _singular(Mk):
            return Check(False, float(grid.points[k]))
    return Check(True)


def warn_if_not_progressive(sys: LinearSystem, what: str):
    check = is_progressive(sys) if sys.direction == BACKWARD else is_regressive(sys)
    if not check:
        warnings.warn(f"{what}: system is not invertible across the gap at {check.witness}",
                      RuntimeWarning, stacklevel=3)
    return check
