"""Delta and nabla derivatives and integrals of sampled functions.

Scattered points are handled exactly through the jump operators.  Inside
dense intervals derivatives use second-order finite differences (central in
the interior, one-sided at interval ends) and integrals use the trapezoidal
rule.  Values may be scalars or matrices; they are stored with shape
``(len(grid), r, c)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .timescale import Grid

__all__ = [
    "GridFunction",
    "dualize_function",
    "delta_derivative",
    "nabla_derivative",
    "delta_integral",
    "nabla_integral",
]


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Matrix-valued samples on a grid, ``values.shape == (len(grid), r, c)``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim == 1:
            v = v[:, None, None]
        elif v.ndim == 2:
            v = v[:, :, None]
        if v.shape[0] != len(self.grid):
            raise ValueError(
                f"{v.shape[0]} samples for a grid of {len(self.grid)} points")
        object.__setattr__(self, "values", v)

    @classmethod
    def sample(cls, grid: Grid, fn) -> GridFunction:
        """Sample ``fn`` at every grid point.

        ``fn`` is first called on the whole array of points; if that does not
        produce one value per point it is called point by point.
        """
        pts = grid.points
        try:
            out = np.asarray(fn(pts), dtype=float)
            if out.shape[:1] == pts.shape:
                return cls(grid, out)
        except (TypeError, ValueError):
            pass
        return cls(grid, np.array([np.asarray(fn(t), dtype=float) for t in pts]))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[1:]

    @property
    def points(self) -> np.ndarray:
        return self.grid.points

    def at(self, t) -> np.ndarray:
        return self.values[self.grid.index(t)]

    def scalar(self) -> np.ndarray:
        """Values as a flat array (only for 1x1 functions)."""
        if self.shape != (1, 1):
            raise ValueError("not a scalar function")
        return self.values[:, 0, 0]


def dualize_function(f: GridFunction) -> GridFunction:
    """``f*(s) = f(-s)`` on the reflected grid."""
    return GridFunction(f.grid.reflected(), f.values[::-1].copy())


def _component_layout(grid: Grid):
    """Per point: position inside its component and the component's last index."""
    comp = grid.component
    n = len(comp)
    first = np.zeros(n, dtype=int)
    last = np.zeros(n, dtype=int)
    start = 0
    for k in range(1, n + 1):
        if k == n or comp[k] != comp[k - 1]:
            first[start:k] = start
            last[start:k] = k - 1
            start = k
    return first, last


def delta_derivative(f: GridFunction) -> GridFunction:
    """Delta (Hilger) derivative.

    At a right-scattered point this is ``(f(sigma(t)) - f(t)) / mu(t)``.  At
    right-dense points the one-sided right derivative is approximated to
    second order.  The value at an isolated window maximum is undefined and
    returned as NaN.
    """
    grid = f.grid
    if len(grid) < 2:
        raise ValueError("derivative needs at least two grid points")
    x, v = grid.points, f.values
    exact_steps = grid.steps
    first, last = _component_layout(grid)
    out = np.full_like(v, np.nan, dtype=float)
    n = len(x)
    for k in range(n):
        i0, i1 = first[k], last[k]
        if k == i1:
            if k + 1 < n:
                out[k] = (v[k + 1] - v[k]) / exact_steps[k]
            elif i1 > i0:
                # right-dense window maximum: left-sided limit
                d = exact_steps[k - 1]
                if i1 - i0 >= 2:
                    out[k] = (3 * v[k] - 4 * v[k - 1] + v[k - 2]) / (2 * d)
                else:
                    out[k] = (v[k] - v[k - 1]) / d
            continue
        d = exact_steps[k]
        if k > i0:
            out[k] = (v[k + 1] - v[k - 1]) / (2 * d)
        elif i1 - i0 >= 2:
            out[k] = (-3 * v[k] + 4 * v[k + 1] - v[k + 2]) / (2 * d)
        else:
            out[k] = (v[k + 1] - v[k]) / d
    return GridFunction(grid, out)


def nabla_derivative(f: GridFunction) -> GridFunction:
    """Nabla derivative.

    At a left-scattered point this is ``(f(t) - f(rho(t))) / nu(t)``; at
    left-dense points the left derivative is approximated to second order.
    The value at an isolated window minimum is NaN.
    """
    grid = f.grid
    if len(grid) < 2:
        raise ValueError("derivative needs at least two grid points")
    x, v = grid.points, f.values
    exact_steps = grid.steps
    first, last = _component_layout(grid)
    out = np.full_like(v, np.nan, dtype=float)
    for k in range(len(x)):
        i0, i1 = first[k], last[k]
        if k == i0:
            if k > 0:
                out[k] = (v[k] - v[k - 1]) / exact_steps[k - 1]
            elif i1 > i0:
                d = exact_steps[k]
                if i1 - i0 >= 2:
                    out[k] = (-3 * v[k] + 4 * v[k + 1] - v[k + 2]) / (2 * d)
                else:
                    out[k] = (v[k + 1] - v[k]) / d
            continue
        d = exact_steps[k - 1]
        if k < i1:
            out[k] = (v[k + 1] - v[k - 1]) / (2 * d)
        elif i1 - i0 >= 2:
            out[k] = (3 * v[k] - 4 * v[k - 1] + v[k - 2]) / (2 * d)
        else:
            out[k] = (v[k] - v[k - 1]) / d
    return GridFunction(grid, out)


def _bounds(grid: Grid, a, b):
    i, j = grid.index(a), grid.index(b)
    if i > j:
        raise ValueError("integral requires a <= b")
    return i, j


def _reduce(terms: np.ndarray, shape) -> np.ndarray:
    if len(terms) == 0:
        return np.zeros(shape)
    # cumulative sum runs strictly left to right
    return np.cumsum(terms, axis=0)[-1]


def delta_integral(f: GridFunction, a, b, dense: GridFunction | None = None) -> np.ndarray:
    """Cauchy delta integral over ``[a, b)``.

    Gaps contribute ``mu(t) f(t)`` at their left end; dense steps use the
    trapezoidal rule.  ``dense`` optionally supplies the values used on dense
    steps, for integrands whose one-sided limit at a scattered point differs
    from the point value.
    """
    grid = f.grid
    i, j = _bounds(grid, a, b)
    dv = f.values if dense is None else dense.values
    steps = grid.steps[i:j]
    gap = grid.is_gap[i:j]
    w = steps.reshape(-1, 1, 1)
    trap = w * (dv[i:j] + dv[i + 1 : j + 1]) / 2
    jump = w * f.values[i:j]
    terms = np.where(gap.reshape(-1, 1, 1), jump, trap)
    return _reduce(terms, f.shape)


def nabla_integral(f: GridFunction, a, b, dense: GridFunction | None = None) -> np.ndarray:
    """Cauchy nabla integral over ``(a, b]``.

    Gaps contribute ``nu(t) f(t)`` at their right end; dense steps use the
    trapezoidal rule (with values from ``dense`` when given).
    """
    grid = f.grid
    i, j = _bounds(grid, a, b)
    dv = f.values if dense is None else dense.values
    steps = grid.steps[i:j]
    gap = grid.is_gap[i:j]
    w = steps.reshape(-1, 1, 1)
    trap = w * (dv[i:j] + dv[i + 1 : j + 1]) / 2
    jump = w * f.values[i + 1 : j + 1]
    terms = np.where(gap.reshape(-1, 1, 1), jump, trap)
    return _reduce(terms, f.shape)
