"""Bounded windows of time scales built from finitely many closed intervals.

Endpoints are kept as :class:`fractions.Fraction` so that the jump operators
and their reflections through zero are exact.  Grid points inside dense
intervals are floats derived from exact fractions, which makes the grid of a
reflected scale the exact negation of the original grid.
"""

from __future__ import annotations

import enum
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational

import numpy as np

__all__ = [
    "TimeScale",
    "PointClass",
    "Grid",
    "exact",
    "from_generator",
    "sigma",
    "rho",
    "graininess_mu",
    "graininess_nu",
    "dual",
    "classify",
    "build_grid",
]


class PointNotInScale(ValueError):
    pass


def exact(x) -> Fraction:
    """Convert a number to an exact fraction.

    Floats and strings are read as decimals (``0.1`` becomes ``1/10``);
    rationals pass through unchanged.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValueError(f"endpoint must be finite, got {x!r}")
        return Fraction(repr(float(x)))
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, np.integer):
        return Fraction(int(x))
    raise TypeError(f"cannot convert {type(x).__name__} to an exact number")


class PointClass(enum.Flag):
    """Classification of a point with respect to the jump operators."""

    RIGHT_DENSE = enum.auto()
    RIGHT_SCATTERED = enum.auto()
    LEFT_DENSE = enum.auto()
    LEFT_SCATTERED = enum.auto()
    BOUNDARY = enum.auto()
    ISOLATED = RIGHT_SCATTERED | LEFT_SCATTERED
    INTERIOR_DENSE = RIGHT_DENSE | LEFT_DENSE


@dataclass(frozen=True)
class TimeScale:
    """A finite union of disjoint closed intervals ``[a_i, b_i]``.

    Degenerate intervals (``a_i == b_i``) are isolated points.  Components are
    sorted and separated by gaps of positive length.
    """

    components: tuple[tuple[Fraction, Fraction], ...]

    def __post_init__(self):
        comps = tuple((exact(a), exact(b)) for a, b in self.components)
        if not comps:
            raise ValueError("empty time scale")
        for a, b in comps:
            if a > b:
                raise ValueError(f"component [{a}, {b}] has a > b")
        for (_, b0), (a1, _) in zip(comps, comps[1:]):
            if not b0 < a1:
                raise ValueError("components must be sorted and separated by gaps")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_intervals(cls, intervals) -> TimeScale:
        """Normalize arbitrary intervals/points: sort and merge overlaps."""
        items = []
        for it in intervals:
            if isinstance(it, (tuple, list)):
                a, b = exact(it[0]), exact(it[1])
            else:
                a = b = exact(it)
            if a > b:
                raise ValueError(f"interval [{a}, {b}] has a > b")
            items.append((a, b))
        if not items:
            raise ValueError("empty time scale")
        items.sort()
        merged = [list(items[0])]
        for a, b in items[1:]:
            if a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        return cls(tuple((a, b) for a, b in merged))

    @property
    def window(self) -> tuple[Fraction, Fraction]:
        return self.components[0][0], self.components[-1][1]

    @property
    def min(self) -> Fraction:
        return self.components[0][0]

    @property
    def max(self) -> Fraction:
        return self.components[-1][1]

    @property
    def is_discrete(self) -> bool:
        return all(a == b for a, b in self.components)

    def __len__(self):
        return len(self.components)

    def __contains__(self, t) -> bool:
        return self._locate(t, strict=False) is not None

    def component_index(self, t) -> int:
        """Index of the component containing ``t``."""
        hit = self._locate(t, strict=True)
        return hit[0]

    def _locate(self, t, strict=True):
        """Return ``(component index, exact value)`` or None.

        Float inputs match an endpoint when they equal its float conversion,
        so grid points produced by :func:`build_grid` are always recognised.
        """
        if isinstance(t, (float, np.floating)):
            t = float(t)
            starts = [float(a) for a, _ in self.components]
            i = bisect_right(starts, t) - 1
            if i >= 0:
                a, b = self.components[i]
                fa, fb = float(a), float(b)
                if t == fa:
                    return i, a
                if t == fb:
                    return i, b
                if fa < t < fb:
                    return i, Fraction(t)
            # a float just below a start may still round onto it
            if i + 1 < len(self.components) and t == float(self.components[i + 1][0]):
                return i + 1, self.components[i + 1][0]
        else:
            t = exact(t)
            i = bisect_right([a for a, _ in self.components], t) - 1
            if i >= 0 and t <= self.components[i][1]:
                return i, t
        if strict:
            raise PointNotInScale(f"point not in scale: {t}")
        return None

    def restrict(self, lo, hi) -> TimeScale:
        """Intersection with ``[lo, hi]``."""
        lo, hi = exact(lo), exact(hi)
        out = []
        for a, b in self.components:
            a2, b2 = max(a, lo), min(b, hi)
            if a2 <= b2:
                out.append((a2, b2))
        if not out:
            raise ValueError("empty time scale")
        return TimeScale(tuple(out))

    def upper_kappa(self) -> TimeScale:
        """The scale with its maximum removed when that maximum is left-scattered."""
        a, b = self.components[-1]
        if a == b and len(self.components) > 1:
            return TimeScale(self.components[:-1])
        return self

    def lower_kappa(self) -> TimeScale:
        """The scale with its minimum removed when that minimum is right-scattered."""
        a, b = self.components[0]
        if a == b and len(self.components) > 1:
            return TimeScale(self.components[1:])
        return self

    def scattered_points(self) -> list[Fraction]:
        """Points that are left- or right-scattered (gap endpoints)."""
        pts = {a for a, _ in self.components[1:]}
        pts |= {b for _, b in self.components[:-1]}
        return sorted(pts)

    def __str__(self):
        parts = []
        for a, b in self.components:
            parts.append(f"{{{a}}}" if a == b else f"[{a}, {b}]")
        return " U ".join(parts)


def from_generator(kind: str, window, **params) -> TimeScale:
    """Intersect a classical time scale with ``window = (lo, hi)``.

    Parameters
    ----------
    kind : {'reals', 'integers', 'h_integers', 'periodic_union', 'explicit'}
        ``h_integers`` needs ``h``; ``periodic_union`` needs ``a`` and ``b``
        and produces the union of ``[k(a+b), k(a+b)+a]`` over all integers
        ``k``; ``explicit`` needs ``items``, a list of points and ``[lo, hi]``
        pairs.
    window : pair of numbers
        The bounded window ``[lo, hi]``.
    """
    lo, hi = exact(window[0]), exact(window[1])
    if not lo < hi:
        raise ValueError("window requires lo < hi")
    if kind == "reals":
        return TimeScale(((lo, hi),))
    if kind == "integers":
        params = {"h": 1}
        kind = "h_integers"
    if kind == "h_integers":
        h = exact(params["h"])
        if h <= 0:
            raise ValueError("h must be positive")
        k0, k1 = math.ceil(lo / h), math.floor(hi / h)
        pts = [(k * h, k * h) for k in range(k0, k1 + 1)]
        if not pts:
            raise ValueError("empty time scale")
        return TimeScale(tuple(pts))
    if kind == "periodic_union":
        a, b = exact(params["a"]), exact(params["b"])
        if a <= 0 or b <= 0:
            raise ValueError("periodic_union requires a > 0 and b > 0")
        period = a + b
        k0 = math.floor((lo - a) / period)
        k1 = math.floor(hi / period)
        pieces = []
        for k in range(k0, k1 + 1):
            s, e = max(k * period, lo), min(k * period + a, hi)
            if s <= e:
                pieces.append((s, e))
        if not pieces:
            raise ValueError("empty time scale")
        return TimeScale.from_intervals(pieces)
    if kind == "explicit":
        pieces = []
        for it in params["items"]:
            if isinstance(it, (list, tuple)):
                s, e = max(exact(it[0]), lo), min(exact(it[1]), hi)
            else:
                s = e = exact(it)
                if not lo <= s <= hi:
                    continue
            if s <= e:
                pieces.append((s, e))
        if not pieces:
            raise ValueError("empty time scale")
        return TimeScale.from_intervals(pieces)
    raise ValueError(f"unknown time scale kind {kind!r}")


def sigma(ts: TimeScale, t) -> Fraction:
    """Forward jump operator, clamped at the window maximum."""
    i, x = ts._locate(t)
    a, b = ts.components[i]
    if x == b and i + 1 < len(ts.components):
        return ts.components[i + 1][0]
    return x


def rho(ts: TimeScale, t) -> Fraction:
    """Backward jump operator, clamped at the window minimum."""
    i, x = ts._locate(t)
    a, b = ts.components[i]
    if x == a and i > 0:
        return ts.components[i - 1][1]
    return x


def graininess_mu(ts: TimeScale, t) -> Fraction:
    """Forward graininess ``sigma(t) - t``."""
    i, x = ts._locate(t)
    return sigma(ts, x) - x


def graininess_nu(ts: TimeScale, t) -> Fraction:
    """Backward graininess ``t - rho(t)``."""
    i, x = ts._locate(t)
    return x - rho(ts, x)


def dual(ts: TimeScale) -> TimeScale:
    """Reflection ``{-t : t in ts}``."""
    return TimeScale(tuple((-b, -a) for a, b in reversed(ts.components)))


def classify(ts: TimeScale, t) -> PointClass:
    i, x = ts._locate(t)
    cls = PointClass.RIGHT_SCATTERED if sigma(ts, x) > x else PointClass.RIGHT_DENSE
    cls |= PointClass.LEFT_SCATTERED if rho(ts, x) < x else PointClass.LEFT_DENSE
    if x == ts.min or x == ts.max:
        cls |= PointClass.BOUNDARY
    return cls


@dataclass(frozen=True, eq=False)
class Grid:
    """Canonical discretization of a time scale.

    ``exact_points`` holds the grid as fractions; ``points`` is the float view.
    ``component`` gives the component index of each point, so a step between
    consecutive points is a gap exactly when the indices differ.
    """

    owner: TimeScale
    dense_step: Fraction
    exact_points: tuple[Fraction, ...]
    points: np.ndarray = field(repr=False)
    component: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.exact_points)

    @property
    def steps(self) -> np.ndarray:
        """Float lengths of consecutive steps (exact differences, rounded once)."""
        return np.array([float(b - a) for a, b in zip(self.exact_points, self.exact_points[1:])])

    @property
    def is_gap(self) -> np.ndarray:
        """Boolean per step: True when the step jumps over a gap."""
        return self.component[1:] != self.component[:-1]

    @property
    def mu(self) -> np.ndarray:
        """Forward graininess at every grid point."""
        out = np.zeros(len(self))
        out[:-1] = np.where(self.is_gap, self.steps, 0.0)
        return out

    @property
    def nu(self) -> np.ndarray:
        """Backward graininess at every grid point."""
        out = np.zeros(len(self))
        out[1:] = np.where(self.is_gap, self.steps, 0.0)
        return out

    def index(self, t) -> int:
        """Index of grid point ``t``; raises if ``t`` is not on the grid."""
        if isinstance(t, (Fraction, int, Rational)) and not isinstance(t, bool):
            x = exact(t)
            k = bisect_right(self.exact_points, x) - 1
            if k >= 0 and self.exact_points[k] == x:
                return k
        # floats (and fractions of floats) match by value, then within 1e-9
        t = float(t)
        k = int(np.searchsorted(self.points, t))
        for j in (k - 1, k):
            if 0 <= j < len(self.points):
                if self.points[j] == t:
                    return j
        tol = 1e-9 * (1.0 + abs(t))
        j = int(np.argmin(np.abs(self.points - t)))
        if abs(self.points[j] - t) <= tol:
            return j
        raise PointNotInScale(f"point not in grid: {t}")

    def restrict(self, lo, hi) -> Grid:
        """Sub-grid on ``[lo, hi]``; both ends must be grid points."""
        i, j = self.index(lo), self.index(hi)
        if i > j:
            raise ValueError("restrict requires lo <= hi")
        owner = self.owner.restrict(self.exact_points[i], self.exact_points[j])
        comp = self.component[i : j + 1]
        comp = comp - comp[0]
        return Grid(owner, self.dense_step, self.exact_points[i : j + 1],
                    self.points[i : j + 1].copy(), comp)

    def reflected(self) -> Grid:
        """Grid of the dual scale: negated points in reversed order."""
        pts = tuple(-x for x in reversed(self.exact_points))
        comp = self.component[-1] - self.component[::-1]
        return Grid(dual(self.owner), self.dense_step, pts, -self.points[::-1], comp)


def build_grid(ts: TimeScale, dense_step=None) -> Grid:
    """Discretize ``ts``.

    Each non-degenerate interval ``[a, b]`` is split into ``ceil((b-a)/h)``
    equal steps; isolated points are kept as they are.  The default step is
    one thousandth of the window length.
    """
    lo, hi = ts.window
    if dense_step is None:
        h = (hi - lo) / 1000 if hi > lo else Fraction(1)
    else:
        h = exact(dense_step)
    if h <= 0:
        raise ValueError("dense_step must be positive")
    pts: list[Fraction] = []
    comp: list[int] = []
    for i, (a, b) in enumerate(ts.components):
        if a == b:
            pts.append(a)
            comp.append(i)
            continue
        length = b - a
        n = math.ceil(length / h)
        pts.extend(a + length * k / n for k in range(n + 1))
        comp.extend([i] * (n + 1))
    floats = np.array([float(x) for x in pts])
    return Grid(ts, h, tuple(pts), floats, np.array(comp, dtype=int))
