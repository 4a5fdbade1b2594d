"""Weighting patterns, their separable rank, and minimality checks.

The weighting pattern of a backward system is the kernel

    G(s, z) = C(s) Ψ(s, ρ(z)) B(z),   s <= ρ(z), z <= s0,

through which the control acts on the output.  A sampled kernel is factored
by a truncated singular value decomposition; the number of factors needed is
its separable rank.  Realizability is therefore certified only at the sampled
resolution.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import (
    RankReport,
    kalman_controllability,
    kalman_observability,
    controllability_gramian,
    observability_gramian,
    numerical_rank,
    tv_controllability,
    tv_observability,
)
from .linsys import BACKWARD, Check, LinearSystem, dualize_system, is_progressive
from .timescale import exact, rho

__all__ = [
    "HypothesisViolation",
    "KernelSample",
    "Factorization",
    "MinimalityReport",
    "weighting_pattern",
    "default_kernel_points",
    "sample_kernel",
    "separable_rank",
    "is_minimal",
    "export_factorization_csv",
]

DEFAULT_TOL = 1e-8


class HypothesisViolation(ValueError):
    """A theorem hypothesis needed for a verdict does not hold."""


def _backward(sys: LinearSystem) -> LinearSystem:
    return sys if sys.direction == BACKWARD else dualize_system(sys)


def _is_causal(sys, s, z) -> bool:
    return rho(sys.ts, z) >= s and z <= sys.anchor


def weighting_pattern(sys: LinearSystem, s, z) -> np.ndarray:
    """``G(s, z) = C(s) Ψ(s, ρ(z)) B(z)`` for a causal pair of grid points."""
    if sys.direction != BACKWARD:
        raise ValueError("weighting_pattern needs a backward system")
    s, z = exact(s), exact(z)
    if not _is_causal(sys, s, z):
        raise ValueError(f"pair (s={s}, z={z}) is not causal")
    Psi = sys.transition.matrix(s, rho(sys.ts, z))
    return sys.C(float(s)) @ Psi @ sys.B(float(z))


@dataclass(eq=False)
class KernelSample:
    """Kernel blocks ``G(s_i, z_j)`` with a mask of causal pairs.

    ``blocks`` has shape ``(len(s), len(z), p, m)``; non-causal blocks are
    zero and excluded from every rank computation.
    """

    s_points: np.ndarray
    z_points: np.ndarray
    blocks: np.ndarray = field(repr=False)
    mask: np.ndarray = field(repr=False)
    rho_z: np.ndarray = field(repr=False)

    @property
    def matrix(self) -> np.ndarray:
        """Assembled ``(p |s|) x (m |z|)`` matrix, row blocks indexed by ``s``."""
        S, Z, p, m = self.blocks.shape
        return self.blocks.transpose(0, 2, 1, 3).reshape(S * p, Z * m)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.blocks[self.mask]))


def default_kernel_points(sys: LinearSystem, count: int = 8, s1=None, s0=None):
    """``count`` grid points of ``[s1, s0]``, both ends included.

    Scattered points are preferred; when fewer exist, evenly spaced points
    of the dense parts fill the remaining slots.
    """
    lo, hi = sys.interval
    lo = lo if s1 is None else exact(s1)
    hi = hi if s0 is None else exact(s0)
    grid = sys.grid
    i, j = grid.index(lo), grid.index(hi)
    pts = grid.exact_points[i : j + 1]
    scattered = set(sys.ts.scattered_points())
    chosen = {pts[0], pts[-1]} | {x for x in pts if x in scattered}
    if len(chosen) > count:
        ordered = sorted(chosen)
        picks = np.linspace(0, len(ordered) - 1, count).round().astype(int)
        return sorted({ordered[k] for k in picks} | {ordered[0], ordered[-1]})
    rest = [x for x in pts if x not in chosen]
    need = count - len(chosen)
    if need > 0 and rest:
        picks = np.linspace(0, len(rest) - 1, min(need, len(rest))).round().astype(int)
        chosen |= {rest[k] for k in picks}
    return sorted(chosen)


def sample_kernel(sys: LinearSystem, s_points=None, z_points=None) -> KernelSample:
    """Evaluate the weighting pattern on ``s_points x z_points``.

    Both default to :func:`default_kernel_points`.  Forward systems are
    dualized first.
    """
    sys = _backward(sys)
    if s_points is None:
        s_points = default_kernel_points(sys)
    if z_points is None:
        z_points = default_kernel_points(sys)
    if len(s_points) == 0 or len(z_points) == 0:
        raise ValueError("kernel grids must not be empty")
    grid = sys.grid
    s_idx = [grid.index(s) for s in s_points]
    z_idx = [grid.index(z) for z in z_points]
    s_ex = [grid.exact_points[k] for k in s_idx]
    z_ex = [grid.exact_points[k] for k in z_idx]
    rz = [rho(sys.ts, z) for z in z_ex]
    rz_idx = [grid.index(w) for w in rz]
    Bz = [sys.B(float(z)) for z in z_ex]
    blocks = np.zeros((len(s_ex), len(z_ex), sys.p, sys.m))
    mask = np.zeros((len(s_ex), len(z_ex)), dtype=bool)
    for a, s in enumerate(s_ex):
        causal = [b for b, z in enumerate(z_ex) if rz[b] >= s and z <= sys.anchor]
        if not causal:
            continue
        Psi = sys.transition.over_sources(s)
        Cs = sys.C(float(s))
        for b in causal:
            blocks[a, b] = Cs @ Psi[rz_idx[b]] @ Bz[b]
            mask[a, b] = True
    return KernelSample(np.array([float(x) for x in s_ex]), np.array([float(x) for x in z_ex]),
                        blocks, mask, np.array([float(x) for x in rz]))


@dataclass(eq=False)
class Factorization:
    """``G(s_i, z_j) ≈ H(s_i) F(z_j)`` on a causal rectangle of the sample."""

    rank: int
    H: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)
    s_points: np.ndarray
    z_points: np.ndarray
    residual: float
    singular_values: np.ndarray
    tol: float

    @property
    def certified(self) -> bool:
        return self.residual <= self.tol


def _rectangles(ks: KernelSample):
    """Maximal all-causal rectangles: rows ``s <= c`` against columns ``ρ(z) >= c``."""
    seen = set()
    for c in ks.s_points:
        rows = tuple(np.nonzero(ks.s_points <= c)[0])
        cols = tuple(j for j in np.nonzero(ks.rho_z >= c)[0] if ks.mask[rows, j].all())
        if rows and cols and (rows, cols) not in seen:
            seen.add((rows, cols))
            yield list(rows), list(cols)


def separable_rank(ks: KernelSample, tol: float = DEFAULT_TOL) -> Factorization:
    """Smallest rank whose truncated factorization meets the residual bound.

    The causal pairs of a kernel sample form a staircase, so the rank is
    computed on its maximal fully causal rectangles.  The rectangle with the
    largest numerical rank (then the largest area) is factored, and the rank
    is the least ``k`` with ``‖G - H F‖_F <= tol ‖G‖_F`` there.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    S, Z, p, m = ks.blocks.shape
    best = None
    for rows, cols in _rectangles(ks):
        sub = ks.blocks[np.ix_(rows, cols)].transpose(0, 2, 1, 3).reshape(len(rows) * p, -1)
        _, r, _ = numerical_rank(sub)
        key = (r, len(rows) * len(cols))
        if best is None or key > best[0]:
            best = (key, rows, cols, sub)
    if best is None:
        return Factorization(0, np.zeros((0, p, 0)), np.zeros((0, 0, m)), np.zeros(0),
                             np.zeros(0), 0.0, np.zeros(0), tol)
    _, rows, cols, sub = best
    U, sv, Vt = np.linalg.svd(sub, full_matrices=False)
    total = np.linalg.norm(sv)
    tails = np.sqrt(np.cumsum((sv ** 2)[::-1])[::-1])
    tails = np.append(tails, 0.0)
    k = 0
    if total > 0:
        k = next(i for i in range(len(sv) + 1) if tails[i] <= tol * total)
    root = np.sqrt(sv[:k])
    H = (U[:, :k] * root).reshape(len(rows), p, k)
    F = (root[:, None] * Vt[:k]).reshape(k, len(cols), m).transpose(1, 0, 2)
    approx = np.einsum("spk,zkm->szpm", H, F)
    exact_blocks = ks.blocks[np.ix_(rows, cols)]
    resid = np.linalg.norm(exact_blocks - approx)
    rel = float(resid / total) if total > 0 else 0.0
    return Factorization(k, H, F, ks.s_points[rows], ks.z_points[cols], rel, sv, tol)


@dataclass(eq=False)
class MinimalityReport:
    """Sub-verdicts behind a minimality decision plus the kernel cross-check."""

    minimal: bool
    n: int
    time_invariant: bool
    progressive: Check
    controllability: RankReport
    observability: RankReport
    factorization: Factorization
    controllability_gramian: object = None
    observability_gramian: object = None

    @property
    def kernel_agrees(self) -> bool:
        return (self.factorization.rank == self.n) == self.minimal


def is_minimal(sys: LinearSystem, s1=None, s0=None, tol: float = DEFAULT_TOL,
               s_c=None, r=None) -> MinimalityReport:
    """Decide minimality as joint controllability and observability.

    Constant systems use the Kalman tests and need no progressivity.
    Time-varying systems must be progressive; they use the derivative tests
    at ``s_c`` (default ``s0``) and fall back to the Gramians when a
    derivative test is inconclusive.

    Raises
    ------
    HypothesisViolation
        For a time-varying system that is not progressive.
    """
    sys = _backward(sys)
    if s1 is not None or s0 is not None:
        sys = sys.with_interval(horizon=s1, anchor=s0)
    progressive = is_progressive(sys)
    gram_c = gram_o = None
    if sys.is_constant:
        ctrl = kalman_controllability(sys)
        obs = kalman_observability(sys)
        c_ok, o_ok = ctrl.holds, obs.holds
    else:
        if not progressive:
            raise HypothesisViolation(
                "progressivity hypothesis violated: I - nu*A is singular at "
                f"s = {progressive.witness}; minimality of a time-varying system "
                "cannot be decided")
        order = min(sys.n - 1, 3) if r is None else r
        ctrl = tv_controllability(sys, s_c, order)
        obs = tv_observability(sys, s_c, order)
        c_ok, o_ok = ctrl.holds, obs.holds
        if not c_ok:
            gram_c = controllability_gramian(sys)
            c_ok = gram_c.holds
        if not o_ok:
            gram_o = observability_gramian(sys)
            o_ok = gram_o.holds
    fact = separable_rank(sample_kernel(sys), tol)
    return MinimalityReport(bool(c_ok and o_ok), sys.n, sys.is_constant, progressive,
                            ctrl, obs, fact, gram_c, gram_o)


def export_factorization_csv(fact: Factorization, directory, prefix="factor"):
    """Write ``<prefix>_H.csv`` and ``<prefix>_F.csv``.

    Each row holds a grid time followed by the factor entries row-major.
    Returns the two paths.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, times, mats in (("H", fact.s_points, fact.H), ("F", fact.z_points, fact.F)):
        path = directory / f"{prefix}_{name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            rows, cols = mats.shape[1:] if mats.ndim == 3 else (0, 0)
            w.writerow(["time"] + [f"{name}_{i + 1}_{j + 1}" for i in range(rows)
                                   for j in range(cols)])
            for t, M in zip(times, mats):
                w.writerow([format(float(t), ".17g")] + [format(float(x), ".17g")
                                                         for x in M.ravel()])
        paths.append(path)
    return paths
