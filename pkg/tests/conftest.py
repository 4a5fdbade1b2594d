from fractions import Fraction

import numpy as np
import pytest
from hypothesis import settings

from chronoctl.timescale import TimeScale

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def random_scale(rng, max_parts=5, dense=True, discrete=True):
    """Random finite union of points and intervals with rational endpoints.

    Endpoints live on multiples of 1/4 so that gaps and lengths are exact.
    """
    parts = int(rng.integers(1, max_parts + 1))
    t = Fraction(int(rng.integers(-8, 4)), 4)
    comps = []
    for k in range(parts):
        kinds = [x for x, ok in (("point", discrete), ("interval", dense)) if ok]
        kind = kinds[int(rng.integers(len(kinds)))]
        if kind == "point":
            comps.append((t, t))
        else:
            length = Fraction(int(rng.integers(1, 9)), 4)
            comps.append((t, t + length))
            t += length
        t += Fraction(int(rng.integers(1, 9)), 4)
    if len(comps) == 1 and comps[0][0] == comps[0][1]:
        comps.append((t, t))
    return TimeScale(tuple(comps))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_pair(rng, n, m, deficient=False, scale=2.0):
    """Random ``(A, B)``; with ``deficient`` the pair is uncontrollable by construction.

    The deficient case is block triangular in a random basis, with the lower
    block of ``B`` equal to zero.
    """
    A = rng.uniform(-scale, scale, size=(n, n))
    B = rng.uniform(-scale, scale, size=(n, m))
    if deficient and n > 1:
        k = int(rng.integers(1, n))
        A[k:, :k] = 0
        B[k:] = 0
        T = rng.uniform(-1, 1, size=(n, n)) + 2 * np.eye(n)
        Ti = np.linalg.inv(T)
        A, B = T @ A @ Ti, T @ B
    return A, B


def ratio_ok(M, lo=1e-12, hi=1e-6):
    """No singular value ratio falls in the ambiguous band ``[lo, hi]``."""
    sv = np.linalg.svd(np.atleast_2d(M), compute_uv=False)
    if sv[0] == 0:
        return True
    r = sv / sv[0]
    return not np.any((r >= lo) & (r <= hi))


def kalman(A, B):
    blocks = [B]
    for _ in range(A.shape[0] - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)
