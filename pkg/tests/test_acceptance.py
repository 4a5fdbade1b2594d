"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
"""

import math
import subprocess
import sys as _sys
from fractions import Fraction
from importlib.resources import files

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from chronoctl.analysis import (
    controllability_gramian,
    kalman_controllability,
    kalman_observability,
    observability_gramian,
    pk_controllability,
    pk_observability,
    tv_controllability,
)
from chronoctl.calculus import (
    GridFunction,
    delta_derivative,
    delta_integral,
    nabla_derivative,
    nabla_integral,
)
from chronoctl.config import load_config
from chronoctl.expr import MatrixExpr
from chronoctl.linsys import (
    BACKWARD,
    FORWARD,
    LinearSystem,
    dualize_system,
    exp_forward,
    solve_backward_ivp,
    solve_forward_ivp,
    transition_forward,
)
from chronoctl.realization import is_minimal, sample_kernel, separable_rank
from chronoctl.timescale import (
    build_grid,
    dual,
    from_generator,
    graininess_mu,
    graininess_nu,
    rho,
    sigma,
)
from conftest import kalman, random_pair, random_scale, ratio_ok

FIXTURES = files("chronoctl") / "data"
SEED = 7301


def report(number, ok, detail):
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _scale_corpus(count, seed=SEED, **kw):
    rng = np.random.default_rng(seed)
    return [random_scale(rng, **kw) for _ in range(count)]


def test_criterion_01_jump_and_graininess_duality():
    bad = 0
    points = 0
    for ts in _scale_corpus(1000):
        ds = dual(ts)
        grid = build_grid(ds, Fraction(1, 4))
        for s in grid.exact_points:
            points += 1
            ok = (sigma(ds, s) == -rho(ts, -s) and rho(ds, s) == -sigma(ts, -s)
                  and graininess_nu(ds, s) == graininess_mu(ts, -s)
                  and graininess_mu(ds, s) == graininess_nu(ts, -s))
            bad += not ok
        # the float graininess of the grids mirrors exactly as well
        g = build_grid(ts, Fraction(1, 4))
        bad += not np.array_equal(grid.nu, g.mu[::-1])
    report(1, bad == 0, f"{points} points on 1000 scales, {bad} mismatches (tolerance 0)")


def _test_functions(rng):
    c = rng.uniform(-1, 1, size=4)
    k = rng.uniform(-1, 1)
    return [
        ("poly", lambda t: c[0] + c[1] * t + c[2] * t ** 2 + c[3] * t ** 3),
        ("exp", lambda t: np.exp(k * t)),
    ]


def _mixed_corpus(count):
    rng = np.random.default_rng(SEED + 2)
    out = []
    while len(out) < count:
        ts = random_scale(rng, max_parts=4)
        if not ts.is_discrete and len(ts.components) > 1:
            out.append((ts, rng))
    return out


def test_criterion_02_derivative_duality():
    step = Fraction(1, 1000)
    err_scattered = err_dense = 0.0
    for ts, rng in _mixed_corpus(100):
        grid = build_grid(ts, step)
        dgrid = build_grid(dual(ts), step)
        rs = grid.mu > 0
        for _, f in _test_functions(rng):
            fd = delta_derivative(GridFunction.sample(grid, f)).scalar()
            nd = nabla_derivative(GridFunction.sample(dgrid, lambda s: f(-s))).scalar()[::-1]
            diff = np.abs(fd + nd)
            keep = np.isfinite(fd)
            err_scattered = max(err_scattered, np.max(diff[keep & rs], initial=0.0))
            err_dense = max(err_dense, np.max(diff[keep & ~rs], initial=0.0))
    ok = err_scattered == 0 and err_dense <= 1e-6
    report(2, ok, f"max error {err_scattered:.3g} at scattered points (tolerance 0), "
                  f"{err_dense:.3g} at dense points (tolerance 1e-6)")


def test_criterion_03_integral_duality():
    step = Fraction(1, 1000)
    worst = 0.0
    for ts, rng in _mixed_corpus(100):
        grid = build_grid(ts, step)
        dgrid = build_grid(dual(ts), step)
        pts = grid.exact_points
        for _, f in _test_functions(rng):
            F = GridFunction.sample(grid, f)
            G = GridFunction.sample(dgrid, lambda s: f(-s))
            i, j = sorted(rng.choice(len(pts), size=2, replace=False))
            for a, b in ((pts[0], pts[-1]), (pts[i], pts[j])):
                lhs = delta_integral(F, a, b)[0, 0]
                rhs = nabla_integral(G, -b, -a)[0, 0]
                worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-300) if lhs else abs(rhs))
                lhs = nabla_integral(F, a, b)[0, 0]
                rhs = delta_integral(G, -b, -a)[0, 0]
                worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-300) if lhs else abs(rhs))
    report(3, worst <= 1e-8, f"max relative error {worst:.3g} (tolerance 1e-8)")


def test_criterion_04_classical_limits():
    rng = np.random.default_rng(SEED + 4)
    err_z = err_h = err_r = 0.0
    for _ in range(20):
        n = int(rng.integers(1, 5))
        A = rng.uniform(-1, 1, size=(n, n))
        ints = from_generator("integers", (0, 12))
        for k in (1, 5, 12):
            ref = np.linalg.matrix_power(np.eye(n) + A, k)
            got = exp_forward(A, ints, k, 0)
            err_z = max(err_z, np.max(np.abs(got - ref)) / max(1.0, np.max(np.abs(ref))))
        h = Fraction(1, 4)
        hz = from_generator("h_integers", (0, 3), h=h)
        ref = np.linalg.matrix_power(np.eye(n) + float(h) * A, 12)
        got = exp_forward(A, hz, 3, 0)
        err_h = max(err_h, np.max(np.abs(got - ref)) / max(1.0, np.max(np.abs(ref))))
    for _ in range(10):
        n = int(rng.integers(1, 4))
        c0, c1 = rng.uniform(-1, 1, size=(2, n, n)).round(3)
        entries = [[f"{c0[i, j]} + {c1[i, j]}*cos(s)" for j in range(n)] for i in range(n)]
        reals = from_generator("reals", (0, 2))
        sys = LinearSystem(FORWARD, reals, MatrixExpr(entries), MatrixExpr(np.zeros((n, 1))))
        got = transition_forward(sys, 2, 0)

        def rhs(t, x):
            return ((c0 + c1 * math.cos(t)) @ x.reshape(n, n)).ravel()

        ref = solve_ivp(rhs, (0, 2), np.eye(n).ravel(), rtol=1e-12, atol=1e-13,
                        method="DOP853").y[:, -1].reshape(n, n)
        err_r = max(err_r, np.linalg.norm(got - ref) / np.linalg.norm(ref))
    ok = err_z <= 1e-12 and err_h <= 1e-12 and err_r <= 1e-6
    report(4, ok, f"integers {err_z:.3g}, h-integers {err_h:.3g} (tolerance 1e-12); "
                  f"reals relative {err_r:.3g} (tolerance 1e-6)")


def _random_tv_system(rng, direction, ts, step=None):
    n, m, p = (int(x) for x in rng.integers(1, 4, size=3))
    m, p = min(m, n), min(p, n)

    def mat(r, c):
        a, b = rng.uniform(-1, 1, size=(2, r, c)).round(3)
        return MatrixExpr([[f"{a[i, j]} + {b[i, j]}*sin(s)" for j in range(c)] for i in range(r)])

    return LinearSystem(direction, ts, mat(n, n), mat(n, m), mat(p, n), mat(p, m),
                        dense_step=step)


def _reference_backward(sys, y0, v_fn):
    """Independent oracle: exact gap recurrence, high-accuracy ODE solver on dense parts."""
    y = np.asarray(y0, dtype=float)
    out = {float(sys.anchor): y.copy()}
    comps = [c for c in sys.ts.components if c[0] <= sys.anchor]
    for i in range(len(comps) - 1, -1, -1):
        a, b = comps[i]
        if b > a:
            def rhs(t, x):
                return sys.A(t) @ x + sys.B(t) @ v_fn(t)
            sol = solve_ivp(rhs, (float(b), float(a)), y, rtol=1e-12, atol=1e-12,
                            method="DOP853", dense_output=True)
            y = sol.y[:, -1]
            out[("dense", i)] = sol.sol
        out[float(a)] = y.copy()
        if i > 0:
            nu = float(a - comps[i - 1][1])
            s = float(a)
            y = (np.eye(sys.n) - nu * sys.A(s)) @ y - nu * (sys.B(s) @ v_fn(s))
            out[float(comps[i - 1][1])] = y.copy()
    return out


def test_criterion_05_backward_solution():
    rng = np.random.default_rng(SEED + 5)
    exact_bad = 0
    mixed_err = 0.0
    dual_err_discrete = dual_err_mixed = 0.0
    systems = 0
    while systems < 100:
        discrete = systems % 2 == 0
        ts = random_scale(rng, dense=not discrete, max_parts=6 if discrete else 4)
        if discrete and len(ts.components) < 2:
            continue
        systems += 1
        sys = _random_tv_system(rng, BACKWARD, ts, step=Fraction(1, 1000))
        w = rng.uniform(-1, 1, size=sys.m).round(3)
        ctrl = MatrixExpr([[f"{w[i]}*cos(2*s) + 0.5"] for i in range(sys.m)])
        v_fn = lambda t: ctrl(t)[:, 0]
        y0 = rng.normal(size=sys.n)
        traj = solve_backward_ivp(sys, y0, ctrl)
        Y = traj.state.values[:, :, 0]
        pts = traj.times
        if discrete:
            y = y0.copy()
            steps = traj.state.grid.steps
            for k in range(len(pts) - 1, 0, -1):
                nu, s = steps[k - 1], pts[k]
                y = (np.eye(sys.n) - nu * sys.A(s)) @ y - nu * (sys.B(s) @ v_fn(s))
                exact_bad += not np.array_equal(y, Y[k - 1])
        else:
            ref = _reference_backward(sys, y0, v_fn)
            for k, s in enumerate(pts):
                if s in ref:
                    mixed_err = max(mixed_err, np.max(np.abs(ref[s] - Y[k]))
                                    / max(1.0, np.max(np.abs(ref[s]))))
        # forward system of the dual with u(t) = v(-t)
        fwd = dualize_system(sys)
        ftraj = solve_forward_ivp(fwd, y0, ctrl.reflected())
        X = ftraj.state.values[::-1, :, 0]
        err = np.max(np.abs(X - Y)) / max(1.0, np.max(np.abs(Y)))
        if discrete:
            dual_err_discrete = max(dual_err_discrete, err)
        else:
            dual_err_mixed = max(dual_err_mixed, err)
    ok = (exact_bad == 0 and mixed_err <= 1e-6 and dual_err_discrete == 0
          and dual_err_mixed <= 1e-6)
    report(5, ok, f"{systems} systems; discrete recurrence mismatches {exact_bad} (tolerance 0); mixed vs "
                  f"reference {mixed_err:.3g} (tolerance 1e-6); duality discrete "
                  f"{dual_err_discrete:.3g} (tolerance 0), mixed {dual_err_mixed:.3g} "
                  f"(tolerance 1e-6)")


EX45 = dict(A=MatrixExpr([[0, 1], [-3, -4]]), B=MatrixExpr([[0], [1]]))


def test_criterion_06_kalman_on_every_scale():
    scales = {
        "reals": from_generator("reals", (-5, 0)),
        "integers": from_generator("integers", (-5, 0)),
        "h_integers": from_generator("h_integers", (-5, 0), h="0.5"),
        "periodic_union": dual(from_generator("periodic_union", (0, 5), a=1, b=1)),
        "periodic_union(2,1/2)": from_generator("periodic_union", (-5, 0), a=2, b="0.5"),
        "explicit": from_generator("explicit", (-5, 0), items=[-5, [-4, -3.5], -2, -1, 0]),
    }
    results = {}
    for name, ts in scales.items():
        rep = kalman_controllability(LinearSystem(BACKWARD, ts, **EX45))
        results[name] = (rep.rank, rep.verdict)
    ok = all(r == (2, "controllable") for r in results.values())
    report(6, ok, f"rank/verdict per scale {results}")


def test_criterion_07_time_varying_ranks():
    sys = load_config(str(FIXTURES / "tv_union.json")).system
    ranks = {str(sc): tv_controllability(sys, sc, 1).rank for sc in (2, "3/2", 3, 4)}
    frozen = sys.frozen(0)
    frozen_rank = tv_controllability(frozen, 2, 1).rank
    with pytest.warns(RuntimeWarning):
        g_full = controllability_gramian(sys).rank
    with pytest.warns(RuntimeWarning):
        g_frozen = controllability_gramian(frozen).rank
    ok = (all(r == 2 for r in ranks.values()) and frozen_rank < 2
          and g_full == 2 and g_frozen == frozen_rank)
    report(7, ok, f"tv ranks at s_c {ranks}; coefficients frozen at s=0: tv rank {frozen_rank}, "
                  f"Gramian rank {g_frozen}; Gramian rank on the window {g_full}")


def _draw(rng):
    """Random constant ``(A, B, C)`` with n <= 4, entries in [-2, 2].

    A third of the draws are uncontrollable and a third unobservable by
    construction.
    """
    n = int(rng.integers(1, 5))
    m, p = int(rng.integers(1, 3)), int(rng.integers(1, 3))
    kind = int(rng.integers(3))
    A, B = random_pair(rng, n, m, deficient=kind == 1)
    C = rng.uniform(-2, 2, size=(p, n))
    if kind == 2:
        At, Ct = random_pair(rng, n, p, deficient=True)
        A, C = At.T, Ct.T
    return A, B, C


def _constant_system(A, B, C, ts):
    return LinearSystem(BACKWARD, ts, MatrixExpr(A), MatrixExpr(B), MatrixExpr(C))


def test_criterion_08_equivalent_conditions():
    rng = np.random.default_rng(SEED + 8)
    drawn = agree_c = agree_o = 0
    while drawn < 200:
        A, B, C = _draw(rng)
        n = A.shape[0]
        if not (ratio_ok(kalman(A, B)) and ratio_ok(kalman(A.T, C.T))
                and ratio_ok(np.eye(n) - A)):
            continue
        ts = from_generator("integers", (-(n + 1), 0))
        sys = _constant_system(A, B, C, ts)
        fwd = dualize_system(sys)
        c = [kalman_controllability(sys).holds, pk_controllability(sys).holds,
             controllability_gramian(sys).holds, kalman_controllability(fwd).holds]
        o = [kalman_observability(sys).holds, pk_observability(sys).holds,
             observability_gramian(sys).holds, kalman_observability(fwd).holds]
        agree_c += len(set(c)) == 1
        agree_o += len(set(o)) == 1
        drawn += 1
    ok = agree_c == 200 and agree_o == 200
    report(8, ok, f"controllability agreement {agree_c}/200, observability {agree_o}/200 "
                  f"(threshold 1e-9 sigma_max)")


def test_criterion_09_minimal_realization():
    sys = load_config(str(FIXTURES / "invariant_union.json")).system
    rep = is_minimal(sys)
    fact = separable_rank(sample_kernel(sys), tol=1e-8)
    ok = rep.minimal and fact.rank == 2 and fact.residual <= 1e-8
    report(9, ok, f"minimal={rep.minimal}, separable rank {fact.rank}, "
                  f"relative residual {fact.residual:.3g} (tolerance 1e-8)")


def test_criterion_10_minimality_vs_kernel_rank():
    rng = np.random.default_rng(SEED + 10)
    ts = from_generator("integers", (-7, 0))
    drawn = agree = minimal_count = 0
    while drawn < 50:
        A, B, C = _draw(rng)
        n = A.shape[0]
        if not (ratio_ok(kalman(A, B)) and ratio_ok(kalman(A.T, C.T))
                and ratio_ok(np.eye(n) - A)):
            continue
        sys = _constant_system(A, B, C, ts)
        rep = is_minimal(sys)
        agree += rep.minimal == (rep.factorization.rank == n)
        minimal_count += rep.minimal
        drawn += 1
    report(10, agree == 50, f"agreement {agree}/50 ({minimal_count} minimal draws)")


def _run(args, cwd):
    proc = subprocess.run([_sys.executable, "-m", "chronoctl", *args], cwd=cwd,
                          capture_output=True)
    return proc.returncode, proc.stdout, proc.stderr


def test_criterion_11_cli_determinism(tmp_path):
    identical = total = 0
    for name in ("tv_union", "constant_integers", "invariant_union"):
        cfg = str(FIXTURES / f"{name}.json")
        commands = [
            ["analyze", cfg, "--test", "both", "--sc", "2", "--r", "1"],
            ["realize", cfg],
            ["simulate", cfg, "{out}/traj.csv"],
            ["dualize", cfg, "{out}/dual.json"],
        ]
        for cmd in commands:
            runs = []
            for k in range(2):
                out = tmp_path / f"{name}_{cmd[0]}_{k}"
                out.mkdir()
                args = [a.format(out=out) for a in cmd]
                code, stdout, stderr = _run(args, tmp_path)
                files_out = sorted((p.name, p.read_bytes()) for p in out.iterdir())
                runs.append((code, stdout, stderr, files_out))
            total += 1
            identical += runs[0] == runs[1]
    report(11, identical == total, f"{identical}/{total} command runs byte-identical")
