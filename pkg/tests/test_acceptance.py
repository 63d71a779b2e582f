"""Acceptance battery: each test prints one pass/fail line and asserts its
stated tolerance.  Run with ``pytest tests/test_acceptance.py -v -s``."""

import json
import math
import time

import numpy as np
import pytest

from lagflow import cli, soliton
from lagflow.dsl import differentiate, evaluate, parse
from lagflow.frames import (
    build_em_space,
    build_flat_lift,
    check_constant_curvature,
    em_nconnection_residual,
    parse_expr_matrix,
    parse_expr_vector,
    sample_box,
)
from lagflow.geometry import (
    BundlePoint,
    anholonomy,
    dcurvature,
    dmetric_at,
    dtorsion,
    nconnection,
    nconnection_curvature,
    ricci_and_scalars,
    space_from_lagrangian,
)
from lagflow.spectral import Grid1D, ddx, dinv, random_band_limited, translate
from lagflow.soliton import (
    FlowState,
    VectorField1D,
    advance,
    auto_dt,
    op_H,
    op_J,
    recursion,
    recursion_expanded,
    reconstruct_frame,
    sg_advance,
    variational_derivative,
)


def _line(num, name, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d}: {name}: {detail}")


def _periodized_sech(grid, a, b, center):
    l = grid.nodes()
    out = np.zeros_like(l)
    for img in (-1, 0, 1):
        out += a / np.cosh(b * (l - center - img * grid.length))
    return out[:, None]


def test_criterion_01_flat_space_sanity():
    t0 = time.perf_counter()
    spec = parse("y1^2 + y2^2", 2, 2)
    space = space_from_lagrangian(spec)
    rng = np.random.default_rng(1)
    worst = 0.0
    for p in sample_box(rng, [(-1, 1)] * 2, [(-1, 1)] * 2, 5):
        worst = max(worst, np.max(np.abs(nconnection(space, p).N)))
        worst = max(worst, np.max(np.abs(nconnection_curvature(space, p))))
        coeffs = anholonomy(space, p)
        worst = max(worst, np.max(np.abs(coeffs.W)), np.max(np.abs(coeffs.Omega)))
        tor = dtorsion(space, p)
        for block in (tor.T_hh, tor.T_hv, tor.T_vh, tor.T_mix, tor.T_vv):
            worst = max(worst, np.max(np.abs(block)))
        cur = dcurvature(space, p)
        for block in (cur.R, cur.P, cur.S):
            worst = max(worst, np.max(np.abs(block)))
        ric = ricci_and_scalars(cur, dmetric_at(space, p))
        worst = max(worst, np.max(np.abs(ric.R_ij)), abs(ric.total))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-12 and elapsed < 1.0
    _line(1, "flat-space sanity", ok, f"max |coef| = {worst:.2e}, {elapsed:.2f}s")
    assert worst < 1e-12
    assert elapsed < 1.0


def test_criterion_02_flat_lift_zero_curvature(tmp_path):
    t0 = time.perf_counter()
    lift = build_flat_lift(parse_expr_matrix([["1", "0"], ["0", "exp(2*x1)"]], 2, 2))
    rng = np.random.default_rng(2)
    worst = 0.0
    for p in sample_box(rng, [(-0.8, 0.8)] * 2, [(-1, 1)] * 2, 16):
        cur = dcurvature(lift, p)
        worst = max(worst, np.max(np.abs(cur.R)), np.max(np.abs(cur.P)), np.max(np.abs(cur.S)))
    cfg = {
        "space": {"kind": "flat_lift", "n": 2, "base_metric": [["1", "0"], ["0", "exp(2*x1)"]]},
        "geometry": {"box": {"x": [[-0.8, 0.8]] * 2, "y": [[-1, 1]] * 2}, "count": 16, "seed": 2},
        "output": {"dir": str(tmp_path / "out")},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    code = cli.main(["check-constant", "--config", str(cfg_path), "--no-plots"])
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8 and code == 0 and elapsed < 5.0
    _line(2, "flat-lift zero curvature", ok, f"max curvature = {worst:.2e}, check-constant exit {code}, {elapsed:.2f}s")
    assert worst < 1e-8
    assert code == 0
    assert elapsed < 5.0


def test_criterion_03_constant_hessian_zero_curvature():
    spec = parse("2*y1^2 + y1*y2 + y2^2 + x1*y2 - sin(x2)*y1", 2, 2)
    space = space_from_lagrangian(spec)
    rng = np.random.default_rng(3)
    worst = 0.0
    n_max = 0.0
    for p in sample_box(rng, [(-1, 1)] * 2, [(-1, 1)] * 2, 8):
        cur = dcurvature(space, p)
        worst = max(worst, np.max(np.abs(cur.R)), np.max(np.abs(cur.P)), np.max(np.abs(cur.S)))
        n_max = max(n_max, np.max(np.abs(nconnection(space, p).N)))
    ok = worst < 1e-8
    _line(3, "constant-Hessian zero curvature", ok, f"max curvature = {worst:.2e} (with |N| up to {n_max:.2f})")
    assert worst < 1e-8
    assert n_max > 0.01  # the check is not vacuous: N is nontrivial


def test_criterion_04_em_nconnection_closed_form():
    rng = np.random.default_rng(4)
    flat = build_em_space(
        parse_expr_matrix([["1", "0"], ["0", "1"]], 2, 2),
        parse_expr_vector(["-x2", "x1"], 2, 2),
        m0=1.0,
        e0=1.0,
    )
    pts = sample_box(rng, [(-1, 1)] * 2, [(-1.2, 1.2)] * 2, 50)
    r_flat = em_nconnection_residual(flat, pts)
    curved = build_em_space(
        parse_expr_matrix([["1+x2^2", "0"], ["0", "exp(2*x1)"]], 2, 2),
        parse_expr_vector(["-x2", "x1*x2"], 2, 2),
        m0=1.7,
        e0=0.8,
    )
    r_curved = em_nconnection_residual(curved, pts)
    ok = r_flat < 1e-8 and r_curved < 1e-8
    _line(4, "charged-particle N closed form", ok, f"flat residual = {r_flat:.2e}, curved residual = {r_curved:.2e}")
    assert r_flat < 1e-8
    assert r_curved < 1e-8


def test_criterion_05_recursion_identity():
    t0 = time.perf_counter()
    grid = Grid1D(256, 20.0)
    rng = np.random.default_rng(5)
    worst = 0.0
    for p in (1, 2, 3):
        for _ in range(20):
            v = VectorField1D(grid, random_band_limited(rng, grid, p, max_mode=8, scale=0.6))
            v_l = v.like(ddx(v.values, grid.length))
            got = recursion(v, v_l).values
            v3 = ddx(v.values, grid.length, order=3)
            printed = v3 + 1.5 * np.sum(v.values**2, axis=1)[:, None] * ddx(v.values, grid.length)
            worst = max(worst, np.max(np.abs(got - printed)) / np.max(np.abs(v3)))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-6 and elapsed < 5.0
    _line(5, "recursion identity", ok, f"max relative residual = {worst:.2e}, {elapsed:.2f}s")
    assert worst < 1e-6
    assert elapsed < 5.0


def test_criterion_06_hamiltonian_operator_structure():
    grid = Grid1D(256, 20.0)
    rng = np.random.default_rng(6)
    dl = grid.spacing
    skew_j = skew_h = comp = 0.0
    for _ in range(50):
        p = int(rng.integers(1, 4))
        v = VectorField1D(grid, random_band_limited(rng, grid, p, max_mode=30, scale=0.7))
        a = VectorField1D(grid, random_band_limited(rng, grid, p, max_mode=30, scale=0.7))
        b = VectorField1D(grid, random_band_limited(rng, grid, p, max_mode=30, scale=0.7))
        skew_j = max(
            skew_j,
            abs(float(np.sum(op_J(v, a).values * b.values) + np.sum(a.values * op_J(v, b).values)) * dl),
        )
        skew_h = max(
            skew_h,
            abs(float(np.sum(op_H(v, a).values * b.values) + np.sum(a.values * op_H(v, b).values)) * dl),
        )
        vb = VectorField1D(grid, random_band_limited(rng, grid, p, max_mode=8, scale=0.6))
        e = VectorField1D(grid, random_band_limited(rng, grid, p, max_mode=8, scale=0.6))
        comp = max(comp, float(np.max(np.abs(recursion(vb, e).values - recursion_expanded(vb, e).values))))
    ok = skew_j < 1e-8 and skew_h < 1e-8 and comp < 1e-7
    _line(6, "Hamiltonian operator structure", ok, f"skew J = {skew_j:.2e}, skew H = {skew_h:.2e}, comp-vs-expansion = {comp:.2e}")
    assert skew_j < 1e-8
    assert skew_h < 1e-8
    assert comp < 1e-7


def test_criterion_07_conservation_cubic_flow():
    t0 = time.perf_counter()
    grid = Grid1D(256, 40.0)
    v0 = _periodized_sech(grid, 1.2, 0.6, 20.0)
    state = FlowState(VectorField1D(grid, v0), 0.0, 1, 0.0)
    state = advance(state, 1.0, auto_dt(grid, 1), record_every=200)
    h = state.history
    drifts = {}
    for key in ("H0", "H1", "H2_printed", "H2_periodic"):
        ref = h[0][key]
        drifts[key] = max(abs(r[key] - ref) for r in h) / abs(ref)
    elapsed = time.perf_counter() - t0
    ok = drifts["H0"] < 1e-6 and drifts["H1"] < 1e-6 and elapsed < 60.0
    _line(
        7,
        "conservation under the cubic flow",
        ok,
        f"H0 drift = {drifts['H0']:.2e}, H1 drift = {drifts['H1']:.2e}, "
        f"H2 printed/periodic drift = {drifts['H2_printed']:.2e}/{drifts['H2_periodic']:.2e}, {elapsed:.1f}s",
    )
    assert drifts["H0"] < 1e-6
    assert drifts["H1"] < 1e-6
    assert elapsed < 60.0


def test_criterion_08_level0_exactness():
    grid = Grid1D(256, 40.0)
    v0 = _periodized_sech(grid, 1.2, 0.6, 20.0)
    state = FlowState(VectorField1D(grid, v0), 0.0, 0, 0.0)
    t_end = 1.0
    state = advance(state, t_end, 5e-4, record_every=10**9)
    err = float(np.max(np.abs(state.v.values - translate(v0, grid.length, t_end))))
    ok = err < 1e-8
    _line(8, "convective-flow exactness", ok, f"translation error = {err:.2e}")
    assert err < 1e-8


def test_criterion_09_scaling_symmetry():
    grid = Grid1D(256, 20.0)
    rng = np.random.default_rng(9)
    lam = 2.0
    worst = 0.0
    for p in (1, 2, 3):
        for _ in range(5):
            v = VectorField1D(grid, random_band_limited(rng, grid, p, max_mode=8, scale=0.6))
            grid2 = Grid1D(grid.n_pts, lam * grid.length)
            v2 = VectorField1D(grid2, v.values / lam)
            lhs = soliton._rhs(v2, level=1, r_const=0.0)
            rhs = soliton._rhs(v, level=1, r_const=0.0) / lam**4
            worst = max(worst, float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs))))
    ok = worst < 1e-6
    _line(9, "scaling equivariance (lambda = 2)", ok, f"max relative residual = {worst:.2e}")
    assert worst < 1e-6


def test_criterion_10_wave_map_flow():
    grid = Grid1D(128, 2 * np.pi)
    l = grid.nodes()
    v0 = VectorField1D(grid, 0.9 * np.sin(l)[:, None])
    theta0 = 0.4
    # (a) unit-frame constraint over tau in [0, 1]
    _, frame, hist = sg_advance(v0, theta0, 1.0, 5e-3, 1.0, record_every=20)
    constraint = max(h["constraint_residual"] for h in hist)
    closure = hist[-1]["closure_mismatch"]
    # (b) scalar sine-Gordon residual on a short, finely resolved run
    snaps = []
    sg_advance(
        v0,
        theta0,
        1.0,
        1e-3,
        0.05,
        record_every=10**9,
        snapshot_every=1,
        on_snapshot=lambda tau, vv: snaps.append((tau, vv.values[:, 0].copy())),
    )

    def theta_of(vals):
        prim = dinv(vals, grid.length)
        return theta0 + (prim - prim[0]) + np.mean(vals) * l

    i = len(snaps) // 2
    dtau = snaps[i + 1][0] - snaps[i - 1][0]
    theta_l_tau = (snaps[i + 1][1] - snaps[i - 1][1]) / dtau
    sg_residual = float(np.max(np.abs(theta_l_tau + np.sin(theta_of(snaps[i][1])))))
    ok = constraint < 1e-6 and sg_residual < 1e-3
    _line(
        10,
        "wave-map (-1) flow",
        ok,
        f"constraint = {constraint:.2e}, SG residual = {sg_residual:.2e}, closure mismatch = {closure:.3e} (reported)",
    )
    assert constraint < 1e-6
    assert sg_residual < 1e-3
    assert math.isfinite(closure)


def test_criterion_11_variational_ladder():
    grid = Grid1D(256, 20.0)
    rng = np.random.default_rng(11)
    v = VectorField1D(grid, random_band_limited(rng, grid, 1, max_mode=6, scale=0.6))
    grad = variational_derivative(1, v)
    ladder = op_H(v, v.like(grad)).values
    target = soliton._rhs(v, level=1, r_const=0.0)
    residual = float(np.max(np.abs(ladder - target)))
    ok = residual < 1e-4
    _line(11, "variational ladder", ok, f"|H(dH1/dv) - rhs| = {residual:.2e}")
    assert residual < 1e-4


def test_criterion_12_semispray_euler_lagrange():
    spec = parse("y1^2 + exp(2*x1)*y2^2", 2, 2)
    space = space_from_lagrangian(spec)
    body = spec.body
    p_exprs = [differentiate(body, "y", i + 1) for i in range(2)]
    dx_exprs = [differentiate(body, "x", i + 1) for i in range(2)]

    def accel(x, y):
        from lagflow.geometry import semispray

        return -2.0 * semispray(space, BundlePoint(x=tuple(x), y=tuple(y)))

    dt = 1e-3
    steps = 1000
    x = np.array([0.1, -0.2])
    y = np.array([0.3, 0.8])
    traj = []
    for _ in range(steps + 1):
        traj.append((x.copy(), y.copy()))
        k1x, k1y = y, accel(x, y)
        k2x, k2y = y + 0.5 * dt * k1y, accel(x + 0.5 * dt * k1x, y + 0.5 * dt * k1y)
        k3x, k3y = y + 0.5 * dt * k2y, accel(x + 0.5 * dt * k2x, y + 0.5 * dt * k2y)
        k4x, k4y = y + dt * k3y, accel(x + dt * k3x, y + dt * k3y)
        x = x + (dt / 6) * (k1x + 2 * k2x + 2 * k3x + k4x)
        y = y + (dt / 6) * (k1y + 2 * k2y + 2 * k3y + k4y)
    worst = 0.0
    for s in range(1, steps, 25):
        xm, ym = traj[s - 1]
        xc, yc = traj[s]
        xp, yp = traj[s + 1]
        for i in range(2):
            p_minus = evaluate(p_exprs[i], tuple(xm), tuple(ym))
            p_plus = evaluate(p_exprs[i], tuple(xp), tuple(yp))
            dLdx = evaluate(dx_exprs[i], tuple(xc), tuple(yc))
            worst = max(worst, abs((p_plus - p_minus) / (2 * dt) - dLdx))
    ok = worst < 1e-4
    _line(12, "semispray / Euler-Lagrange equivalence", ok, f"discrete EL residual = {worst:.2e}")
    assert worst < 1e-4
