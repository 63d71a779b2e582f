"""Command-line front end: geometry reports, constant-curvature gating,
flow runs, and the operator identity battery, with reproducible output
(JSON/CSV plus rendered figures) and a hashed run manifest.

Exit codes: 0 success, 2 config validation error, 3 geometry error,
4 identity/constancy failure, 5 diverged flow.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__, dsl, frames, geometry, soliton
from .dsl import ParseError, parse_scalar
from .geometry import BundlePoint, GeometryError, geometry_report
from .spectral import Grid1D, ddx, random_band_limited
from .soliton import (
    FlowDiverged,
    FlowState,
    FrameConstraintError,
    VectorField1D,
    advance,
    auto_dt,
    op_H,
    op_J,
    recursion,
    recursion_expanded,
    sg_advance,
    variational_check,
)

SPACE_KINDS = ("lagrangian_expr", "flat_lift", "em", "constant_dmetric")


class ConfigError(Exception):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"config error at {path}: {message}")


# --- config access helpers -------------------------------------------------------


def _get(cfg, path, typ=None, required=True, default=None):
    node = cfg
    walked = []
    for part in path.split("."):
        walked.append(part)
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigError(".".join(walked), "missing")
            return default
        node = node[part]
    if typ is not None and not isinstance(node, typ):
        raise ConfigError(path, f"expected {getattr(typ, '__name__', typ)}")
    return node


def _get_number(cfg, path, required=True, default=None):
    v = _get(cfg, path, required=required, default=default)
    if v is default and not required:
        return default
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, "expected a number")
    return float(v)


def _get_int(cfg, path, required=True, default=None):
    v = _get(cfg, path, required=required, default=default)
    if v is default and not required:
        return default
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, "expected an integer")
    return v


# --- space / samples from config --------------------------------------------------


def build_space(cfg):
    _get(cfg, "space", dict)
    kind = _get(cfg, "space.kind", str)
    if kind not in SPACE_KINDS:
        raise ConfigError("space.kind", f"must be one of {', '.join(SPACE_KINDS)}")
    try:
        if kind == "lagrangian_expr":
            n = _get_int(cfg, "space.n")
            m = _get_int(cfg, "space.m", required=False, default=n)
            expr = _get(cfg, "space.expression", str)
            spec = dsl.parse(expr, n, m)
            return geometry.space_from_lagrangian(spec)
        if kind == "flat_lift":
            n = _get_int(cfg, "space.n")
            rows = _get(cfg, "space.base_metric", list)
            if len(rows) != n or any(len(r) != n for r in rows):
                raise ConfigError("space.base_metric", f"must be {n}x{n}")
            g = frames.parse_expr_matrix(rows, n, n)
            return frames.build_flat_lift(g)
        if kind == "em":
            n = _get_int(cfg, "space.n")
            rows = _get(cfg, "space.metric", list)
            pot = _get(cfg, "space.potential", list)
            if len(rows) != n or any(len(r) != n for r in rows):
                raise ConfigError("space.metric", f"must be {n}x{n}")
            if len(pot) != n:
                raise ConfigError("space.potential", f"must have {n} entries")
            a = frames.parse_expr_matrix(rows, n, n)
            A = frames.parse_expr_vector(pot, n, n)
            m0 = _get_number(cfg, "space.m0")
            e0 = _get_number(cfg, "space.e0")
            return frames.build_em_space(a, A, m0, e0)
        # constant_dmetric
        n = _get_int(cfg, "space.n")
        m = _get_int(cfg, "space.m", required=False, default=n)
        g0 = np.array(_get(cfg, "space.g", list), dtype=float)
        h0 = np.array(_get(cfg, "space.h", list), dtype=float)
        rows = _get(cfg, "space.N", list)
        if len(rows) != m or any(len(r) != n for r in rows):
            raise ConfigError("space.N", f"must be {m}x{n}")
        N = frames.parse_expr_matrix(rows, n, m)
        return frames.build_constant_dmetric(g0, h0, N)
    except ParseError as exc:
        raise ConfigError(f"space ({kind})", str(exc)) from exc
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"space ({kind})", str(exc)) from exc


def resolve_samples(cfg, space, seed_override=None):
    gm = _get(cfg, "geometry", dict, required=False, default=None)
    if gm is None:
        raise ConfigError("geometry", "missing")
    if "samples" in gm:
        pts = []
        for i, s in enumerate(gm["samples"]):
            try:
                pts.append(BundlePoint(x=tuple(s["x"]), y=tuple(s["y"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"geometry.samples[{i}]", str(exc)) from exc
        return pts
    box = _get(cfg, "geometry.box", dict)
    bx = box.get("x")
    by = box.get("y")
    if bx is None or len(bx) != space.n:
        raise ConfigError("geometry.box.x", f"needs {space.n} [lo, hi] pairs")
    if by is None or len(by) != space.m:
        raise ConfigError("geometry.box.y", f"needs {space.m} [lo, hi] pairs")
    count = _get_int(cfg, "geometry.count", required=False, default=16)
    seed = seed_override if seed_override is not None else _get_int(
        cfg, "geometry.seed", required=False, default=0
    )
    rng = np.random.default_rng(seed)
    return frames.sample_box(rng, bx, by, count)


# --- output helpers ---------------------------------------------------------------


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(repr(float(v)) for v in row) + "\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _finish_manifest(out_dir, cfg, stages, extra, t0):
    files = {}
    for root, _, names in os.walk(out_dir):
        for name in sorted(names):
            if name == "run_manifest.json":
                continue
            full = os.path.join(root, name)
            rel = os.path.relpath(full, out_dir)
            files[rel] = _sha256(full)
    manifest = {
        "config": cfg,
        "version": __version__,
        "wall_time_s": time.perf_counter() - t0,
        "stages": stages,
        "files": files,
    }
    manifest.update(extra)
    _write_json(os.path.join(out_dir, "run_manifest.json"), manifest)
    return manifest


# --- subcommands ------------------------------------------------------------------


def cmd_geom(cfg, out_dir, seed, plots_on):
    t0 = time.perf_counter()
    stages = {"validate": "ok"}
    space = build_space(cfg)
    samples = resolve_samples(cfg, space, seed)
    os.makedirs(out_dir, exist_ok=True)
    for idx, p in enumerate(samples):
        try:
            rep = geometry_report(space, p)
        except (GeometryError, dsl.EvaluationError) as exc:
            print(
                f"geometry error at sample {idx} (x={p.x}, y={p.y}): {exc}",
                file=sys.stderr,
            )
            return 3
        _write_json(os.path.join(out_dir, f"geom_{idx:03d}.json"), rep.to_dict())
    stages["geometry"] = "ok"
    _finish_manifest(out_dir, cfg, stages, {"n_samples": len(samples)}, t0)
    return 0


def cmd_check_constant(cfg, out_dir, seed, tol_override, plots_on):
    t0 = time.perf_counter()
    stages = {"validate": "ok"}
    space = build_space(cfg)
    samples = resolve_samples(cfg, space, seed)
    if len(samples) < 2:
        raise ConfigError("geometry", "constant-curvature check needs >= 2 samples")
    tol = tol_override if tol_override is not None else _get_number(
        cfg, "geometry.tolerance", required=False, default=1e-6
    )
    os.makedirs(out_dir, exist_ok=True)
    try:
        report = frames.check_constant_curvature(space, samples, tol)
    except (GeometryError, dsl.EvaluationError) as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return 3
    rep = report.to_dict()
    _write_json(os.path.join(out_dir, "constancy_report.json"), rep)
    stages["check"] = "ok" if report.constant else "not_constant"
    if plots_on:
        from . import plots

        plots.constancy_figure(out_dir, rep)
        stages["plots"] = "ok"
    _finish_manifest(out_dir, cfg, stages, {}, t0)
    if not report.constant:
        print(
            "curvature is not constant in orthonormal frames: "
            + ", ".join(f"{k}={v:.3e}" for k, v in report.spreads.items()),
            file=sys.stderr,
        )
        return 4
    return 0


def _flow_config(cfg, space, seed, tol_override):
    _get(cfg, "flow", dict)
    level = _get(cfg, "flow.level")
    if isinstance(level, bool) or level not in (-1, 0, 1, 2):
        raise ConfigError("flow.level", "must be one of -1, 0, 1, 2")
    n_pts = _get_int(cfg, "flow.N_pts")
    if n_pts < 16 or (n_pts & (n_pts - 1)) != 0:
        raise ConfigError("flow.N_pts", "must be a power of two and at least 16")
    length = _get_number(cfg, "flow.length")
    if length <= 0:
        raise ConfigError("flow.length", "must be positive")
    t_end = _get_number(cfg, "flow.t_end")
    if t_end <= 0:
        raise ConfigError("flow.t_end", "must be positive")
    side = _get(cfg, "flow.side", str, required=False, default="h")
    if side not in ("h", "v"):
        raise ConfigError("flow.side", "must be 'h' or 'v'")
    p = (space.n if side == "h" else space.m) - 1
    if p < 1:
        raise ConfigError("flow.side", f"side '{side}' gives field width {p} < 1")

    cc = _get(cfg, "flow.curvature_constant", dict, required=False, default={"source": "manual", "value": 0.0})
    source = cc.get("source")
    if source == "manual":
        if "value" not in cc or isinstance(cc["value"], bool) or not isinstance(cc["value"], (int, float)):
            raise ConfigError("flow.curvature_constant.value", "expected a number")
        r_const = float(cc["value"])
    elif source == "from-geometry":
        samples = resolve_samples(cfg, space, seed)
        if len(samples) < 2:
            raise ConfigError("geometry", "from-geometry needs >= 2 samples")
        tol = tol_override if tol_override is not None else _get_number(
            cfg, "geometry.tolerance", required=False, default=1e-6
        )
        report = frames.check_constant_curvature(space, samples, tol)
        if not report.constant:
            raise _NotConstant(report)
        r_const = report.R_fwd if side == "h" else report.S_bwd
    else:
        raise ConfigError("flow.curvature_constant.source", "must be 'manual' or 'from-geometry'")

    grid = Grid1D(n_pts=n_pts, length=length)
    init = _get(cfg, "flow.initial", list)
    if len(init) != p:
        raise ConfigError("flow.initial", f"needs {p} component expression(s)")
    l_alias = {"l": dsl.var("x", 1)}
    cols = []
    nodes = grid.nodes()
    for i, src in enumerate(init):
        try:
            e = parse_scalar(str(src), 1, 0, extra_names=l_alias)
        except ParseError as exc:
            raise ConfigError(f"flow.initial[{i}]", str(exc)) from exc
        cols.append([dsl.evaluate(e, (float(node),), ()) for node in nodes])
    v0 = VectorField1D(grid=grid, values=np.array(cols).T)

    dt_cfg = _get(cfg, "flow.dt", required=False, default="auto")
    cfl = _get_number(cfg, "flow.cfl", required=False, default=0.05)
    if dt_cfg == "auto":
        dt = auto_dt(grid, level, cfl)
    elif isinstance(dt_cfg, (int, float)) and not isinstance(dt_cfg, bool) and dt_cfg > 0:
        dt = float(dt_cfg)
    else:
        raise ConfigError("flow.dt", "must be 'auto' or a positive number")
    snap = _get_number(cfg, "flow.snapshot_interval", required=False, default=t_end / 4.0)
    theta0 = _get_number(cfg, "flow.frame_theta0", required=False, default=0.0)
    return {
        "level": level,
        "grid": grid,
        "v0": v0,
        "r_const": r_const,
        "dt": dt,
        "t_end": t_end,
        "snapshot_interval": snap,
        "theta0": theta0,
        "side": side,
    }


class _NotConstant(Exception):
    def __init__(self, report):
        self.report = report
        super().__init__("curvature not constant")


def _flush_flow_outputs(out_dir, grid, snapshots, history, level, plots_on, stages):
    frames_meta = []
    for i, (tau, vals) in enumerate(snapshots):
        name = f"snapshot_{i:04d}.csv"
        header = ["l"] + [f"v_{c + 1}" for c in range(vals.shape[1])]
        rows = np.column_stack([grid.nodes(), vals])
        _write_csv(os.path.join(out_dir, name), header, rows)
        frames_meta.append({"file": name, "tau": tau})
    if history:
        keys = ["tau", "H0", "H1", "H2_printed", "H2_periodic", "mass_projection"]
        if level == -1:
            keys += ["constraint_residual", "closure_mismatch"]
        _write_csv(
            os.path.join(out_dir, "diagnostics.csv"),
            keys,
            [[rec[k] for k in keys] for rec in history],
        )
    if plots_on and snapshots and history:
        from . import plots

        plots.flow_figures(out_dir, grid, snapshots, history, level)
        stages["plots"] = "ok"
    return frames_meta


def cmd_flow(cfg, out_dir, seed, tol_override, plots_on):
    t0 = time.perf_counter()
    stages = {"validate": "ok"}
    space = build_space(cfg)
    try:
        fc = _flow_config(cfg, space, seed, tol_override)
    except _NotConstant as exc:
        print(
            "flow requires constant orthonormal-frame curvature; spreads: "
            + ", ".join(f"{k}={v:.3e}" for k, v in exc.report.spreads.items()),
            file=sys.stderr,
        )
        return 4
    os.makedirs(out_dir, exist_ok=True)
    grid = fc["grid"]
    dt = fc["dt"]
    n_steps = max(1, round(fc["t_end"] / dt))
    snapshot_every = max(1, round(fc["snapshot_interval"] / (fc["t_end"] / n_steps)))
    record_every = max(1, n_steps // 200)
    snapshots = []

    def on_snapshot(tau, v):
        snapshots.append((tau, v.values.copy()))

    history = []
    diverged = None
    try:
        if fc["level"] == -1:
            sg_advance(
                fc["v0"],
                fc["theta0"],
                fc["r_const"],
                dt,
                fc["t_end"],
                record_every=record_every,
                snapshot_every=snapshot_every,
                on_snapshot=on_snapshot,
                history=history,
            )
        else:
            state = FlowState(
                v=fc["v0"], tau=0.0, level=fc["level"], r_const=fc["r_const"], history=history
            )
            advance(
                state,
                fc["t_end"],
                dt,
                record_every=record_every,
                snapshot_every=snapshot_every,
                on_snapshot=on_snapshot,
            )
        stages["flow"] = "ok"
    except (FlowDiverged, FrameConstraintError) as exc:
        stages["flow"] = "diverged"
        diverged = exc
        last = getattr(exc, "last_state", None)
        if last is not None:
            snapshots.append((last.tau, last.v.values.copy()))
    frames_meta = _flush_flow_outputs(
        out_dir, grid, snapshots, history, fc["level"], plots_on and diverged is None, stages
    )
    _finish_manifest(
        out_dir,
        cfg,
        stages,
        {
            "frames": frames_meta,
            "integrator": {
                "grid": {"N_pts": grid.n_pts, "length": grid.length},
                "dt": fc["t_end"] / n_steps,
                "n_steps": n_steps,
                "scheme": "rk4",
                "r_const": fc["r_const"],
                "level": fc["level"],
                "side": fc["side"],
            },
        },
        t0,
    )
    if diverged is not None:
        print(f"flow diverged: {diverged}", file=sys.stderr)
        return 5
    return 0


# --- identity battery -------------------------------------------------------------


def _inner(grid, a, b):
    return float(np.sum(a * b) * grid.spacing)


def identity_battery(grid: Grid1D, seed: int, tolerances: dict, p_values=(1, 2, 3)):
    """Named residuals: recursion identity, composition-vs-expansion,
    skew-adjointness of both operators, scaling equivariance, variational
    ladder."""
    rng = np.random.default_rng(seed)
    results = []

    def item(name, residual, tol, extra=None):
        entry = {
            "name": name,
            "residual": float(residual),
            "tolerance": float(tol),
            "passed": bool(residual < tol),
        }
        if extra:
            entry.update(extra)
        results.append(entry)

    for p in p_values:
        rec_res = 0.0
        comp_res = 0.0
        for _ in range(20):
            v = VectorField1D(grid, random_band_limited(rng, grid, p, max_mode=8, scale=0.6))
            v_l = v.like(ddx(v.values, grid.length))
            r_of = recursion(v, v_l).values
            v_3l = ddx(v.values, grid.length, order=3)
            printed = v_3l + 1.5 * np.sum(v.values**2, axis=1)[:, None] * v_l.values
            denom = max(float(np.max(np.abs(v_3l))), 1e-30)
            rec_res = max(rec_res, float(np.max(np.abs(r_of - printed))) / denom)
            e = VectorField1D(grid, random_band_limited(rng, grid, p, max_mode=8, scale=0.6))
            comp_res = max(
                comp_res,
                float(np.max(np.abs(recursion(v, e).values - recursion_expanded(v, e).values))),
            )
        item(f"recursion_identity_p{p}", rec_res, tolerances["recursion"])
        item(f"composition_vs_expansion_p{p}", comp_res, tolerances["composition"])

        skew_j = 0.0
        skew_h = 0.0
        for _ in range(50):
            v = VectorField1D(grid, random_band_limited(rng, grid, p, max_mode=24, scale=0.7))
            a = VectorField1D(grid, random_band_limited(rng, grid, p, max_mode=24, scale=0.7))
            b = VectorField1D(grid, random_band_limited(rng, grid, p, max_mode=24, scale=0.7))
            skew_j = max(
                skew_j,
                abs(
                    _inner(grid, op_J(v, a).values, b.values)
                    + _inner(grid, a.values, op_J(v, b).values)
                ),
            )
            skew_h = max(
                skew_h,
                abs(
                    _inner(grid, op_H(v, a).values, b.values)
                    + _inner(grid, a.values, op_H(v, b).values)
                ),
            )
        item(f"skew_J_p{p}", skew_j, tolerances["skew"])
        item(f"skew_H_p{p}", skew_h, tolerances["skew"])

        lam = 2.0
        scale_res = 0.0
        for _ in range(5):
            v = VectorField1D(grid, random_band_limited(rng, grid, p, max_mode=8, scale=0.6))
            grid2 = Grid1D(n_pts=grid.n_pts, length=lam * grid.length)
            v2 = VectorField1D(grid2, v.values / lam)
            lhs = soliton._rhs(v2, level=1, r_const=0.0)
            rhs = soliton._rhs(v, level=1, r_const=0.0) / lam**4
            denom = max(float(np.max(np.abs(rhs))), 1e-30)
            scale_res = max(scale_res, float(np.max(np.abs(lhs - rhs))) / denom)
        item(f"scaling_p{p}", scale_res, tolerances["scaling"])

        if p == 1:
            v = VectorField1D(grid, random_band_limited(rng, grid, 1, max_mode=6, scale=0.6))
            w = VectorField1D(grid, random_band_limited(rng, grid, 1, max_mode=6, scale=0.6))
            wedge_res = float(
                np.max(np.abs(op_H(v, w).values - ddx(w.values, grid.length)))
            )
            item("wedge_term_trivial_p1", wedge_res, 1e-12, {"note": "1-D wedge vanishes"})

    v = VectorField1D(grid, random_band_limited(rng, grid, 1, max_mode=6, scale=0.6))
    ladder = variational_check(1, v)
    item("variational_ladder_p1", ladder["residual"], tolerances["ladder"])
    return results


def cmd_identity_check(cfg, out_dir, seed, tol_override, plots_on):
    t0 = time.perf_counter()
    stages = {"validate": "ok"}
    fl = cfg.get("flow", {})
    n_pts = fl.get("N_pts", 256)
    if not isinstance(n_pts, int) or n_pts < 16 or (n_pts & (n_pts - 1)) != 0:
        raise ConfigError("flow.N_pts", "must be a power of two and at least 16")
    length = fl.get("length", 20.0)
    if isinstance(length, bool) or not isinstance(length, (int, float)) or length <= 0:
        raise ConfigError("flow.length", "must be positive")
    grid = Grid1D(n_pts=n_pts, length=float(length))
    ident = cfg.get("identity", {})
    run_seed = seed if seed is not None else ident.get("seed", 7)
    tolerances = {
        "recursion": 1e-6,
        "composition": 1e-7,
        "skew": 1e-8,
        "scaling": 1e-6,
        "ladder": 1e-4,
    }
    tolerances.update(ident.get("tolerances", {}))
    if tol_override is not None:
        tolerances = {k: tol_override for k in tolerances}
    results = identity_battery(grid, run_seed, tolerances)
    os.makedirs(out_dir, exist_ok=True)
    passed = all(r["passed"] for r in results)
    _write_json(
        os.path.join(out_dir, "identity_report.json"),
        {
            "grid": {"N_pts": grid.n_pts, "length": grid.length},
            "seed": run_seed,
            "results": results,
            "passed": passed,
        },
    )
    stages["identities"] = "ok" if passed else "failed"
    if plots_on:
        from . import plots

        plots.identity_figure(out_dir, results)
        stages["plots"] = "ok"
    _finish_manifest(out_dir, cfg, stages, {}, t0)
    if not passed:
        failing = [r["name"] for r in results if not r["passed"]]
        print("identity check failed: " + ", ".join(failing), file=sys.stderr)
        return 4
    return 0


# --- driver -----------------------------------------------------------------------


def _run(command, cfg, out_dir, seed, tol, plots_on):
    if command == "geom":
        return cmd_geom(cfg, out_dir, seed, plots_on)
    if command == "check-constant":
        return cmd_check_constant(cfg, out_dir, seed, tol, plots_on)
    if command == "flow":
        return cmd_flow(cfg, out_dir, seed, tol, plots_on)
    if command == "identity-check":
        return cmd_identity_check(cfg, out_dir, seed, tol, plots_on)
    raise AssertionError(command)


def _hash_tree(base):
    out = {}
    for root, _, names in os.walk(base):
        for name in sorted(names):
            if name == "run_manifest.json":
                continue
            full = os.path.join(root, name)
            out[os.path.relpath(full, base)] = _sha256(full)
    return out


def _verify(command, cfg, out_dir, seed, tol, plots_on):
    """Check the existing outputs against the manifest, then re-run into a
    scratch directory and check reproducibility."""
    manifest_path = os.path.join(out_dir, "run_manifest.json")
    if not os.path.exists(manifest_path):
        print(f"no manifest at {manifest_path}", file=sys.stderr)
        return 1
    with open(manifest_path, encoding="utf-8") as f:
        manifest = json.load(f)
    recorded = manifest.get("files", {})
    ok = True
    on_disk = _hash_tree(out_dir)
    for key in sorted(set(recorded) | set(on_disk)):
        if recorded.get(key) != on_disk.get(key):
            print(f"verify: on-disk mismatch for {key}", file=sys.stderr)
            ok = False
    with tempfile.TemporaryDirectory() as tmp:
        code = _run(command, cfg, tmp, seed, tol, plots_on)
        fresh = _hash_tree(tmp)
    for key in sorted(set(recorded) | set(fresh)):
        if recorded.get(key) != fresh.get(key):
            print(f"verify: rerun mismatch for {key}", file=sys.stderr)
            ok = False
    if ok:
        print("verify: all file hashes match")
        return 0 if code == 0 else code
    return 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lagflow",
        description="Nonholonomic geometry reports and bi-Hamiltonian flow runs.",
    )
    parser.add_argument("command", choices=["geom", "check-constant", "flow", "identity-check"])
    parser.add_argument("--config", required=True, help="path to a JSON run configuration")
    parser.add_argument("--out", default=None, help="output directory (default: config output.dir)")
    parser.add_argument("--verify", action="store_true", help="recompute and compare manifest hashes")
    parser.add_argument("--tol", type=float, default=None, help="tolerance override")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    args = parser.parse_args(argv)

    try:
        with open(args.config, encoding="utf-8") as f:
            cfg = json.load(f)
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"config is not valid JSON: {exc}", file=sys.stderr)
        return 2

    out_dir = args.out or cfg.get("output", {}).get("dir")
    if not out_dir:
        print("config error at output.dir: missing (or pass --out)", file=sys.stderr)
        return 2
    plots_on = not args.no_plots and cfg.get("output", {}).get("plots", True)

    try:
        if args.verify:
            return _verify(args.command, cfg, out_dir, args.seed, args.tol, plots_on)
        return _run(args.command, cfg, out_dir, args.seed, args.tol, plots_on)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except ParseError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (GeometryError, dsl.EvaluationError) as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
