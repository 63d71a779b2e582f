"""Orthonormal adapted frames, constant-curvature verification, and the
standard example spaces (flat lift, charged-particle generator, constant
block metrics with arbitrary N).

The constant-curvature check is the gate for running flows: the hierarchy
operators assume the orthonormal-frame curvature coefficients are constant,
and the constants R_fwd / S_bwd they produce feed the flow equations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dsl, geometry
from .dsl import Expr, add, const, differentiate, mul, parse_scalar, sub, var
from .geometry import (
    BundlePoint,
    DegenerateBlockError,
    DMetric,
    GeometryError,
    Space,
    dmetric_at,
    dcurvature,
    ricci_and_scalars,
    space_from_lagrangian,
    sym_inverse,
)

__all__ = [
    "OrthoFrame",
    "ConstantCurvatureReport",
    "orthonormalize",
    "check_constant_curvature",
    "build_flat_lift",
    "build_em_space",
    "build_constant_dmetric",
    "christoffel_exprs",
    "parse_expr_matrix",
    "parse_expr_vector",
    "coordinate_metric",
    "em_nconnection_residual",
    "sample_box",
]


@dataclass
class OrthoFrame:
    """Per-block frame factors with A^T g A = diag(signature)."""

    A_h: np.ndarray
    A_v: np.ndarray
    signature_h: np.ndarray
    signature_v: np.ndarray

    def gram_residual(self, dm: DMetric) -> float:
        rh = self.A_h.T @ dm.g @ self.A_h - np.diag(self.signature_h)
        rv = self.A_v.T @ dm.h @ self.A_v - np.diag(self.signature_v)
        return float(max(np.max(np.abs(rh)), np.max(np.abs(rv))))


def _factor(block: np.ndarray, what: str):
    block = 0.5 * (block + block.T)
    w, q = np.linalg.eigh(block)
    scale = float(np.max(np.abs(w)))
    if scale == 0.0 or float(np.min(np.abs(w))) < geometry.DEGENERACY_RTOL * scale:
        raise DegenerateBlockError(f"{what} block is degenerate")
    a = q / np.sqrt(np.abs(w))[None, :]
    return a, np.sign(w)


def orthonormalize(dm: DMetric) -> OrthoFrame:
    """Signature-aware frame factors taking the d-metric blocks to diag(+-1)."""
    a_h, sig_h = _factor(dm.g, "h")
    a_v, sig_v = _factor(dm.h, "v")
    return OrthoFrame(A_h=a_h, A_v=a_v, signature_h=sig_h, signature_v=sig_v)


@dataclass
class ConstantCurvatureReport:
    samples: list
    spreads: dict
    tolerance: float
    constant: bool
    R_fwd: float
    S_bwd: float
    scalar_spreads: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "samples": [{"x": list(p.x), "y": list(p.y)} for p in self.samples],
            "spreads": self.spreads,
            "tolerance": self.tolerance,
            "verdict": "constant" if self.constant else "not_constant",
            "scalars": {
                "R_fwd": self.R_fwd,
                "S_bwd": self.S_bwd,
                "R_fwd_spread": self.scalar_spreads.get("R_fwd", 0.0),
                "S_bwd_spread": self.scalar_spreads.get("S_bwd", 0.0),
            },
        }


def check_constant_curvature(space: Space, samples, tol: float = 1e-6) -> ConstantCurvatureReport:
    """Evaluate the orthonormal-frame curvature classes at each sample and
    report the per-class max deviation from the sample mean.

    Raises ValueError for fewer than two samples; geometric failures are
    annotated with the offending sample.
    """
    samples = list(samples)
    if len(samples) < 2:
        raise ValueError("constant-curvature check needs at least 2 samples")
    per_class = {"R": [], "P": [], "S": []}
    scalars = {"R_fwd": [], "S_bwd": []}
    for idx, p in enumerate(samples):
        try:
            dm = dmetric_at(space, p)
            frame = orthonormalize(dm)
            cur = dcurvature(space, p)
            ric = ricci_and_scalars(cur, dm)
        except (GeometryError, dsl.EvaluationError) as exc:
            raise GeometryError(f"sample {idx} at x={p.x}, y={p.y}: {exc}") from exc
        b_h = np.linalg.inv(frame.A_h)
        b_v = np.linalg.inv(frame.A_v)
        r_o = np.einsum("Ii,hH,jJ,kK,ihjk->IHJK", b_h, frame.A_h, frame.A_h, frame.A_h, cur.R)
        p_o = np.einsum("Ii,jJ,kK,aA,ijka->IJKA", b_h, frame.A_h, frame.A_h, frame.A_v, cur.P)
        s_o = np.einsum("Aa,bB,cC,dD,abcd->ABCD", b_v, frame.A_v, frame.A_v, frame.A_v, cur.S)
        per_class["R"].append(r_o)
        per_class["P"].append(p_o)
        per_class["S"].append(s_o)
        scalars["R_fwd"].append(ric.R_fwd)
        scalars["S_bwd"].append(ric.S_bwd)
    spreads = {}
    for name, mats in per_class.items():
        stack = np.stack(mats)
        spreads[name] = float(np.max(np.abs(stack - stack.mean(axis=0))))
    scalar_spreads = {
        k: float(np.max(np.abs(np.array(v) - np.mean(v)))) for k, v in scalars.items()
    }
    constant = all(s < tol for s in spreads.values())
    return ConstantCurvatureReport(
        samples=samples,
        spreads=spreads,
        tolerance=tol,
        constant=constant,
        R_fwd=float(np.mean(scalars["R_fwd"])),
        S_bwd=float(np.mean(scalars["S_bwd"])),
        scalar_spreads=scalar_spreads,
    )


# --- example spaces -------------------------------------------------------------


def christoffel_exprs(g):
    """Symbols gamma^i_jk of a base metric given as an expression matrix in x."""
    n = len(g)
    ginv = sym_inverse(g)
    half = const(0.5)

    def dx(e, k):
        return differentiate(e, "x", k + 1)

    out = []
    for i in range(n):
        mat = []
        for j in range(n):
            row = []
            for k in range(n):
                acc = const(0.0)
                for h in range(n):
                    br = sub(add(dx(g[j][h], k), dx(g[k][h], j)), dx(g[j][k], h))
                    acc = add(acc, mul(ginv[i][h], br))
                row.append(mul(half, acc))
            mat.append(tuple(row))
        out.append(tuple(mat))
    return tuple(out)


def build_flat_lift(g_base) -> Space:
    """Identity d-metric blocks carried over the N-connection of the geodesic
    spray of ``g_base``; the canonical d-connection of this space is flat."""
    n = len(g_base)
    quad = const(0.0)
    for i in range(n):
        for j in range(n):
            quad = add(quad, mul(g_base[i][j], mul(var("y", i + 1), var("y", j + 1))))
    aux = dsl.LagrangianSpec(n=n, m=n, body=quad)
    n_field = space_from_lagrangian(aux).N
    delta = tuple(
        tuple(const(1.0 if i == j else 0.0) for j in range(n)) for i in range(n)
    )
    return Space(
        kind="flat_lift", n=n, m=n, g=delta, h=delta, N=n_field, tangent_mode=True
    )


def build_em_space(a, A, m0: float, e0: float) -> Space:
    """Charged-particle generator L = m0 a_ij(x) y^i y^j + e0 A_i(x) y^i,
    together with the closed-form N used for cross-validation:
    N^i_j = gamma^i_jk y^k - (1/m0) a^il F_jl with
    F_jl = (e0/4)(d_l A_j - d_j A_l)."""
    if m0 == 0.0:
        raise ValueError("m0 must be nonzero")
    n = len(a)
    body = const(0.0)
    for i in range(n):
        for j in range(n):
            body = add(
                body,
                mul(const(m0), mul(a[i][j], mul(var("y", i + 1), var("y", j + 1)))),
            )
    for i in range(n):
        body = add(body, mul(const(e0), mul(A[i], var("y", i + 1))))
    spec = dsl.LagrangianSpec(n=n, m=n, body=body)

    def dx(e, k):
        return differentiate(e, "x", k + 1)

    gamma = christoffel_exprs(a)
    a_inv = sym_inverse(a)
    quarter_e0 = const(e0 / 4.0)
    F = tuple(
        tuple(mul(quarter_e0, sub(dx(A[j], l), dx(A[l], j))) for l in range(n))
        for j in range(n)
    )
    closed = []
    for i in range(n):
        row = []
        for j in range(n):
            acc = const(0.0)
            for k in range(n):
                acc = add(acc, mul(gamma[i][j][k], var("y", k + 1)))
            for l in range(n):
                acc = sub(acc, mul(const(1.0 / m0), mul(a_inv[i][l], F[j][l])))
            row.append(acc)
        closed.append(tuple(row))

    sp = space_from_lagrangian(spec)
    out = Space(
        kind="em",
        n=n,
        m=n,
        g=sp.g,
        h=sp.h,
        N=sp.N,
        tangent_mode=True,
        lagrangian=spec,
        closed_form_N=tuple(closed),
    )
    out.semispray_exprs = sp.semispray_exprs
    return out


def build_constant_dmetric(g0: np.ndarray, h0: np.ndarray, N) -> Space:
    """Vector-bundle space with constant symmetric blocks and arbitrary
    (possibly y-dependent) N-connection coefficients."""
    g0 = np.asarray(g0, dtype=float)
    h0 = np.asarray(h0, dtype=float)
    for blk, name in ((g0, "g"), (h0, "h")):
        if blk.ndim != 2 or blk.shape[0] != blk.shape[1]:
            raise ValueError(f"{name} block must be square")
        if np.max(np.abs(blk - blk.T)) > 1e-12 * max(1.0, np.max(np.abs(blk))):
            raise ValueError(f"{name} block must be symmetric")
        geometry.invert_checked(blk, f"{name} block")
    n = g0.shape[0]
    m = h0.shape[0]
    g_e = tuple(tuple(const(g0[i, j]) for j in range(n)) for i in range(n))
    h_e = tuple(tuple(const(h0[a, b]) for b in range(m)) for a in range(m))
    return Space(
        kind="constant_dmetric", n=n, m=m, g=g_e, h=h_e, N=N, tangent_mode=False
    )


def coordinate_metric(space: Space, p: BundlePoint) -> np.ndarray:
    """Off-diagonal coordinate form of the block metric at p:
    [[g + N^T h N, N^T h], [h N, h]] (reporting only)."""
    dm = dmetric_at(space, p)
    nmat = dm.N.N  # (m, n)
    top_left = dm.g + nmat.T @ dm.h @ nmat
    top_right = nmat.T @ dm.h
    n, m = space.n, space.m
    out = np.zeros((n + m, n + m))
    out[:n, :n] = top_left
    out[:n, n:] = top_right
    out[n:, :n] = top_right.T
    out[n:, n:] = dm.h
    return out


def em_nconnection_residual(space: Space, points) -> float:
    """Max |pipeline N - closed-form N| over the given points."""
    if space.closed_form_N is None:
        raise ValueError("space carries no closed-form N")
    worst = 0.0
    for p in points:
        a = space.eval_field(space.N, p)
        b = space.eval_field(space.closed_form_N, p)
        worst = max(worst, float(np.max(np.abs(a - b))))
    return worst


# --- config helpers --------------------------------------------------------------


def _entry_to_expr(entry, n, m, extra=None) -> Expr:
    if isinstance(entry, (int, float)):
        return const(float(entry))
    return parse_scalar(str(entry), n, m, extra_names=extra)


def parse_expr_matrix(rows, n, m):
    return tuple(tuple(_entry_to_expr(e, n, m) for e in row) for row in rows)


def parse_expr_vector(entries, n, m):
    return tuple(_entry_to_expr(e, n, m) for e in entries)


def sample_box(rng, box_x, box_y, count: int):
    """Uniform samples from per-coordinate intervals."""
    pts = []
    for _ in range(count):
        x = tuple(rng.uniform(lo, hi) for lo, hi in box_x)
        y = tuple(rng.uniform(lo, hi) for lo, hi in box_y)
        pts.append(BundlePoint(x=x, y=y))
    return pts
