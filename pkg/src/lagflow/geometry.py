"""N-adapted geometry induced by a regular generator L(x, y) or by prescribed
block metrics.

Everything is kept symbolic (expression pipelines) through the curvature
stage; numbers appear only at final evaluation.  This matters because the
curvature coefficients need derivatives of the connection coefficients,
which in turn contain derivatives of the vertical Hessian metric; sampling
early would force finite differences of finite differences.

Index conventions (see docs/conventions.md):

* ``N[a][i]`` is N^a_i (fiber row a, base column i).
* Connection coefficients store the differentiation direction LAST:
  ``L[i][j][k]`` is L^i_jk with k the direction of e_k.
* On a tangent bundle (m == n) the cross blocks L^a_bk and C^i_jc of the
  canonical distinguished connection coincide with L^i_jk and C^a_bc under
  the index identification i <-> a; the returned DConnection reports them
  as zero blocks, while torsion and curvature use the identified values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from . import dsl
from .dsl import Expr, LagrangianSpec, add, const, differentiate, div, mul, neg, sub, var

__all__ = [
    "GeometryError",
    "DegenerateHessianError",
    "DegenerateBlockError",
    "BundlePoint",
    "VerticalMetric",
    "NConnection",
    "DMetric",
    "DConnection",
    "DTorsion",
    "DCurvature",
    "RicciScalars",
    "AnholonomyCoefficients",
    "GeometryReport",
    "Space",
    "space_from_lagrangian",
    "hessian_metric",
    "semispray",
    "nconnection",
    "nconnection_curvature",
    "anholonomy",
    "sasaki_dmetric",
    "dmetric_at",
    "canonical_dconnection",
    "dtorsion",
    "dcurvature",
    "ricci_and_scalars",
    "geometry_report",
    "sym_inverse",
    "invert_checked",
    "DEGENERACY_RTOL",
]

DEGENERACY_RTOL = 1e-10


class GeometryError(Exception):
    """Base class for geometric failures at a bundle point."""


class DegenerateHessianError(GeometryError):
    """The vertical Hessian is singular at the evaluation point."""


class DegenerateBlockError(GeometryError):
    """A d-metric block is singular at the evaluation point."""


# --- points ------------------------------------------------------------------


@dataclass(frozen=True)
class BundlePoint:
    """A point (x, y) on the bundle; coordinates stored as tuples."""

    x: tuple
    y: tuple

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))
        if not all(math.isfinite(v) for v in self.x + self.y):
            raise ValueError("bundle point coordinates must be finite")

    @property
    def x_arr(self):
        return np.array(self.x)

    @property
    def y_arr(self):
        return np.array(self.y)


# --- symbolic matrix helpers ---------------------------------------------------


def _zip_rows(rows):
    return tuple(tuple(r) for r in rows)


def sym_det(M) -> Expr:
    """Determinant by cofactor expansion (intended for blocks up to 4x4)."""
    k = len(M)
    if k > 4:
        raise GeometryError("symbolic inversion supported for blocks up to 4x4")
    if k == 1:
        return M[0][0]

    def minor(rows, cols):
        if len(cols) == 1:
            return M[rows[0]][cols[0]]
        acc = None
        r = rows[0]
        for pos, c in enumerate(cols):
            term = mul(M[r][c], minor(rows[1:], cols[:pos] + cols[pos + 1 :]))
            if pos % 2 == 1:
                term = neg(term)
            acc = term if acc is None else add(acc, term)
        return acc

    return minor(tuple(range(k)), tuple(range(k)))


def sym_inverse(M):
    """Adjugate/determinant inverse of a symbolic matrix."""
    k = len(M)
    det = sym_det(M)
    if k == 1:
        return ((div(const(1.0), M[0][0]),),)
    out = []
    idx = tuple(range(k))
    for i in idx:
        row = []
        for j in idx:
            rows = tuple(r for r in idx if r != j)
            cols = tuple(c for c in idx if c != i)
            sub_m = tuple(tuple(M[r][c] for c in cols) for r in rows)
            cof = sym_det(sub_m)
            if (i + j) % 2 == 1:
                cof = neg(cof)
            row.append(div(cof, det))
        out.append(tuple(row))
    return tuple(out)


def invert_checked(a: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Inverse with a degeneracy threshold relative to the largest entry."""
    a = np.asarray(a, dtype=float)
    k = a.shape[0]
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if scale == 0.0 or abs(np.linalg.det(a)) < DEGENERACY_RTOL * scale**k:
        raise DegenerateBlockError(f"{what} is degenerate (|det| below threshold)")
    return np.linalg.inv(a)


# --- result containers ---------------------------------------------------------


@dataclass
class VerticalMetric:
    g: np.ndarray
    g_inv: np.ndarray


@dataclass
class NConnection:
    """Coefficients N^a_i as an (m, n) array."""

    N: np.ndarray


@dataclass
class DMetric:
    g: np.ndarray
    h: np.ndarray
    N: NConnection
    tangent_mode: bool = True


@dataclass
class DConnection:
    L_h: np.ndarray  # L^i_jk, (n, n, n)
    L_v: np.ndarray  # L^a_bk, (m, m, n)
    C_h: np.ndarray  # C^i_jc, (n, n, m)
    C_v: np.ndarray  # C^a_bc, (m, m, m)
    tangent_mode: bool = True


@dataclass
class DTorsion:
    T_hh: np.ndarray  # T^i_jk
    T_hv: np.ndarray  # T^i_ja
    T_vh: np.ndarray  # T^a_ji (equals the N-connection curvature)
    T_mix: np.ndarray  # T^a_bi
    T_vv: np.ndarray  # T^a_bc


@dataclass
class DCurvature:
    R: np.ndarray  # R^i_hjk
    P: np.ndarray  # P^i_jka
    S: np.ndarray  # S^a_bcd
    tangent_mode: bool = True
    # extra families in vector-bundle mode (None on TM)
    R_v: np.ndarray | None = None
    P_v: np.ndarray | None = None
    S_h: np.ndarray | None = None


@dataclass
class RicciScalars:
    R_ij: np.ndarray
    R_ia: np.ndarray
    R_ai: np.ndarray
    S_ab: np.ndarray
    R_fwd: float
    S_bwd: float
    total: float


@dataclass
class AnholonomyCoefficients:
    """Nontrivial anholonomy families: W^b_ia = dN^b_i/dy^a (shape (m, n, m))
    and W^a_ji = Omega^a_ij (shape (m, n, n))."""

    W: np.ndarray
    Omega: np.ndarray


@dataclass
class GeometryReport:
    point: BundlePoint
    n: int
    m: int
    tangent_mode: bool
    N: np.ndarray
    dconnection: DConnection
    torsion: DTorsion
    curvature: DCurvature
    ricci: RicciScalars
    notes: dict = field(default_factory=dict)

    def to_dict(self):
        cur = {
            "R": self.curvature.R.tolist(),
            "P": self.curvature.P.tolist(),
            "S": self.curvature.S.tolist(),
        }
        if self.curvature.R_v is not None:
            cur["R_v"] = self.curvature.R_v.tolist()
            cur["P_v"] = self.curvature.P_v.tolist()
            cur["S_h"] = self.curvature.S_h.tolist()
        return {
            "dims": {"n": self.n, "m": self.m, "tangent_mode": self.tangent_mode},
            "point": {"x": list(self.point.x), "y": list(self.point.y)},
            "N": self.N.tolist(),
            "Gamma": {
                "L_h": self.dconnection.L_h.tolist(),
                "L_v": self.dconnection.L_v.tolist(),
                "C_h": self.dconnection.C_h.tolist(),
                "C_v": self.dconnection.C_v.tolist(),
            },
            "Torsion": {
                "T_hh": self.torsion.T_hh.tolist(),
                "T_hv": self.torsion.T_hv.tolist(),
                "T_vh": self.torsion.T_vh.tolist(),
                "T_mix": self.torsion.T_mix.tolist(),
                "T_vv": self.torsion.T_vv.tolist(),
            },
            "Curvature": cur,
            "Ricci": {
                "R_ij": self.ricci.R_ij.tolist(),
                "R_ia": self.ricci.R_ia.tolist(),
                "R_ai": self.ricci.R_ai.tolist(),
                "S_ab": self.ricci.S_ab.tolist(),
            },
            "scalars": {
                "R_fwd": self.ricci.R_fwd,
                "S_bwd": self.ricci.S_bwd,
                "total": self.ricci.total,
            },
            "notes": self.notes,
        }


# --- the symbolic pipeline -----------------------------------------------------


def _dx(e, i0):
    return differentiate(e, "x", i0 + 1)


def _dy(e, a0):
    return differentiate(e, "y", a0 + 1)


class Space:
    """A d-metric [g, h] with nonlinear-connection coefficients N, all held
    as expression fields, plus the derived connection/torsion/curvature
    pipelines.  Instances are cheap until a cached field is first touched.
    """

    def __init__(self, kind, n, m, g, h, N, tangent_mode, lagrangian=None, closed_form_N=None):
        self.kind = kind
        self.n = n
        self.m = m
        self.g = _zip_rows(g)
        self.h = _zip_rows(h)
        self.N = _zip_rows(N)
        self.tangent_mode = bool(tangent_mode)
        self.lagrangian = lagrangian
        self.closed_form_N = _zip_rows(closed_form_N) if closed_form_N is not None else None
        self.semispray_exprs = None  # filled for generator-derived spaces

    # -- elongated derivatives

    def e_h(self, e: Expr, k: int) -> Expr:
        """Horizontal N-elongated derivative e_k = d/dx^k - N^a_k d/dy^a."""
        out = _dx(e, k)
        for a in range(self.m):
            out = sub(out, mul(self.N[a][k], _dy(e, a)))
        return out

    def e_v(self, e: Expr, a: int) -> Expr:
        return _dy(e, a)

    # -- symbolic fields

    @cached_property
    def g_inv(self):
        return sym_inverse(self.g)

    @cached_property
    def h_inv(self):
        return sym_inverse(self.h)

    @cached_property
    def omega(self):
        """N-connection curvature Omega^a_ij, antisymmetric in (i, j)."""
        n, m, N = self.n, self.m, self.N
        out = []
        for a in range(m):
            plane = [[const(0.0)] * n for _ in range(n)]
            for i in range(n):
                for j in range(i + 1, n):
                    term = sub(_dx(N[a][i], j), _dx(N[a][j], i))
                    for b in range(m):
                        term = add(term, mul(N[b][i], _dy(N[a][j], b)))
                        term = sub(term, mul(N[b][j], _dy(N[a][i], b)))
                    plane[i][j] = term
                    plane[j][i] = neg(term)
            out.append(_zip_rows(plane))
        return tuple(out)

    @cached_property
    def dN_dy(self):
        """W^b_ia = dN^b_i / dy^a as [b][i][a]."""
        return tuple(
            tuple(tuple(_dy(self.N[b][i], a) for a in range(self.m)) for i in range(self.n))
            for b in range(self.m)
        )

    @cached_property
    def conn_L(self):
        """L^i_jk of the canonical distinguished connection (h block)."""
        n, g, ginv = self.n, self.g, self.g_inv
        eh = self.e_h
        out = []
        for i in range(n):
            mat = []
            for j in range(n):
                row = []
                for k in range(n):
                    acc = const(0.0)
                    for r in range(n):
                        br = sub(add(eh(g[j][r], k), eh(g[k][r], j)), eh(g[j][k], r))
                        acc = add(acc, mul(ginv[i][r], br))
                    row.append(mul(const(0.5), acc))
                mat.append(tuple(row))
            out.append(tuple(mat))
        return tuple(out)

    @cached_property
    def conn_C(self):
        """C^a_bc of the canonical distinguished connection (v block)."""
        m, h, hinv = self.m, self.h, self.h_inv
        ev = self.e_v
        out = []
        for a in range(m):
            mat = []
            for b in range(m):
                row = []
                for c in range(m):
                    acc = const(0.0)
                    for e in range(m):
                        br = sub(add(ev(h[b][e], c), ev(h[c][e], b)), ev(h[b][c], e))
                        acc = add(acc, mul(hinv[a][e], br))
                    row.append(mul(const(0.5), acc))
                mat.append(tuple(row))
            out.append(tuple(mat))
        return tuple(out)

    @cached_property
    def conn_Lv(self):
        """L^a_bk (mixed h block).  On TM this is identified with L^i_jk."""
        if self.tangent_mode:
            return self.conn_L
        m, n, h, hinv, N = self.m, self.n, self.h, self.h_inv, self.N
        eh, ev = self.e_h, self.e_v
        out = []
        for a in range(m):
            mat = []
            for b in range(m):
                row = []
                for k in range(n):
                    acc = ev(N[a][k], b)
                    inner = const(0.0)
                    for c in range(m):
                        br = eh(h[b][c], k)
                        for d in range(m):
                            br = sub(br, mul(h[d][c], ev(N[d][k], b)))
                            br = sub(br, mul(h[d][b], ev(N[d][k], c)))
                        inner = add(inner, mul(hinv[a][c], br))
                    row.append(add(acc, mul(const(0.5), inner)))
                mat.append(tuple(row))
            out.append(tuple(mat))
        return tuple(out)

    @cached_property
    def conn_Ch(self):
        """C^i_jc (mixed v block).  On TM this is identified with C^a_bc."""
        if self.tangent_mode:
            return self.conn_C
        n, m, g, ginv = self.n, self.m, self.g, self.g_inv
        ev = self.e_v
        out = []
        for i in range(n):
            mat = []
            for j in range(n):
                row = []
                for c in range(m):
                    acc = const(0.0)
                    for k in range(n):
                        acc = add(acc, mul(ginv[i][k], ev(g[j][k], c)))
                    row.append(mul(const(0.5), acc))
                mat.append(tuple(row))
            out.append(tuple(mat))
        return tuple(out)

    @cached_property
    def deflection(self):
        """T^b_ka = dN^b_k/dy^a - L^b_ak as [b][k][a] (enters the P curvature)."""
        m, n = self.m, self.n
        Lv = self.conn_Lv
        return tuple(
            tuple(tuple(sub(self.dN_dy[b][k][a], Lv[b][a][k]) for a in range(m)) for k in range(n))
            for b in range(m)
        )

    # -- torsion

    @cached_property
    def torsion_fields(self):
        n, m = self.n, self.m
        L, C = self.conn_L, self.conn_C
        Lv, Ch = self.conn_Lv, self.conn_Ch
        t_hh = tuple(
            tuple(tuple(sub(L[i][j][k], L[i][k][j]) for k in range(n)) for j in range(n))
            for i in range(n)
        )
        t_hv = Ch  # T^i_ja = C^i_ja
        t_vh = tuple(
            tuple(tuple(self.omega[a][j][i] for i in range(n)) for j in range(n))
            for a in range(m)
        )
        t_mix = tuple(
            tuple(tuple(sub(self.dN_dy[a][i][b], Lv[a][b][i]) for i in range(n)) for b in range(m))
            for a in range(m)
        )
        t_vv = tuple(
            tuple(tuple(sub(C[a][b][c], C[a][c][b]) for c in range(m)) for b in range(m))
            for a in range(m)
        )
        return t_hh, t_hv, t_vh, t_mix, t_vv

    # -- curvature

    def _cov_h_of_C(self, C, L_upper, L_lower_h, L_lower_v):
        """h-covariant derivative D_k C^._.a for a mixed (1,1,1) block, as
        [up][low][a][k]."""
        du = len(C)
        dl = len(C[0])
        dv = len(C[0][0])
        n = self.n
        eh = self.e_h
        out = []
        for i in range(du):
            b1 = []
            for j in range(dl):
                b2 = []
                for a in range(dv):
                    row = []
                    for k in range(n):
                        acc = eh(C[i][j][a], k)
                        for mm in range(du):
                            acc = add(acc, mul(L_upper[i][mm][k], C[mm][j][a]))
                        for mm in range(dl):
                            acc = sub(acc, mul(L_lower_h[mm][j][k], C[i][mm][a]))
                        for b in range(dv):
                            acc = sub(acc, mul(L_lower_v[b][a][k], C[i][j][b]))
                        row.append(acc)
                    b2.append(tuple(row))
                b1.append(tuple(b2))
            out.append(tuple(b1))
        return tuple(out)

    @cached_property
    def curvature_R(self):
        """R^i_hjk = e_k L^i_hj - e_j L^i_hk + L^m_hj L^i_mk - L^m_hk L^i_mj
        - C^i_ha Omega^a_kj."""
        n, m = self.n, self.m
        L, Ch = self.conn_L, self.conn_Ch
        eh = self.e_h
        out = []
        for i in range(n):
            b1 = []
            for hh in range(n):
                b2 = []
                for j in range(n):
                    row = []
                    for k in range(n):
                        acc = sub(eh(L[i][hh][j], k), eh(L[i][hh][k], j))
                        for mm in range(n):
                            acc = add(acc, mul(L[mm][hh][j], L[i][mm][k]))
                            acc = sub(acc, mul(L[mm][hh][k], L[i][mm][j]))
                        for a in range(m):
                            acc = sub(acc, mul(Ch[i][hh][a], self.omega[a][k][j]))
                        row.append(acc)
                    b2.append(tuple(row))
                b1.append(tuple(b2))
            out.append(tuple(b1))
        return tuple(out)

    @cached_property
    def curvature_P(self):
        """P^i_jka = e_a L^i_jk - D_k C^i_ja + C^i_jb T^b_ka."""
        n, m = self.n, self.m
        L, Ch, Lv = self.conn_L, self.conn_Ch, self.conn_Lv
        cov = self._cov_h_of_C(Ch, L, L, Lv)
        T = self.deflection
        ev = self.e_v
        out = []
        for i in range(n):
            b1 = []
            for j in range(n):
                b2 = []
                for k in range(n):
                    row = []
                    for a in range(m):
                        acc = sub(ev(L[i][j][k], a), cov[i][j][a][k])
                        for b in range(m):
                            acc = add(acc, mul(Ch[i][j][b], T[b][k][a]))
                        row.append(acc)
                    b2.append(tuple(row))
                b1.append(tuple(b2))
            out.append(tuple(b1))
        return tuple(out)

    @cached_property
    def curvature_S(self):
        """S^a_bcd = e_d C^a_bc - e_c C^a_bd + C^e_bc C^a_ed - C^e_bd C^a_ec."""
        m = self.m
        C = self.conn_C
        ev = self.e_v
        out = []
        for a in range(m):
            b1 = []
            for b in range(m):
                b2 = []
                for c in range(m):
                    row = []
                    for d in range(m):
                        acc = sub(ev(C[a][b][c], d), ev(C[a][b][d], c))
                        for e in range(m):
                            acc = add(acc, mul(C[e][b][c], C[a][e][d]))
                            acc = sub(acc, mul(C[e][b][d], C[a][e][c]))
                        row.append(acc)
                    b2.append(tuple(row))
                b1.append(tuple(b2))
            out.append(tuple(b1))
        return tuple(out)

    @cached_property
    def curvature_Rv(self):
        """R^a_bjk (vector-bundle mode only)."""
        n, m = self.n, self.m
        Lv, C = self.conn_Lv, self.conn_C
        eh = self.e_h
        out = []
        for a in range(m):
            b1 = []
            for b in range(m):
                b2 = []
                for j in range(n):
                    row = []
                    for k in range(n):
                        acc = sub(eh(Lv[a][b][j], k), eh(Lv[a][b][k], j))
                        for c in range(m):
                            acc = add(acc, mul(Lv[c][b][j], Lv[a][c][k]))
                            acc = sub(acc, mul(Lv[c][b][k], Lv[a][c][j]))
                            acc = sub(acc, mul(C[a][b][c], self.omega[c][k][j]))
                        row.append(acc)
                    b2.append(tuple(row))
                b1.append(tuple(b2))
            out.append(tuple(b1))
        return tuple(out)

    @cached_property
    def curvature_Pv(self):
        """P^c_bka = e_a L^c_bk - D_k C^c_ba + C^c_bd T^d_ka.

        On TM this coincides with P^i_jka under the index identification.
        """
        if self.tangent_mode:
            return self.curvature_P
        n, m = self.n, self.m
        Lv, C = self.conn_Lv, self.conn_C
        cov = self._cov_h_of_C(C, Lv, Lv, Lv)
        T = self.deflection
        ev = self.e_v
        out = []
        for cI in range(m):
            b1 = []
            for b in range(m):
                b2 = []
                for k in range(n):
                    row = []
                    for a in range(m):
                        acc = sub(ev(Lv[cI][b][k], a), cov[cI][b][a][k])
                        for d in range(m):
                            acc = add(acc, mul(C[cI][b][d], T[d][k][a]))
                        row.append(acc)
                    b2.append(tuple(row))
                b1.append(tuple(b2))
            out.append(tuple(b1))
        return tuple(out)

    @cached_property
    def curvature_Sh(self):
        """S^i_jbc (vector-bundle mode only)."""
        n, m = self.n, self.m
        Ch = self.conn_Ch
        ev = self.e_v
        out = []
        for i in range(n):
            b1 = []
            for j in range(n):
                b2 = []
                for b in range(m):
                    row = []
                    for c in range(m):
                        acc = sub(ev(Ch[i][j][b], c), ev(Ch[i][j][c], b))
                        for hh in range(n):
                            acc = add(acc, mul(Ch[hh][j][b], Ch[i][hh][c]))
                            acc = sub(acc, mul(Ch[hh][j][c], Ch[i][hh][b]))
                        row.append(acc)
                    b2.append(tuple(row))
                b1.append(tuple(b2))
            out.append(tuple(b1))
        return tuple(out)

    # -- evaluation

    def eval_field(self, exprs, p: BundlePoint, _memo=None) -> np.ndarray:
        """Evaluate a nested tuple of expressions at p, sharing a memo."""
        memo = {} if _memo is None else _memo

        def walk(node):
            if isinstance(node, Expr):
                return dsl.evaluate(node, p.x, p.y, _memo=memo)
            return [walk(c) for c in node]

        return np.array(walk(exprs))

    def check_regular(self, p: BundlePoint):
        """Raise if a metric block is degenerate at p."""
        memo = {}
        gv = self.eval_field(self.g, p, memo)
        scale = float(np.max(np.abs(gv))) if gv.size else 0.0
        if scale == 0.0 or abs(np.linalg.det(gv)) < DEGENERACY_RTOL * scale**self.n:
            raise DegenerateHessianError(
                f"vertical metric degenerate at x={p.x}, y={p.y}"
            )
        if not self.tangent_mode:
            hv = self.eval_field(self.h, p, memo)
            hscale = float(np.max(np.abs(hv)))
            if hscale == 0.0 or abs(np.linalg.det(hv)) < DEGENERACY_RTOL * hscale**self.m:
                raise DegenerateBlockError(f"fiber block degenerate at x={p.x}, y={p.y}")


# --- construction from a generator --------------------------------------------


@lru_cache(maxsize=None)
def space_from_lagrangian(spec: LagrangianSpec) -> Space:
    """Tangent-bundle space induced by a regular generator: vertical Hessian
    metric, spray coefficients, and N = dG/dy."""
    if spec.m != spec.n:
        raise GeometryError("generator-induced geometry requires m == n (tangent-bundle mode)")
    n = spec.n
    L = spec.body
    half = const(0.5)
    quarter = const(0.25)

    hess = tuple(
        tuple(mul(half, _dy(_dy(L, a), b)) for b in range(n)) for a in range(n)
    )
    hess_inv = sym_inverse(hess)
    dLdx = tuple(_dx(L, j) for j in range(n))
    d2L = tuple(tuple(_dx(_dy(L, j), k) for k in range(n)) for j in range(n))

    spray = []
    for i in range(n):
        acc = const(0.0)
        for j in range(n):
            inner = const(0.0)
            for k in range(n):
                inner = add(inner, mul(d2L[j][k], var("y", k + 1)))
            inner = sub(inner, dLdx[j])
            acc = add(acc, mul(hess_inv[i][j], inner))
        spray.append(mul(quarter, acc))
    spray = tuple(spray)

    ncoef = tuple(tuple(_dy(spray[i], j) for j in range(n)) for i in range(n))

    sp = Space(
        kind="lagrangian",
        n=n,
        m=n,
        g=hess,
        h=hess,
        N=ncoef,
        tangent_mode=True,
        lagrangian=spec,
    )
    sp.semispray_exprs = spray
    return sp


def _as_space(obj) -> Space:
    if isinstance(obj, Space):
        return obj
    if isinstance(obj, LagrangianSpec):
        return space_from_lagrangian(obj)
    raise TypeError(f"expected Space or LagrangianSpec, got {type(obj).__name__}")


# --- point operations ----------------------------------------------------------


def hessian_metric(spec, p: BundlePoint) -> VerticalMetric:
    """Vertical metric g~_ab = (1/2) d2L/dy^a dy^b at p, with its inverse."""
    if isinstance(spec, LagrangianSpec):
        L = spec.body
        m = spec.m
        memo = {}
        g = np.empty((m, m))
        for a in range(m):
            for b in range(a, m):
                val = dsl.evaluate(
                    mul(const(0.5), _dy(_dy(L, a), b)), p.x, p.y, _memo=memo
                )
                g[a, b] = val
                g[b, a] = val
    else:
        sp = _as_space(spec)
        g = sp.eval_field(sp.g, p)
        asym = float(np.max(np.abs(g - g.T))) if g.size else 0.0
        if asym > 1e-12 * max(1.0, float(np.max(np.abs(g)))):
            raise GeometryError("vertical metric is not symmetric")
        g = 0.5 * (g + g.T)
    try:
        g_inv = invert_checked(g, "vertical metric")
    except DegenerateBlockError as exc:
        raise DegenerateHessianError(str(exc)) from None
    return VerticalMetric(g=g, g_inv=g_inv)


def semispray(spec, p: BundlePoint) -> np.ndarray:
    """Spray coefficients G^i(x, y); geodesics solve x'' = -2 G(x, x')."""
    sp = _as_space(spec)
    if sp.semispray_exprs is None:
        raise GeometryError("space has no generator-induced spray")
    sp.check_regular(p)
    return sp.eval_field(sp.semispray_exprs, p)


def nconnection(spec, p: BundlePoint) -> NConnection:
    sp = _as_space(spec)
    sp.check_regular(p)
    return NConnection(N=sp.eval_field(sp.N, p))


def nconnection_curvature(spec, p: BundlePoint) -> np.ndarray:
    """Omega^a_ij as an (m, n, n) array, antisymmetric in (i, j)."""
    sp = _as_space(spec)
    sp.check_regular(p)
    return sp.eval_field(sp.omega, p)


def anholonomy(spec, p: BundlePoint) -> AnholonomyCoefficients:
    sp = _as_space(spec)
    sp.check_regular(p)
    w = sp.eval_field(sp.dN_dy, p)  # [b][i][a]
    om = sp.eval_field(sp.omega, p)
    return AnholonomyCoefficients(W=w, Omega=om)


def sasaki_dmetric(spec, p: BundlePoint) -> DMetric:
    sp = _as_space(spec)
    if not sp.tangent_mode:
        raise GeometryError("Sasaki lift requires tangent-bundle mode (m == n)")
    vm = hessian_metric(sp if sp.lagrangian is None else sp.lagrangian, p)
    nc = nconnection(sp, p)
    return DMetric(g=vm.g, h=vm.g.copy(), N=nc, tangent_mode=True)


def dmetric_at(space, p: BundlePoint) -> DMetric:
    sp = _as_space(space)
    sp.check_regular(p)
    g = sp.eval_field(sp.g, p)
    h = sp.eval_field(sp.h, p)
    return DMetric(
        g=0.5 * (g + g.T),
        h=0.5 * (h + h.T),
        N=NConnection(N=sp.eval_field(sp.N, p)),
        tangent_mode=sp.tangent_mode,
    )


def canonical_dconnection(space, p: BundlePoint) -> DConnection:
    """Coefficients of the metric-compatible canonical d-connection at p.

    In tangent-bundle mode only (L^i_jk, C^a_bc) are reported; the cross
    blocks are zero by the index identification.
    """
    sp = _as_space(space)
    sp.check_regular(p)
    memo = {}
    L = sp.eval_field(sp.conn_L, p, memo)
    C = sp.eval_field(sp.conn_C, p, memo)
    if sp.tangent_mode:
        Lv = np.zeros((sp.m, sp.m, sp.n))
        Ch = np.zeros((sp.n, sp.n, sp.m))
    else:
        Lv = sp.eval_field(sp.conn_Lv, p, memo)
        Ch = sp.eval_field(sp.conn_Ch, p, memo)
    return DConnection(L_h=L, L_v=Lv, C_h=Ch, C_v=C, tangent_mode=sp.tangent_mode)


def dtorsion(space, p: BundlePoint) -> DTorsion:
    sp = _as_space(space)
    sp.check_regular(p)
    memo = {}
    t_hh, t_hv, t_vh, t_mix, t_vv = (
        sp.eval_field(f, p, memo) for f in sp.torsion_fields
    )
    return DTorsion(T_hh=t_hh, T_hv=t_hv, T_vh=t_vh, T_mix=t_mix, T_vv=t_vv)


def dcurvature(space, p: BundlePoint) -> DCurvature:
    sp = _as_space(space)
    sp.check_regular(p)
    memo = {}
    R = sp.eval_field(sp.curvature_R, p, memo)
    P = sp.eval_field(sp.curvature_P, p, memo)
    S = sp.eval_field(sp.curvature_S, p, memo)
    if sp.tangent_mode:
        return DCurvature(R=R, P=P, S=S, tangent_mode=True)
    return DCurvature(
        R=R,
        P=P,
        S=S,
        tangent_mode=False,
        R_v=sp.eval_field(sp.curvature_Rv, p, memo),
        P_v=sp.eval_field(sp.curvature_Pv, p, memo),
        S_h=sp.eval_field(sp.curvature_Sh, p, memo),
    )


def ricci_and_scalars(dcurv: DCurvature, dm: DMetric) -> RicciScalars:
    """Ricci blocks R_ij = R^k_ijk, R_ia = -P^k_ika, R_ai = P^b_aib,
    S_ab = S^c_abc, and the two scalar contractions."""
    R_ij = np.einsum("kijk->ij", dcurv.R)
    R_ia = -np.einsum("kika->ia", dcurv.P)
    P_v = dcurv.P_v if dcurv.P_v is not None else dcurv.P
    R_ai = np.einsum("baib->ai", P_v)
    S_ab = np.einsum("cabc->ab", dcurv.S)
    g_inv = invert_checked(dm.g, "h metric block")
    h_inv = invert_checked(dm.h, "v metric block")
    r_fwd = float(np.sum(g_inv * R_ij))
    s_bwd = float(np.sum(h_inv * S_ab))
    return RicciScalars(
        R_ij=R_ij,
        R_ia=R_ia,
        R_ai=R_ai,
        S_ab=S_ab,
        R_fwd=r_fwd,
        S_bwd=s_bwd,
        total=r_fwd + s_bwd,
    )


def geometry_report(space, p: BundlePoint) -> GeometryReport:
    """All N-adapted coefficient tables at a bundle point."""
    sp = _as_space(space)
    dm = dmetric_at(sp, p)
    dc = canonical_dconnection(sp, p)
    tor = dtorsion(sp, p)
    cur = dcurvature(sp, p)
    ric = ricci_and_scalars(cur, dm)
    notes = {}
    if not sp.tangent_mode:
        # claim check: constant d-metric blocks do not force this block to zero
        lv = sp.eval_field(sp.conn_Lv, p)
        notes["L_v_max_abs"] = float(np.max(np.abs(lv))) if lv.size else 0.0
    return GeometryReport(
        point=p,
        n=sp.n,
        m=sp.m,
        tangent_mode=sp.tangent_mode,
        N=dm.N.N,
        dconnection=dc,
        torsion=tor,
        curvature=cur,
        ricci=ric,
        notes=notes,
    )
