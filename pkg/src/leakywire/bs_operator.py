"""Galerkin assembly of the trace-space operator Q_lambda and relatives.

The bilinear form used throughout is the symmetric splitting

    (Q_lambda f, f) = -(1/8pi) /int/int (f(s)-f(t))^2 / p~(s,t) ds dt
                      + /int |f(s)|^2 Lambda(s) ds
                      + /int/int R~(s,t) f(s) f(t) ds dt

with p~ the domain's splitting distance, Lambda the matching diagonal log
weight, and R~ = G_lambda(chord) - 1/(4 pi p~) a bounded kernel.  All three
pieces are assembled symmetrically, so the matrix is exactly symmetric and
the generalized pencil M x = eta B x has real branches.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from .geometry import CircleLoop, Curve, Domain, HiatusCurve
from . import kernels
from .kernels import FOUR_PI, SpectralParameter
from .quadrature import (MeshError, PanelMesh, _gauss_on, build_mesh,
                         cross_form, diag_form, near_pairs, quad_form)


class AssemblyError(ValueError):
    pass


# ---------------------------------------------------------------------------
# bases

class HatBasis:
    """Piecewise-linear hats on the mesh breakpoints (periodic on loops)."""

    kind = "hat"

    def __init__(self, mesh: PanelMesh):
        self.mesh = mesh
        self.periodic = mesh.domain.periodic
        self.comp_bks = [np.asarray(b) for b in mesh.breakpoints]
        self.offsets = []
        n = 0
        for bks in self.comp_bks:
            self.offsets.append(n)
            n += len(bks) - 1 if self.periodic else len(bks)
        self.size = n

    def eval_matrix(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        rows, cols, vals = [], [], []
        assigned = np.zeros(x.size, dtype=bool)
        for ci, bks in enumerate(self.comp_bks):
            a, b = bks[0], bks[-1]
            m = (~assigned) & (x >= a - 1e-12) & (x <= b + 1e-12)
            if not m.any():
                continue
            assigned |= m
            idx = np.flatnonzero(m)
            xi = np.clip(x[idx], a, b)
            p = np.clip(np.searchsorted(bks, xi, side="right") - 1,
                        0, len(bks) - 2)
            h = bks[p + 1] - bks[p]
            tr = (xi - bks[p]) / h
            nb = len(bks) - 1 if self.periodic else len(bks)
            off = self.offsets[ci]
            left = off + p
            right = off + (p + 1) % nb if self.periodic else off + p + 1
            rows.extend([idx, idx])
            cols.extend([left, right])
            vals.extend([1.0 - tr, tr])
        if not assigned.all():
            bad = x[~assigned][0]
            raise AssemblyError(f"point {bad} outside the basis domain")
        E = sp.csr_matrix(
            (np.concatenate(vals),
             (np.concatenate(rows), np.concatenate(cols))),
            shape=(x.size, self.size))
        return E

    def mass_matrix(self):
        B = np.zeros((self.size, self.size))
        for ci, bks in enumerate(self.comp_bks):
            nb = len(bks) - 1 if self.periodic else len(bks)
            off = self.offsets[ci]
            for p in range(len(bks) - 1):
                h = bks[p + 1] - bks[p]
                i = off + p
                j = off + (p + 1) % nb if self.periodic else off + p + 1
                B[i, i] += h / 3.0
                B[j, j] += h / 3.0
                B[i, j] += h / 6.0
                B[j, i] += h / 6.0
        return B

    def integrals(self):
        v = np.zeros(self.size)
        for ci, bks in enumerate(self.comp_bks):
            nb = len(bks) - 1 if self.periodic else len(bks)
            off = self.offsets[ci]
            for p in range(len(bks) - 1):
                h = bks[p + 1] - bks[p]
                v[off + p] += h / 2.0
                v[off + (p + 1) % nb if self.periodic else off + p + 1] += h / 2.0
        return v


class TrigBasis:
    """Orthonormal Fourier basis {1, cos, sin} on a closed loop of length L."""

    kind = "trig"

    def __init__(self, length, K):
        self.L = float(length)
        self.K = int(K)
        self.size = 2 * self.K + 1

    def eval_matrix(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        E = np.empty((x.size, self.size))
        E[:, 0] = 1.0 / np.sqrt(self.L)
        amp = np.sqrt(2.0 / self.L)
        for k in range(1, self.K + 1):
            th = 2 * np.pi * k * x / self.L
            E[:, 2 * k - 1] = amp * np.cos(th)
            E[:, 2 * k] = amp * np.sin(th)
        return E

    def mass_matrix(self):
        return np.eye(self.size)

    def integrals(self):
        v = np.zeros(self.size)
        v[0] = np.sqrt(self.L)
        return v

    def mode_of(self, n):
        """Fourier order |k| of basis member n."""
        return 0 if n == 0 else (n + 1) // 2


# ---------------------------------------------------------------------------
# assembled operator

@dataclass
class QMatrix:
    kappa: float
    M: np.ndarray
    B: np.ndarray
    basis: object
    mesh: PanelMesh
    domain: Domain

    @property
    def lam(self):
        return -self.kappa**2

    def theta(self, alpha):
        """Matrix of the pencil Q_lambda - alpha (same basis)."""
        return self.M - alpha * self.B


class GalerkinAssembler:
    """Caches all lambda-independent quadrature data for one (domain, mesh,
    basis) triple; per-kappa assembly is then O(G^2) elementwise work.

    Immutable after construction and safe to share between workers.
    """

    def __init__(self, domain: Domain, mesh: PanelMesh, basis):
        if basis.kind == "trig" and not domain.periodic:
            raise AssemblyError("trig basis requires a closed, gap-free curve")
        self.domain = domain
        self.mesh = mesh
        self.basis = basis
        if domain.gap is not None:
            eps = 0.5 * (domain.gap[1] - domain.gap[0])
            for a, b in domain.intervals:
                for edge in self._gap_edges():
                    if abs(a - edge) < 1e-12 or abs(b - edge) < 1e-12:
                        if mesh.min_panel_near(edge) > 0.5 * eps + 1e-12:
                            raise AssemblyError(
                                "mesh does not resolve the hiatus: smallest "
                                f"panel at the gap edge exceeds eps/2 = {eps/2:g}"
                            )
        near = near_pairs(mesh)
        self.near = near
        x = mesh.nodes
        self.w = mesh.weights
        base = domain.to_base(x)
        pts = domain.curve.point(base)
        C = cdist(pts, pts)
        PT = domain.splitting_distance(x[:, None], x[None, :])
        bad = ~near.far_mask
        C[bad] = 1.0
        PT[bad] = 1.0
        self.WW = (self.w[:, None] * self.w[None, :]) * near.far_mask
        self.C = C
        self.CURV = (PT - C) / (FOUR_PI * C * PT) * self.WW
        self.base = base
        # near-node geometry
        bs, bt = domain.to_base(near.s), domain.to_base(near.t)
        self.c_near = np.linalg.norm(domain.curve.point(bs)
                                     - domain.curve.point(bt), axis=-1)
        self.pt_near = domain.splitting_distance(near.s, near.t)
        self.curv_near = ((self.pt_near - self.c_near)
                          / (FOUR_PI * self.c_near * self.pt_near))
        self.base_near = (bs, bt)
        # basis data
        self.E = basis.eval_matrix(x)
        self.Es = basis.eval_matrix(near.s)
        self.Et = basis.eval_matrix(near.t)
        # lambda-independent matrices
        A = self.WW / PT
        r = A.sum(axis=1)
        S = 2.0 * (diag_form(self.E, r) - quad_form(self.E, A))
        D = self.Es - self.Et
        S = S + cross_form(D, D, near.w / self.pt_near)
        self.S = 0.5 * (S + S.T)
        lam_vals = kernels.domain_log_weight(domain, x)
        self.LamM = diag_form(self.E, self.w * np.asarray(lam_vals))
        self.B = basis.mass_matrix()
        del PT

    def _gap_edges(self):
        g1, g2 = self.domain.gap
        if self.domain.wrapped:
            return (0.0, self.domain.total_length)
        return (g1, g2)

    def _galerkin(self, k_far, k_near):
        M = quad_form(self.E, k_far)
        M = M + cross_form(self.Es, self.Et, self.near.w * k_near)
        return 0.5 * (M + M.T)

    def q_matrix(self, kappa) -> QMatrix:
        """Galerkin matrix of Q_lambda at kappa = sqrt(-lambda)."""
        R_far = np.expm1(-kappa * self.C) / (FOUR_PI * self.C) * self.WW \
            + self.CURV
        r_near = (np.expm1(-kappa * self.c_near) / (FOUR_PI * self.c_near)
                  + self.curv_near)
        M = -self.S / (8.0 * np.pi) + self.LamM + self._galerkin(R_far, r_near)
        return QMatrix(kappa=float(kappa), M=M, B=self.B, basis=self.basis,
                       mesh=self.mesh, domain=self.domain)

    def q_dlambda_matrix(self, kappa):
        """Galerkin matrix of the lambda-derivative kernel
        e^{-kappa chord}/(8 pi kappa); symmetric positive semidefinite."""
        c = 8.0 * np.pi * kappa
        k_far = np.exp(-kappa * self.C) / c * self.WW
        k_near = np.exp(-kappa * self.c_near) / c
        return self._galerkin(k_far, k_near)

    def green_diff_matrix(self, kappa_w, kappa_z):
        """Galerkin matrix of G_w(chord) - G_z(chord) (bounded kernel)."""
        k_far = (np.expm1(-kappa_w * self.C) - np.expm1(-kappa_z * self.C)) \
            / (FOUR_PI * self.C) * self.WW
        k_near = (np.expm1(-kappa_w * self.c_near)
                  - np.expm1(-kappa_z * self.c_near)) \
            / (FOUR_PI * self.c_near)
        return self._galerkin(k_far, k_near)

    def exp_kernel_matrix(self, kappa):
        """Galerkin matrix of e^{-kappa chord(s,t)} (Gram-type weight)."""
        k_far = np.exp(-kappa * self.C) * self.WW
        k_near = np.exp(-kappa * self.c_near)
        return self._galerkin(k_far, k_near)

    def curvature_kernel_matrix(self):
        """Galerkin matrix of (1/4pi)(1/chord - 1/param_distance) >= 0."""
        pd_far = self.domain.curve.param_distance(self.base[:, None],
                                                  self.base[None, :])
        pd_far[~self.near.far_mask] = 1.0
        k_far = (1.0 / self.C - 1.0 / pd_far) / FOUR_PI * self.WW
        bs, bt = self.base_near
        pd_near = self.domain.curve.param_distance(bs, bt)
        k_near = (1.0 / self.c_near - 1.0 / pd_near) / FOUR_PI
        return self._galerkin(k_far, k_near)


def make_domain(obj) -> Domain:
    if isinstance(obj, Domain):
        return obj
    if isinstance(obj, HiatusCurve):
        return Domain.from_hiatus(obj)
    if isinstance(obj, Curve):
        return Domain.from_curve(obj)
    raise AssemblyError(f"cannot build a domain from {type(obj).__name__}")


def make_assembler(obj, n_panels, order=8, basis="hat", trig_modes=16,
                   grading=0.15, grade_levels=4, min_panel=None):
    """Convenience constructor: domain + mesh + basis + assembler."""
    domain = make_domain(obj)
    if min_panel is None and domain.gap is not None:
        g1, g2 = domain.gap
        min_panel = 0.25 * (g2 - g1)
    mesh = build_mesh(domain, n_panels, order=order, grading=grading,
                      grade_levels=grade_levels, min_panel=min_panel)
    if basis == "hat":
        b = HatBasis(mesh)
    elif basis == "trig":
        b = TrigBasis(domain.curve.length, trig_modes)
    else:
        raise AssemblyError(f"unknown basis kind {basis!r}")
    return GalerkinAssembler(domain, mesh, b)


def assemble_q(obj, spar: SpectralParameter, n_panels=128, order=8,
               basis="hat", trig_modes=16, min_panel=None) -> QMatrix:
    asm = make_assembler(obj, n_panels, order=order, basis=basis,
                         trig_modes=trig_modes, min_panel=min_panel)
    return asm.q_matrix(spar.kappa)


def assemble_q_dlambda(obj, spar: SpectralParameter, n_panels=128, order=8,
                       basis="hat", trig_modes=16):
    asm = make_assembler(obj, n_panels, order=order, basis=basis,
                         trig_modes=trig_modes)
    return asm.q_dlambda_matrix(spar.kappa)


# ---------------------------------------------------------------------------
# circle Fourier symbol

def circle_symbol(circle, spar: SpectralParameter, k, n_panels=64, order=12,
                  splitting="smooth"):
    """Eigenvalue b_k of Q_lambda on a circle, by 1D quadrature.

    With the smooth splitting q(u) = (L/pi) sin(pi u/L) (which equals the
    circle's own chord):

        b_k = (1/4pi) /int_0^L (cos(2 pi k u/L) - 1)/q(u) du
              + (1/2pi) ln(4L/pi)
              + /int_0^L green_smooth(kappa, q(u)) cos(2 pi k u/L) du.

    ``splitting="interval"`` evaluates the equivalent periodic-distance
    form (weight (1/2pi) ln L); both must agree to quadrature accuracy.
    """
    if not isinstance(circle, CircleLoop):
        raise AssemblyError("circle_symbol requires a CircleLoop")
    L = circle.length
    k = abs(int(k))
    kap = spar.kappa
    # composite Gauss grid split at L/2 (kink location of the interval form)
    xs, ws = [], []
    for a, b in ((0.0, 0.5 * L), (0.5 * L, L)):
        bks = np.linspace(a, b, n_panels // 2 + 1)
        for i in range(len(bks) - 1):
            xg, wg = _gauss_on(bks[i], bks[i + 1], order)
            xs.append(xg)
            ws.append(wg)
    u = np.concatenate(xs)
    w = np.concatenate(ws)
    cos = np.cos(2 * np.pi * k * u / L)
    q = (L / np.pi) * np.sin(np.pi * u / L)
    if splitting == "smooth":
        sing = np.sum(w * (cos - 1.0) / q) / FOUR_PI
        lam_w = kernels.loop_diagonal_log(L)
        smooth = np.sum(w * kernels.green_smooth(kap, q) * cos)
    elif splitting == "interval":
        p = np.minimum(u, L - u)
        sing = np.sum(w * (cos - 1.0) / p) / FOUR_PI
        lam_w = kernels.periodic_diagonal_log(L)
        rem = kernels.green_smooth(kap, q) + (p - q) / (FOUR_PI * q * p)
        smooth = np.sum(w * rem * cos)
    else:
        raise AssemblyError(f"unknown splitting {splitting!r}")
    return float(sing + lam_w + smooth)


def pseudoresolvent_check(obj, lam_w, lam_z, n_panels=64, order=8,
                          basis="hat", trig_modes=16):
    """Relative residual of M(w) - M(z) against the Galerkin matrix of
    G_w(chord) - G_z(chord), all on one shared mesh."""
    if not (lam_w < 0 and lam_z < 0):
        raise AssemblyError("both spectral parameters must be negative")
    asm = make_assembler(obj, n_panels, order=order, basis=basis,
                         trig_modes=trig_modes)
    kw = float(np.sqrt(-lam_w))
    kz = float(np.sqrt(-lam_z))
    Mw = asm.q_matrix(kw).M
    Mz = asm.q_matrix(kz).M
    if lam_w == lam_z:
        return 0.0
    rhs = asm.green_diff_matrix(kw, kz)
    num = np.linalg.norm((Mw - Mz) - rhs)
    return float(num / np.linalg.norm(Mw))
