"""Eigenvalue branches of the trace operator, bound-state root solving,
closed-form existence thresholds, and 3D eigenfunction evaluation.

A bound state at energy lambda < 0 is a nontrivial kernel of Q_lambda -
alpha; discretely, a root of eta_j(lambda) = alpha where eta_j are the
descending eigenvalue branches of the pencil M(lambda) x = eta B x.  The
branches are nondecreasing in lambda (the lambda-derivative kernel is a
Gram weight), so each branch crosses alpha at most once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import minimize_scalar

from .bs_operator import GalerkinAssembler, make_assembler
from .kernels import FOUR_PI

PSI1 = -float(np.euler_gamma)   # digamma at 1


class SpectralError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# closed-form thresholds

@dataclass(frozen=True)
class Thresholds:
    """Segment existence bounds for coupling alpha.

    L_no_bind and L_exists are the published short/long thresholds; xi0 is
    the two-dimensional point-interaction eigenvalue setting the natural
    energy scale.  Their ratio pi e^{-psi(1)} = 5.5953... is alpha-free.
    """

    alpha: float
    L_no_bind: float
    L_exists: float
    xi0: float
    psi1: float = PSI1

    @property
    def ratio(self):
        return self.L_exists / self.L_no_bind


def thresholds(alpha) -> Thresholds:
    a = float(alpha)
    return Thresholds(
        alpha=a,
        L_no_bind=2.0 * np.exp(2 * np.pi * a),
        L_exists=2.0 * np.pi * np.exp(2 * np.pi * a - PSI1),
        xi0=xi0(a),
    )


def xi0(alpha):
    """Eigenvalue -4 e^{2(-2 pi alpha + psi(1))} of the 2D point interaction."""
    return -4.0 * np.exp(2.0 * (-2 * np.pi * float(alpha) + PSI1))


def generalized_no_bind_length(alpha, D):
    """Short-curve threshold 2 e^{2 pi (alpha - D)} for a bent curve whose
    curvature kernel has operator norm D (D = 0 for a segment)."""
    return 2.0 * np.exp(2 * np.pi * (float(alpha) - float(D)))


# ---------------------------------------------------------------------------
# eigenvalue branches

def eta_branches(asm: GalerkinAssembler, kappa, count=None):
    """Descending branches eta_j at kappa, with B-orthonormal vectors."""
    Q = asm.q_matrix(kappa)
    try:
        vals, vecs = eigh(Q.M, Q.B)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise SpectralError(
            f"pencil eigensolver failed at kappa={kappa}: {exc}; "
            f"cond(B)={np.linalg.cond(Q.B):.3e}"
        ) from exc
    vals, vecs = vals[::-1], vecs[:, ::-1]
    if count is not None:
        vals, vecs = vals[:count], vecs[:, :count]
    return vals, vecs


# ---------------------------------------------------------------------------
# bound states

@dataclass
class BoundState:
    lam: float
    multiplicity: int
    coeffs: np.ndarray          # (N, multiplicity), B-orthonormal columns
    alpha: float
    residual: float
    branches: tuple
    assembler: GalerkinAssembler = field(repr=False)

    @property
    def kappa(self):
        return float(np.sqrt(-self.lam))

    def phi(self, x, member=0):
        """Trace eigenfunction at working coordinate(s) x, L2-normalized."""
        E = self.assembler.basis.eval_matrix(np.atleast_1d(x))
        out = np.asarray(E @ self.coeffs[:, member]).ravel()
        return out if np.ndim(x) else float(out[0])

    def phi_nodes(self, member=0):
        """phi at the assembler's quadrature nodes."""
        return np.asarray(self.assembler.E @ self.coeffs[:, member]).ravel()


@dataclass
class SpectrumResult:
    alpha: float
    curve: str
    states: list
    bracket: tuple
    metadata: dict

    @property
    def eigenvalues(self):
        return [st.lam for st in self.states]


class _BranchCache:
    """Memoized pencil solves along the lambda axis for one assembler."""

    def __init__(self, asm, count):
        self.asm = asm
        self.count = count
        self._data = {}

    def __call__(self, lam):
        key = float(lam)
        if key not in self._data:
            vals, vecs = eta_branches(self.asm, np.sqrt(-lam))
            self._data[key] = (vals, vecs)
        return self._data[key]

    def eta(self, lam, j):
        return self(lam)[0][j]


def _newton_root(cache: _BranchCache, asm, j, alpha, lo, hi, rel_tol):
    """Safeguarded Newton on eta_j(lambda) - alpha with bisection fallback.

    The derivative comes from the Hellmann-Feynman identity
    eta_j' = x^T M'(lambda) x for the B-normalized eigenvector x.
    """
    f_lo = cache.eta(lo, j) - alpha
    f_hi = cache.eta(hi, j) - alpha
    if f_lo >= 0 or f_hi <= 0:
        return None
    lam = 0.5 * (lo + hi)
    for _ in range(80):
        vals, vecs = cache(lam)
        g = vals[j] - alpha
        if g > 0:
            hi = lam
        else:
            lo = lam
        x = vecs[:, j]
        Mp = asm.q_dlambda_matrix(np.sqrt(-lam))
        dg = float(x @ Mp @ x)
        nxt = 0.5 * (lo + hi)
        if dg > 0:
            newton = lam - g / dg
            if lo < newton < hi:
                nxt = newton
        if abs(nxt - lam) <= rel_tol * abs(nxt):
            return nxt
        lam = nxt
    return lam


def default_bracket(alpha):
    """(4 xi0, -1e-8): xi0 sets the natural energy scale; factor 4 margin."""
    return (4.0 * xi0(alpha), -1e-8)


def solve_bound_states(asm: GalerkinAssembler, alpha, bracket=None,
                       branch_count=6, rel_tol=1e-10, cluster_tol=1e-6,
                       s0=None):
    """Root-solve eta_j(lambda) = alpha on the given assembler.

    Returns a list of BoundState, eigenvalues increasing, degenerate roots
    clustered into multiplets.  An empty list is a valid physical answer.
    """
    if bracket is None:
        bracket = default_bracket(alpha)
    lo, hi = bracket
    if not (lo < hi < 0):
        raise SpectralError(f"invalid bracket {bracket}")
    cache = _BranchCache(asm, branch_count)
    n_br = min(branch_count, asm.basis.size)
    # widen the lower end until the tracked branches start below alpha
    for _ in range(4):
        vals_lo, _ = cache(lo)
        if vals_lo[:n_br].max() < alpha:
            break
        lo *= 4.0
    roots = []
    for j in range(n_br):
        lam = _newton_root(cache, asm, j, alpha, lo, hi, rel_tol)
        if lam is not None:
            roots.append((lam, j))
    roots.sort()
    # cluster into multiplets
    groups = []
    for lam, j in roots:
        if groups and abs(lam - groups[-1][0][0]) <= cluster_tol * abs(lam):
            groups[-1].append((lam, j))
        else:
            groups.append([(lam, j)])
    states = []
    for grp in groups:
        lam = float(np.mean([g[0] for g in grp]))
        branches = tuple(g[1] for g in grp)
        vals, vecs = eta_branches(asm, np.sqrt(-lam))
        coeffs = vecs[:, list(branches)].copy()
        coeffs = _canonicalize(asm, coeffs, s0)
        theta = asm.q_matrix(np.sqrt(-lam)).M - alpha * asm.B
        resid = max(
            float(np.linalg.norm(theta @ coeffs[:, i])
                  / np.linalg.norm(asm.B @ coeffs[:, i]))
            for i in range(coeffs.shape[1]))
        states.append(BoundState(lam=lam, multiplicity=len(grp),
                                 coeffs=coeffs, alpha=alpha, residual=resid,
                                 branches=branches, assembler=asm))
    return states


def _canonicalize(asm, coeffs, s0):
    """Fix signs (integral >= 0) and, inside a degenerate block with a
    designated point s0, rotate so only the first member is nonzero at s0."""
    m = coeffs.shape[1]
    if s0 is not None and m > 1:
        x0 = asm.domain.from_base(s0)
        E0 = asm.basis.eval_matrix(np.array([x0]))
        v = np.asarray(E0 @ coeffs).ravel()
        nv = np.linalg.norm(v)
        if nv > 1e-12:
            U = np.eye(m)
            U[:, 0] = v / nv
            U, _ = np.linalg.qr(U)
            if U[:, 0] @ (v / nv) < 0:
                U[:, 0] *= -1
            coeffs = coeffs @ U
    ints = asm.basis.integrals()
    for i in range(m):
        sgn = ints @ coeffs[:, i]
        if sgn < 0:
            coeffs[:, i] *= -1
    return coeffs


def find_bound_states(obj, alpha, n_panels=256, order=8, basis="hat",
                      trig_modes=16, bracket=None, branch_count=6,
                      rel_tol=1e-10, cluster_tol=1e-6, s0=None,
                      assembler=None) -> SpectrumResult:
    asm = assembler or make_assembler(obj, n_panels, order=order, basis=basis,
                                      trig_modes=trig_modes)
    if bracket is None:
        bracket = default_bracket(alpha)
    states = solve_bound_states(asm, alpha, bracket=bracket,
                                branch_count=branch_count, rel_tol=rel_tol,
                                cluster_tol=cluster_tol, s0=s0)
    meta = {
        "n_basis": asm.basis.size,
        "n_nodes": asm.mesh.n_nodes,
        "order": asm.mesh.order,
        "rel_tol": rel_tol,
        "cluster_tol": cluster_tol,
        "branch_count": branch_count,
    }
    return SpectrumResult(alpha=float(alpha),
                          curve=asm.domain.curve.label,
                          states=states, bracket=tuple(bracket),
                          metadata=meta)


# ---------------------------------------------------------------------------
# curvature norm bound

def curvature_norm_bound(obj, n_panels=128, order=8):
    """Largest pencil eigenvalue of the kernel (1/4pi)(1/chord - 1/p).

    Zero for a segment; positive for bent curves.  Variational, hence
    nondecreasing under basis enrichment.
    """
    asm = obj if isinstance(obj, GalerkinAssembler) else \
        make_assembler(obj, n_panels, order=order)
    K = asm.curvature_kernel_matrix()
    if not np.all(np.isfinite(K)):
        raise SpectralError("curvature kernel not finite on the sample grid")
    vals = eigh(K, asm.B, eigvals_only=True)
    return float(max(vals[-1], 0.0))


# ---------------------------------------------------------------------------
# 3D eigenfunction

def _local_refined_rule(asm, s_star, scale):
    """1D rule on the domain refined geometrically toward s_star (working
    coordinate), down to panels of size ~scale/2."""
    from .quadrature import _gauss_on
    xs, ws = [], []
    r = 0.2
    for (a, b) in asm.domain.intervals:
        bks = set()
        for bk in np.concatenate(
                [np.asarray(c) for c in asm.mesh.breakpoints]):
            if a - 1e-14 <= bk <= b + 1e-14:
                bks.add(float(bk))
        if a < s_star < b:
            h0 = max(min(s_star - a, b - s_star), 1e-30)
            d = min(asm.mesh.min_panel_near(
                min(max(s_star, a + 1e-14), b - 1e-14)), h0)
            while d > 0.5 * scale:
                d *= r
            for sgn in (-1.0, 1.0):
                t = d
                while t < h0:
                    p = s_star + sgn * t
                    if a < p < b:
                        bks.add(p)
                    t /= r
            bks.add(s_star)
        bks = np.array(sorted(bks))
        for i in range(len(bks) - 1):
            if bks[i + 1] - bks[i] < 1e-15:
                continue
            xg, wg = _gauss_on(bks[i], bks[i + 1], asm.mesh.order)
            xs.append(xg)
            ws.append(wg)
    return np.concatenate(xs), np.concatenate(ws)


def psi_eval(state: BoundState, points, member=0, min_distance=1e-9):
    """3D eigenfunction psi(x) = int G_lambda(|x - gamma(t)|) phi(t) dt.

    Uses the assembler's quadrature grid, switching to a locally refined
    rule (graded toward the nearest curve parameter) when x is too close
    for the global mesh to resolve the Green-kernel peak.
    """
    asm = state.assembler
    kap = state.kappa
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    curve_pts = asm.domain.curve.point(asm.base)
    phi_n = state.phi_nodes(member)
    diff = pts[:, None, :] - curve_pts[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    dmin = dist.min(axis=1)
    if np.any(dmin <= min_distance):
        raise SpectralError("evaluation point lies on the curve")
    # resolution scale of the global rule near each point's closest node
    out = np.empty(len(pts))
    imin = dist.argmin(axis=1)
    for i in range(len(pts)):
        x_node = asm.mesh.nodes[imin[i]]
        h_loc = asm.mesh.min_panel_near(
            min(max(x_node, asm.mesh.panels[0, 0] + 1e-13),
                asm.mesh.panels[-1, 1] - 1e-13))
        if dmin[i] >= 2.0 * h_loc:
            out[i] = np.sum(asm.w * phi_n
                            * np.exp(-kap * dist[i]) / (FOUR_PI * dist[i]))
        else:
            # refine the nearest parameter: the closest quadrature node can
            # be off by half a panel, far more than the kernel peak width
            lo = max(float(x_node) - 2 * h_loc, asm.mesh.panels[0, 0])
            hi_ = min(float(x_node) + 2 * h_loc, asm.mesh.panels[-1, 1])
            r = minimize_scalar(
                lambda t: float(np.sum((pts[i] - asm.domain.curve.point(
                    np.asarray(asm.domain.to_base(np.atleast_1d(t))))[0])**2)),
                bounds=(lo, hi_), method="bounded",
                options={"xatol": 1e-3 * dmin[i]})
            x_star = float(r.x)
            # true closest approach, not the nearest-node distance: the
            # nodes can sit half a panel away from the foot point
            d_star = float(np.linalg.norm(
                pts[i] - asm.domain.curve.point(
                    np.asarray(asm.domain.to_base(
                        np.atleast_1d(x_star))))[0]))
            if d_star <= min_distance:
                raise SpectralError("evaluation point lies on the curve")
            xg, wg = _local_refined_rule(asm, x_star, d_star)
            pg = asm.domain.curve.point(asm.domain.to_base(xg))
            dg = np.linalg.norm(pts[i] - pg, axis=-1)
            Eg = asm.basis.eval_matrix(xg)
            fg = np.asarray(Eg @ state.coeffs[:, member]).ravel()
            out[i] = np.sum(wg * fg * np.exp(-kap * dg) / (FOUR_PI * dg))
    return out if np.ndim(points) > 1 else float(out[0])


# ---------------------------------------------------------------------------
# trace asymptotics of psi on parallel curves

@dataclass
class TraceAsymptoticsReport:
    d_grid: tuple
    deviations: tuple           # L2 deviation of psi|Gamma_d + phi ln d/2pi
    strictly_decreasing: bool
    limit_deviation: float      # ||extrapolated limit - alpha phi||_L2
    phi_norm: float
    observed_order: float


def trace_asymptotics_check(state: BoundState, d_grid, interior=0.8,
                            member=0):
    """Check psi restricted to the offset curve Gamma_d against the
    regularized boundary expansion: psi|_d + (1/2pi) phi ln d -> alpha phi.

    The deviation is measured in L2 over the interior fraction of the
    parameter range (endpoint neighborhoods excluded) after projecting
    onto the discrete trace space; the projection removes the pointwise
    discretization residual of phi itself, which carries no information
    about the d -> 0 limit under test.
    """
    import scipy.sparse as sp
    import scipy.sparse.linalg as spla
    from .regcheck import richardson
    asm = state.assembler
    curve = asm.domain.curve
    L = curve.length
    a = 0.5 * (1.0 - interior) * L
    base = np.asarray(asm.base)
    phi_n = state.phi_nodes(member)
    if sp.issparse(asm.B):
        Bfac = spla.factorized(sp.csc_matrix(asm.B))
    else:
        Bfac = None
    d_grid = sorted(float(d) for d in d_grid)[::-1]
    # interior L2 norm through the quadrature nodes
    mask = (base >= a) & (base <= L - a)
    win = asm.w * mask

    def project(vals):
        rhs = asm.E.T @ (asm.w * vals)
        if Bfac is not None:
            return Bfac(rhs)
        return np.linalg.solve(np.asarray(asm.B), rhs)

    def interior_norm(coeff):
        fn = np.asarray(asm.E @ coeff).ravel()
        return float(np.sqrt(np.sum(win * fn * fn)))

    target = state.alpha * state.coeffs[:, member]
    devs, dev_coeffs = [], []
    for d in d_grid:
        pts = curve.point(base) + d * curve.normal(base)
        psi_d = psi_eval(state, pts, member=member)
        u = project(psi_d + phi_n * np.log(d) / (2 * np.pi))
        dev_coeffs.append(u - target)
        devs.append(interior_norm(dev_coeffs[-1]))
    lim, _err, order, _ok = richardson(np.array(d_grid),
                                       np.array(dev_coeffs))
    limit_dev = interior_norm(lim)
    phi_norm = interior_norm(state.coeffs[:, member])
    dec = all(devs[i + 1] < devs[i] for i in range(len(devs) - 1))
    return TraceAsymptoticsReport(
        d_grid=tuple(d_grid), deviations=tuple(devs),
        strictly_decreasing=dec, limit_deviation=limit_dev,
        phi_norm=phi_norm, observed_order=float(order))
