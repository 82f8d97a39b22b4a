"""Composite Gauss-Legendre meshes and the weakly singular form assembly.

The double integrals split into a "far" part (tensor quadrature over panel
pairs that do not touch) and a "near" part (same panel, or neighbours
sharing a breakpoint).  Near pairs get dedicated node sets: a band
transform u = s - t on the same panel, and a Duffy-type corner transform on
adjacent panels, so the diagonal kink of the integrands never meets a
quadrature cell interior.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .geometry import Domain, GeometryError


@lru_cache(maxsize=32)
def _leggauss(q):
    x, w = np.polynomial.legendre.leggauss(q)
    return x, w


def _gauss_on(a, b, q):
    x, w = _leggauss(q)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


class MeshError(ValueError):
    pass


@dataclass
class PanelMesh:
    """Panels tiling each domain component, with Gauss nodes per panel."""

    domain: Domain
    order: int
    panels: np.ndarray          # (P, 2) endpoints in working coordinates
    comp: np.ndarray            # (P,) component index of each panel
    breakpoints: list           # per component, sorted breakpoint arrays
    grading: float
    nodes: np.ndarray = field(init=False)    # (G,) flattened
    weights: np.ndarray = field(init=False)  # (G,)
    panel_of_node: np.ndarray = field(init=False)

    def __post_init__(self):
        q = self.order
        P = len(self.panels)
        nodes = np.empty((P, q))
        weights = np.empty((P, q))
        for p, (a, b) in enumerate(self.panels):
            nodes[p], weights[p] = _gauss_on(a, b, q)
        self.nodes = nodes.ravel()
        self.weights = weights.ravel()
        self.panel_of_node = np.repeat(np.arange(P), q)

    @property
    def n_panels(self):
        return len(self.panels)

    @property
    def n_nodes(self):
        return self.nodes.size

    def min_panel_near(self, x):
        """Size of the smallest panel whose closure contains x."""
        sizes = [b - a for a, b in self.panels
                 if a - 1e-14 <= x <= b + 1e-14]
        if not sizes:
            raise MeshError(f"point {x} not covered by the mesh")
        return min(sizes)


def _graded_breakpoints(a, b, n, r, levels, min_panel):
    """Uniform breakpoints on (a,b) with geometric tails at both ends."""
    h = (b - a) / n
    bks = [a + h * i for i in range(n + 1)]
    m = levels
    if min_panel is not None and min_panel < h:
        m = max(m, int(np.ceil(np.log(min_panel / h) / np.log(r))))
    left = [a + h * r**j for j in range(m, 0, -1)]
    right = [b - h * r**j for j in range(1, m + 1)]
    out = np.array(bks[:1] + left + bks[1:-1] + right + bks[-1:])
    return out


def build_mesh(domain: Domain, n_panels, order=8, grading=0.15,
               grade_levels=4, min_panel=None):
    """Panel mesh for a domain: uniform on loops, end-graded on open pieces.

    ``n_panels`` is the base (pre-grading) panel budget, distributed over
    components proportionally to length.  ``min_panel`` forces the geometric
    tails down to at least that size (used to resolve a hiatus half-width).
    """
    if order < 2:
        raise MeshError("Gauss order must be >= 2")
    if not (0 < grading < 1):
        raise MeshError("grading ratio must lie in (0, 1)")
    total = domain.total_length
    panels = []
    comp = []
    breakpoints = []
    for ci, (a, b) in enumerate(domain.intervals):
        if b - a < 1e-12:
            raise MeshError(f"degenerate component ({a}, {b})")
        n_c = max(2, int(round(n_panels * (b - a) / total)))
        if domain.periodic:
            bks = np.linspace(a, b, n_c + 1)
        else:
            bks = _graded_breakpoints(a, b, n_c, grading, grade_levels,
                                      min_panel)
        breakpoints.append(bks)
        for i in range(len(bks) - 1):
            panels.append((bks[i], bks[i + 1]))
            comp.append(ci)
    return PanelMesh(domain=domain, order=order,
                     panels=np.array(panels), comp=np.array(comp),
                     breakpoints=breakpoints, grading=grading)


# ---------------------------------------------------------------------------
# near pairs

@dataclass
class NearSet:
    """Quadrature nodes covering the panel pairs excluded from far tensor
    quadrature, plus the complementary far mask."""

    s: np.ndarray
    t: np.ndarray
    w: np.ndarray
    far_mask: np.ndarray  # (G, G) bool; True where tensor quadrature applies


def _band_nodes(a, b, q):
    """Nodes for the square (a,b)^2 via u = s - t, both orientations."""
    h = b - a
    u, wu = _gauss_on(0.0, h, q)
    ss, tt, ww = [], [], []
    for ui, wi in zip(u, wu):
        tj, wj = _gauss_on(a, b - ui, q)
        ss.append(tj + ui)
        tt.append(tj)
        ww.append(wi * wj)
        ss.append(tj)
        tt.append(tj + ui)
        ww.append(wi * wj)
    return np.concatenate(ss), np.concatenate(tt), np.concatenate(ww)


def _duffy_nodes(s_end, t_start, h1, h2, q):
    """Nodes for (s_end-h1, s_end) x (t_start, t_start+h2) with a corner
    kink at (s_end, t_start); returns both this block and its mirror."""
    x, wx = _gauss_on(0.0, 1.0, q)
    X, Y = np.meshgrid(x, x, indexing="ij")
    WX, WY = np.meshgrid(wx, wx, indexing="ij")
    base_w = (WX * WY * h1 * h2 * X).ravel()
    ss, tt, ww = [], [], []
    for xi, tau in (((h1 * X).ravel(), (h2 * X * Y).ravel()),
                    ((h1 * X * Y).ravel(), (h2 * X).ravel())):
        s = s_end - xi
        t = t_start + tau
        ss.extend([s, t])
        tt.extend([t, s])
        ww.extend([base_w, base_w])
    return np.concatenate(ss), np.concatenate(tt), np.concatenate(ww)


def near_pairs(mesh: PanelMesh):
    """Enumerate near panel pairs and build their transformed node sets."""
    q = mesh.order
    P = mesh.n_panels
    pairs = []  # ordered (p1, p2) to exclude from the far mask
    ss, tt, ww = [], [], []
    for p in range(P):
        a, b = mesh.panels[p]
        s_, t_, w_ = _band_nodes(a, b, q)
        ss.append(s_), tt.append(t_), ww.append(w_)
        pairs.append((p, p))
    for p in range(P - 1):
        if mesh.comp[p] != mesh.comp[p + 1]:
            continue
        a1, c = mesh.panels[p]
        c2, b2 = mesh.panels[p + 1]
        s_, t_, w_ = _duffy_nodes(c, c, c - a1, b2 - c2, q)
        ss.append(s_), tt.append(t_), ww.append(w_)
        pairs.extend([(p, p + 1), (p + 1, p)])
    if mesh.domain.periodic and P > 2:
        # seam: last panel touches the first through b == a (mod L)
        a1, b1 = mesh.panels[P - 1]
        a2, b2 = mesh.panels[0]
        s_, t_, w_ = _duffy_nodes(b1, a2, b1 - a1, b2 - a2, q)
        ss.append(s_), tt.append(t_), ww.append(w_)
        pairs.extend([(P - 1, 0), (0, P - 1)])
    panel_near = np.zeros((P, P), dtype=bool)
    for p1, p2 in pairs:
        panel_near[p1, p2] = True
    far_mask = ~panel_near[np.ix_(mesh.panel_of_node, mesh.panel_of_node)]
    return NearSet(s=np.concatenate(ss), t=np.concatenate(tt),
                   w=np.concatenate(ww), far_mask=far_mask)


# ---------------------------------------------------------------------------
# form assembly helpers

def _as_csr(E):
    return E if sp.issparse(E) else None


def quad_form(E, A):
    """E^T A E for E (G,N) sparse or dense and A (G,G) dense."""
    if sp.issparse(E):
        Y = (E.T @ A)          # (N, G) dense
        return np.asarray(E.T @ Y.T).T
    return E.T @ (A @ E)


def diag_form(E, r):
    """E^T diag(r) E."""
    if sp.issparse(E):
        return np.asarray(((E.multiply(r[:, None])).T @ E).toarray())
    return (E * r[:, None]).T @ E


def cross_form(Es, Et, coef):
    """Es^T diag(coef) Et for node-pair evaluation matrices."""
    if sp.issparse(Es):
        return np.asarray(((Es.multiply(coef[:, None])).T @ Et).toarray())
    return (Es * coef[:, None]).T @ Et


def singular_form_matrix(mesh: PanelMesh, basis, near: NearSet = None):
    """S_mn = /int/int (e_m(s)-e_m(t)) (e_n(s)-e_n(t)) / p~(s,t) ds dt.

    The integrand is O(p~) near the diagonal, hence bounded; the band and
    Duffy node sets restore high-order convergence across the kink.
    """
    if near is None:
        near = near_pairs(mesh)
    dom = mesh.domain
    E = basis.eval_matrix(mesh.nodes)
    x = mesh.nodes
    p = dom.splitting_distance(x[:, None], x[None, :])
    p[~near.far_mask] = 1.0
    A = (mesh.weights[:, None] * mesh.weights[None, :]) * near.far_mask / p
    r = A.sum(axis=1)
    S = 2.0 * (diag_form(E, r) - quad_form(E, A))
    pn = dom.splitting_distance(near.s, near.t)
    Es = basis.eval_matrix(near.s)
    Et = basis.eval_matrix(near.t)
    D = Es - Et
    S += cross_form(D, D, near.w / pn)
    return 0.5 * (S + S.T)


def smooth_form_matrix(mesh: PanelMesh, basis, k_far, k_near,
                       near: NearSet):
    """Galerkin matrix /int/int K(s,t) e_m(s) e_n(t) for a bounded kernel.

    ``k_far`` holds K at the (G, G) tensor nodes (entries under the near
    mask are ignored), ``k_near`` holds K at the NearSet nodes.
    """
    E = basis.eval_matrix(mesh.nodes)
    A = (mesh.weights[:, None] * mesh.weights[None, :]) * near.far_mask * k_far
    M = quad_form(E, A)
    Es = basis.eval_matrix(near.s)
    Et = basis.eval_matrix(near.t)
    M = M + cross_form(Es, Et, near.w * k_near)
    return 0.5 * (M + M.T)


def weighted_mass_matrix(mesh: PanelMesh, basis, wvals):
    """/int w(s) e_m(s) e_n(s) ds with w sampled at the mesh nodes."""
    E = basis.eval_matrix(mesh.nodes)
    return diag_form(E, mesh.weights * np.asarray(wvals))


def eval_kernel(mesh: PanelMesh, near: NearSet, kfunc):
    """Evaluate kfunc(x1, x2) at the far tensor grid and the near nodes.

    Masked far entries are forced to zero so kernels that are singular on
    the diagonal can still be tabulated.
    """
    x = mesh.nodes
    X1 = np.broadcast_to(x[:, None], (x.size, x.size))
    X2 = np.broadcast_to(x[None, :], (x.size, x.size))
    k_far = np.zeros((x.size, x.size))
    m = near.far_mask
    k_far[m] = kfunc(X1[m], X2[m])
    k_near = kfunc(near.s, near.t)
    return k_far, k_near


def singular_form_element(mesh, basis, m, n, near=None):
    """Single entry of singular_form_matrix (test / inspection hook)."""
    return singular_form_matrix(mesh, basis, near)[m, n]


def smooth_form_element(mesh, basis, kfunc, m, n, near=None):
    """Single entry of the smooth-kernel Galerkin matrix."""
    if near is None:
        near = near_pairs(mesh)
    k_far, k_near = eval_kernel(mesh, near, kfunc)
    return smooth_form_matrix(mesh, basis, k_far, k_near, near)[m, n]
