"""Eigenvalue perturbation by a short gap in the interaction support.

Removing the sub-arc (s0 - eps, s0 + eps) shifts a bound state lambda_L to

    lambda_j(eps) = lambda_L - s_j ( eps ln eps ) + o(eps ln eps),

where the slopes s_j are the eigenvalues of the matrix

    C_ij = phi_i(s0) phi_j(s0) * 16 kappa_L / g_ij,
    g_ij = /int/int e^{-kappa_L |gamma(s)-gamma(t)|} phi_i(s) phi_j(t) ds dt,

over a degenerate block {phi_i} at lambda_L.  Since eps ln eps < 0 and the
slopes are nonnegative for sign-definite members, the gap pushes
eigenvalues up (an effectively repulsive perturbation).
"""

from __future__ import annotations

import gc
from dataclasses import dataclass

import numpy as np

from .bs_operator import make_assembler
from .geometry import HiatusCurve
from .spectral import BoundState, SpectralError, default_bracket, \
    solve_bound_states


class HiatusError(RuntimeError):
    pass


def default_eps_grid(L, n=8, lo=1e-4, hi=1e-2):
    """Decreasing geometric grid from hi*L down to lo*L (n points)."""
    r = (lo / hi) ** (1.0 / (n - 1))
    return tuple(hi * L * r**k for k in range(n))


# ---------------------------------------------------------------------------
# prediction

@dataclass
class HiatusPrediction:
    lambda_L: float
    kappa_L: float
    s0: float
    block: tuple                # branch indices of the degenerate block
    phi_values: np.ndarray      # phi_i(s0)
    g: np.ndarray               # Gram-type exponential integrals
    omega: np.ndarray           # 16 kappa_L / g, entrywise
    C: np.ndarray
    slopes: np.ndarray          # eigenvalues of C, descending

    @property
    def simple_slope(self):
        return float(self.slopes[0])


def predict_slopes(state: BoundState, s0) -> HiatusPrediction:
    """Slope matrix C and its eigenvalues for one (possibly degenerate)
    bound state of the gap-free curve."""
    asm = state.assembler
    L = asm.domain.curve.length
    if not (0 < s0 < L):
        raise HiatusError("s0 must lie strictly inside (0, L)")
    if not asm.domain.curve.closed and not (0 < s0 < L):
        raise HiatusError("s0 at an endpoint")
    kap = state.kappa
    G = asm.exp_kernel_matrix(kap)
    g = state.coeffs.T @ G @ state.coeffs
    if np.any(np.diag(g) <= 0):
        raise HiatusError(
            f"Gram-type integral not positive: diag(g) = {np.diag(g)}")
    x0 = asm.domain.from_base(s0)
    E0 = asm.basis.eval_matrix(np.array([float(x0)]))
    phi0 = np.asarray(E0 @ state.coeffs).ravel()
    # members vanishing at s0 give exact zero rows/columns of C; snap
    # their roundoff-level values so 1/g_ij cannot amplify them when an
    # off-diagonal Gram integral is itself near zero (orthogonal members)
    phi0[np.abs(phi0) < 1e-8 * max(np.max(np.abs(phi0)), 1e-300)] = 0.0
    with np.errstate(divide="ignore"):
        omega = 16.0 * kap / g
    P = np.outer(phi0, phi0)
    C = np.where(P == 0.0, 0.0, P * omega)
    if not np.all(np.isfinite(C)):
        raise HiatusError("Gram-type integral vanishes for a member pair "
                          "with nonzero values at s0")
    C = 0.5 * (C + C.T)
    slopes = np.linalg.eigvalsh(C)[::-1]
    return HiatusPrediction(
        lambda_L=state.lam, kappa_L=kap, s0=float(s0),
        block=state.branches, phi_values=phi0, g=g, omega=omega, C=C,
        slopes=slopes)


# ---------------------------------------------------------------------------
# sweep

@dataclass
class SweepResult:
    s0: float
    eps_grid: tuple
    lambda_L: float
    lambdas: np.ndarray         # (n_eps, m) per tracked member; nan = broken
    overlaps: np.ndarray        # branch-matching overlaps, same shape
    prediction: HiatusPrediction
    alpha: float
    broken: tuple               # member indices that lost tracking

    @property
    def shifts(self):
        return self.lambdas - self.lambda_L


def _member_overlap(asm_eps, state_eps, member_eps, ref_state, ref_member):
    """L2 overlap of an eps-domain eigenfunction with a reference member
    of the gap-free spectrum, integrated over the gapped domain."""
    phi_eps = np.asarray(
        asm_eps.E @ state_eps.coeffs[:, member_eps]).ravel()
    ref_asm = ref_state.assembler
    x_ref = ref_asm.domain.from_base(asm_eps.base)
    phi_ref = ref_state.phi(x_ref, ref_member)
    return float(np.sum(asm_eps.w * phi_eps * phi_ref))


def sweep(curve, alpha, s0, eps_grid=None, n_panels=256, order=8,
          state_index=0, bracket=None, overlap_threshold=0.5,
          rel_tol=1e-10, reference=None):
    """lambda_j(eps) for every member of one tracked multiplet.

    The eps = 0 reference is solved on the same mesh family; branches at
    eps > 0 are matched to reference members by eigenfunction overlap.
    """
    L = curve.length
    if eps_grid is None:
        eps_grid = default_eps_grid(L)
    eps_grid = tuple(float(e) for e in eps_grid)
    if any(e <= 0 for e in eps_grid):
        raise HiatusError("eps grid must be positive (decreasing)")
    if max(eps_grid) > 0.02 * L + 1e-12:
        raise HiatusError("max eps exceeds 2% of the curve length")
    if reference is None:
        asm0 = make_assembler(curve, n_panels, order=order)
        states0 = solve_bound_states(asm0, alpha, bracket=bracket, s0=s0,
                                     rel_tol=rel_tol)
        if len(states0) <= state_index:
            raise HiatusError(
                f"gap-free curve has only {len(states0)} bound states; "
                f"cannot track state {state_index}")
        ref = states0[state_index]
    else:
        ref = reference
    pred = predict_slopes(ref, s0)
    m = ref.multiplicity
    n_branches = max(ref.branches) + 1
    lambdas = np.full((len(eps_grid), m), np.nan)
    overlaps = np.zeros((len(eps_grid), m))
    for ie, eps in enumerate(eps_grid):
        hc = HiatusCurve(base=curve, s0=s0, epsilon=eps)
        asm = make_assembler(hc, n_panels, order=order)
        try:
            states = solve_bound_states(asm, alpha, bracket=bracket,
                                        branch_count=n_branches + 1,
                                        rel_tol=rel_tol)
        except SpectralError:
            continue
        for st in states:
            for me in range(st.multiplicity):
                best, ov_best = None, 0.0
                for rm in range(m):
                    ov = abs(_member_overlap(asm, st, me, ref, rm))
                    if ov > ov_best:
                        best, ov_best = rm, ov
                if best is not None and ov_best > overlap_threshold \
                        and ov_best > overlaps[ie, best]:
                    lambdas[ie, best] = st.lam
                    overlaps[ie, best] = ov_best
        del states, asm
        gc.collect()
    broken = tuple(int(j) for j in range(m)
                   if np.any(np.isnan(lambdas[:, j])))
    return SweepResult(s0=float(s0), eps_grid=eps_grid,
                       lambda_L=ref.lam, lambdas=lambdas,
                       overlaps=overlaps, prediction=pred,
                       alpha=float(alpha), broken=broken)


# ---------------------------------------------------------------------------
# asymptotic fit

@dataclass
class AsymptoticFit:
    c1: float                   # coefficient of eps ln eps
    c2: float                   # coefficient of eps
    residual: float
    predicted_slope: float
    fitted_slope: float         # -c1
    relative_error: float


def fit_asymptotic(eps, shifts, predicted_slope=float("nan"),
                   cond_limit=1e8):
    """Least-squares fit shifts ~ c1 eps ln eps + c2 eps.

    The eps term absorbs the next-order contribution; without it the
    eps ln eps coefficient is biased at practical eps.  The fitted slope
    is -c1 (shifts are lambda(eps) - lambda_L).
    """
    eps = np.asarray(eps, dtype=float)
    shifts = np.asarray(shifts, dtype=float)
    keep = np.isfinite(shifts)
    eps, shifts = eps[keep], shifts[keep]
    if len(eps) < 6:
        raise HiatusError("need at least 6 usable grid points to fit")
    if np.log10(eps.max() / eps.min()) < 1.5:
        raise HiatusError("eps grid must span at least 1.5 decades")
    A = np.column_stack([eps * np.log(eps), eps])
    An = A / np.linalg.norm(A, axis=0)
    cond = np.linalg.cond(An)
    if cond > cond_limit:
        raise HiatusError(
            f"fit design matrix ill-conditioned (cond={cond:.2e}); "
            "widen the eps span")
    coef, res, *_ = np.linalg.lstsq(A, shifts, rcond=None)
    c1, c2 = float(coef[0]), float(coef[1])
    resid = float(np.linalg.norm(A @ coef - shifts))
    fitted = -c1
    rel = abs(fitted - predicted_slope) / abs(predicted_slope) \
        if predicted_slope == predicted_slope and predicted_slope != 0 \
        else float("nan")
    return AsymptoticFit(c1=c1, c2=c2, residual=resid,
                         predicted_slope=float(predicted_slope),
                         fitted_slope=fitted, relative_error=rel)


def fit_sweep(result: SweepResult):
    """One AsymptoticFit per tracked member, predictions matched by rank:
    members are ordered so that larger |phi(s0)| pairs with larger slope."""
    pred = result.prediction
    m = result.lambdas.shape[1]
    # canonical members: phi rotated so member 0 carries the s0 value
    order = np.argsort(-np.abs(pred.phi_values))
    slopes_sorted = np.sort(pred.slopes)[::-1]
    fits = [None] * m
    for rank, member in enumerate(order):
        fits[member] = fit_asymptotic(
            np.array(result.eps_grid), result.shifts[:, member],
            predicted_slope=float(slopes_sorted[rank]))
    return fits


# ---------------------------------------------------------------------------
# degenerate circle level

@dataclass
class DegenerateReport:
    prediction: HiatusPrediction
    fits: list
    node_member: int            # member with phi(s0) = 0 (zero prediction)
    anti_member: int
    node_to_anti_ratio: float   # |c1_node| / |c1_anti|


def degenerate_report(circle, alpha, s0, state_index=1, eps_grid=None,
                      n_panels=256, order=8, bracket=None, rel_tol=1e-10):
    """Sweep + fit for a twofold degenerate circle level.

    After the canonical rotation one member vanishes at s0; its fitted
    eps ln eps coefficient must be small relative to the other member's.
    """
    res = sweep(circle, alpha, s0, eps_grid=eps_grid, n_panels=n_panels,
                order=order, state_index=state_index, bracket=bracket,
                rel_tol=rel_tol)
    pred = res.prediction
    if len(pred.block) != 2:
        raise HiatusError(
            f"level {state_index} is not twofold degenerate "
            f"(multiplicity {len(pred.block)})")
    fits = fit_sweep(res)
    anti = int(np.argmax(np.abs(pred.phi_values)))
    node = 1 - anti
    ratio = abs(fits[node].c1) / max(abs(fits[anti].c1), 1e-300)
    return DegenerateReport(prediction=pred, fits=fits, node_member=node,
                            anti_member=anti, node_to_anti_ratio=ratio), res
