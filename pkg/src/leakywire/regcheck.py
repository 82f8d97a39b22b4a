"""Numerical validation of the logarithmic regularization.

The trace operator is defined through the limit

    (Q_lambda f)(s) = lim_{d->0} [ int G_lambda(gamma(s) - gamma~_d(t))
                                   j_d(t) f(t) dt + (1/2pi) f(s) ln d ]

taken along a family of comparison curves gamma~_d (a uniform parallel
offset, or a localized recess anchored at s).  This module evaluates the
bracket at finite d, Richardson-extrapolates d -> 0, and compares against
the closed-form evaluation of Q_lambda; the limit must be independent of
the family, and the ln d counterterm coefficient must equal f(s)/2pi.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bs_operator import make_domain
from .geometry import ParallelOffset, Recess
from .kernels import (FOUR_PI, domain_log_weight, green,
                      splitting_remainder)
from .quadrature import _gauss_on


class RegularizationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Richardson extrapolation with observed-order verification

def richardson(d, v):
    """Extrapolate v(d) -> v(0) assuming v = v0 + a d^p, p estimated.

    ``d`` must be decreasing (roughly geometric); ``v`` may be a vector
    sequence (first axis matching d).  Returns (limit, err_est, order, ok);
    when the increment sequence does not contract, returns the last value
    with a conservative error bar and ok=False.
    """
    d = np.asarray(d, dtype=float)
    v = np.asarray(v, dtype=float)
    if len(d) < 3:
        raise RegularizationError("need at least 3 points to extrapolate")
    if np.any(np.diff(d) >= 0):
        raise RegularizationError("d grid must be strictly decreasing")
    inc = np.diff(v, axis=0)
    mags = np.array([np.linalg.norm(np.atleast_1d(i)) for i in inc])
    rho = np.exp(np.mean(np.log(d[1:] / d[:-1])))
    contracting = np.all(mags[1:] < mags[:-1] + 1e-300)
    last = v[-1]
    # floor below which increments are quadrature noise, not model error
    floor = 1e-10 * (1.0 + float(np.linalg.norm(np.atleast_1d(last))))
    if not contracting or mags[-1] == 0:
        order = float("nan") if mags[-1] else float("inf")
        return last, float(3 * mags[-1] + floor), order, mags[-1] == 0
    orders = np.log(mags[1:] / mags[:-1]) / np.log(rho)
    p = float(orders[-1])
    ok = 0.4 < p < 4.0 and (len(orders) < 2
                            or abs(orders[-1] - orders[-2]) < 0.5)
    if not ok:
        return last, float(3 * mags[-1] + floor), p, False
    factor = rho**p / (1.0 - rho**p)
    limit = last + inc[-1] * factor
    err = float(np.linalg.norm(np.atleast_1d(inc[-1])) * factor)
    # add the spread between orders as model error
    if len(orders) >= 2:
        alt = last + inc[-1] * (rho ** orders[-2] / (1 - rho ** orders[-2]))
        err += float(np.linalg.norm(np.atleast_1d(limit - alt)))
    return limit, float(3 * err + floor), p, True


# ---------------------------------------------------------------------------
# test-function dictionary

class DictFunction:
    """Named test function with known kink locations (for quadrature)."""

    def __init__(self, name, func, kinks=()):
        self.name = name
        self._func = func
        self.kinks = tuple(kinks)

    def __call__(self, x):
        return self._func(np.asarray(x, dtype=float))


def _hat(center, width):
    def f(x):
        return np.clip(1.0 - np.abs(x - center) / width, 0.0, None)
    return f


def dictionary(L):
    """Six test functions on (0, L): constant, two hats, three trig modes."""
    w1, w2 = L / 5.0, L / 7.0
    return [
        DictFunction("const", lambda x: np.ones_like(x)),
        DictFunction("hat_a", _hat(L / 3.0, w1),
                     kinks=(L / 3 - w1, L / 3, L / 3 + w1)),
        DictFunction("hat_b", _hat(0.7 * L, w2),
                     kinks=(0.7 * L - w2, 0.7 * L, 0.7 * L + w2)),
        DictFunction("cos1", lambda x: np.cos(2 * np.pi * x / L)),
        DictFunction("sin1", lambda x: np.sin(2 * np.pi * x / L)),
        DictFunction("cos2", lambda x: np.cos(4 * np.pi * x / L)),
    ]


# ---------------------------------------------------------------------------
# graded 1D rules

def _graded_stack(lo, hi, focus, scale, ratio=0.15):
    """Breakpoints in (lo, hi) geometrically accumulating at focus."""
    pts = []
    for sgn, end in ((-1.0, lo), (1.0, hi)):
        h = abs(end - focus)
        if h < 1e-300:
            continue
        t = h
        while t > scale:
            t *= ratio
            pts.append(focus + sgn * t)
    return pts


def _rule_on_intervals(intervals, base_panels, order, focus=None,
                       scale=1e-9, extra=()):
    """Composite Gauss rule; graded toward ``focus`` and any interval end."""
    xs, ws = [], []
    for (a, b) in intervals:
        bks = set(np.linspace(a, b, base_panels + 1))
        for e in extra:
            if a < e < b:
                bks.add(float(e))
        h = (b - a) / base_panels
        for end, sgn in ((a, 1.0), (b, -1.0)):
            t = h
            while t > 1e-9 * (b - a):
                t *= 0.15
                bks.add(end + sgn * t)
        if focus is not None and a < focus < b:
            for p in _graded_stack(a, b, focus, scale):
                if a < p < b:
                    bks.add(p)
            bks.add(float(focus))
        bks = np.array(sorted(bks))
        for i in range(len(bks) - 1):
            if bks[i + 1] - bks[i] < 1e-16 * (b - a):
                continue
            xg, wg = _gauss_on(bks[i], bks[i + 1], order)
            xs.append(xg)
            ws.append(wg)
    return np.concatenate(xs), np.concatenate(ws)


# ---------------------------------------------------------------------------
# direct closed-form application of the operator

def q_apply_direct(obj, kappa, f, s, base_panels=48, order=10):
    """(Q_lambda f)(s) by graded quadrature of the regularized closed form:
    difference quotient against the splitting distance, the diagonal log
    weight, and the bounded remainder kernel."""
    domain = make_domain(obj)
    x0 = float(domain.from_base(s))
    lo_ok = any(a < x0 < b for a, b in domain.intervals)
    if not lo_ok:
        raise RegularizationError(f"s={s} is not interior to the domain")
    fs = float(f(np.array([s]))[0])
    xg, wg = _rule_on_intervals(domain.intervals, base_panels, order,
                                focus=x0, scale=1e-10, extra=[
                                    domain.from_base(k) for k in
                                    getattr(f, "kinks", ())])
    tb = domain.to_base(xg)
    ft = f(tb)
    p = domain.splitting_distance(x0, xg)
    term1 = np.sum(wg * (ft - fs) / p) / FOUR_PI
    term2 = fs * float(domain_log_weight(domain, x0))
    rem = splitting_remainder(domain, kappa, np.full_like(xg, x0), xg)
    term3 = np.sum(wg * rem * ft)
    return float(term1 + term2 + term3)


# ---------------------------------------------------------------------------
# family evaluation at finite offset

@dataclass
class RegularizationRun:
    family: object
    f_name: str
    s: float
    d_grid: tuple
    values: tuple               # bracket value at each d
    extrapolated: float
    error_estimate: float
    observed_order: float
    converged: bool


def family_value(family, obj, kappa, f, s, d, base_panels=48, order=14):
    """The bracketed regularization expression at one finite offset d.

    ``obj`` may be a plain curve or a gapped (HiatusCurve) support; ``s``
    and the test function live in the base arc-length parameter.
    """
    if d <= 0:
        raise RegularizationError("offset d must be positive")
    domain = make_domain(obj)
    curve = domain.curve
    x0 = float(domain.from_base(s))
    xg, wg = _rule_on_intervals(domain.intervals, base_panels, order,
                                focus=x0, scale=0.25 * d,
                                extra=[float(domain.from_base(k)) for k in
                                       getattr(f, "kinks", ())])
    tb = domain.to_base(xg)
    anchor = s if isinstance(family, Recess) else None
    pts = family.point(curve, tb, d, anchor)
    jac = family.jacobian(curve, tb, d, anchor)
    rho = np.linalg.norm(curve.point(np.asarray([s])) - pts, axis=-1)
    val = np.sum(wg * green(kappa, rho) * jac * f(tb))
    fs = float(f(np.array([s]))[0])
    return float(val + fs * np.log(d) / (2 * np.pi))


def default_d_grid(L, n=6, d0=None, ratio=0.5):
    d0 = 1e-2 * L if d0 is None else d0
    return tuple(d0 * ratio**k for k in range(n))


def q_apply_via_family(family, obj, kappa, f, s, d_grid=None,
                       base_panels=48, order=14):
    """Evaluate the family bracket on the d grid and extrapolate d -> 0."""
    curve = obj
    L = make_domain(obj).curve.length
    d_grid = tuple(default_d_grid(L) if d_grid is None else d_grid)
    vals = np.array([family_value(family, curve, kappa, f, s, d,
                                  base_panels, order) for d in d_grid])
    lim, err, p, ok = richardson(np.array(d_grid), vals)
    return RegularizationRun(
        family=family, f_name=getattr(f, "name", "f"), s=float(s),
        d_grid=d_grid, values=tuple(vals), extrapolated=float(lim),
        error_estimate=err, observed_order=p, converged=ok)


def counterterm_coefficient(family, obj, kappa, f, s, d_grid=None,
                            base_panels=48, order=14):
    """Fit the raw (counterterm-free) values to a + b ln d.

    Returns (-b, f(s)/2pi): the coefficient the counterterm must cancel,
    and its predicted value.
    """
    L = make_domain(obj).curve.length
    d_grid = tuple(default_d_grid(L) if d_grid is None else d_grid)
    fs = float(f(np.array([s]))[0])
    raw = [family_value(family, obj, kappa, f, s, d, base_panels, order)
           - fs * np.log(d) / (2 * np.pi) for d in d_grid]
    A = np.column_stack([np.ones(len(d_grid)), np.log(d_grid)])
    coef, *_ = np.linalg.lstsq(A, np.array(raw), rcond=None)
    return float(-coef[1]), fs / (2 * np.pi)


# ---------------------------------------------------------------------------
# local cosine expansion of the offset distance

@dataclass
class CosineExpansionReport:
    quad_coeff_d: float         # fitted constant of the d u^2 term
    cubic_coeff: float          # fitted constant of the u^3 term
    max_model_residual: float   # remaining residual after the model fit
    ortho_coeff: float          # C in |iota(s,t)| <= C (s-t)^2 (per unit d)


def cosine_expansion_check(family, curve, s, d_grid=None, u_max=None,
                           n_u=24):
    """Verify |gamma(s) - gamma~_d(t)|^2 = (s-t)^2 (1 + O(d)) + d^2
    + O((s-t)^3) on a local (s-t, d) grid, and that the offset direction
    is orthogonal to the curve to second order at t = s."""
    L = curve.length
    d_grid = tuple(default_d_grid(L, n=4) if d_grid is None else d_grid)
    u_max = 0.05 * L if u_max is None else u_max
    u = np.linspace(-u_max, u_max, n_u + 1)
    u = u[np.abs(u) > 1e-12]
    t = s + u
    if not curve.closed:
        keep = (t > 0) & (t < L)
        u, t = u[keep], t[keep]
    g_s = curve.point(np.asarray([float(s)]))[0]
    rows, resid, iota_ratio = [], [], []
    for d in d_grid:
        anchor = s if isinstance(family, Recess) else None
        pts = family.point(curve, t, d, anchor)
        r2 = np.sum((g_s - pts) ** 2, axis=-1)
        res = r2 - u**2 - d**2
        for ui, ri in zip(u, res):
            rows.append((d * ui**2, ui**3))
            resid.append(ri)
        # orthogonality defect per unit d: ((gamma(s)-gamma(t)) . n(t))
        n_t = curve.normal(t)
        iota = np.sum((g_s - curve.point(t)) * n_t, axis=-1)
        iota_ratio.append(np.max(np.abs(iota) / u**2))
    A = np.array(rows)
    b = np.array(resid)
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    model = A @ coef
    scale = max(np.max(np.abs(b)), 1e-300)
    return CosineExpansionReport(
        quad_coeff_d=float(coef[0]),
        cubic_coeff=float(coef[1]),
        max_model_residual=float(np.max(np.abs(b - model))),
        ortho_coeff=float(max(iota_ratio)),
    )
