"""Free-space Green kernel at negative energy and its regularized pieces.

Everything here is elementwise numpy; all functions accept scalars or
arrays and broadcast.  The spectral parameter is stored through kappa =
sqrt(-lambda) to avoid cancellation near lambda = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Domain

FOUR_PI = 4.0 * np.pi


class KernelDomainError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralParameter:
    """Negative energy lambda < 0, held as kappa = sqrt(-lambda) > 0."""

    kappa: float

    def __post_init__(self):
        if not (self.kappa > 0 and np.isfinite(self.kappa)):
            raise KernelDomainError("kappa must be positive and finite")

    @classmethod
    def from_lambda(cls, lam):
        if not (lam < 0):
            raise KernelDomainError("spectral parameter must satisfy lambda < 0")
        return cls(kappa=float(np.sqrt(-lam)))

    @property
    def lam(self):
        return -self.kappa**2


def green(kappa, rho):
    """Free Green kernel e^{-kappa rho} / (4 pi rho), rho > 0."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise KernelDomainError("green() requires rho > 0")
    return np.exp(-kappa * rho) / (FOUR_PI * rho)


def green_smooth(kappa, rho):
    """(e^{-kappa rho} - 1)/(4 pi rho), extended by -kappa/(4 pi) at rho=0.

    Always <= 0 and nondecreasing in lambda.  Uses expm1 so the diagonal
    limit is reached without cancellation.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise KernelDomainError("green_smooth() requires rho >= 0")
    safe = np.where(rho > 0, rho, 1.0)
    val = np.expm1(-kappa * safe) / (FOUR_PI * safe)
    return np.where(rho > 0, val, -kappa / FOUR_PI)


def green_dlambda(kappa, rho):
    """d/d(lambda) of the Green kernel: e^{-kappa rho} / (8 pi kappa)."""
    if not np.all(np.asarray(kappa) > 0):
        raise KernelDomainError("green_dlambda() requires kappa > 0")
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise KernelDomainError("green_dlambda() requires rho >= 0")
    return np.exp(-kappa * rho) / (8.0 * np.pi * kappa)


def green_diff(kappa_w, kappa_z, rho):
    """G_w(rho) - G_z(rho), continuous at rho = 0.

    The 1/(4 pi rho) parts cancel, leaving green_smooth(w) - green_smooth(z),
    which is bounded with diagonal value (kappa_z - kappa_w)/(4 pi).
    """
    return green_smooth(kappa_w, rho) - green_smooth(kappa_z, rho)


def remainder(curve, kappa, s, t):
    """R_lambda(s,t) = G_lambda(chord) - 1/(4 pi param_distance).

    Evaluated in the cancellation-free split
        green_smooth(kappa, chord) + (p - chord)/(4 pi chord p)
    so the near-diagonal values stay accurate.  For a straight segment the
    second term vanishes identically.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    chord = curve.chord(s, t)
    p = curve.param_distance(s, t)
    if np.any(p == 0):
        raise KernelDomainError("remainder() is undefined on the diagonal")
    return green_smooth(kappa, chord) + (p - chord) / (FOUR_PI * chord * p)


def splitting_remainder(domain: Domain, kappa, x1, x2):
    """G_lambda(chord) - 1/(4 pi p~) for the domain's splitting distance p~.

    p~ is |x1-x2| on open curves and the reference-circle chord on loops;
    the result is the bounded kernel integrated by smooth quadrature.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    s1, s2 = domain.to_base(x1), domain.to_base(x2)
    chord = domain.curve.chord(s1, s2)
    p = domain.splitting_distance(x1, x2)
    if np.any(p == 0):
        raise KernelDomainError("splitting_remainder() undefined on diagonal")
    return green_smooth(kappa, chord) + (p - chord) / (FOUR_PI * chord * p)


# ---------------------------------------------------------------------------
# diagonal logarithmic weight

def diagonal_log(intervals, s):
    """Regularized diagonal weight for an open multi-interval domain.

    For s inside component (a, b),
        Lambda(s) = (1/4pi) ln[4 (s-a)(b-s)]
                  + sum over other components (c, d) of the exact integral
                    (1/4pi) int_c^d dt/|s-t|,
    which is the d -> 0 limit of
        int dt / (4 pi sqrt((s-t)^2 + d^2)) + (1/2pi) ln d.
    """
    intervals = [(float(a), float(b)) for a, b in intervals]
    s = float(s)
    home = None
    for k, (a, b) in enumerate(intervals):
        if a < s < b:
            home = k
            break
    if home is None:
        raise KernelDomainError(
            f"diagonal_log: s={s} is not strictly inside a component"
        )
    a, b = intervals[home]
    val = np.log(4.0 * (s - a) * (b - s)) / FOUR_PI
    for k, (c, d) in enumerate(intervals):
        if k == home:
            continue
        if s < c:
            val += np.log((d - s) / (c - s)) / FOUR_PI
        elif s > d:
            val += np.log((s - c) / (s - d)) / FOUR_PI
        else:
            raise KernelDomainError("diagonal_log: overlapping components")
    return float(val)


def loop_diagonal_log(length):
    """Constant diagonal weight on a full loop with the smooth splitting.

    With the reference-circle splitting q(u) = (L/pi) sin(pi u / L) the
    weight is (1/2pi) ln(4L/pi); with the periodic-distance splitting it
    would be (1/2pi) ln L.  The two differ exactly by
    (1/4pi) int_0^L (1/q - 1/p) du = (1/2pi) ln(4/pi).
    """
    return np.log(4.0 * length / np.pi) / (2.0 * np.pi)


def periodic_diagonal_log(length):
    """Diagonal weight for the periodic-distance splitting (loops)."""
    return np.log(length) / (2.0 * np.pi)


def gap_loop_diagonal_log(length, domain_length, x):
    """Diagonal weight on a loop with a gap, unwrapped to x in (0, M).

    Derived by moving the open-interval weight (1/4pi) ln[4 x (M-x)] to the
    smooth splitting q(u) = (L/pi) sin(pi u/L):
        Lambda(x) = (1/4pi) ln[ 4 (2L/pi)^2 tan(pi x/2L) tan(pi (M-x)/2L) ].
    As M -> L this tends to the full-loop constant (1/2pi) ln(4L/pi).
    """
    L = float(length)
    M = float(domain_length)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or np.any(x >= M):
        raise KernelDomainError("gap_loop_diagonal_log: x outside (0, M)")
    c = 2.0 * L / np.pi
    val = np.log(4.0 * c * c * np.tan(np.pi * x / (2 * L))
                 * np.tan(np.pi * (M - x) / (2 * L))) / FOUR_PI
    return val if val.shape else float(val)


def domain_log_weight(domain: Domain, x):
    """Diagonal weight Lambda matching the domain's splitting distance."""
    L = domain.curve.length
    if domain.periodic:
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, loop_diagonal_log(L))
        return out if out.shape else float(out)
    if domain.wrapped:
        return gap_loop_diagonal_log(L, domain.total_length, x)
    x = np.asarray(x, dtype=float)
    if x.shape == ():
        return diagonal_log(domain.intervals, float(x))
    return np.array([diagonal_log(domain.intervals, xi) for xi in x.ravel()]
                    ).reshape(x.shape)
