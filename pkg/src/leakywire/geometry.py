"""Arc-length parametrized curves in R^3, hiatus domains, and offset families.

All curves are parametrized by arc length s in [0, L] with |dgamma/ds| = 1.
Curves are immutable after construction; every method is a pure function and
safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class GeometryError(ValueError):
    pass


class NormalFieldError(GeometryError):
    """Raised when a curve has no usable normal field at the requested point."""


def _unit(v):
    n = np.linalg.norm(v)
    if n == 0:
        raise GeometryError("zero vector cannot be normalized")
    return np.asarray(v, dtype=float) / n


class Curve:
    """Base class: arc-length parametrized curve gamma : [0, L] -> R^3."""

    length: float
    closed: bool
    label: str = "curve"

    def point(self, s):
        raise NotImplementedError

    def tangent(self, s):
        """Unit tangent, by default via central finite differences."""
        s = np.asarray(s, dtype=float)
        h = 1e-6 * max(self.length, 1.0)
        lo = np.clip(s - h, 0.0, self.length) if not self.closed else s - h
        hi = np.clip(s + h, 0.0, self.length) if not self.closed else s + h
        d = self.point(hi) - self.point(lo)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def normal(self, s):
        """Unit normal field used for offset constructions."""
        raise NormalFieldError(f"{self.label} provides no normal field")

    def _check_s(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < -1e-12) or np.any(s > self.length + 1e-12):
            raise GeometryError(
                f"arc length parameter outside [0, {self.length}]"
            )
        return s

    def eval_point(self, s):
        """point() with domain validation (raises outside [0, L])."""
        return self.point(self._check_s(s))

    def chord(self, s, t):
        """|gamma(s) - gamma(t)|, broadcasting over s and t."""
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        d = self.point(s) - self.point(t)
        return np.sqrt(np.sum(d * d, axis=-1))

    def param_distance(self, s, t):
        """|s - t| for open curves, the periodic minimum for loops."""
        u = np.abs(np.asarray(s, dtype=float) - np.asarray(t, dtype=float))
        if self.closed:
            return np.minimum(u, self.length - u)
        return u

    def unit_speed_error(self, n_samples=512):
        """max over a grid of ||gamma'(s)| - 1|, via finite differences."""
        L = self.length
        s = (np.arange(n_samples) + 0.5) * L / n_samples
        h = 1e-6 * L
        d = self.point(s + h) - self.point(s - h)
        speed = np.linalg.norm(d, axis=-1) / (2 * h)
        return float(np.max(np.abs(speed - 1.0)))


@dataclass(frozen=True)
class Segment(Curve):
    """Straight segment gamma(s) = origin + s * direction."""

    length: float
    origin: tuple = (0.0, 0.0, 0.0)
    direction: tuple = (1.0, 0.0, 0.0)
    normal_vector: tuple = (0.0, 0.0, 1.0)
    closed: bool = field(default=False, init=False)
    label: str = "segment"

    def __post_init__(self):
        if self.length <= 0:
            raise GeometryError("segment length must be positive")
        d = _unit(self.direction)
        n = np.asarray(self.normal_vector, dtype=float)
        n = n - np.dot(n, d) * d
        if np.linalg.norm(n) < 1e-12:
            raise GeometryError("normal_vector parallel to direction")
        object.__setattr__(self, "direction", tuple(d))
        object.__setattr__(self, "normal_vector", tuple(_unit(n)))
        object.__setattr__(self, "origin", tuple(np.asarray(self.origin, float)))

    def point(self, s):
        s = np.asarray(s, dtype=float)
        return np.asarray(self.origin) + s[..., None] * np.asarray(self.direction)

    def tangent(self, s):
        s = np.asarray(s, dtype=float)
        return np.broadcast_to(np.asarray(self.direction), s.shape + (3,)).copy()

    def normal(self, s):
        s = np.asarray(s, dtype=float)
        return np.broadcast_to(np.asarray(self.normal_vector), s.shape + (3,)).copy()

    def chord(self, s, t):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        return np.abs(s - t)


@dataclass(frozen=True)
class CircleLoop(Curve):
    """Planar circle of circumference L, radius L / 2 pi."""

    length: float
    center: tuple = (0.0, 0.0, 0.0)
    closed: bool = field(default=True, init=False)
    label: str = "circle"

    def __post_init__(self):
        if self.length <= 0:
            raise GeometryError("circle length must be positive")

    @property
    def radius(self):
        return self.length / (2 * np.pi)

    def point(self, s):
        s = np.asarray(s, dtype=float)
        th = 2 * np.pi * s / self.length
        r = self.radius
        c = np.asarray(self.center)
        out = np.empty(s.shape + (3,))
        out[..., 0] = c[0] + r * np.cos(th)
        out[..., 1] = c[1] + r * np.sin(th)
        out[..., 2] = c[2]
        return out

    def tangent(self, s):
        s = np.asarray(s, dtype=float)
        th = 2 * np.pi * s / self.length
        out = np.empty(s.shape + (3,))
        out[..., 0] = -np.sin(th)
        out[..., 1] = np.cos(th)
        out[..., 2] = 0.0
        return out

    def normal(self, s):
        """Outward radial normal (offsets with d > 0 enlarge the radius)."""
        s = np.asarray(s, dtype=float)
        th = 2 * np.pi * s / self.length
        out = np.empty(s.shape + (3,))
        out[..., 0] = np.cos(th)
        out[..., 1] = np.sin(th)
        out[..., 2] = 0.0
        return out

    def chord(self, s, t):
        # closed form: 2 r sin(pi |s-t| / L) = (L/pi) sin(pi |s-t| / L)
        u = np.abs(np.asarray(s, dtype=float) - np.asarray(t, dtype=float))
        return (self.length / np.pi) * np.abs(np.sin(np.pi * u / self.length))


@dataclass(frozen=True)
class CircularArc(Curve):
    """Open circular arc of given radius and opening angle (< 2 pi)."""

    radius: float
    angle: float
    closed: bool = field(default=False, init=False)
    label: str = "arc"

    def __post_init__(self):
        if self.radius <= 0 or not (0 < self.angle < 2 * np.pi):
            raise GeometryError("arc needs radius > 0 and angle in (0, 2 pi)")

    @property
    def length(self):
        return self.radius * self.angle

    def point(self, s):
        s = np.asarray(s, dtype=float)
        th = s / self.radius
        out = np.empty(s.shape + (3,))
        out[..., 0] = self.radius * np.cos(th)
        out[..., 1] = self.radius * np.sin(th)
        out[..., 2] = 0.0
        return out

    def tangent(self, s):
        s = np.asarray(s, dtype=float)
        th = s / self.radius
        out = np.empty(s.shape + (3,))
        out[..., 0] = -np.sin(th)
        out[..., 1] = np.cos(th)
        out[..., 2] = 0.0
        return out

    def normal(self, s):
        s = np.asarray(s, dtype=float)
        th = s / self.radius
        out = np.empty(s.shape + (3,))
        out[..., 0] = np.cos(th)
        out[..., 1] = np.sin(th)
        out[..., 2] = 0.0
        return out

    def chord(self, s, t):
        u = np.abs(np.asarray(s, dtype=float) - np.asarray(t, dtype=float))
        return 2 * self.radius * np.abs(np.sin(u / (2 * self.radius)))


class FourierLoop(Curve):
    """Closed curve given by finite trigonometric series per coordinate.

    gamma_i(s) = a0[i] + sum_k ( ac[i][k] cos(2 pi (k+1) s / L)
                               + as[i][k] sin(2 pi (k+1) s / L) )

    Coefficients are accepted as-is; curves whose parametrization deviates
    from unit speed by more than `speed_tol` on a sample grid are rejected
    rather than reparametrized.
    """

    closed = True
    label = "fourier-loop"

    def __init__(self, length, a0, cos_coeffs, sin_coeffs, speed_tol=1e-6,
                 frame_grid=2048):
        if length <= 0:
            raise GeometryError("loop length must be positive")
        self.length = float(length)
        self.a0 = np.asarray(a0, dtype=float).reshape(3)
        self.ac = [np.asarray(c, dtype=float) for c in cos_coeffs]
        self.asin = [np.asarray(c, dtype=float) for c in sin_coeffs]
        if len(self.ac) != 3 or len(self.asin) != 3:
            raise GeometryError("need cos/sin coefficient lists per coordinate")
        self.speed_tol = float(speed_tol)
        err = self.unit_speed_error()
        if err > self.speed_tol:
            raise GeometryError(
                f"fourier loop is not unit-speed: max ||gamma'|-1| = {err:.3e} "
                f"exceeds tolerance {self.speed_tol:.1e}"
            )
        self._frame_grid = int(frame_grid)
        self._rmf = None

    def point(self, s):
        s = np.asarray(s, dtype=float)
        w = 2 * np.pi / self.length
        out = np.empty(s.shape + (3,))
        for i in range(3):
            acc = np.full(s.shape, self.a0[i])
            for k, c in enumerate(self.ac[i]):
                acc = acc + c * np.cos(w * (k + 1) * s)
            for k, c in enumerate(self.asin[i]):
                acc = acc + c * np.sin(w * (k + 1) * s)
            out[..., i] = acc
        return out

    def tangent(self, s):
        s = np.asarray(s, dtype=float)
        w = 2 * np.pi / self.length
        out = np.empty(s.shape + (3,))
        for i in range(3):
            acc = np.zeros(s.shape)
            for k, c in enumerate(self.ac[i]):
                acc = acc - c * w * (k + 1) * np.sin(w * (k + 1) * s)
            for k, c in enumerate(self.asin[i]):
                acc = acc + c * w * (k + 1) * np.cos(w * (k + 1) * s)
            out[..., i] = acc
        return out / np.linalg.norm(out, axis=-1, keepdims=True)

    def _rotation_minimizing_frame(self):
        """Normal field by double-reflection marching on a fixed fine grid."""
        if self._rmf is not None:
            return self._rmf
        n = self._frame_grid
        sg = np.linspace(0.0, self.length, n + 1)
        pts = self.point(sg)
        tans = self.tangent(sg)
        # seed normal: any unit vector orthogonal to t(0)
        t0 = tans[0]
        seed = np.array([0.0, 0.0, 1.0])
        if abs(np.dot(seed, t0)) > 0.9:
            seed = np.array([0.0, 1.0, 0.0])
        r = _unit(seed - np.dot(seed, t0) * t0)
        normals = np.empty_like(pts)
        normals[0] = r
        for i in range(n):
            v1 = pts[i + 1] - pts[i]
            c1 = np.dot(v1, v1)
            rl = normals[i] - (2.0 / c1) * np.dot(v1, normals[i]) * v1
            tl = tans[i] - (2.0 / c1) * np.dot(v1, tans[i]) * v1
            v2 = tans[i + 1] - tl
            c2 = np.dot(v2, v2)
            if c2 < 1e-30:
                normals[i + 1] = rl
            else:
                normals[i + 1] = rl - (2.0 / c2) * np.dot(v2, rl) * v2
            normals[i + 1] = _unit(
                normals[i + 1]
                - np.dot(normals[i + 1], tans[i + 1]) * tans[i + 1]
            )
        self._rmf = (sg, normals)
        return self._rmf

    def normal(self, s):
        sg, normals = self._rotation_minimizing_frame()
        s = np.asarray(s, dtype=float)
        out = np.empty(s.shape + (3,))
        for i in range(3):
            out[..., i] = np.interp(s, sg, normals[:, i])
        nrm = np.linalg.norm(out, axis=-1, keepdims=True)
        out = out / nrm
        t = self.tangent(s)
        out = out - np.sum(out * t, axis=-1, keepdims=True) * t
        return out / np.linalg.norm(out, axis=-1, keepdims=True)


def circle_as_fourier(length):
    """FourierLoop holding exactly the circle harmonics (for cross-checks)."""
    r = length / (2 * np.pi)
    return FourierLoop(
        length,
        a0=(0.0, 0.0, 0.0),
        cos_coeffs=([r], [0.0], []),
        sin_coeffs=([0.0], [r], []),
    )


# ---------------------------------------------------------------------------
# regularity witness (assumption on chord vs parameter distance)

@dataclass(frozen=True)
class RegularityWitness:
    """Constants (c, mu) in |gamma(s)-gamma(t)| >= |s-t| (1 - c |s-t|^mu)."""

    c: float
    mu: float

    def __post_init__(self):
        if self.c <= 0 or self.mu <= 1:
            raise GeometryError("witness requires c > 0 and mu > 1")


def circle_witness(length):
    """Witness (pi^2 / 6 L^2, 2), valid since sin x >= x - x^3/6."""
    return RegularityWitness(c=np.pi**2 / (6 * length**2), mu=2.0)


@dataclass
class RegularityReport:
    passed: bool
    worst_margin: float
    worst_pair: tuple
    violations: list


def _cheb_grid(a, b, n):
    """Chebyshev-spaced deterministic sample grid on [a, b]."""
    k = np.arange(n)
    x = np.cos(np.pi * (2 * k + 1) / (2 * n))
    return 0.5 * (a + b) + 0.5 * (b - a) * x[::-1]


def validate_regularity(curve, witness, sample_count=200, cyclic_shifts=4):
    """Check the chord lower bound on a deterministic Chebyshev grid.

    margin(s, t) = chord(s,t) - |s-t| (1 - c |s-t|^mu), evaluated wherever
    c |s-t|^mu < 1.  For loops the check is repeated for a fixed set of
    cyclic parameter shifts.
    """
    if sample_count < 100:
        raise GeometryError("sample_count must be at least 100")
    L = curve.length
    shifts = [0.0]
    if curve.closed and cyclic_shifts > 0:
        shifts = [L * k / cyclic_shifts for k in range(cyclic_shifts)]
    worst = np.inf
    worst_pair = (0.0, 0.0)
    violations = []
    grid = _cheb_grid(0.0, L, sample_count)
    for shift in shifts:
        s = grid[:, None]
        t = grid[None, :]
        if curve.closed:
            ss = np.mod(grid + shift, L)
            chord = curve.chord(ss[:, None], ss[None, :])
        else:
            chord = curve.chord(s, t)
        u = np.abs(s - t)
        mask = (witness.c * u**witness.mu < 1.0) & (u > 0)
        bound = u * (1.0 - witness.c * u**witness.mu)
        margin = np.where(mask, chord - bound, np.inf)
        idx = np.unravel_index(np.argmin(margin), margin.shape)
        if margin[idx] < worst:
            worst = float(margin[idx])
            worst_pair = (float(grid[idx[0]]), float(grid[idx[1]]))
        bad = np.argwhere(margin < -1e-12)
        for i, j in bad[:20]:
            violations.append((float(grid[i]), float(grid[j]),
                               float(margin[i, j])))
    return RegularityReport(
        passed=len(violations) == 0,
        worst_margin=worst,
        worst_pair=worst_pair,
        violations=violations,
    )


# ---------------------------------------------------------------------------
# hiatus

@dataclass(frozen=True)
class HiatusCurve:
    """A curve with the sub-arc (s0 - epsilon, s0 + epsilon) removed."""

    base: Curve
    s0: float
    epsilon: float

    def __post_init__(self):
        L = self.base.length
        if not (0 < self.s0 < L):
            raise GeometryError("s0 must lie strictly inside (0, L)")
        if self.epsilon <= 0:
            raise GeometryError("epsilon must be positive")
        if not self.base.closed:
            if self.s0 - self.epsilon <= 0 or self.s0 + self.epsilon >= L:
                raise GeometryError("gap must stay strictly inside the curve")
        elif 2 * self.epsilon >= L:
            raise GeometryError("gap longer than the loop")

    @property
    def components(self):
        """Sub-intervals of [0, L] carrying the interaction."""
        g1, g2 = self.s0 - self.epsilon, self.s0 + self.epsilon
        if self.base.closed:
            return ((g2, self.base.length + g1),)  # wraps through s = 0
        return ((0.0, g1), (self.s0 + self.epsilon, self.base.length))

    @property
    def total_length(self):
        return self.base.length - 2 * self.epsilon


# ---------------------------------------------------------------------------
# integration domains (shared by the operator assembly)

@dataclass(frozen=True)
class Domain:
    """Integration domain for the trace-space operator.

    ``intervals`` live in a working coordinate x; ``to_base`` maps x to the
    base arc-length parameter.  ``periodic`` marks a full loop (periodic hat
    basis); ``wrapped`` marks a loop-with-gap domain unwrapped into a single
    interval.
    """

    curve: Curve
    intervals: tuple
    periodic: bool = False
    wrapped: bool = False
    offset: float = 0.0
    gap: Optional[tuple] = None  # (g1, g2) in base coordinates

    @classmethod
    def from_curve(cls, curve):
        return cls(curve=curve, intervals=((0.0, curve.length),),
                   periodic=curve.closed)

    @classmethod
    def from_hiatus(cls, hc: HiatusCurve):
        g1, g2 = hc.s0 - hc.epsilon, hc.s0 + hc.epsilon
        if hc.base.closed:
            return cls(curve=hc.base,
                       intervals=((0.0, hc.total_length),),
                       wrapped=True, offset=g2, gap=(g1, g2))
        return cls(curve=hc.base,
                   intervals=((0.0, g1), (g2, hc.base.length)),
                   gap=(g1, g2))

    @property
    def total_length(self):
        return sum(b - a for a, b in self.intervals)

    def to_base(self, x):
        x = np.asarray(x, dtype=float)
        if self.wrapped:
            return np.mod(x + self.offset, self.curve.length)
        return x

    def from_base(self, s):
        """Inverse of to_base; s must lie in the interaction support."""
        s = np.asarray(s, dtype=float)
        if self.wrapped:
            return np.mod(s - self.offset, self.curve.length)
        return s

    def splitting_distance(self, x1, x2):
        """Comparison distance whose reciprocal is split off as singular.

        |x1 - x2| on open curves; the chord of a reference circle of the same
        length, (L/pi) sin(pi |s1-s2| / L), on loops (smooth and seam-free).
        """
        u = np.abs(np.asarray(x1, dtype=float) - np.asarray(x2, dtype=float))
        if self.curve.closed:
            L = self.curve.length
            return (L / np.pi) * np.abs(np.sin(np.pi * u / L))
        return u

    def component_of(self, x):
        for k, (a, b) in enumerate(self.intervals):
            if a < x < b:
                return k
        raise GeometryError(f"point {x} is not interior to any component")


# ---------------------------------------------------------------------------
# comparison families for the logarithmic regularization

@dataclass(frozen=True)
class ParallelOffset:
    """Offset family gamma_d(s) = gamma(s) + d n(s) along a unit normal field.

    Satisfies |gamma(s) - gamma_d(s)| = d exactly; for the built-in curves the
    offset direction is orthogonal to the offset tangent up to O(d).
    """

    kind: str = field(default="parallel", init=False)

    def point(self, curve, s, d, s_anchor=None):
        if d <= 0:
            raise GeometryError("offset distance must be positive")
        return curve.point(np.asarray(s, float)) + d * curve.normal(s)

    def jacobian(self, curve, t, d, s_anchor=None):
        # arc-length family: treated as unit-speed (deviation is O(d))
        return np.ones_like(np.asarray(t, dtype=float))


def _bump(x):
    """C^2 bump w with w(0) = 1 and support [-1, 1]."""
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1.0
    return np.where(inside, (1.0 - np.clip(x, -1, 1) ** 2) ** 3, 0.0)


def _bump_prime(x):
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 1.0
    xc = np.clip(x, -1, 1)
    return np.where(inside, -6.0 * xc * (1.0 - xc**2) ** 2, 0.0)


@dataclass(frozen=True)
class Recess:
    """Localized dent: gamma~_d(t) = gamma(t) + d w((t - s*) / rho) n(t).

    The bump half-width rho is held fixed (independent of d) so that the
    tangent perturbation is O(d) uniformly, as the alternative-regularization
    hypotheses require.
    """

    rho: float = 0.0  # 0 means "choose from the curve length at call time"
    kind: str = field(default="recess", init=False)

    def _rho(self, curve):
        return self.rho if self.rho > 0 else 0.05 * curve.length

    def point(self, curve, t, d, s_anchor):
        if d <= 0:
            raise GeometryError("offset distance must be positive")
        t = np.asarray(t, dtype=float)
        rho = self._rho(curve)
        w = _bump((t - s_anchor) / rho)
        return curve.point(t) + d * w[..., None] * curve.normal(t)

    def jacobian(self, curve, t, d, s_anchor):
        """|d gamma~_d / dt| via finite differences of the family map."""
        t = np.asarray(t, dtype=float)
        h = 1e-6 * curve.length
        p_hi = self.point(curve, t + h, d, s_anchor)
        p_lo = self.point(curve, t - h, d, s_anchor)
        return np.linalg.norm(p_hi - p_lo, axis=-1) / (2 * h)


def offset_point(family, curve, s, d, s_anchor=None):
    """gamma_d(s) (parallel family) or gamma~_{d,s*}(s) (recess family)."""
    if family.kind == "recess" and s_anchor is None:
        raise GeometryError("recess family needs an anchor point s*")
    return family.point(curve, s, d, s_anchor)
