"""Green kernel, regularized remainders, and diagonal log weights."""

import numpy as np
import pytest
from scipy.integrate import quad

from leakywire.geometry import (CircleLoop, Domain, HiatusCurve, Segment)
from leakywire.kernels import (KernelDomainError, SpectralParameter,
                               diagonal_log, domain_log_weight,
                               gap_loop_diagonal_log, green, green_diff,
                               green_dlambda, green_smooth,
                               loop_diagonal_log, periodic_diagonal_log,
                               remainder, splitting_remainder)

RNG = np.random.default_rng(11)


class TestSpectralParameter:
    def test_roundtrip(self):
        sp = SpectralParameter.from_lambda(-4.0)
        assert sp.kappa == pytest.approx(2.0)
        assert sp.lam == pytest.approx(-4.0)

    def test_rejects_nonnegative_lambda(self):
        with pytest.raises(KernelDomainError):
            SpectralParameter.from_lambda(0.0)
        with pytest.raises(KernelDomainError):
            SpectralParameter(kappa=-1.0)


class TestGreen:
    def test_values(self):
        rho = np.array([0.5, 1.0, 2.0])
        assert np.allclose(green(1.5, rho),
                           np.exp(-1.5 * rho) / (4 * np.pi * rho))

    def test_rejects_diagonal(self):
        with pytest.raises(KernelDomainError):
            green(1.0, 0.0)

    def test_smooth_diagonal_limit(self):
        kappa = 0.7
        # green_smooth is continuous down to rho = 0 with value -kappa/4pi
        rho = np.array([1e-300, 1e-12, 1e-6, 0.0])
        vals = green_smooth(kappa, rho)
        assert np.all(np.isfinite(vals))
        assert np.allclose(vals, -kappa / (4 * np.pi), rtol=1e-5)
        assert vals[-1] == pytest.approx(-kappa / (4 * np.pi), abs=0)

    def test_smooth_plus_singular_is_green(self):
        rho = RNG.uniform(0.01, 3.0, 50)
        recon = green_smooth(1.2, rho) + 1.0 / (4 * np.pi * rho)
        assert np.allclose(recon, green(1.2, rho), rtol=1e-13)

    def test_dlambda_matches_finite_difference(self):
        lam, rho = -2.3, 0.8
        h = 1e-6
        kp = np.sqrt(-(lam + h))
        km = np.sqrt(-(lam - h))
        fd = (green(kp, rho) - green(km, rho)) / (2 * h)
        assert green_dlambda(np.sqrt(-lam), rho) == pytest.approx(
            fd, rel=1e-8)

    def test_dlambda_diagonal(self):
        kappa = 1.7
        assert green_dlambda(kappa, 0.0) == pytest.approx(
            1.0 / (8 * np.pi * kappa))

    def test_green_diff_continuous_at_zero(self):
        kw, kz = 0.9, 2.1
        assert green_diff(kw, kz, 0.0) == pytest.approx(
            (kz - kw) / (4 * np.pi))
        rho = 1e-9
        assert green_diff(kw, kz, rho) == pytest.approx(
            green(kw, rho) - green(kz, rho), rel=1e-6)


class TestRemainder:
    def test_segment_diagonal_limit(self):
        # on a straight segment chord = param distance, so the remainder
        # is green_smooth of |s-t|
        seg = Segment(length=4.0)
        kappa = 1.3
        s, t = 1.0, 1.0 + 1e-8
        assert remainder(seg, kappa, s, t) == pytest.approx(
            -kappa / (4 * np.pi), rel=1e-6)

    def test_circle_near_diagonal_bounded(self):
        c = CircleLoop(length=3.0)
        s = 1.0
        t = s + np.array([1e-2, 1e-5, 1e-8])
        vals = remainder(c, 2.0, s, t)
        assert np.all(np.isfinite(vals))
        # diagonal limit is -kappa/4pi (curvature correction is O(u))
        assert vals[-1] == pytest.approx(-2.0 / (4 * np.pi), rel=1e-4)

    def test_matches_naive_formula_away_from_diagonal(self):
        c = CircleLoop(length=3.0)
        s, t, kappa = 0.4, 1.9, 1.1
        chord = c.chord(s, t)
        p = c.param_distance(s, t)
        naive = green(kappa, chord) - 1.0 / (4 * np.pi * p)
        assert remainder(c, kappa, s, t) == pytest.approx(naive, rel=1e-12)

    def test_rejects_diagonal(self):
        with pytest.raises(KernelDomainError):
            remainder(Segment(length=1.0), 1.0, 0.5, 0.5)


class TestSplittingRemainder:
    def test_open_curve_equals_remainder(self):
        seg = Segment(length=4.0)
        dom = Domain.from_curve(seg)
        x1, x2 = 0.7, 2.9
        assert splitting_remainder(dom, 1.4, x1, x2) == pytest.approx(
            remainder(seg, 1.4, x1, x2), rel=1e-13)

    def test_loop_uses_circle_chord_rate(self):
        L = 3.0
        c = CircleLoop(length=L)
        dom = Domain.from_curve(c)
        x1, x2, kappa = 0.3, 2.2, 1.0
        q = (L / np.pi) * np.abs(np.sin(np.pi * (x1 - x2) / L))
        naive = green(kappa, c.chord(x1, x2)) - 1.0 / (4 * np.pi * q)
        assert splitting_remainder(dom, kappa, x1, x2) == pytest.approx(
            naive, rel=1e-12)


class TestDiagonalLog:
    def test_single_interval(self):
        # Lambda(s) = (1/4pi) ln[4 (s-a)(b-s)]
        val = diagonal_log([(0.0, 2.0)], 0.5)
        assert val == pytest.approx(np.log(4 * 0.5 * 1.5) / (4 * np.pi))

    def test_is_limit_of_thickened_integral(self):
        # int_a^b dt/(4 pi sqrt((s-t)^2+d^2)) + (1/2pi) ln d -> Lambda(s)
        a, b, s = 0.0, 2.0, 0.7
        target = diagonal_log([(a, b)], s)
        vals = []
        for d in (1e-4, 1e-6, 1e-8):
            integral = quad(
                lambda t: 1.0 / (4 * np.pi * np.hypot(s - t, d)),
                a, b, points=[s], limit=200)[0]
            vals.append(integral + np.log(d) / (2 * np.pi))
        errs = np.abs(np.array(vals) - target)
        assert errs[-1] < 1e-7
        assert errs[1] < 0.1 * errs[0]

    def test_two_components_add_smooth_integral(self):
        # the far component contributes the exact 1/|s-t| integral
        ivs = [(0.0, 1.0), (2.0, 3.5)]
        s = 0.4
        base = diagonal_log([(0.0, 1.0)], s)
        far = quad(lambda t: 1.0 / (4 * np.pi * (t - s)), 2.0, 3.5)[0]
        assert diagonal_log(ivs, s) == pytest.approx(base + far, rel=1e-12)

    def test_rejects_outside(self):
        with pytest.raises(KernelDomainError):
            diagonal_log([(0.0, 1.0)], 1.5)

    def test_loop_constants_differ_by_ln_4_over_pi(self):
        L = 5.0
        assert (loop_diagonal_log(L) - periodic_diagonal_log(L)
                == pytest.approx(np.log(4 / np.pi) / (2 * np.pi)))

    def test_gap_loop_tends_to_loop_constant(self):
        L = 5.0
        val = gap_loop_diagonal_log(L, L - 1e-9, L / 2)
        assert val == pytest.approx(loop_diagonal_log(L), abs=1e-8)

    def test_gap_loop_matches_thickened_integral(self):
        # oracle: Lambda(x) = lim_d [ int_0^M dt/(4 pi q~) + (1/2pi) ln d ]
        # where q~ = sqrt(q(x-t)^2 + d^2) and q is the circle chord rate
        L, eps = 5.0, 0.25
        M = L - 2 * eps
        x = 1.3
        q = lambda u: (L / np.pi) * np.abs(np.sin(np.pi * u / L))
        target = gap_loop_diagonal_log(L, M, x)
        vals = []
        for d in (1e-5, 1e-7):
            integral = quad(
                lambda t: 1.0 / (4 * np.pi * np.hypot(q(x - t), d)),
                0.0, M, points=[x], limit=400)[0]
            vals.append(integral + np.log(d) / (2 * np.pi))
        assert abs(vals[-1] - target) < 1e-6

    def test_domain_log_weight_dispatch(self):
        L = 5.0
        dom_loop = Domain.from_curve(CircleLoop(length=L))
        assert domain_log_weight(dom_loop, 1.0) == pytest.approx(
            loop_diagonal_log(L))
        hc = HiatusCurve(base=CircleLoop(length=L), s0=1.0, epsilon=0.25)
        dom_gap = Domain.from_hiatus(hc)
        x = 2.0
        assert domain_log_weight(dom_gap, x) == pytest.approx(
            gap_loop_diagonal_log(L, L - 0.5, x))
        dom_seg = Domain.from_curve(Segment(length=2.0))
        assert domain_log_weight(dom_seg, 0.5) == pytest.approx(
            diagonal_log([(0.0, 2.0)], 0.5))
