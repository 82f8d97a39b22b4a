"""Curve classes, comparison families, and integration domains."""

import numpy as np
import pytest

from leakywire.geometry import (CircleLoop, CircularArc, Domain, FourierLoop,
                                GeometryError, HiatusCurve, ParallelOffset,
                                Recess, Segment, circle_as_fourier,
                                circle_witness, offset_point,
                                validate_regularity)

RNG = np.random.default_rng(7)


class TestSegment:
    def test_points_and_chord(self):
        seg = Segment(length=3.0)
        s = np.array([0.0, 1.5, 3.0])
        pts = seg.point(s)
        assert np.allclose(pts[:, 0], s)
        assert np.allclose(pts[:, 1:], 0.0)
        assert seg.chord(0.5, 2.5) == pytest.approx(2.0)

    def test_unit_speed(self):
        seg = Segment(length=2.0, direction=(1.0, 2.0, 2.0))
        assert seg.unit_speed_error() < 1e-8

    def test_rejects_bad_input(self):
        with pytest.raises(GeometryError):
            Segment(length=-1.0)
        with pytest.raises(GeometryError):
            Segment(length=1.0, normal_vector=(1.0, 0.0, 0.0))


class TestCircle:
    def test_chord_formula(self):
        L = 5.0
        c = CircleLoop(length=L)
        s = RNG.uniform(0, L, 40)
        t = RNG.uniform(0, L, 40)
        # chord between arc-length parameters on a circle of radius L/2pi
        expected = (L / np.pi) * np.abs(np.sin(np.pi * (s - t) / L))
        direct = np.linalg.norm(c.point(s) - c.point(t), axis=-1)
        assert np.allclose(c.chord(s, t), expected, atol=1e-13)
        assert np.allclose(direct, expected, atol=1e-13)

    def test_closed_and_unit_speed(self):
        c = CircleLoop(length=2 * np.pi)
        assert c.closed
        assert c.unit_speed_error() < 1e-8
        assert np.allclose(c.point(np.array([0.0])),
                           c.point(np.array([2 * np.pi])), atol=1e-13)


class TestArc:
    def test_length_and_chord(self):
        a = CircularArc(radius=2.0, angle=1.5)
        assert a.length == pytest.approx(3.0)
        s, t = 0.3, 2.1
        direct = np.linalg.norm(a.point(np.array([s]))[0]
                                - a.point(np.array([t]))[0])
        assert a.chord(s, t) == pytest.approx(direct, abs=1e-13)


class TestFourierLoop:
    def test_circle_equivalence(self):
        L = 4.0
        fl = circle_as_fourier(L)
        c = CircleLoop(length=L)
        s = np.linspace(0, L, 33)
        # same loop up to a rigid placement; compare chord structure
        d_f = np.linalg.norm(fl.point(s)[:, None] - fl.point(s)[None, :],
                             axis=-1)
        d_c = np.linalg.norm(c.point(s)[:, None] - c.point(s)[None, :],
                             axis=-1)
        assert np.allclose(d_f, d_c, atol=1e-10)

    def test_rejects_non_unit_speed(self):
        # an ellipse-like loop is not parametrized by arc length
        with pytest.raises(GeometryError, match="unit-speed"):
            FourierLoop(2 * np.pi, (0, 0, 0),
                        ([1.3], [0.0], [0.0]), ([0.0], [1.0], [0.0]))

    def test_normal_field_is_orthonormal(self):
        fl = circle_as_fourier(3.0)
        s = np.linspace(0, 3.0, 50)
        n = fl.normal(s)
        t = fl.tangent(s)
        assert np.allclose(np.linalg.norm(n, axis=-1), 1.0, atol=1e-8)
        assert np.max(np.abs(np.sum(n * t, axis=-1))) < 1e-8


class TestRegularity:
    def test_circle_witness_passes(self):
        L = 2.0
        rep = validate_regularity(CircleLoop(length=L), circle_witness(L))
        assert rep.passed

    def test_tight_witness_fails(self):
        # halving c demands chord >= |s-t|(1 - c/2 |s-t|^2), which the
        # circle violates at small separations (sin x <= x - x^3/6 + ...)
        L = 2.0
        w = circle_witness(L)
        bad = type(w)(c=0.5 * w.c, mu=w.mu)
        rep = validate_regularity(CircleLoop(length=L), bad)
        assert not rep.passed


class TestParallelOffset:
    @pytest.mark.parametrize("curve", [
        Segment(length=2.0), CircleLoop(length=2.0),
        CircularArc(radius=1.0, angle=2.0)])
    def test_exact_distance(self, curve):
        fam = ParallelOffset()
        s = np.linspace(0.1, curve.length - 0.1, 17)
        for d in (1e-2, 1e-6):
            pts = fam.point(curve, s, d, None)
            dist = np.linalg.norm(curve.point(s) - pts, axis=-1)
            assert np.max(np.abs(dist - d)) < 1e-12 * max(d, 1.0)

    def test_tangent_orthogonality_rate(self):
        # (gamma(s) - gamma_d(s)) . gamma_d'(s) -> 0 at rate O(d)
        c = CircleLoop(length=2.0)
        fam = ParallelOffset()
        s = np.linspace(0, 2.0, 30)
        defects = []
        for d in (1e-2, 1e-3, 1e-4):
            pts = fam.point(c, s, d, None)
            h = 1e-6
            tang = (fam.point(c, s + h, d, None)
                    - fam.point(c, s - h, d, None)) / (2 * h)
            tang /= np.linalg.norm(tang, axis=-1, keepdims=True)
            defects.append(np.max(np.abs(
                np.sum((c.point(s) - pts) * tang, axis=-1))))
        assert defects[1] < 0.5 * defects[0]
        assert defects[2] < 0.5 * defects[1]

    def test_jacobian_is_one(self):
        seg = Segment(length=2.0)
        s = np.linspace(0.2, 1.8, 9)
        assert np.allclose(ParallelOffset().jacobian(seg, s, 1e-3, None), 1.0)


class TestRecess:
    def test_max_offset_at_anchor(self):
        c = CircleLoop(length=2.0)
        fam = Recess()
        s_star, d = 0.7, 1e-3
        t = np.linspace(0, 2.0, 801)
        gap = np.linalg.norm(fam.point(c, t, d, s_star) - c.point(t),
                             axis=-1)
        assert np.max(gap) == pytest.approx(d, rel=1e-10)
        at_anchor = np.linalg.norm(
            fam.point(c, np.array([s_star]), d, s_star)[0]
            - c.point(np.array([s_star]))[0])
        assert at_anchor == pytest.approx(d, rel=1e-12)

    def test_equals_curve_far_from_anchor(self):
        c = CircleLoop(length=2.0)
        fam = Recess()
        t = np.array([1.7])  # outside the bump support around 0.7
        assert np.allclose(fam.point(c, t, 1e-3, 0.7), c.point(t),
                           atol=1e-15)

    def test_jacobian_one_plus_O_d(self):
        c = CircleLoop(length=2.0)
        fam = Recess()
        t = np.linspace(0.6, 0.8, 41)
        devs = []
        for d in (1e-2, 1e-3, 1e-4):
            devs.append(np.max(np.abs(fam.jacobian(c, t, d, 0.7) - 1.0)))
        # max|j_d - 1| <= C d: fitted C stays bounded under d -> d/10
        assert devs[1] < 0.2 * devs[0]
        assert devs[2] < 0.2 * devs[1]

    def test_offset_point_wrapper(self):
        seg = Segment(length=2.0)
        p1 = offset_point(ParallelOffset(), seg, 0.5, 1e-3)
        assert np.allclose(
            p1, ParallelOffset().point(seg, np.array([0.5]), 1e-3, None)[0])


class TestHiatusCurve:
    def test_open_components(self):
        hc = HiatusCurve(base=Segment(length=10.0), s0=4.0, epsilon=0.5)
        assert hc.components == ((0.0, 3.5), (4.5, 10.0))
        assert hc.total_length == pytest.approx(9.0)

    def test_loop_component_wraps(self):
        hc = HiatusCurve(base=CircleLoop(length=10.0), s0=4.0, epsilon=0.5)
        (a, b), = hc.components
        assert (a, b) == (4.5, 13.5)

    def test_gap_must_fit(self):
        with pytest.raises(GeometryError):
            HiatusCurve(base=Segment(length=10.0), s0=0.3, epsilon=0.5)
        with pytest.raises(GeometryError):
            HiatusCurve(base=Segment(length=10.0), s0=4.0, epsilon=-0.1)


class TestDomain:
    def test_roundtrip_open(self):
        dom = Domain.from_curve(Segment(length=10.0))
        x = np.linspace(0.1, 9.9, 13)
        assert np.allclose(dom.from_base(dom.to_base(x)), x)

    def test_roundtrip_wrapped(self):
        hc = HiatusCurve(base=CircleLoop(length=10.0), s0=4.0, epsilon=0.5)
        dom = Domain.from_hiatus(hc)
        x = np.linspace(0.01, dom.intervals[-1][1] - 0.01, 13)
        assert np.allclose(dom.from_base(dom.to_base(x)), x)

    def test_splitting_distance_matches_chord_rate_on_loop(self):
        L = 6.0
        dom = Domain.from_curve(CircleLoop(length=L))
        x = np.linspace(0, L, 23)
        p = dom.splitting_distance(1.0, x)
        assert np.allclose(p, (L / np.pi)
                           * np.abs(np.sin(np.pi * (x - 1.0) / L)),
                           atol=1e-13)
