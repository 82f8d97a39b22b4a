"""Family-limit validation of the logarithmic regularization."""

import numpy as np
import pytest

from leakywire.geometry import (CircleLoop, HiatusCurve, ParallelOffset,
                                Recess, Segment)
from leakywire.regcheck import (RegularizationError, cosine_expansion_check,
                                counterterm_coefficient, default_d_grid,
                                dictionary, family_value, q_apply_direct,
                                q_apply_via_family, richardson)


class TestRichardson:
    def test_recovers_known_order(self):
        d = 0.1 * 0.5 ** np.arange(6)
        v = 3.0 + 2.0 * d**1.5
        lim, err, order, ok = richardson(d, v)
        assert ok
        assert lim == pytest.approx(3.0, abs=1e-6)
        assert order == pytest.approx(1.5, abs=1e-6)
        assert abs(lim - 3.0) <= err

    def test_vector_sequences(self):
        d = 0.1 * 0.5 ** np.arange(6)
        v = np.column_stack([1.0 + d, 2.0 - 3 * d])
        lim, err, order, ok = richardson(d, v)
        assert ok
        assert np.allclose(lim, [1.0, 2.0], atol=1e-10)

    def test_constant_sequence_is_exact(self):
        d = 0.1 * 0.5 ** np.arange(4)
        v = np.full(4, 7.0)
        lim, err, order, ok = richardson(d, v)
        assert ok
        assert lim == 7.0
        assert err > 0  # noise floor, never an exactly zero bar

    def test_non_contracting_flagged(self):
        d = 0.1 * 0.5 ** np.arange(5)
        rng = np.random.default_rng(0)
        v = 1.0 + rng.normal(0, 1.0, 5)
        lim, err, order, ok = richardson(d, v)
        assert not ok

    def test_rejects_bad_grid(self):
        with pytest.raises(RegularizationError):
            richardson(np.array([0.1, 0.2, 0.05]), np.zeros(3))
        with pytest.raises(RegularizationError):
            richardson(np.array([0.1, 0.05]), np.zeros(2))


class TestDictionary:
    def test_six_functions_with_kinks(self):
        d = dictionary(2.0)
        assert len(d) == 6
        names = [f.name for f in d]
        assert "const" in names and "hat_a" in names
        hat = next(f for f in d if f.name == "hat_a")
        assert len(hat.kinks) == 3
        assert hat(np.array([2.0 / 3.0]))[0] == pytest.approx(1.0)


class TestDefaultDGrid:
    def test_geometric_decreasing(self):
        g = np.array(default_d_grid(2.0, n=5))
        assert g[0] == pytest.approx(0.02)
        assert np.allclose(g[1:] / g[:-1], 0.5)


@pytest.mark.parametrize("curve", [Segment(length=2.0),
                                   CircleLoop(length=2.0)])
@pytest.mark.parametrize("family", [ParallelOffset(), Recess()])
class TestFamilyLimit:
    def test_limit_matches_direct(self, curve, family):
        kappa = 1.0
        f = dictionary(curve.length)[3]  # cos1
        s = 0.4 * curve.length
        direct = q_apply_direct(curve, kappa, f, s)
        run = q_apply_via_family(family, curve, kappa, f, s,
                                 d_grid=default_d_grid(curve.length, n=8,
                                                       d0=5e-3 * curve.length))
        assert run.converged
        assert abs(run.extrapolated - direct) <= run.error_estimate

    def test_counterterm_coefficient(self, curve, family):
        kappa = 1.0
        f = dictionary(curve.length)[0]  # const
        s = 0.4 * curve.length
        dg = tuple(d * 0.1 for d in default_d_grid(curve.length, n=8,
                                                   d0=5e-3 * curve.length))
        got, pred = counterterm_coefficient(family, curve, kappa, f, s,
                                            d_grid=dg)
        assert pred == pytest.approx(1.0 / (2 * np.pi))
        assert got == pytest.approx(pred, rel=5e-2)


class TestFamilyValueGeometry:
    def test_cosine_expansion_parallel(self):
        rep = cosine_expansion_check(ParallelOffset(),
                                     CircleLoop(length=2.0), 0.5)
        assert rep.max_model_residual < 1e-4

    def test_gapped_domain_supported(self):
        # the bracket is well defined on a curve with a hiatus too
        hc = HiatusCurve(base=Segment(length=2.0), s0=1.0, epsilon=0.05)
        f = dictionary(2.0)[0]
        v = family_value(ParallelOffset(), hc, 1.0, f, 0.4, 1e-4)
        assert np.isfinite(v)
        run = q_apply_via_family(
            ParallelOffset(), hc, 1.0, f, 0.4,
            d_grid=default_d_grid(2.0, n=8, d0=5e-3 * 2.0))
        direct = q_apply_direct(hc, 1.0, f, 0.4)
        assert abs(run.extrapolated - direct) <= run.error_estimate

    def test_family_value_counterterm_scale(self):
        # halving d changes the bracket by about f(s) ln 2 / 2pi less the
        # integral change; at small d the total must be nearly d-free
        seg = Segment(length=2.0)
        f = dictionary(2.0)[0]
        v1 = family_value(ParallelOffset(), seg, 1.0, f, 0.7, 1e-5)
        v2 = family_value(ParallelOffset(), seg, 1.0, f, 0.7, 5e-6)
        assert abs(v1 - v2) < 1e-4
