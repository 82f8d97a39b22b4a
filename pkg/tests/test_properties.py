"""Property-based checks for the numerical primitives."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from leakywire.geometry import CircleLoop, Domain, Segment
from leakywire.kernels import green, green_smooth
from leakywire.quadrature import build_mesh
from leakywire.regcheck import richardson

finite_pos = st.floats(min_value=1e-3, max_value=1e3,
                       allow_nan=False, allow_infinity=False)


@given(kappa=finite_pos, rho=finite_pos)
def test_green_positive_and_below_coulomb(kappa, rho):
    g = green(kappa, rho)
    # e^{-kappa rho} can underflow to exactly 0 for huge kappa rho
    assert 0 <= g <= 1.0 / (4 * np.pi * rho)


@given(k1=finite_pos, k2=finite_pos, rho=st.floats(min_value=0.0,
                                                   max_value=1e3))
def test_green_smooth_monotone_in_kappa(k1, k2, rho):
    # green_smooth decreases as kappa grows (lambda decreases)
    lo, hi = sorted((k1, k2))
    assert green_smooth(hi, rho) <= green_smooth(lo, rho) + 1e-15


@given(kappa=finite_pos, rho=finite_pos)
def test_green_split_reconstruction(kappa, rho):
    # absolute accuracy is set by the cancelling 1/(4 pi rho) terms
    recon = green_smooth(kappa, rho) + 1.0 / (4 * np.pi * rho)
    assert np.isclose(recon, green(kappa, rho), rtol=1e-12,
                      atol=1e-13 / rho)


@given(L=st.floats(min_value=0.5, max_value=50.0),
       n=st.integers(min_value=4, max_value=48),
       closed=st.booleans())
@settings(max_examples=30, deadline=None)
def test_mesh_weights_always_sum_to_length(L, n, closed):
    curve = CircleLoop(length=L) if closed else Segment(length=L)
    mesh = build_mesh(Domain.from_curve(curve), n, order=4)
    assert np.isclose(mesh.weights.sum(), L, rtol=1e-12)
    assert np.all(mesh.weights > 0)


@given(v0=st.floats(min_value=-10, max_value=10),
       a=st.floats(min_value=-5, max_value=5),
       p=st.floats(min_value=0.6, max_value=3.0))
@settings(max_examples=50, deadline=None)
def test_richardson_covers_true_limit(v0, a, p):
    d = 0.1 * 0.5 ** np.arange(6)
    v = v0 + a * d**p
    lim, err, order, ok = richardson(d, v)
    assert abs(lim - v0) <= err
    if abs(a) > 1e-6:
        assert ok
        assert np.isclose(order, p, atol=0.05)
