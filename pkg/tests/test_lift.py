import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from speclab import lift as lf
from speclab.errors import DomainError


def unit(rng, m):
    e = rng.standard_normal(m)
    return e / np.linalg.norm(e)


def test_symmetric_axis_is_mirrored():
    y = lf.symmetric_axis(1.0, 101)
    assert y[50] == 0.0 and y[0] == -1.0 and y[-1] == 1.0
    assert np.array_equal(y, -y[::-1])
    with pytest.raises(DomainError):
        lf.symmetric_axis(1.0, 100)
    with pytest.raises(DomainError):
        lf.symmetric_axis(0.0, 101)


def test_trace_and_neumann(ho_small, rng):
    e = unit(rng, ho_small.m)
    f = lf.lift(ho_small, e, 1.0, 201)
    assert np.allclose(f.values[:, f.center], ho_small.vectors @ e, atol=1e-14)
    assert np.max(np.abs(f.neumann_trace())) == 0.0
    assert f.evenness_defect() == 0.0


def test_parseval_linear_mode(ho_small, rng):
    for _ in range(20):
        f = lf.lift(ho_small, unit(rng, ho_small.m), 1.0, 201)
        assert not f.log_mode
        assert np.max(lf.slice_parseval(f)) <= 1e-8


def test_parseval_log_mode(ho400, rng):
    f = lf.lift(ho400, unit(rng, ho400.m), 2.0, 101)
    assert f.log_mode
    assert np.max(lf.slice_parseval(f)) <= 1e-8
    # log storage agrees with the direct sum where the latter is finite
    direct = lf._field_at(ho400, f.coeffs, f.y)
    scale = np.max(np.abs(direct), axis=0)
    assert np.max(np.abs(f.values - direct) / scale) < 1e-10


def test_residual_is_second_order(ho_small, rng):
    e = unit(rng, ho_small.m)
    res = [lf.pde_residual(lf.lift(ho_small, e, 1.0, n)).max_abs for n in (101, 201, 401)]
    rates = [math.log2(a / b) for a, b in zip(res, res[1:])]
    assert all(1.9 <= r <= 2.1 for r in rates), rates


def test_residual_matches_taylor_term(ho_small, rng):
    e = unit(rng, ho_small.m)
    r = lf.pde_residual(lf.lift(ho_small, e, 1.0, 401))
    assert r.max_abs == pytest.approx(r.taylor_prediction, rel=0.05)


def test_residual_refuses_overflow(ho400, rng):
    f = lf.lift(ho400, unit(rng, ho400.m), 40.0, 101)
    with pytest.raises(DomainError, match="overflows"):
        lf.pde_residual(f)


def test_wrong_coefficient_count(ho_small):
    with pytest.raises(DomainError, match="coefficients"):
        lf.lift(ho_small, np.ones(ho_small.m + 1), 1.0, 11)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(0, 8), y0=st.floats(-1, 1), w=st.floats(0.01, 1))
def test_cosh2_integral_matches_quadrature(a, y0, w):
    y1 = y0 + w
    ref = quad(lambda t: math.cosh(a * t) ** 2, y0, y1, epsabs=0, epsrel=1e-13)[0]
    assert lf.cosh2_integral(a, y0, y1) == pytest.approx(ref, rel=1e-11)


def test_slab_identity_and_bounds(ho400, rng):
    sub = ho400.truncate(50)
    f = lf.lift(sub, unit(rng, sub.m), 1.0, 201)
    for y0, y1 in [(-1, 1), (0, 1), (0.25, 0.5)]:
        s = lf.slab_norm_identities(f, y0, y1)
        assert s.identity_ok and s.bounds_ok
    with pytest.raises(DomainError):
        lf.slab_norm_identities(f, 0, 2)
