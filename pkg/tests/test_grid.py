import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from speclab import grid as gp
from speclab.errors import DomainError, PotentialError


def test_grid_nodes_symmetric_and_spanning():
    g = gp.make_grid(3.0, 61)
    x = g.nodes
    assert x[0] == -3.0 and x[-1] == 3.0
    assert np.array_equal(x, -x[::-1])
    assert x[g.center_index] == 0.0
    assert g.h == pytest.approx(0.1)
    assert g.index_of(0.0) == g.center_index


@pytest.mark.parametrize("L,n", [(0.0, 11), (-1.0, 11), (1.0, 10), (1.0, 1), (math.inf, 11)])
def test_grid_rejects_bad_shapes(L, n):
    with pytest.raises(DomainError):
        gp.Grid(L, n)


def test_refined_halves_spacing():
    g = gp.make_grid(2.0, 21)
    assert g.refined().h == pytest.approx(g.h / 2)
    assert np.allclose(g.refined().nodes[::2], g.nodes)


def test_agmon_padding_value():
    # 10 e^{-2r+2} = 1e-12  <=>  r = 1 + ln(1e13)/2
    assert gp.agmon_padding() == pytest.approx(1 + 0.5 * math.log(1e13))
    assert gp.agmon_padding() == pytest.approx(15.9668, abs=1e-4)


def test_choose_truncation_harmonic():
    L = gp.choose_truncation(gp.harmonic(), 100.0)
    assert L == pytest.approx(math.sqrt(102.0) + gp.agmon_padding(), rel=1e-12)


def test_choose_truncation_needs_level_above_floor():
    with pytest.raises(DomainError):
        gp.choose_truncation(gp.power(1.0, 2.0), 0.5)  # lower weight is 1 at 0


def test_auto_grid_is_odd_and_fine():
    g = gp.auto_grid(gp.harmonic(), 400.0)
    assert g.n % 2 == 1
    assert g.h <= 2 * math.pi / (40 * 20) + 1e-15


def test_weight_inverse_power():
    assert gp.weight_inverse(lambda t: t ** 2, 9.0) == pytest.approx(3.0, rel=1e-14)
    assert gp.weight_inverse(lambda t: 1 + t, 0.5) == 0.0


def test_weight_inverse_nonconfining():
    with pytest.raises(DomainError, match="does not confine"):
        gp.weight_inverse(lambda t: np.minimum(t, 5.0), 10.0)


def test_sample_potential_nan_names_node():
    g = gp.make_grid(1.0, 11)
    bad = gp.PotentialSpec("bad", lambda x: np.where(x > 0.5, np.nan, x * x),
                           lambda t: 0 * t, lambda t: t * t + 1)
    with pytest.raises(PotentialError) as ei:
        gp.sample_potential(bad, g)
    assert ei.value.index == 8
    assert "node 8" in str(ei.value)


def test_sample_potential_sandwich_violation():
    g = gp.make_grid(1.0, 11)
    bad = gp.PotentialSpec("bad", lambda x: x * x, lambda t: t * t + 0.5, lambda t: t * t + 1)
    with pytest.raises(PotentialError, match="below lower weight"):
        gp.sample_potential(bad, g)


@pytest.mark.parametrize("factory", [
    lambda: gp.harmonic(),
    lambda: gp.power(2.0, 1.5),
    lambda: gp.power_pair(1.0, 1.0, 2.0, 2.0, 0.5),
    lambda: gp.stretched_exp(1.0, 0.5, 2.0, 0.7, 0.5),
    lambda: gp.exp_log_power(1.0, 1.0, 2.0, 1.5, 1.5),
    lambda: gp.log_power(1.0, 1.0, 2.0, 2.0),
])
def test_catalog_sandwich_holds_on_grid(factory):
    spec = factory()
    g = gp.make_grid(30.0, 3001)
    v = gp.sample_potential(spec, g)
    assert np.all(np.isfinite(v))


def test_catalog_rejects_bad_parameters():
    with pytest.raises(DomainError):
        gp.power_pair(1.0, 2.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        gp.stretched_exp(1.0, 1.0, 1.0, 1.0, 1.5)
    with pytest.raises(DomainError):
        gp.log_power(1.0, 1.0, 1.0, 1.0, offset=0.0)


def test_power_pair_exponents():
    spec = gp.power_pair(1.0, 1.0, 3.0, 2.0)
    assert spec.beta1 == 1.0 and spec.beta2 == 2.0
    assert spec.kappa == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.0, 50.0), min_size=21, max_size=21))
def test_table_envelopes_sandwich(values):
    g = gp.make_grid(2.0, 21)
    spec = gp.table(values, g)
    v = gp.sample_potential(spec, g)
    t = np.abs(g.nodes)
    assert np.all(spec.lower(t) <= v + 1e-12)
    assert np.all(v <= spec.upper(t) + 1e-12)
    tt = np.linspace(0, 3, 50)
    assert np.all(np.diff(spec.lower(tt)) >= 0)
    assert np.all(np.diff(spec.upper(tt)) >= 0)
