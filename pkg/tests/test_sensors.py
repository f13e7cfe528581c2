import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from speclab import sensors as ss
from speclab.errors import DomainError

pair = st.tuples(st.floats(-20, 20), st.floats(0, 5)).map(lambda t: (t[0], t[0] + t[1]))
sets = st.lists(pair, max_size=8).map(ss.SensorSet.from_intervals)


def test_from_intervals_merges_and_sorts():
    s = ss.SensorSet.from_intervals([(3, 4), (0, 1), (1, 2), (0.5, 1.5)])
    assert s.intervals == ((0.0, 2.0), (3.0, 4.0))
    assert s.measure == 3.0


def test_measure_in_cells():
    s = ss.SensorSet.from_intervals([(0, 1), (2, 3)])
    got = s.measure_in(np.array([-1.0, 0.5, 1.5]), np.array([0.5, 2.5, 10.0]))
    assert np.allclose(got, [0.5, 1.0, 1.0])


@settings(max_examples=60, deadline=None)
@given(sets, sets)
def test_inclusion_exclusion(a, b):
    lhs = a.union(b).measure + a.intersection(b).measure
    assert lhs == pytest.approx(a.measure + b.measure, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(sets, sets)
def test_intersection_is_subset(a, b):
    i = a.intersection(b)
    assert i.measure <= min(a.measure, b.measure) + 1e-9
    assert i.drop_null().issubset(a.union(b))


@settings(max_examples=60, deadline=None)
@given(sets, st.lists(st.floats(-30, 30), min_size=2, max_size=20))
def test_cumulative_is_monotone(a, xs):
    xs = np.sort(np.array(xs))
    c = a.cumulative(xs)
    assert np.all(np.diff(c) >= -1e-12)
    assert np.all(c <= a.measure + 1e-12)


def test_periodic_density():
    s = ss.periodic(1.0, 0.25, (-10, 10))
    assert s.measure == pytest.approx(5.0)
    with pytest.raises(DomainError):
        ss.periodic(1.0, 1.5, (0, 1))


def test_balls_radii():
    s = ss.balls(1.0, (-3, 3))
    # radius 2^-(1+|j|) around each integer j
    assert float(s.measure_in(1.5, 2.5)) == pytest.approx(2 * 2.0 ** -3)
    assert ss.balls(0.0, (-3, 3)).measure_in(-0.5, 0.5) == pytest.approx(0.5)


def test_random_thick_is_seeded():
    a = ss.random_thick(2.0, 0.3, 5, (-20, 20))
    b = ss.random_thick(2.0, 0.3, 5, (-20, 20))
    c = ss.random_thick(2.0, 0.3, 6, (-20, 20))
    assert a == b and a != c


def test_generate_dispatch():
    assert ss.generate("explicit", (-1, 1), intervals=[[0, 2]]).intervals == ((0.0, 1.0),)
    with pytest.raises(DomainError):
        ss.generate("nope", (-1, 1))


def test_direct_margin_exact_on_periodic():
    s = ss.periodic(1.0, 0.25, (-20, 20))
    rep = ss.is_thick_direct(s, ss.ThicknessParams(0, 0, 0.125, 1.0), np.linspace(-10, 10, 401))
    # windows of length 2 always contain exactly 0.5 of the set
    assert rep.passed
    assert rep.min_margin == pytest.approx(0.5 - 0.25)


def test_direct_fails_on_sparse_set():
    s = ss.explicit([[0, 0.01]])
    rep = ss.is_thick_direct(s, ss.ThicknessParams(0, 0, 0.1, 1.0), np.linspace(-5, 5, 11))
    assert not rep.passed


def test_thickness_params_validated():
    with pytest.raises(DomainError):
        ss.ThicknessParams(1.5, 0, 0.1, 1)
    with pytest.raises(DomainError):
        ss.ThicknessParams(0, 0, 1.0, 1)


def test_partition_points_shape():
    p = ss.partition_points(1.0, 0.5, 4)
    assert np.allclose(p.points, [0, 1, 4, 9, 16])
    with pytest.raises(DomainError):
        ss.partition_points(1.0, 1.0, 4)


@pytest.mark.parametrize("s", [-1.0, -0.5, 0.0, 0.25, 0.5, 0.75])
def test_overlap_multiplicity_bounded(s):
    assert ss.overlap_multiplicity(ss.partition_points(1.0, s, 201)) <= 64


@pytest.mark.parametrize("make,p,hw", [
    (lambda: ss.periodic(1, 0.25, (-60, 60)), ss.ThicknessParams(0, 0, 0.125, 1), 60),
    (lambda: ss.periodic(1, 0.25, (-60, 60)), ss.ThicknessParams(0.5, 0, 0.1, 1), 60),
    (lambda: ss.random_thick(2, 0.3, 7, (-60, 60)), ss.ThicknessParams(0, 0, 0.15, 2), 60),
    (lambda: ss.balls(1, (-25, 25)), ss.ThicknessParams(0, 1, 0.125, 1), 25),
])
def test_equivalence_both_directions(make, p, hw):
    rep = ss.check_equivalence(make(), p, hw)
    assert rep.direct.passed and rep.partition.passed and rep.back.passed


def test_equivalence_vacuous_when_not_thick():
    rep = ss.check_equivalence(ss.explicit([[0, 0.1]]), ss.ThicknessParams(0, 0, 0.1, 1), 20)
    assert not rep.direct.passed
    assert rep.consistent


def test_g_max_closed_form():
    # max over t of gamma^t t^N at t* = N / log(1/gamma)
    gamma, N = 0.5, 3.0
    t = np.linspace(1, 50, 200001)
    assert ss.g_max(gamma, N) == pytest.approx(np.max(gamma ** t * t ** N), rel=1e-6)


def test_s1_tau0_requires_linear_growth():
    assert ss.is_thick_s1(ss.explicit([[-5, 5]]), 0.0, 1.0, 1, 5).passed
    assert not ss.is_thick_s1(ss.explicit([[-5, 5]]), 0.0, 1.0, 1, 12).passed


def test_s1_positive_measure():
    rep = ss.is_thick_s1(ss.explicit([[0, 1]]), 0.5)
    assert rep.passed and rep.gamma > 0 and rep.D == pytest.approx(1.5)
    assert not ss.is_thick_s1(ss.SensorSet.empty(), 0.5).passed
