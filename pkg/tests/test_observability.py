import math

import numpy as np
import pytest

from speclab import observability as ob
from speclab import sensors as ss
from speclab.errors import DomainError, UnobservableError


def box(sub):
    L = sub.grid.half_width
    return ss.SensorSet.from_intervals([(-L, L)])


def random_set(rng, L):
    k = int(rng.integers(1, 6))
    a = np.sort(rng.uniform(-L, L, 2 * k))
    return ss.SensorSet.from_intervals(zip(a[::2], a[1::2]))


def test_full_box_is_perfectly_observable(ho12):
    rep = ob.observability_constant(ho12, box(ho12))
    assert rep.c_obs == pytest.approx(1.0, abs=1e-9)


def test_half_line_single_mode(ho12):
    sub = ho12.truncate(1.5)
    rep = ob.observability_constant(sub, ss.SensorSet.from_intervals([(0, 12)]))
    assert rep.c_obs == pytest.approx(2.0, abs=1e-5)


def test_matches_svd_oracle(ho400):
    sub = ho400.truncate(100)
    om = ss.periodic(1.0, 0.25, (-sub.grid.half_width, sub.grid.half_width))
    rep = ob.observability_constant(sub, om)
    B = ob.restriction_gram(sub, om).factor
    smin = np.linalg.svd(B, compute_uv=False)[-1]
    assert rep.c_obs == pytest.approx(1 / smin ** 2, rel=1e-9)
    assert rep.certificate_error < 1e-9
    # first estimate from the tridiagonal route agrees with the refined one
    assert rep.gram_min_tridiagonal == pytest.approx(rep.gram_min, rel=1e-6)


def test_frozen_sweep_values(ho400):
    # frozen from an SVD oracle on the automatic grid
    om = ss.periodic(1.0, 0.25, (-ho400.grid.half_width, ho400.grid.half_width))
    got = [ob.observability_constant(ho400.truncate(l), om).c_obs for l in (25, 50)]
    assert got[0] == pytest.approx(40.07, rel=2e-3)
    assert got[1] == pytest.approx(358.2, rel=2e-3)


def test_gram_spectrum_in_unit_interval(ho400):
    rng = np.random.default_rng(0)
    L = ho400.grid.half_width
    for _ in range(100):
        sub = ho400.truncate(float(rng.uniform(1.5, 60)))
        G = ob.restriction_gram(sub, random_set(rng, L)).matrix
        lo, hi = ob.gram_extremes(G)
        assert -1e-9 <= lo and hi <= 1 + 1e-9
        w = np.linalg.eigvalsh(G)
        assert lo == pytest.approx(w[0], abs=1e-12) and hi == pytest.approx(w[-1], abs=1e-12)


def test_set_monotonicity(ho400):
    rng = np.random.default_rng(1)
    L = ho400.grid.half_width
    sub = ho400.truncate(30)
    for _ in range(50):
        small = random_set(rng, 10.0)
        big = small.union(random_set(rng, 10.0))
        try:
            c_small = ob.observability_constant(sub, small).c_obs
        except UnobservableError:
            continue
        assert ob.observability_constant(sub, big).c_obs <= c_small * (1 + 1e-9)


def test_lambda_monotonicity(ho400):
    rng = np.random.default_rng(2)
    for _ in range(50):
        om = random_set(rng, 10.0)
        l1, l2 = np.sort(rng.uniform(1.5, 40, 2))
        try:
            c1 = ob.observability_constant(ho400.truncate(l1), om).c_obs
            c2 = ob.observability_constant(ho400.truncate(l2), om).c_obs
        except UnobservableError:
            continue
        assert c1 <= c2 * (1 + 1e-9)


def test_empty_set_is_unobservable(ho12):
    with pytest.raises(UnobservableError) as ei:
        ob.observability_constant(ho12, ss.SensorSet.empty())
    assert ei.value.module == "observability"


def test_set_outside_box_rejected(ho12):
    with pytest.raises(DomainError, match="leaves the box"):
        ob.restriction_gram(ho12, ss.SensorSet.from_intervals([(11, 13)]))


def test_extremal_vector_attains_constant(ho400):
    sub = ho400.truncate(50)
    om = ss.balls(0.0, (-20, 20))
    rep = ob.observability_constant(sub, om)
    on, full = ob.direct_norms(sub, om, rep.e_star)
    assert full / on == pytest.approx(rep.c_obs, rel=1e-9)
    assert np.linalg.norm(rep.e_star) == pytest.approx(1.0)


@pytest.mark.parametrize("args,expected", [
    ((2, 2, 0, 0), 0.5),
    ((2, 2, 0.5, 0), 0.75),
    ((2, 2, 0, 1), 1.0),
    ((1, 3, -2, 0), 0.5),
    ((1, 3, -2, 1), 1.5),
])
def test_theory_kappa_branches(args, expected):
    assert ob.theory_kappa(*args) == pytest.approx(expected)


def test_theory_kappa_positive_measure():
    assert ob.theory_kappa(2, 2, positive_measure=True) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        ob.theory_kappa(2, 2, 1.0, 0.5)


def test_fit_kappa_recovers_exact_power():
    lams = np.array([10, 20, 40, 80, 160, 320.0])
    fit = ob.fit_kappa(lams, np.exp(2.0 * lams ** 0.5))
    assert fit.kappa == pytest.approx(0.5, abs=1e-12)
    assert fit.C == pytest.approx(2.0, rel=1e-12)
    assert fit.window == (80.0, 320.0)


def test_fit_kappa_guards():
    with pytest.raises(DomainError):
        ob.fit_kappa([1, 2, 3], [2, 3, 4])
    with pytest.raises(DomainError):
        ob.fit_kappa([1, 2, 3, 4], [0.5, 3, 4, 5])


def test_sweep_collects_failures(ho400):
    om = ss.SensorSet.from_intervals([(0, 1)])
    res = ob.sweep_and_fit(ho400, om, [0.5, 3, 5, 7, 10, 40])
    assert [f[0] for f in res.failures] == [0.5, 40]
    assert "unobservable" in res.failures[-1][1]
    assert res.fit is not None and len(res.reports) == 4


def test_sweep_too_few_points_raises(ho400):
    om = ss.SensorSet.from_intervals([(0, 1)])
    with pytest.raises(DomainError, match="fit needs 4"):
        ob.sweep_and_fit(ho400, om, [5, 10, 40, 80])


def test_sweep_parallel_matches_serial(ho400):
    om = ss.periodic(1.0, 0.25, (-20, 20))
    a = ob.sweep_and_fit(ho400, om, [10, 20, 40, 80], jobs=1)
    b = ob.sweep_and_fit(ho400, om, [10, 20, 40, 80], jobs=4)
    assert [r.c_obs for r in a.reports] == [r.c_obs for r in b.reports]


def test_linear_fit_exact():
    f = ob.linear_fit([0, 1, 2], [1, 3, 5])
    assert f.slope == pytest.approx(2) and f.intercept == pytest.approx(1) and f.r2 == 1.0
