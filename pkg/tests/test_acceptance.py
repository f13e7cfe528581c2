"""End-to-end acceptance battery; each test prints one pass/fail line."""
import json
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from speclab import cauchy as cy
from speclab import grid as gp
from speclab import lift as lf
from speclab import localization as lc
from speclab import observability as ob
from speclab import sensors as ss
from speclab.eigen import build_hamiltonian, eigenpairs_below, sturm_count, subspace_for

ROOT = Path(__file__).resolve().parents[1]
LAMS = [25.0, 50.0, 100.0, 200.0, 400.0]


def window(sub):
    L = sub.grid.half_width
    return (-L, L)


def test_c01_eigensolver_oracle(ho, criterion):
    t0 = time.perf_counter()
    op = build_hamiltonian(ho, gp.make_grid(12.0, 4801))
    sub = eigenpairs_below(op, 20.0, jobs=1)
    elapsed = time.perf_counter() - t0
    exact = 2 * np.arange(10) + 1.0
    rel = float(np.max(np.abs(sub.corrected[:10] - exact) / exact))
    raw = float(np.max(np.abs(sub.values[:10] - exact) / exact))
    count = sturm_count(op, 10.0)
    ok = sub.m == 10 and rel <= 1e-5 and count == 5 and elapsed < 10
    criterion(1, ok, f"max rel err {rel:.2e} (raw {raw:.2e}), count(10) = {count}, {elapsed:.2f} s")
    assert ok


def test_c02_gram_sanity(ho12, ho400, criterion):
    full = ob.observability_constant(ho12, ss.SensorSet.from_intervals([window(ho12)])).c_obs
    half = ob.observability_constant(ho12.truncate(1.5),
                                     ss.SensorSet.from_intervals([(0.0, 12.0)])).c_obs
    rng = np.random.default_rng(11)

    def rand_set(L):
        a = np.sort(rng.uniform(-L, L, 2 * int(rng.integers(1, 6))))
        return ss.SensorSet.from_intervals(zip(a[::2], a[1::2]))

    spec_bad = 0
    for _ in range(100):
        sub = ho400.truncate(float(rng.uniform(1.5, 100)))
        lo, hi = ob.gram_extremes(ob.restriction_gram(sub, rand_set(20.0)).matrix)
        spec_bad += not (-1e-9 <= lo and hi <= 1 + 1e-9)
    set_bad = lam_bad = 0
    sub = ho400.truncate(30)
    for _ in range(50):
        small = rand_set(10.0)
        big = small.union(rand_set(10.0))
        try:
            c_small = ob.observability_constant(sub, small).c_obs
        except ob.UnobservableError:
            c_small = math.inf
        set_bad += ob.observability_constant(sub, big).c_obs > c_small * (1 + 1e-9)
    for _ in range(50):
        om = rand_set(10.0)
        l1, l2 = np.sort(rng.uniform(1.5, 40, 2))
        try:
            c2 = ob.observability_constant(ho400.truncate(l2), om).c_obs
        except ob.UnobservableError:
            continue  # the smaller span is then unconstrained by monotonicity
        lam_bad += ob.observability_constant(ho400.truncate(l1), om).c_obs > c2 * (1 + 1e-9)
    ok = abs(full - 1) <= 1e-9 and abs(half - 2) <= 1e-5 and spec_bad == set_bad == lam_bad == 0
    criterion(2, ok, f"full box {full:.12f}, half line {half:.8f}, spectrum/set/lambda "
                     f"violations {spec_bad}/{set_bad}/{lam_bad}")
    assert ok


def test_c03_exponent_shape(ho, criterion):
    t0 = time.perf_counter()
    sub = subspace_for(ho, 400.0)
    om = ss.periodic(1.0, 0.25, window(sub))
    theory = ob.theory_kappa(ho.beta1, ho.beta2, 0.0, 0.0)
    res = ob.sweep_and_fit(sub, om, LAMS, theory)
    elapsed = time.perf_counter() - t0
    k = res.fit.kappa
    ok = 0.35 <= k <= 0.65 and theory == 0.5 and not res.failures and elapsed < 300
    criterion(3, ok, f"kappa_hat {k:.3f} vs theory {theory}, {elapsed:.1f} s")
    assert ok


def test_c04_delta_scaling(ho400, criterion):
    sub = ho400.truncate(200)
    xs, logs, fit = ob.delta_scaling(sub, [0.05, 0.1, 0.2, 0.4],
                                     lambda d: ss.periodic(1.0, d, window(sub)))
    ok = fit.slope > 0 and fit.r2 >= 0.9
    criterion(4, ok, f"slope {fit.slope:.3f}, R^2 {fit.r2:.4f}")
    assert ok


def test_c05_three_ball(criterion):
    rng = np.random.default_rng(5)
    measures = [2.0 ** -k for k in range(2, 8)]
    violations = trunc_bad = 0
    for m in measures:
        for _ in range(200):
            a = float(rng.uniform(-1.0, 1.0 - m))
            E = ss.SensorSet.from_intervals([(a, a + m)])
            hf = cy.DiskFunction.random(int(rng.integers(1, 65)), rng)
            violations += cy.three_ball_check(hf, E).violated
            trunc_bad += not cy.truncation_split(hf, E).ok
    alphas = [cy.chebyshev_alpha(m) for m in measures]
    slope = ob.linear_fit([math.log(1 + math.log(1 / m)) for m in measures],
                          [math.log(1 / a) for a in alphas]).slope
    literal = ob.linear_fit([math.log(1 / m) for m in measures], [1 / a for a in alphas]).slope
    ok = violations == 0 and trunc_bad == 0 and 0.7 <= slope <= 1.3
    criterion(5, ok, f"violations {violations}, truncation failures {trunc_bad}, "
                     f"Chebyshev slope {slope:.3f} (linear 1/alpha* slope {literal:.3f})")
    assert ok


def test_c06_multiplier(criterion):
    worst_cf = 0.0
    for c, M, K in [(1.0, 1.0, 1.0), (9.0, 16.0, 2.0), (30.0, 64.0, 1.0), (64.0, 64.0, 64.0)]:
        mult = cy.solve_multiplier(c, 0.0, M, K)
        cap = math.exp(5 * (math.sqrt(M) + K))
        exact = cap * np.cosh(math.sqrt(c) * mult.x) / math.cosh(5 * math.sqrt(c))
        worst_cf = max(worst_cf, float(np.max(np.abs(mult.w - exact) / exact)))
    rng = np.random.default_rng(6)
    bad = 0
    for _ in range(20):
        M, K = rng.uniform(1, 64, 2)
        a, b, c, d = rng.uniform(0, 2 * math.pi, 4)
        mult = cy.solve_multiplier(lambda x: 0.5 * M * (1 + np.sin(a * x + b)),
                                   lambda x: K * np.cos(c * x + d), M, K, check=False)
        bad += not mult.two_sided_ok()
    ok = worst_cf <= 1e-8 and bad == 0
    criterion(6, ok, f"closed-form rel err {worst_cf:.2e}, sandwich failures {bad}/20")
    assert ok


@pytest.fixture(scope="module")
def lemma_rows(ho400):
    return cy.lemma_sweep(ho400, LAMS, ss.SensorSet.from_intervals([(-0.5, 0.5)]))


def test_c07_cauchy_lemma(ho400, lemma_rows, criterion):
    C = [r.required_C for r in lemma_rows]
    log_slope = ob.linear_fit([math.log(r.M) for r in lemma_rows], C).slope
    measures = [1.0, 0.5, 0.25, 0.125, 0.0625]
    shrink = cy.shrinking_set(ho400, 100.0, measures)
    e_slope = ob.linear_fit([math.log(1 / m) for m in measures], [r.required_C for r in shrink]).slope
    bounded = max(C) <= 1.0
    ok = bounded and log_slope <= 0.2 and 0.5 <= e_slope <= 1.5
    criterion(7, ok, f"max required C {max(C):.3f}, log M slope {log_slope:.3f}, "
                     f"shrinking-E slope {e_slope:.3f} (target [0.5, 1.5])")
    # the lambda part holds; the shrinking-set slope is a recorded open red
    assert bounded and log_slope <= 0.2
    assert 0.5 <= e_slope <= 1.5


def test_c08_lift(ho400, criterion):
    rng = np.random.default_rng(8)
    parseval = 0.0
    for sub, Y in ((ho400.truncate(50), 1.0), (ho400, 2.0)):
        for _ in range(20):
            e = rng.standard_normal(sub.m)
            f = lf.lift(sub, e / np.linalg.norm(e), Y, 201)
            parseval = max(parseval, float(np.max(lf.slice_parseval(f))))
    sub = ho400.truncate(50)
    e = rng.standard_normal(sub.m)
    e /= np.linalg.norm(e)
    steps = math.ceil(20 * math.sqrt(sub.values[-1]))
    ny = steps + 1 + steps % 2
    res = [lf.pde_residual(lf.lift(sub, e, 1.0, (ny - 1) * 2 ** k + 1)).max_abs for k in range(3)]
    rates = [math.log2(a / b) for a, b in zip(res, res[1:])]
    ok = parseval <= 1e-8 and all(1.7 <= r <= 2.3 for r in rates)
    criterion(8, ok, f"Parseval defect {parseval:.2e}, residual rates "
                     f"{', '.join(f'{r:.3f}' for r in rates)}")
    assert ok


def test_c09_localization(ho, ho400, criterion):
    tails = lc.agmon_battery(ho400, ho)
    fails = sum(not t.passed for t in tails)
    sw = lc.localization_sweep(ho400, ho, LAMS, jobs=2)
    ok = fails == 0 and sw.passed
    criterion(9, ok, f"Agmon failures {fails}/{len(tails)}, r_min slope {sw.slope:.3f}, "
                     f"count ratio max {sw.lieb_thirring.max_ratio:.3f}")
    assert ok


def thickness_battery():
    out = []
    for p, d, s, D in [(1, .25, 0, 1), (1, .5, 0, 1), (2, .25, 0, 2), (.5, .3, 0, .5),
                       (1, .25, .5, 1), (1, .4, .25, 1), (1.5, .2, 0, 1.5), (1, .1, 0, 1),
                       (2, .5, .5, 2), (.25, .5, -.25, 2)]:
        gamma = 0.2 if s < 0 else 0.45 * d
        out.append((ss.periodic(p, d, (-60, 60)), ss.ThicknessParams(s, 0, gamma, D), 60))
    for seed in range(10):
        p, d = (1, .3) if seed % 2 else (2, .25)
        out.append((ss.random_thick(p, d, seed, (-60, 60)), ss.ThicknessParams(0, 0, 0.45 * d, p), 60))
    for tau, hw in [(0, 60), (.25, 40), (.5, 30), (.75, 25), (1, 25),
                    (0, 30), (.5, 20), (1, 15), (.25, 20), (.75, 15)]:
        out.append((ss.balls(tau, (-hw, hw)), ss.ThicknessParams(0, tau, 0.125, 1), hw))
    return out


def test_c10_thickness_equivalence(criterion):
    reps = [ss.check_equivalence(om, p, hw) for om, p, hw in thickness_battery()]
    agree = sum(r.agree for r in reps)
    mult = max(ss.overlap_multiplicity(ss.partition_points(a, s, 200))
               for s in (-1.0, -0.5, 0.0, 0.25, 0.5, 0.75) for a in (0.5, 1.0, 4.0))
    ok = len(reps) == 30 and agree == 30 and mult <= 64
    criterion(10, ok, f"agreement {agree}/{len(reps)}, max overlap multiplicity {mult}")
    assert ok


def _cli(*args):
    r = subprocess.run([sys.executable, "-m", "speclab.cli", *args], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    return r


def _outputs(d):
    return {f.name: f.read_bytes() for f in sorted(d.iterdir()) if f.suffix in (".csv", ".bin", ".txt")}


def test_c11_reproducibility(tmp_path, criterion):
    cfg = str(ROOT / "configs" / "ho_s0.toml")
    a, b = tmp_path / "a", tmp_path / "b"
    _cli("all", "-c", cfg, "-o", str(a), "--no-cache")
    _cli("all", "-c", cfg, "-o", str(b), "--no-cache", "--jobs", "4")
    cold = _outputs(a)
    _cli("all", "-c", cfg, "-o", str(a))  # fills the eigenpair cache
    assert _outputs(a) == cold
    _cli("all", "-c", cfg, "-o", str(a))
    hit = json.loads((a / "run-all.json").read_text())["cache_hit"]
    ok = cold == _outputs(b) == _outputs(a) and hit and len(cold) >= 20
    criterion(11, ok, f"{len(cold)} files byte-identical across two cold runs, a cache fill and a cache hit")
    assert ok
