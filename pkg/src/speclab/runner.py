"""Experiment orchestration for the command-line front end.

Each command computes its reports, hands every file to the run's single
writer, and records which asserted invariants failed.  Eigenpairs are cached
by the hash of the potential and grid blocks.
"""
from __future__ import annotations

import datetime as _dt
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import cauchy, lift as lift_mod, localization, observability as obs, sensors
from .config import ExperimentConfig
from .eigen import SpectralSubspace, build_hamiltonian, eigenpairs_below, lieb_thirring_check
from .errors import ConfigError
from .io import write_csv, write_field, write_kv, write_matrix
from .plotdata import emit_plot_data

LEMMA_C_BOUND = 1.0  # recorded bound on the per-rate constant of the Cauchy estimate
ORTHO_TOL = 1e-8
PARSEVAL_TOL = 1e-8
CERT_TOL = 1e-6
RATE_BAND = (1.7, 2.3)


@dataclass
class RunRecord:
    config_hash: str
    command: str
    timestamp: str
    outputs: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    cache_hit: Optional[bool] = None

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json(self) -> str:
        return json.dumps({"config_hash": self.config_hash, "command": self.command,
                           "timestamp": self.timestamp, "outputs": self.outputs,
                           "summary": self.summary, "failures": self.failures,
                           "cache_hit": self.cache_hit}, indent=2, sort_keys=True, default=str)


class Writer:
    """Single owner of every file written during a run."""

    def __init__(self, root: Path, record: RunRecord):
        self.root = root
        self.record = record
        root.mkdir(parents=True, exist_ok=True)

    def _note(self, name, path):
        self.record.outputs[name] = str(path)
        return path

    def csv(self, name, columns, rows):
        return self._note(name, write_csv(self.root / name, columns, rows))

    def kv(self, name, items):
        return self._note(name, write_kv(self.root / name, items))

    def matrix(self, name, A):
        return self._note(name, write_matrix(self.root / name, A))

    def field(self, name, u, h, dy):
        return self._note(name, write_field(self.root / name, u, h, dy))


class Run:
    def __init__(self, cfg: ExperimentConfig, out: Optional[str] = None, seed: Optional[int] = None,
                 jobs: int = 1, cache: bool = True):
        self.cfg = cfg
        self.seed = cfg.seed if seed is None else int(seed)
        self.jobs = max(1, int(jobs))
        self.use_cache = cache
        self.root = Path(out if out is not None else cfg.output)
        self.spec = cfg.build_potential()
        self.grid = cfg.build_grid(self.spec)
        self.record = RunRecord(cfg.content_hash(), "", "")
        self.writer = Writer(self.root, self.record)
        self._sub: Optional[SpectralSubspace] = None

    # -- shared pieces ----------------------------------------------------------

    def fail(self, msg: str):
        self.record.failures.append(msg)

    def subspace(self) -> SpectralSubspace:
        if self._sub is not None:
            return self._sub
        lam = self.cfg.grid.lam_max
        path = self.root / "cache" / f"eig-{self.cfg.eigen_hash()}.npz"
        if self.use_cache and path.exists():
            with np.load(path) as z:
                values, vectors, res = z["values"], z["vectors"], z["residuals"]
            for a in (values, vectors):
                a.setflags(write=False)
            meta = {"potential": self.spec.name, "L": self.grid.half_width, "n": self.grid.n,
                    "h": self.grid.h}
            op = build_hamiltonian(self.spec, self.grid)
            self._sub = SpectralSubspace(float(lam), values, vectors, self.grid, op.potential, res,
                                         int(values.size), meta)
            self.record.cache_hit = True
        else:
            op = build_hamiltonian(self.spec, self.grid)
            self._sub = eigenpairs_below(op, lam, jobs=self.jobs, seed=0)
            if self.use_cache:
                path.parent.mkdir(parents=True, exist_ok=True)
                np.savez(path, values=self._sub.values, vectors=self._sub.vectors,
                         residuals=self._sub.residuals)
            self.record.cache_hit = False
        return self._sub

    def window(self):
        s = self.cfg.sensors
        L = self.grid.half_width
        if s is not None and s.window is not None:
            return float(s.window[0]), float(s.window[1])
        return -L, L

    def sensor_set(self) -> sensors.SensorSet:
        s = self.cfg.sensors
        if s is None:
            raise ConfigError("this command needs a [sensors] block")
        params = dict(s.params)
        if s.kind == "random_thick":
            params.setdefault("seed", self.seed)
            params["seed"] = int(params["seed"])
        if s.kind == "explicit":
            params["intervals"] = s.intervals
        return sensors.generate(s.kind, self.window(), **params)

    def lambdas(self):
        lams = self.cfg.sweep.lambda_list()
        lam_max = self.cfg.grid.lam_max
        if not lams:
            raise ConfigError("this command needs sweep.lams or sweep.lam_range")
        if lams[-1] > lam_max:
            raise ConfigError(f"sweep level {lams[-1]:g} exceeds grid.lam_max={lam_max:g}")
        return lams

    def theory(self) -> Optional[float]:
        sw = self.cfg.sweep
        if self.spec.power is not None:
            return obs.theory_kappa(self.spec.beta1, self.spec.beta2, sw.s, sw.tau)
        return self.spec.kappa

    # -- commands -----------------------------------------------------------------

    def cmd_eig(self):
        sub = self.subspace()
        rows = zip(range(sub.m), sub.values, sub.corrected, sub.residuals)
        self.writer.csv("eigenpairs.csv", ["k", "lambda_k", "lambda_corrected", "residual"], rows)
        self.writer.matrix("eigenvectors.bin", sub.vectors)
        ortho = sub.orthonormality_error()
        lams = self.cfg.sweep.lambda_list() or [self.cfg.grid.lam_max]
        lt = lieb_thirring_check(self.spec, lams, self.grid)
        self.writer.csv("lieb_thirring.csv", ["lambda", "count", "radius", "ratio"],
                        zip(lt.lams, lt.counts, lt.radii, lt.ratios))
        self.record.summary.update(m=sub.m, orthonormality_error=ortho,
                                   lt_max_ratio=lt.max_ratio, lt_bound=localization.LT_BOUND)
        if ortho > ORTHO_TOL:
            self.fail(f"eigensolver: orthonormality error {ortho:.3e} > {ORTHO_TOL}")
        if lt.max_ratio > localization.LT_BOUND:
            self.fail(f"eigensolver: count ratio {lt.max_ratio:.3g} > {localization.LT_BOUND}")

    def cmd_thick(self):
        s = self.cfg.sensors
        if s is None or s.thickness is None:
            raise ConfigError("thick needs a [sensors.thickness] block")
        t = s.thickness
        p = sensors.ThicknessParams(t.s, t.tau, t.gamma, t.D)
        omega = self.sensor_set()
        lo, hi = self.window()
        c = sensors.center_grid(lo, hi, 0.01 * t.D)
        c = c[(c - t.D * sensors.japanese(c) ** t.s >= lo) & (c + t.D * sensors.japanese(c) ** t.s <= hi)]
        direct = sensors.is_thick_direct(omega, p, c)
        self.writer.csv("thick_direct.csv", ["center", "margin"], direct.rows())
        self.record.summary.update(direct_min_margin=direct.min_margin, direct_passed=direct.passed)
        if not direct.passed:
            self.fail(f"sensor_sets: direct thickness fails, min margin {direct.min_margin:.3e}")
        if t.s < 1:
            consts = sensors.direct_to_partition(p, t.N)
            half = min(-lo, hi)
            part = sensors.partition_for_window(consts.a, t.s, half)
            rep = sensors.is_thick_partition(omega, part, t.tau, consts.gamma1)
            mult = sensors.overlap_multiplicity(part)
            self.writer.csv("thick_partition.csv", ["index", "margin"], rep.rows())
            self.record.summary.update(partition_a=consts.a, partition_gamma1=consts.gamma1,
                                       partition_passed=rep.passed, overlap_multiplicity=mult)
            if direct.passed and not rep.passed:
                self.fail(f"sensor_sets: partition recipe fails, min margin {rep.min_margin:.3e}")
            if mult > 64:
                self.fail(f"sensor_sets: overlap multiplicity {mult} > 64")

    def cmd_obs(self):
        sub = self.subspace()
        rep = obs.observability_constant(sub, self.sensor_set())
        cols = ["lambda", "m", "c_obs", "gram_min", "gram_max", "quad_step"]
        self.writer.csv("observability.csv", cols, [rep.row()])
        self.record.summary.update(c_obs=rep.c_obs, multiplicity=rep.multiplicity,
                                   certificate_error=rep.certificate_error)
        if rep.certificate_error > CERT_TOL:
            self.fail(f"observability: certificate error {rep.certificate_error:.3e}")

    def cmd_sweep(self):
        sub = self.subspace()
        omega = self.sensor_set()
        res = obs.sweep_and_fit(sub, omega, self.lambdas(), self.theory(), jobs=self.jobs)
        cols = ["lambda", "m", "c_obs", "gram_min", "gram_max", "quad_step"]
        self.writer.csv("sweep.csv", cols, [r.row() for r in res.reports])
        fit = res.fit
        summary = {"config_hash": self.record.config_hash, "potential": self.spec.name}
        if fit is not None:
            summary.update(fit.summary())
        else:
            summary.update(kappa_hat=math.nan, C_hat=math.nan, kappa_theory=self.theory())
        summary["failures"] = len(res.failures)
        self.writer.kv("fit_summary.txt", summary)
        self.record.summary.update({k: v for k, v in summary.items() if k != "config_hash"})
        for lam, msg in res.failures:
            self.fail(f"observability: lambda={lam:g}: {msg}")
        c = [r.c_obs for r in res.reports]
        if any(b < a * (1 - 1e-9) for a, b in zip(c, c[1:])):
            self.fail("observability: C_obs decreased along nested subspaces")
        bad = [r.lam for r in res.reports if r.certificate_error > CERT_TOL]
        if bad:
            self.fail(f"observability: certificate error above {CERT_TOL} at {bad}")
        sw = self.cfg.sweep
        if sw.deltas:
            lam = sw.delta_lambda or self.cfg.grid.lam_max
            s = sub.truncate(lam)
            win = self.window()
            xs, logs, lf = obs.delta_scaling(
                s, sw.deltas, lambda d: sensors.periodic(sw.delta_period, d, win), sw.delta_period)
            self.writer.csv("delta_scaling_raw.csv", ["delta", "abs_log_delta", "log_c_obs"],
                            zip(sw.deltas, xs, logs))
            self.record.summary.update(delta_slope=lf.slope, delta_r2=lf.r2)
            if not lf.slope > 0:
                self.fail(f"observability: delta slope {lf.slope:.3g} is not positive")
            emit_plot_data(self.root, ["kappa_fit", "delta_scaling"])
        else:
            emit_plot_data(self.root, ["kappa_fit"])

    def cmd_lift(self):
        lc = self.cfg.lift
        sub = self.subspace()
        if lc.lam is not None:
            sub = sub.truncate(lc.lam)
        ny = lc.ny
        if ny is None:
            steps = max(100, math.ceil(20.0 * lc.Y * math.sqrt(max(sub.values[-1], 1.0))))
            ny = steps + 1 + steps % 2  # odd, so y = 0 is a node
        rng = np.random.default_rng([self.seed, 1])
        worst = 0.0
        rows = []
        vecs = rng.standard_normal((lc.vectors, sub.m))
        for i, e in enumerate(vecs):
            f = lift_mod.lift(sub, e / np.linalg.norm(e), lc.Y, ny)
            d = float(np.max(lift_mod.slice_parseval(f)))
            rows.append((i, d, f.evenness_defect()))
            worst = max(worst, d)
        self.writer.csv("lift_parseval.csv", ["vector", "max_defect", "evenness_defect"], rows)
        e0 = vecs[0] / np.linalg.norm(vecs[0])
        res_rows = []
        for lev in range(lc.levels):
            nyl = (ny - 1) * 2 ** lev + 1
            f = lift_mod.lift(sub, e0, lc.Y, nyl)
            r = lift_mod.pde_residual(f)
            res_rows.append((nyl, f.dy, r.max_abs, r.max_scaled, r.taylor_prediction))
            if lev == 0 and lc.dump_field:
                self.writer.field("lift_field.bin", f.values, f.h, f.dy)
            if lev == 0:
                slabs = [lift_mod.slab_norm_identities(f, -lc.Y, lc.Y),
                         lift_mod.slab_norm_identities(f, 0.0, lc.Y)]
        self.writer.csv("lift_residual.csv",
                        ["ny", "dy", "residual_abs", "residual_scaled", "taylor_prediction"], res_rows)
        rates = [math.log2(a[2] / b[2]) for a, b in zip(res_rows, res_rows[1:]) if b[2] > 0]
        slab_cols = ["y0", "y1", "quadrature", "closed_form", "relative_error", "lower_bound",
                     "upper_bound"]
        self.writer.csv("lift_slab.csv", slab_cols, [s.as_dict() for s in slabs])
        self.record.summary.update(parseval_max=worst, residual_rates=rates,
                                   slab_max_error=max(s.relative_error for s in slabs))
        if worst > PARSEVAL_TOL:
            self.fail(f"ghost_lift: slice Parseval defect {worst:.3e} > {PARSEVAL_TOL}")
        for rt in rates:
            if not RATE_BAND[0] <= rt <= RATE_BAND[1]:
                self.fail(f"ghost_lift: residual rate {rt:.3f} outside {RATE_BAND}")
        for s in slabs:
            if not (s.identity_ok and s.bounds_ok):
                self.fail(f"ghost_lift: slab [{s.y0:g}, {s.y1:g}] identity or bounds fail")

    def cmd_cauchy(self):
        cc = self.cfg.cauchy
        rng = np.random.default_rng([self.seed, 2])
        rows, violations, trunc_bad = [], 0, 0
        for m in cc.measures:
            for _ in range(cc.polynomials):
                a = float(rng.uniform(-1.0, 1.0 - m))
                E = sensors.SensorSet.from_intervals([(a, a + m)])
                deg = int(rng.integers(1, cc.max_degree + 1))
                hf = cauchy.DiskFunction.random(deg, rng)
                rep = cauchy.three_ball_check(hf, E)
                tr = cauchy.truncation_split(hf, E)
                violations += rep.violated
                trunc_bad += not tr.ok
                rows.append((deg, m, rep.alpha_star, rep.c_star, rep.violated, tr.ok))
        self.writer.csv("three_ball.csv", ["degree", "measure", "alpha_star", "c_star", "violated",
                                           "truncation_ok"], rows)
        ms = cc.measures
        cheb = [(m, cauchy.chebyshev_alpha(m), cauchy.default_alpha(m)) for m in ms]
        self.writer.csv("chebyshev.csv", ["measure", "alpha_star", "alpha_default"], cheb)
        summary = {"three_ball_violations": violations, "truncation_failures": trunc_bad}
        if len(ms) >= 2:
            xs = [math.log(1 + math.log(1 / m)) for m in ms]
            summary["chebyshev_slope"] = obs.linear_fit(xs, [math.log(1 / a) for _, a, _ in cheb]).slope
        if violations:
            self.fail(f"cauchy_smallness: {violations} three-ball violations")
        if trunc_bad:
            self.fail(f"cauchy_smallness: {trunc_bad} truncation splits with |E0| < 3|E|/4")

        # multipliers on random smooth coefficients
        mrows, bad = [], 0
        first = None
        for i in range(cc.multipliers):
            M = float(rng.uniform(1, cc.max_M))
            K = float(rng.uniform(1, cc.max_K))
            a, b, c, d = rng.uniform(0, 2 * math.pi, 4)
            V = lambda x, M=M, a=a, b=b: 0.5 * M * (1 + np.sin(a * x + b))
            W = lambda x, K=K, c=c, d=d: K * np.cos(c * x + d)
            mult = cauchy.solve_multiplier(V, W, M, K, check=False)
            ok = mult.two_sided_ok() and mult.sandwich_defect <= 1e-6
            bad += not ok
            mrows.append((i, M, K, mult.c_empirical, mult.sandwich_defect, ok))
            first = first or mult
        self.writer.csv("multiplier_battery.csv", ["instance", "M", "K", "c_empirical",
                                                   "sandwich_defect", "two_sided_ok"], mrows)
        if first is not None:
            self.writer.csv("multiplier.csv", ["node", "value"], zip(first.x, first.w))
        if bad:
            self.fail(f"cauchy_smallness: {bad} multipliers leave the sandwich")

        # lifted eigenfunction sums
        sub = self.subspace()
        E = sensors.SensorSet.from_intervals([tuple(cc.E)])
        lams = self.lambdas()
        lrows = cauchy.lemma_sweep(sub, lams, E, cc.lemma_vectors, self.seed, cc.c1)
        self.writer.csv("cauchy_lemma.csv", ["lambda", "M", "K", "required_C"],
                        [(r.lam, r.M, r.K, r.required_C) for r in lrows])
        worst = max(r.required_C for r in lrows)
        summary["lemma_max_C"] = worst
        if len(lrows) >= 2:
            slope = obs.linear_fit([math.log(r.M) for r in lrows], [r.required_C for r in lrows]).slope
            summary["lemma_logM_slope"] = slope
            if slope > 0.2:
                self.fail(f"cauchy_smallness: required C grows with slope {slope:.3g} in log M")
        if worst > LEMMA_C_BOUND:
            self.fail(f"cauchy_smallness: required C {worst:.3g} exceeds {LEMMA_C_BOUND}")
        ms2 = self.cfg.sweep.measures
        shrink = cauchy.shrinking_set(sub, lams[len(lams) // 2], ms2, cc.c1)
        self.writer.csv("cauchy_shrinking.csv", ["measure", "alpha", "required_C"],
                        [(m, r.alpha, r.required_C) for m, r in zip(ms2, shrink)])
        if len(ms2) >= 2:
            summary["shrinking_slope"] = obs.linear_fit(
                [math.log(1 / m) for m in ms2], [r.required_C for r in shrink]).slope

        # stream function of u / w on the lowest level's box
        s0 = sub.truncate(lams[0])
        u, X, Y, M = cauchy.lifted_box(s0, np.eye(s0.m)[-1], math.sqrt(s0.values[-1]))
        xc = self.grid.nodes[self.grid.index_of(math.sqrt(s0.values[-1]))]
        mult = cauchy.solve_multiplier(lambda x: np.minimum(self.spec(xc + x), M), 0.0, M, 1.0)
        w = np.interp(X, mult.x, mult.w)
        st = cauchy.stream_function(u / w[:, None], X, Y, w, np.zeros_like(X))
        scale = float(np.max(np.abs(st.u2))) or 1.0
        summary.update(stream_relative_residual=st.residual / scale,
                       stream_line_relative=st.line_max / scale)
        self.record.summary.update(summary)
        emit_plot_data(self.root, ["alpha_vs_measure"])

    def cmd_agmon(self):
        sub = self.subspace()
        ac = self.cfg.agmon
        tails = localization.agmon_battery(sub, self.spec, ac.rs)
        self.writer.csv("agmon.csv", ["lambda", "R", "r", "tail", "bound", "pass"],
                        [t.row() for t in tails])
        nfail = sum(not t.passed for t in tails)
        sw = localization.localization_sweep(sub, self.spec, self.lambdas(), ac.c0, ac.n_random,
                                             self.seed, self.jobs)
        self.writer.csv("localization.csv", ["lambda", "R", "r_min_empirical", "r_lemma", "pass"],
                        [r.row() for r in sw.reports])
        lt = sw.lieb_thirring
        self.writer.csv("lieb_thirring.csv", ["lambda", "count", "radius", "ratio"],
                        zip(lt.lams, lt.counts, lt.radii, lt.ratios))
        self.record.summary.update(agmon_checks=len(tails), agmon_failures=nfail,
                                   r_min_slope=sw.slope, lt_max_ratio=lt.max_ratio,
                                   worst_ratio=max(r.worst_ratio for r in sw.reports))
        if nfail:
            self.fail(f"localization_checks: {nfail} Agmon tail bounds fail")
        if not all(r.passed for r in sw.reports):
            self.fail("localization_checks: factor-2 localization fails at the lemma radius")
        if not sw.slope_ok:
            self.fail(f"localization_checks: r_min slope {sw.slope:.3g} > 0.75")
        if not sw.lt_ok:
            self.fail(f"localization_checks: count ratio {lt.max_ratio:.3g} > {sw.lt_bound}")
        emit_plot_data(self.root, ["r_vs_lambda"])

    def cmd_all(self):
        self.cmd_eig()
        s = self.cfg.sensors
        if s is not None and s.thickness is not None:
            self.cmd_thick()
        if s is not None:
            self.cmd_obs()
            self.cmd_sweep()
        self.cmd_lift()
        self.cmd_cauchy()
        self.cmd_agmon()

    def execute(self, command: str) -> RunRecord:
        handler = getattr(self, f"cmd_{command}", None)
        if handler is None:
            raise ConfigError(f"unknown command {command!r}")
        self.record.command = command
        self.record.timestamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        handler()
        (self.root / f"run-{command}.json").write_text(self.record.to_json())
        return self.record


def run(command: str, cfg: ExperimentConfig, out: Optional[str] = None, seed: Optional[int] = None,
        jobs: int = 1, cache: bool = True) -> RunRecord:
    return Run(cfg, out, seed, jobs, cache).execute(command)
