"""Localization of eigenfunctions and spectral subspaces near the classical region.

Two checks:

* Agmon tail: an eigenfunction with ``V > 2 + lambda`` for ``|x| > R`` keeps at
  most ``10 exp(-2r + 2) ||phi||^2`` of its mass outside ``(-R - r, R + r)``.
* Subspace localization: every member of the span below ``lambda`` keeps at
  least half of its mass in ``(-R - r, R + r)`` once
  ``r > c0 + log(lambda + 2)/2 + log(R)/2`` with ``R = Phi^{-1}(lambda + 2)``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .eigen import LiebThirringTable, SpectralSubspace, lieb_thirring_check
from .errors import DomainError
from .grid import PotentialSpec, agmon_padding, weight_inverse
from .observability import linear_fit

MODULE = "localization_checks"
DEFAULT_C0 = 3.0
LT_BOUND = 1.0  # recorded bound for N(lambda) / ((lambda + 1) Phi^{-1}(lambda + 1))


def window_weights(x: np.ndarray, h: float, T: float) -> np.ndarray:
    """``|[x_i - h/2, x_i + h/2] ∩ (-T, T)|`` for every node."""
    if T <= 0:
        return np.zeros_like(x)
    lo = np.maximum(x - 0.5 * h, -T)
    hi = np.minimum(x + 0.5 * h, T)
    return np.clip(hi - lo, 0.0, None)


def tail_weights(x: np.ndarray, h: float, T: float) -> np.ndarray:
    """``|[x_i - h/2, x_i + h/2] \\ (-T, T)|``, clipped directly so deep tails keep relative accuracy."""
    T = max(T, 0.0)
    left = np.clip(np.minimum(x + 0.5 * h, -T) - (x - 0.5 * h), 0.0, None)
    right = np.clip(x + 0.5 * h - np.maximum(x - 0.5 * h, T), 0.0, None)
    return left + right


def tail_mass(f: np.ndarray, x: np.ndarray, h: float, T: float) -> float:
    """``||f||^2`` outside ``(-T, T)`` with exact cell clipping."""
    return float(np.sum(tail_weights(x, h, T) * f * f))


def classical_radius(spec: PotentialSpec, lam: float) -> float:
    """``R`` with ``Phi(t) > 2 + lam`` beyond it (the lower weight is nondecreasing)."""
    return weight_inverse(spec.lower, 2.0 + lam)


def _check_box(sub: SpectralSubspace, R: float, r: float, what: str):
    L = sub.grid.half_width
    need = R + min(r, agmon_padding())
    if L < need:
        raise DomainError(
            f"{what}: box half-width L={L:g} < R + r = {need:g}; rerun with L >= {math.ceil(need)}",
            MODULE)


@dataclass
class TailReport:
    lam: float
    R: float
    r: float
    tail: float
    norm2: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.tail <= self.bound

    def row(self):
        return {"lambda": self.lam, "R": self.R, "r": self.r, "tail": self.tail,
                "bound": self.bound, "pass": self.passed}


def agmon_tail_check(sub: SpectralSubspace, spec: PotentialSpec, k: int, r: float,
                     lam: Optional[float] = None) -> TailReport:
    """Tail mass of eigenfunction ``k`` beyond ``R + r`` against ``10 e^{2 - 2r} ||phi||^2``.

    ``lam`` defaults to the eigenvalue itself; any larger level is also valid.
    """
    if not 0 <= k < sub.m:
        raise DomainError(f"eigen index {k} outside 0..{sub.m - 1}", MODULE)
    lam_k = float(sub.values[k])
    lam = lam_k if lam is None else float(lam)
    if lam < lam_k:
        raise DomainError(f"level {lam:g} below the eigenvalue {lam_k:g}", MODULE)
    if not r > 1:
        raise DomainError(f"the tail bound needs r > 1, got {r!r}", MODULE)
    R = classical_radius(spec, lam)
    _check_box(sub, R, r, "agmon_tail_check")
    phi = sub.vectors[:, k]
    x, h = sub.grid.nodes, sub.h
    norm2 = h * float(phi @ phi)
    tail = tail_mass(phi, x, h, R + r)
    return TailReport(lam, R, float(r), tail, norm2, 10.0 * math.exp(2.0 - 2.0 * r) * norm2)


def agmon_battery(sub: SpectralSubspace, spec: PotentialSpec,
                  rs: Sequence[float] = (1.5, 2.0, 3.0, 4.0, 6.0)) -> list:
    """Tail reports for every eigenfunction of ``sub`` at every ``r`` that fits the box."""
    out = []
    L = sub.grid.half_width
    for k in range(sub.m):
        R = classical_radius(spec, float(sub.values[k]))
        for r in rs:
            if R + min(r, agmon_padding()) <= L:
                out.append(agmon_tail_check(sub, spec, k, r))
    return out


def lemma_radius(spec: PotentialSpec, lam: float, c0: float = DEFAULT_C0):
    """``(R_{lam+2}, c0 + log(lam + 2)/2 + log(R_{lam+2})/2)``."""
    R = weight_inverse(spec.lower, lam + 2.0)
    if R <= 0:
        raise DomainError(f"Phi^{{-1}}({lam + 2:g}) = 0; the radius condition is undefined", MODULE)
    return R, c0 + 0.5 * math.log(lam + 2.0) + 0.5 * math.log(R)


def localization_predictor(spec: PotentialSpec, lam: float) -> float:
    return lemma_radius(spec, lam, 0.0)[1]


@dataclass
class LocalizationReport:
    lam: float
    R: float
    r_lemma: float
    c0: float
    worst_ratio: float  # max over the battery of ||phi||^2 / ||phi||^2_window at r_lemma
    sharp_ratio: float  # max over the whole span, from the window Gram matrix
    r_min: float  # smallest r with worst battery ratio <= 2
    n_vectors: int
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.worst_ratio <= 2.0

    def row(self):
        return {"lambda": self.lam, "R": self.R, "r_min_empirical": self.r_min,
                "r_lemma": self.r_lemma, "pass": self.passed}


def battery_vectors(m: int, n_random: int = 50, seed: int = 0) -> np.ndarray:
    """Unit coefficient vectors: ``n_random`` uniform on the sphere plus the top mode."""
    rng = np.random.default_rng(seed)
    E = rng.standard_normal((m, n_random))
    E /= np.linalg.norm(E, axis=0)
    top = np.zeros((m, 1))
    top[-1, 0] = 1.0
    return np.hstack([E, top])


def _ratios(sq: np.ndarray, full: np.ndarray, x, h, T) -> np.ndarray:
    inside = window_weights(x, h, T) @ sq
    with np.errstate(divide="ignore"):
        return np.where(inside > 0, full / np.maximum(inside, 1e-300), np.inf)


def subspace_localization_check(sub: SpectralSubspace, spec: PotentialSpec,
                                c0: float = DEFAULT_C0, n_random: int = 50, seed: int = 0,
                                lam: Optional[float] = None, tol: float = 1e-6) -> LocalizationReport:
    lam = float(sub.cutoff if lam is None else lam)
    R, r_lemma = lemma_radius(spec, lam, c0)
    _check_box(sub, R, r_lemma, "subspace_localization_check")
    x, h, L = sub.grid.nodes, sub.h, sub.grid.half_width
    E = battery_vectors(sub.m, n_random, seed)
    F = sub.vectors @ E
    sq = F * F
    full = h * np.sum(sq, axis=0)
    worst = float(np.max(_ratios(sq, full, x, h, R + r_lemma)))

    # sharp worst case over the span: 1 / lambda_min of the window Gram matrix
    B = np.sqrt(window_weights(x, h, R + r_lemma))[:, None] * sub.vectors
    smin = float(np.linalg.svd(B, compute_uv=False)[-1])
    sharp = 1.0 / smin ** 2 if smin > 0 else math.inf

    def worst_at(r):
        return float(np.max(_ratios(sq, full, x, h, R + r)))

    lo, hi = -R, L - R
    if worst_at(lo) <= 2.0:
        r_min = lo
    else:
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if worst_at(mid) <= 2.0:
                hi = mid
            else:
                lo = mid
        r_min = hi
    return LocalizationReport(lam, R, r_lemma, c0, worst, sharp, r_min, E.shape[1])


@dataclass
class LocalizationSweep:
    reports: list
    slope: float  # fitted slope of r_min against the lemma predictor
    lieb_thirring: LiebThirringTable
    lt_bound: float = LT_BOUND

    @property
    def slope_ok(self) -> bool:
        return self.slope <= 0.75

    @property
    def lt_ok(self) -> bool:
        return self.lieb_thirring.max_ratio <= self.lt_bound

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports) and self.slope_ok and self.lt_ok


def localization_sweep(sub: SpectralSubspace, spec: PotentialSpec, lams: Sequence[float],
                       c0: float = DEFAULT_C0, n_random: int = 50, seed: int = 0,
                       jobs: int = 1) -> LocalizationSweep:
    """Subspace checks on the nested spans below each level, the r_min slope fit and the count table."""
    lams = [float(l) for l in lams]
    if len(lams) < 2:
        raise DomainError("the slope fit needs at least two levels", MODULE)

    def one(lam):
        return subspace_localization_check(sub.truncate(lam), spec, c0, n_random, seed, lam)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(one, lams))
    else:
        reports = [one(l) for l in lams]
    pred = [localization_predictor(spec, l) for l in lams]
    slope = linear_fit(pred, [r.r_min for r in reports]).slope
    lt = lieb_thirring_check(spec, lams, sub.grid)
    return LocalizationSweep(reports, slope, lt)
