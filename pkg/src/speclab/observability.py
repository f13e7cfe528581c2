"""Sharp observability constants from the restriction Gram matrix.

For the span of the eigenfunctions below a cutoff, the best constant in
``||phi||^2 <= C_obs ||phi||^2_omega`` is ``1 / lambda_min(G)`` with
``G_jk = int_omega phi_j phi_k``.  Growth of ``log C_obs`` in the cutoff is
fitted to ``C lambda^kappa``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.linalg import solve_triangular

from . import tridiag
from .eigen import SpectralSubspace
from .errors import DomainError, EmptySpectrumError, SpeclabError, UnobservableError
from .sensors import SensorSet

MODULE = "observability"
UNOBSERVABLE_FLOOR = 1e-30


@dataclass(frozen=True)
class GramMatrix:
    matrix: np.ndarray
    factor: np.ndarray  # sqrt(weights) * phi, so matrix = factor^T factor
    weights: np.ndarray

    @property
    def m(self) -> int:
        return self.matrix.shape[0]


def cell_weights(x: np.ndarray, h: float, omega: SensorSet) -> np.ndarray:
    """``|omega ∩ [x_i - h/2, x_i + h/2]|`` for every node."""
    return omega.measure_in(x - 0.5 * h, x + 0.5 * h)


def restriction_gram(sub: SpectralSubspace, omega: SensorSet) -> GramMatrix:
    if sub.m == 0:
        raise EmptySpectrumError("empty subspace", MODULE)
    L = sub.grid.half_width
    if omega.intervals and (omega.hull[0] < -L or omega.hull[1] > L):
        raise DomainError(f"sensor set {omega.hull} leaves the box [-{L:g}, {L:g}]", MODULE)
    w = cell_weights(sub.grid.nodes, sub.h, omega)
    B = np.sqrt(w)[:, None] * sub.vectors
    G = B.T @ B
    G = 0.5 * (G + G.T)
    return GramMatrix(G, B, w)


def direct_norms(sub: SpectralSubspace, omega: SensorSet, coeffs):
    """``(||phi||^2_omega, ||phi||^2)`` for ``phi = sum e_k phi_k`` by direct quadrature.

    Each interval of omega is clipped against the node cells on its own; no
    Gram matrix or cumulative measure is involved.
    """
    phi = sub.combine(coeffs)
    x, h = sub.grid.nodes, sub.h
    sq = phi * phi
    on = 0.0
    for a, b in omega:
        i0 = max(int(math.floor((a - x[0]) / h - 0.5)), 0)
        i1 = min(int(math.ceil((b - x[0]) / h + 0.5)), x.size - 1)
        idx = np.arange(i0, i1 + 1)
        lo = np.maximum(x[idx] - 0.5 * h, a)
        hi = np.minimum(x[idx] + 0.5 * h, b)
        on += float(np.sum(np.clip(hi - lo, 0.0, None) * sq[idx]))
    return on, h * float(np.sum(sq))


@dataclass
class ObservabilityReport:
    lam: float
    m: int
    c_obs: float
    gram_min: float
    gram_max: float
    e_star: np.ndarray
    multiplicity: int
    certificate_error: float
    quad_step: float
    gram_min_tridiagonal: float  # estimate before refinement
    meta: dict = field(default_factory=dict)

    def row(self):
        return {"lambda": self.lam, "m": self.m, "c_obs": self.c_obs, "gram_min": self.gram_min,
                "gram_max": self.gram_max, "quad_step": self.quad_step}


def _smallest_from_factor(B: np.ndarray, e0: np.ndarray, iters: int = 3):
    """Refine the lowest right singular vector of B by inverse iteration on ``R^T R``."""
    R = np.linalg.qr(B, mode="r")
    e = e0 / np.linalg.norm(e0)
    for _ in range(iters):
        try:
            z = solve_triangular(R, solve_triangular(R, e, trans="T"))
        except np.linalg.LinAlgError:
            break
        nz = np.linalg.norm(z)
        if not np.isfinite(nz) or nz == 0:
            break
        e = z / nz
    Be = B @ e
    return e, float(Be @ Be)


def observability_constant(sub: SpectralSubspace, omega: SensorSet,
                           gram: Optional[GramMatrix] = None) -> ObservabilityReport:
    """Sharp constant ``1 / lambda_min(G)`` with its extremal coefficient vector."""
    gram = gram or restriction_gram(sub, omega)
    G, m = gram.matrix, gram.m
    if m == 1:
        d, e, Q = G[0].copy(), np.empty(0), np.eye(1)
        lo_val = hi_val = float(G[0, 0])
        v = np.ones((1, 1))
    else:
        d, e, Q = tridiag.householder_tridiagonalize(G)
        lo_val, hi_val = tridiag.bisect_eigenvalues(d, e, [0, m - 1])
        v, _ = tridiag.inverse_iteration(d, e, [lo_val], tol=np.inf)
    e_star = Q @ v[:, 0]
    # the Gram entries carry absolute rounding ~eps; the QR factor of B resolves
    # small eigenvalues to relative accuracy
    e_star, rq = _smallest_from_factor(gram.factor, e_star)
    gmin = rq if m > 1 else lo_val
    if not gmin > UNOBSERVABLE_FLOOR:
        raise UnobservableError(f"unobservable at tolerance: lambda_min(G) = {gmin:.3e}", gmin)
    if m > 1:
        thresh = gmin + max(1e-8 * gmin, 64 * np.finfo(float).eps * max(hi_val, 1.0))
        mult = int(tridiag.sturm_counts(d, e, [thresh])[0])
    else:
        mult = 1
    mult = max(mult, 1)
    if e_star[np.argmax(np.abs(e_star))] < 0:
        e_star = -e_star
    c_obs = 1.0 / gmin
    on, full = direct_norms(sub, omega, e_star)
    cert = abs(c_obs * on - full) / full
    return ObservabilityReport(float(sub.cutoff), m, c_obs, gmin, float(hi_val), e_star, mult,
                               cert, sub.h, float(lo_val))


def gram_extremes(G: np.ndarray):
    """``(lambda_min, lambda_max)`` of a symmetric matrix via tridiagonal bisection."""
    if G.shape[0] == 1:
        return float(G[0, 0]), float(G[0, 0])
    d, e, _ = tridiag.householder_tridiagonalize(G)
    lo, hi = tridiag.bisect_eigenvalues(d, e, [0, G.shape[0] - 1])
    return float(lo), float(hi)


# -- exponent fits -----------------------------------------------------------------

def theory_kappa(beta1: float, beta2: float, s: float = 0.0, tau: float = 0.0,
                 positive_measure: bool = False) -> float:
    """Predicted exponent for power-law weights ``beta1 <= beta2``.

    ``positive_measure`` selects the bound for arbitrary sets of positive
    measure, which also carries a ``log(lambda + 1)`` factor.
    """
    if positive_measure:
        return 1.0 / beta1 + beta2 / (2.0 * beta1)
    if s > 1 or (s == 1 and tau > 0):
        raise DomainError("s = 1 with tau > 0 needs positive_measure=True", MODULE)
    if s >= 0.5 * (beta1 - beta2):
        return tau / beta1 + s / beta1 + beta2 / (2.0 * beta1)
    return tau / beta1 + 0.5


@dataclass
class KappaFit:
    kappa: float
    C: float
    residual: float
    window: tuple  # (first lambda, last lambda) used
    n_points: int
    theory: Optional[float] = None

    def summary(self) -> dict:
        return {"kappa_hat": self.kappa, "C_hat": self.C, "fit_residual": self.residual,
                "window_lo": self.window[0], "window_hi": self.window[1],
                "kappa_theory": self.theory}


def fit_kappa(lams, c_obs, theory: Optional[float] = None, upper_half: bool = True) -> KappaFit:
    """Least squares of ``log log C_obs = kappa log lambda + log C``."""
    lams = np.asarray(lams, dtype=float)
    c = np.asarray(c_obs, dtype=float)
    if lams.size < 4:
        raise DomainError(f"need at least 4 sweep points, got {lams.size}", MODULE)
    order = np.argsort(lams)
    lams, c = lams[order], c[order]
    if np.any(c <= 1.0):
        raise DomainError("C_obs must exceed 1 for a log-log fit", MODULE)
    start = lams.size // 2 if upper_half else 0
    X, Y = np.log(lams[start:]), np.log(np.log(c[start:]))
    A = np.vstack([X, np.ones_like(X)]).T
    (k, b), *_ = np.linalg.lstsq(A, Y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ np.array([k, b]) - Y) ** 2)))
    return KappaFit(float(k), float(math.exp(b)), resid, (float(lams[start]), float(lams[-1])),
                    int(X.size), theory)


@dataclass
class LinearFit:
    slope: float
    intercept: float
    r2: float


def linear_fit(x, y) -> LinearFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.vstack([x, np.ones_like(x)]).T
    (k, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_res = float(np.sum((y - (k * x + b)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return LinearFit(float(k), float(b), r2)


@dataclass
class SweepResult:
    reports: list
    failures: list  # (lambda, message)
    fit: Optional[KappaFit]


SetSource = Union[SensorSet, Callable[[float], SensorSet]]


def sweep_and_fit(sub: SpectralSubspace, omega: SensorSet, lams: Sequence[float],
                  theory: Optional[float] = None, jobs: int = 1) -> SweepResult:
    """Observability reports on the nested subspaces below each cutoff, plus the kappa fit."""
    lams = [float(l) for l in lams]
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise DomainError("lambda list must be strictly increasing", MODULE)

    def one(lam):
        try:
            return observability_constant(sub.truncate(lam), omega), None
        except SpeclabError as exc:
            return None, (lam, str(exc))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, lams))
    else:
        results = [one(l) for l in lams]
    reports = [r for r, _ in results if r is not None]
    failures = [f for _, f in results if f is not None]
    fit = None
    if len(reports) >= 4:
        fit = fit_kappa([r.lam for r in reports], [r.c_obs for r in reports], theory)
    elif len(lams) >= 4:
        raise DomainError(f"only {len(reports)} sweep points succeeded; fit needs 4", MODULE)
    return SweepResult(reports, failures, fit)


def delta_scaling(sub: SpectralSubspace, deltas, make_set: Callable[[float], SensorSet],
                  a: float = 1.0):
    """``log C_obs`` against ``a |log delta|`` at a fixed subspace."""
    deltas = [float(d) for d in deltas]
    logs = [math.log(observability_constant(sub, make_set(d)).c_obs) for d in deltas]
    xs = [a * abs(math.log(d)) for d in deltas]
    return xs, logs, linear_fit(xs, logs)


def two_grid(sub_coarse: SpectralSubspace, sub_fine: SpectralSubspace, omega: SensorSet) -> dict:
    """C_obs on a grid and its refinement; the relative change monitors convergence in h."""
    c1 = observability_constant(sub_coarse, omega).c_obs
    c2 = observability_constant(sub_fine, omega).c_obs
    return {"c_obs_coarse": c1, "c_obs_fine": c2, "relative_change": abs(c2 - c1) / c2}
