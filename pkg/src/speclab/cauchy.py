"""Propagation of smallness: holomorphic three-ball check, multiplier ODE,
stream function, and the quantitative Cauchy uniqueness inequality.

Disks ``B_r`` are centred at the origin.  The sensor set E lives on the real
segment (-1, 1).  The Cauchy inequality is tested as a black box on fields
``u`` supplied on the box ``(-5, 5)^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NumericalError
from .sensors import SensorSet
from .tridiag import thomas

MODULE = "cauchy_smallness"
MAX_DEGREE = 64


# -- holomorphic test functions --------------------------------------------------

@dataclass(frozen=True)
class DiskFunction:
    """Polynomial ``sum_k c_k z^k`` (coefficients in increasing degree)."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size == 0:
            raise DomainError("coefficients must be a non-empty vector", MODULE)
        if c.size - 1 > MAX_DEGREE:
            raise DomainError(f"degree {c.size - 1} exceeds {MAX_DEGREE}", MODULE)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for c in self.coeffs[::-1]:
            out = out * z + c
        return out

    def derivative_bound(self, radius: float) -> float:
        """``sum k |c_k| r^(k-1)``, a bound for ``|h'|`` on ``|z| <= r``."""
        k = np.arange(1, self.coeffs.size)
        return float(np.sum(k * np.abs(self.coeffs[1:]) * radius ** (k - 1.0)))

    def sup_circle(self, radius: float, samples: int = 4096):
        """``(sampled max, certified upper bound)`` of ``|h|`` on ``|z| = radius``."""
        t = 2 * np.pi * np.arange(samples) / samples
        vals = np.abs(self(radius * np.exp(1j * t)))
        best = float(vals.max())
        slack = self.derivative_bound(radius) * math.pi * radius / samples
        return best, best + slack

    def norm_on(self, E: SensorSet) -> float:
        """``||h||_{L^2(E)}`` by Gauss-Legendre on each interval (exact for polynomials)."""
        t, w = np.polynomial.legendre.leggauss(self.degree + 2)
        total = 0.0
        for a, b in E:
            if b <= a:
                continue
            x = 0.5 * (a + b) + 0.5 * (b - a) * t
            total += 0.5 * (b - a) * float(np.sum(w * np.abs(self(x)) ** 2))
        return math.sqrt(total)

    @classmethod
    def chebyshev(cls, n: int, eps: float) -> "DiskFunction":
        """``T_n(z / eps)`` in the monomial basis."""
        c = np.polynomial.chebyshev.cheb2poly(np.eye(n + 1)[n])
        return cls(c * eps ** -np.arange(n + 1.0))

    @classmethod
    def random(cls, degree: int, rng: np.random.Generator) -> "DiskFunction":
        c = rng.standard_normal(degree + 1) + 1j * rng.standard_normal(degree + 1)
        # geometric damping keeps high and low degrees comparable on B_4
        return cls(c / 2.0 ** np.arange(degree + 1.0))


def default_alpha(measure: float) -> float:
    return 1.0 / (1.0 + math.log(1.0 / measure))


@dataclass
class ThreeBallReport:
    sup2: float  # certified upper bound on B_2
    sup2_sampled: float
    norm_E: float
    sup4: float  # sampled, a lower bound on B_4
    measure: float
    alpha: float
    alpha_star: float  # largest alpha with C = 1
    c_star: float  # smallest C at alpha

    @property
    def envelope(self) -> float:
        return math.e * max(1.0, self.sup2 / self.sup4)

    @property
    def violated(self) -> bool:
        return self.c_star > self.envelope


def three_ball_check(h: DiskFunction, E: SensorSet, alpha: Optional[float] = None,
                     samples: int = 4096) -> ThreeBallReport:
    """``sup_B2 |h| <= C ||h||_E^alpha (sup_B4 |h|)^(1 - alpha)``: feasible alpha and minimal C.

    The B_2 supremum uses the certified upper bound and the B_4 supremum the
    sampled value, so both reported quantities err on the pessimistic side.
    """
    mE = E.measure
    if mE <= 0:
        raise DomainError("sensor set has zero measure", MODULE)
    if E.hull[0] < -1 or E.hull[1] > 1:
        raise DomainError("sensor set must lie in (-1, 1)", MODULE)
    if not np.any(h.coeffs != 0):
        raise DomainError("test function vanishes identically", MODULE)
    s2_sampled, s2 = h.sup_circle(2.0, samples)
    s4, _ = h.sup_circle(4.0, samples)
    N = h.norm_on(E)
    alpha = default_alpha(mE) if alpha is None else alpha
    if N >= s4:
        a_star = 1.0
    elif N == 0:
        a_star = 0.0
    else:
        a_star = min(1.0, max(0.0, math.log(s4 / s2) / math.log(s4 / N)))
    if N == 0:
        c_star = math.inf
    else:
        c_star = math.exp(math.log(s2) - alpha * math.log(N) - (1 - alpha) * math.log(s4))
    return ThreeBallReport(s2, s2_sampled, N, s4, mE, alpha, a_star, c_star)


@dataclass
class TruncationReport:
    level: float
    large: SensorSet  # E_1 = {|h| >= level}
    small_measure: float  # |E_0|
    measure: float

    @property
    def ok(self) -> bool:
        return self.small_measure >= 0.75 * self.measure


def truncation_split(h: DiskFunction, E: SensorSet, samples: int = 2048) -> TruncationReport:
    """Split E at the level ``2 ||h||_E / |E|^(1/2)``; Chebyshev's inequality gives ``|E_0| >= 3|E|/4``."""
    mE = E.measure
    if mE <= 0:
        raise DomainError("sensor set has zero measure", MODULE)
    level = 2.0 * h.norm_on(E) / math.sqrt(mE)
    f = lambda x: float(np.abs(h(x))) - level
    pieces = []
    for a, b in E:
        if b <= a:
            continue
        xs = np.linspace(a, b, samples + 1)
        vals = np.abs(h(xs)) - level
        above = vals >= 0
        start = a if above[0] else None
        for i in range(samples):
            if above[i] != above[i + 1]:
                r = brentq(f, xs[i], xs[i + 1], xtol=1e-15, rtol=1e-15)
                if above[i + 1]:
                    start = r
                else:
                    pieces.append((start, r))
                    start = None
        if start is not None:
            pieces.append((start, b))
    large = SensorSet.from_intervals(pieces)
    return TruncationReport(level, large, mE - large.measure, mE)


def chebyshev_alpha(measure: float, degrees: Sequence[int] = range(1, 17)) -> float:
    """Smallest alpha* over the scaled Chebyshev family on ``E = (-|E|/2, |E|/2)``."""
    eps = 0.5 * measure
    E = SensorSet.from_intervals([(-eps, eps)])
    return min(three_ball_check(DiskFunction.chebyshev(n, eps), E).alpha_star for n in degrees)


# -- multiplier ODE ------------------------------------------------------------------

Profile = Union[Callable[[np.ndarray], np.ndarray], np.ndarray, float]


def _on_nodes(p: Profile, x: np.ndarray) -> np.ndarray:
    if callable(p):
        return np.broadcast_to(np.asarray(p(x), dtype=float), x.shape).copy()
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 0:
        return np.full(x.shape, float(arr))
    if arr.shape != x.shape:
        raise DomainError(f"profile has shape {arr.shape}, expected {x.shape}", MODULE)
    return arr.copy()


@dataclass
class Multiplier:
    x: np.ndarray
    w: np.ndarray
    M: float
    K: float
    deriv_sup: float  # max |w'| on [-4, 4]
    sandwich_defect: float  # worst relative undershoot of e^{(sqrt M + K) x} or overshoot of the cap

    @property
    def rate(self) -> float:
        return math.sqrt(self.M) + self.K

    @property
    def c_empirical(self) -> float:
        """C with ``||w'||_[-4,4] = exp(C (sqrt M + K))``."""
        return math.log(self.deriv_sup) / self.rate if self.deriv_sup > 0 else -math.inf

    def two_sided_ok(self) -> bool:
        cap = math.exp(5 * self.rate)
        return bool(np.all(self.w >= (1 - 1e-6) / cap) and np.all(self.w <= cap * (1 + 1e-6)))


def fitted_spacing(V: np.ndarray, h: float) -> np.ndarray:
    """``V / (2 cosh(sqrt(V) h) - 2)``: equals ``1/h^2`` at V = 0 and makes constant V exact."""
    half = 0.5 * np.sqrt(np.maximum(V, 0.0)) * h
    ratio = np.where(half > 0, half / np.sinh(np.where(half > 0, half, 1.0)), 1.0)
    return ratio ** 2 / h ** 2


def solve_multiplier(V: Profile, W: Profile, M: float, K: float, n: int = 2001,
                     check: bool = True) -> Multiplier:
    """Solve ``-w'' - W w' + V w = 0`` on [-5, 5] with ``w(+-5) = exp(5 (sqrt M + K))``."""
    if M < 1 or K < 1:
        raise DomainError(f"need M, K >= 1, got M={M}, K={K}", MODULE)
    x = np.linspace(-5.0, 5.0, n)
    h = x[1] - x[0]
    v = _on_nodes(V, x)
    wd = _on_nodes(W, x)
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(wd))):
        raise DomainError("coefficients must be finite", MODULE)
    if np.any(v < 0):
        raise DomainError("potential must be nonnegative", MODULE)
    if np.max(v) > M * (1 + 1e-12) or np.max(np.abs(wd)) > K * (1 + 1e-12):
        raise DomainError("bounds M, K do not dominate the coefficients", MODULE)
    rate = math.sqrt(M) + K
    cap = math.exp(5 * rate)
    c = fitted_spacing(v, h)
    # row i: sub*w[i-1] + diag*w[i] + sup*w[i+1]
    sub = -c + wd / (2 * h)
    sup = -c - wd / (2 * h)
    diag = 2 * c + v
    rhs = np.zeros(n)
    sub_i, diag_i, sup_i = sub[1:-1].copy(), diag[1:-1].copy(), sup[1:-1].copy()
    rhs_i = rhs[1:-1]
    rhs_i[0] -= sub_i[0] * cap
    rhs_i[-1] -= sup_i[-1] * cap
    inner = thomas(sub_i, diag_i, sup_i, rhs_i)
    w = np.concatenate([[cap], inner, [cap]])
    sub_floor = np.exp(rate * x)
    with np.errstate(over="ignore"):
        defect = float(max(np.max((sub_floor - w) / sub_floor), np.max((w - cap) / cap)))
    if check and not defect <= 1e-6:
        raise NumericalError(f"multiplier sandwich violated by {defect:.3e} (grid too coarse?)",
                             MODULE)
    dw = np.gradient(w, h, edge_order=2)
    inside = np.abs(x) <= 4.0 + 1e-12
    return Multiplier(x, w, float(M), float(K), float(np.max(np.abs(dw[inside]))), defect)


# -- stream function -----------------------------------------------------------------

def _cumtrapz_from(values: np.ndarray, step: float, origin: int, axis: int) -> np.ndarray:
    """Trapezoid antiderivative along ``axis`` vanishing at index ``origin``."""
    v = np.moveaxis(values, axis, 0)
    seg = 0.5 * step * (v[1:] + v[:-1])
    out = np.zeros_like(v)
    out[origin + 1:] = np.cumsum(seg[origin:], axis=0)
    out[:origin] = -np.cumsum(seg[:origin][::-1], axis=0)[::-1]
    return np.moveaxis(out, 0, axis)


@dataclass
class StreamResult:
    u2: np.ndarray  # path: x = 0 column first, then rows
    u2_alt: np.ndarray  # path: y = 0 row first, then columns
    residual: float
    line_max: float  # max |u2| on y = 0


def stream_function(u1: np.ndarray, x: np.ndarray, y: np.ndarray, w: np.ndarray,
                    W: np.ndarray) -> StreamResult:
    """Integrate ``d_y u2 = w^2 (d_x u1 - W u1)``, ``-d_x u2 = w^2 d_y u1`` with ``u2(0,0) = 0``.

    Both path orders are computed; their gap measures path independence,
    which holds when ``div(w^2 (grad u1 - (W, 0) u1)) = 0``.
    """
    hx, hy = x[1] - x[0], y[1] - y[0]
    i0 = int(np.argmin(np.abs(x)))
    j0 = int(np.argmin(np.abs(y)))
    if abs(x[i0]) > 1e-12 * hx or abs(y[j0]) > 1e-12 * hy:
        raise DomainError("the origin must be a grid node", MODULE)
    w2 = (np.asarray(w, dtype=float) ** 2)[:, None]
    Wc = np.asarray(W, dtype=float)[:, None]
    ux = np.gradient(u1, hx, axis=0, edge_order=2)
    uy = np.gradient(u1, hy, axis=1, edge_order=2)
    dy_u2 = w2 * (ux - Wc * u1)
    dx_u2 = -w2 * uy
    col = _cumtrapz_from(dy_u2[i0], hy, j0, 0)
    path1 = col[None, :] + _cumtrapz_from(dx_u2, hx, i0, 0)
    row = _cumtrapz_from(dx_u2[:, j0], hx, i0, 0)
    path2 = row[:, None] + _cumtrapz_from(dy_u2, hy, j0, 1)
    return StreamResult(path1, path2, float(np.max(np.abs(path1 - path2))),
                        float(np.max(np.abs(path1[:, j0]))))


# -- Cauchy uniqueness ---------------------------------------------------------------

@dataclass
class CauchyReport:
    lhs: float  # ||u||_{L2(B2)}
    norm_E: float
    norm_B4: float
    alpha: float
    M: float
    K: float
    required_C: float  # smallest C with lhs <= e^{C (sqrt M + K)} norm_E^alpha norm_B4^(1-alpha)

    @property
    def rate(self) -> float:
        return math.sqrt(self.M) + self.K


def cauchy_alpha(measure: float, c1: float) -> float:
    return 1.0 / (c1 + c1 * math.log(1.0 / measure))


def required_constant(lhs: float, norm_E: float, norm_B4: float, alpha: float, rate: float) -> float:
    return (math.log(lhs) - alpha * math.log(norm_E) - (1 - alpha) * math.log(norm_B4)) / rate


def cauchy_uniqueness_check(u: np.ndarray, x: np.ndarray, y: np.ndarray, E: SensorSet,
                            M: float, K: float = 1.0, c1: float = 2.0,
                            alpha: Optional[float] = None) -> CauchyReport:
    """Evaluate the three norms of ``u`` (given on box nodes) and the minimal exponent constant.

    Disk norms use the nodes inside the disk with cell area ``hx * hy``; the
    line norm uses the row y = 0 with exact cell overlaps of E.
    """
    mE = E.measure
    if mE <= 0:
        raise DomainError("sensor set has zero measure", MODULE)
    hx, hy = x[1] - x[0], y[1] - y[0]
    R2 = x[:, None] ** 2 + y[None, :] ** 2
    sq = u * u
    n4 = math.sqrt(hx * hy * float(np.sum(sq[R2 < 16.0])))
    if n4 == 0:
        raise DomainError("field vanishes on B_4", MODULE)
    n2 = math.sqrt(hx * hy * float(np.sum(sq[R2 < 4.0])))
    j0 = int(np.argmin(np.abs(y)))
    wts = E.measure_in(x - 0.5 * hx, x + 0.5 * hx)
    nE = math.sqrt(float(np.sum(wts * sq[:, j0])))
    if nE == 0:
        raise DomainError("field vanishes on E", MODULE)
    a = cauchy_alpha(mE, c1) if alpha is None else alpha
    rate = math.sqrt(M) + K
    return CauchyReport(n2, nE, n4, a, M, K, required_constant(n2, nE, n4, a, rate))


# -- lifted eigenfunction sums as test fields -------------------------------------------

def lifted_box(sub, coeffs, xc: float, half: float = 5.0):
    """Lift of ``sum e_k phi_k`` on the square of half-width ``half`` centred at ``(xc, 0)``.

    Returns ``(u, X, Y, M)`` in local coordinates, with ``M = max V`` over the box
    (at least 1).  The y axis reuses the x spacing so the square stays square.
    """
    g = sub.grid
    e = np.asarray(coeffs, dtype=float)
    i0 = int(g.index_of(xc))
    k = int(round(half / g.h))
    if i0 - k < 0 or i0 + k >= g.n:
        raise DomainError(f"box around x={xc:g} of half-width {half:g} leaves [-{g.half_width:g}, "
                          f"{g.half_width:g}]", MODULE)
    idx = np.arange(i0 - k, i0 + k + 1)
    X = g.nodes[idx] - g.nodes[i0]
    Y = g.h * np.arange(-k, k + 1)
    a = np.sqrt(sub.values)
    u = sub.vectors[idx] @ (e[:, None] * np.cosh(np.outer(a, Y)))
    return u, X, Y, max(float(np.max(sub.potential[idx])), 1.0)


@dataclass
class LemmaRow:
    lam: float
    M: float
    K: float
    required_C: float  # worst over the tested coefficient vectors
    n_vectors: int


def lemma_sweep(sub, lams: Sequence[float], E: SensorSet, n_vectors: int = 5, seed: int = 0,
                c1: float = 2.0, K: float = 1.0) -> list:
    """Worst required constant per level for random vectors plus the top mode.

    The box sits at the turning point ``x = sqrt(lambda)`` for power-type
    potentials, where the lifted field changes from oscillation to growth.
    """
    out = []
    for lam in lams:
        s = sub.truncate(lam)
        rng = np.random.default_rng([seed, int(round(lam * 1000))])
        vecs = [v / np.linalg.norm(v) for v in rng.standard_normal((n_vectors, s.m))]
        vecs.append(np.eye(s.m)[-1])
        xc = float(np.sqrt(max(s.values[-1], 0.0)))
        worst, M = -math.inf, 1.0
        for e in vecs:
            u, X, Y, M = lifted_box(s, e, xc)
            worst = max(worst, cauchy_uniqueness_check(u, X, Y, E, M, K, c1).required_C)
        out.append(LemmaRow(float(lam), M, K, worst, len(vecs)))
    return out


def shrinking_set(sub, lam: float, measures: Sequence[float], c1: float = 2.0,
                  K: float = 1.0) -> list:
    """Required constant of the top mode at level ``lam`` for ``E = (-|E|/2, |E|/2)``."""
    s = sub.truncate(lam)
    u, X, Y, M = lifted_box(s, np.eye(s.m)[-1], float(np.sqrt(s.values[-1])))
    rows = []
    for m in measures:
        E = SensorSet.from_intervals([(-0.5 * m, 0.5 * m)])
        rows.append(cauchy_uniqueness_check(u, X, Y, E, M, K, c1))
    return rows
