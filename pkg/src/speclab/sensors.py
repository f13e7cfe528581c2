"""Sensor sets as finite interval unions, thickness checks and partitions.

A set is (s, tau)-thick with constants (D, gamma) when every window
``[x - r, x + r]`` with ``r = D <x>^s`` holds measure at least
``gamma^(<x>^tau) * 2r``, where ``<x> = sqrt(1 + x^2)``.  For s < 1 the same
property is equivalent to a lower bound on each cell of the partition
``x_n = a n^(1/(1-s))``; the recipes below turn constants of one form into
constants of the other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DomainError

MODULE = "sensor_sets"
_EPS = np.finfo(float).eps


def japanese(x):
    return np.sqrt(1.0 + np.asarray(x, dtype=float) ** 2)


@dataclass(frozen=True)
class SensorSet:
    """Sorted, pairwise disjoint closed intervals ``[a_i, b_i]`` with ``b_i < a_{i+1}``."""

    intervals: tuple = ()

    @classmethod
    def from_intervals(cls, pairs: Iterable[Sequence[float]]) -> "SensorSet":
        items = []
        for p in pairs:
            a, b = float(p[0]), float(p[1])
            if not (math.isfinite(a) and math.isfinite(b)) or b < a:
                raise DomainError(f"bad interval [{a!r}, {b!r}]", MODULE)
            items.append((a, b))
        items.sort()
        merged = []
        for a, b in items:
            # touching closed intervals share a point and are merged
            if merged and a <= merged[-1][1]:
                if b > merged[-1][1]:
                    merged[-1] = (merged[-1][0], b)
            else:
                merged.append((a, b))
        return cls(tuple(merged))

    @classmethod
    def empty(cls) -> "SensorSet":
        return cls(())

    def __len__(self):
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    @property
    def starts(self) -> np.ndarray:
        return np.array([a for a, _ in self.intervals], dtype=float)

    @property
    def ends(self) -> np.ndarray:
        return np.array([b for _, b in self.intervals], dtype=float)

    @property
    def measure(self) -> float:
        return math.fsum(b - a for a, b in self.intervals)

    @property
    def hull(self):
        if not self.intervals:
            return None
        return self.intervals[0][0], self.intervals[-1][1]

    def clip(self, lo: float, hi: float) -> "SensorSet":
        out = []
        for a, b in self.intervals:
            a2, b2 = max(a, lo), min(b, hi)
            if a2 <= b2:
                out.append((a2, b2))
        return SensorSet(tuple(out))

    def union(self, other: "SensorSet") -> "SensorSet":
        return SensorSet.from_intervals(self.intervals + other.intervals)

    def intersection(self, other: "SensorSet") -> "SensorSet":
        out, i, j = [], 0, 0
        A, B = self.intervals, other.intervals
        while i < len(A) and j < len(B):
            a = max(A[i][0], B[j][0])
            b = min(A[i][1], B[j][1])
            if a <= b:
                out.append((a, b))
            if A[i][1] < B[j][1]:
                i += 1
            else:
                j += 1
        return SensorSet.from_intervals(out)

    def issubset(self, other: "SensorSet") -> bool:
        return self.intersection(other).intervals == self.intervals

    def drop_null(self) -> "SensorSet":
        return SensorSet(tuple((a, b) for a, b in self.intervals if b > a))

    def cumulative(self, x) -> np.ndarray:
        """``|omega ∩ (-inf, x]|`` for every entry of ``x``."""
        x = np.asarray(x, dtype=float)
        if not self.intervals:
            return np.zeros_like(x)
        A, B = self.starts, self.ends
        prefix = np.concatenate([[0.0], np.cumsum(B - A)])
        j = np.searchsorted(A, x, side="right") - 1
        jc = np.clip(j, 0, None)
        inside = np.clip(x - A[jc], 0.0, B[jc] - A[jc])
        return np.where(j < 0, 0.0, prefix[jc] + inside)

    def measure_in(self, lo, hi) -> np.ndarray:
        """``|omega ∩ [lo, hi]|`` elementwise (zero when hi < lo)."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        return np.maximum(self.cumulative(hi) - self.cumulative(lo), 0.0)

    def to_list(self):
        return [[a, b] for a, b in self.intervals]


# -- generators --------------------------------------------------------------

def _check_delta(delta, p):
    if not (0 < delta <= 1):
        raise DomainError(f"delta must lie in (0, 1], got {delta!r}", MODULE)
    if not p > 0:
        raise DomainError(f"period must be positive, got {p!r}", MODULE)


def periodic(p: float, delta: float, window) -> SensorSet:
    """Union of ``[k p, k p + delta p]`` clipped to the window."""
    _check_delta(delta, p)
    lo, hi = window
    ks = np.arange(math.floor(lo / p) - 1, math.ceil(hi / p) + 1)
    pieces = [(k * p, k * p + delta * p) for k in ks]
    return SensorSet.from_intervals(pieces).clip(lo, hi).drop_null()


def balls(tau: float, window) -> SensorSet:
    """Union of ``[j - r_j, j + r_j]`` with ``r_j = 2^-(1 + |j|^tau)``."""
    if tau < 0:
        raise DomainError(f"tau must be >= 0, got {tau!r}", MODULE)
    lo, hi = window
    js = np.arange(math.floor(lo) - 1, math.ceil(hi) + 2)
    r = 2.0 ** -(1.0 + np.abs(js).astype(float) ** tau)
    if tau == 0:
        r = np.full(js.shape, 0.25)
    return SensorSet.from_intervals(zip(js - r, js + r)).clip(lo, hi).drop_null()


def random_thick(p: float, delta: float, seed: int, window) -> SensorSet:
    """One interval of length ``delta p`` placed uniformly inside each cell ``[k p, (k+1) p]``."""
    _check_delta(delta, p)
    lo, hi = window
    ks = np.arange(math.floor(lo / p) - 1, math.ceil(hi / p) + 1)
    rng = np.random.default_rng(seed)
    offs = rng.uniform(0.0, (1.0 - delta) * p, size=ks.size)
    starts = ks * p + offs
    return SensorSet.from_intervals(zip(starts, starts + delta * p)).clip(lo, hi).drop_null()


def explicit(pairs) -> SensorSet:
    return SensorSet.from_intervals(pairs)


def generate(kind: str, window, **params) -> SensorSet:
    if kind == "periodic":
        return periodic(params["p"], params["delta"], window)
    if kind == "balls":
        return balls(params.get("tau", 0.0), window)
    if kind == "random_thick":
        return random_thick(params["p"], params["delta"], params.get("seed", 0), window)
    if kind == "explicit":
        return explicit(params["intervals"]).clip(*window)
    raise DomainError(f"unknown sensor generator {kind!r}", MODULE)


# -- direct thickness ----------------------------------------------------------

@dataclass(frozen=True)
class ThicknessParams:
    s: float
    tau: float
    gamma: float
    D: float

    def __post_init__(self):
        if self.s > 1 or self.tau < 0 or not (0 < self.gamma < 1) or self.D <= 0:
            raise DomainError(f"invalid thickness parameters {self}", MODULE)


@dataclass
class MarginReport:
    points: np.ndarray  # centres or cell indices
    margins: np.ndarray
    required: np.ndarray
    vacuous: int = 0
    step: Optional[float] = None
    lipschitz: Optional[float] = None
    tol: float = 0.0  # rounding allowance of the measure arithmetic
    extra: dict = field(default_factory=dict)

    @property
    def min_margin(self) -> float:
        return float(np.min(self.margins)) if self.margins.size else math.inf

    @property
    def passed(self) -> bool:
        return bool(np.all(self.margins >= -self.tol))

    @property
    def certified(self) -> Optional[bool]:
        """True when the minimum margin exceeds the worst drift between centres."""
        if self.step is None or self.lipschitz is None:
            return None
        return self.min_margin >= 0.5 * self.step * self.lipschitz

    def rows(self):
        return list(zip(self.points.tolist(), self.margins.tolist()))


def decay_factor(gamma: float, x, tau: float) -> np.ndarray:
    """``gamma^(<x>^tau)`` computed as ``exp(<x>^tau log gamma)``; underflow gives 0."""
    with np.errstate(under="ignore"):
        return np.exp(japanese(x) ** tau * math.log(gamma))


def center_grid(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(math.floor((hi - lo) / step + 1e-9))
    return lo + step * np.arange(n + 1)


def is_thick_direct(omega: SensorSet, p: ThicknessParams, centers) -> MarginReport:
    c = np.asarray(centers, dtype=float)
    if c.size == 0:
        raise DomainError("empty center list", MODULE)
    r = p.D * japanese(c) ** p.s
    factor = decay_factor(p.gamma, c, p.tau)
    need = factor * 2 * r
    margins = omega.measure_in(c - r, c + r) - need
    step = float(np.max(np.diff(np.sort(c)))) if c.size > 1 else 0.0
    sup_rho = float(np.max(japanese(c) ** (p.s - 1)))
    lip = 2.0 * (1.0 + p.D * abs(p.s) * sup_rho)
    tol = 16 * _EPS * float(np.max(np.abs(c) + r))
    return MarginReport(c, margins, need, int(np.sum(factor == 0.0)), step, lip, tol)


# -- partitions ------------------------------------------------------------------

@dataclass(frozen=True)
class Partition:
    """Breakpoints ``x_n = a n^(1/(1-s))`` for ``0 <= n <= N``.

    Cells are ``I_0 = (-x_1, x_1)``, ``I_n = (x_n, x_{n+1})`` and
    ``I_{-n} = -I_n`` for ``1 <= n <= N - 1``.
    """

    a: float
    s: float
    points: np.ndarray

    @property
    def N(self) -> int:
        return self.points.size - 1

    def cells(self):
        """Arrays ``(index, left, right, anchor)`` with anchor ``x_n`` (signed)."""
        x = self.points
        pos = np.arange(1, self.N)
        idx = np.concatenate([-pos[::-1], [0], pos])
        left = np.concatenate([-x[pos + 1][::-1], [-x[1]], x[pos]])
        right = np.concatenate([-x[pos][::-1], [x[1]], x[pos + 1]])
        anchor = np.concatenate([-x[pos][::-1], [0.0], x[pos]])
        return idx, left, right, anchor

    @property
    def reach(self) -> float:
        return float(self.points[-1])


def partition_points(a: float, s: float, N: int) -> Partition:
    if not a > 0:
        raise DomainError(f"partition scale must be positive, got {a!r}", MODULE)
    if s >= 1:
        raise DomainError(f"partition form needs s < 1, got s={s!r}", MODULE)
    if int(N) != N or N < 1:
        raise DomainError(f"N must be a positive integer, got {N!r}", MODULE)
    n = np.arange(int(N) + 1, dtype=float)
    pts = a * n ** (1.0 / (1.0 - s))
    return Partition(float(a), float(s), pts)


def partition_for_window(a: float, s: float, half_width: float) -> Partition:
    """Largest partition whose breakpoints stay inside ``[-half_width, half_width]``."""
    N = int(math.floor((half_width / a) ** (1.0 - s) + 1e-12))
    if N < 2:
        raise DomainError(f"window {half_width:g} too small for scale a={a:g}", MODULE)
    return partition_points(a, s, N)


def is_thick_partition(omega: SensorSet, part: Partition, tau: float, gamma1: float) -> MarginReport:
    idx, left, right, anchor = part.cells()
    length = right - left
    factor = decay_factor(gamma1, anchor, tau)
    need = factor * length
    margins = omega.measure_in(left, right) - need
    tol = 16 * _EPS * float(np.max(np.abs(left) + np.abs(right)))
    return MarginReport(idx.astype(float), margins, need, int(np.sum(factor == 0.0)), tol=tol)


def overlap_multiplicity(part: Partition, A: float = 4.0) -> int:
    """Largest number of dilated cells ``A I_n`` (about their centres) sharing a point."""
    _, left, right, _ = part.cells()
    c, half = 0.5 * (left + right), 0.5 * A * (right - left)
    # open intervals: at a shared coordinate, closings are processed first
    events = sorted([(x, 1) for x in c - half] + [(x, -1) for x in c + half],
                    key=lambda t: (t[0], t[1]))
    best = cur = 0
    for _, kind in events:
        cur += kind
        best = max(best, cur)
    return best


# -- constant recipes ------------------------------------------------------------------

@dataclass(frozen=True)
class PartitionConstants:
    a: float
    gamma1: float
    gamma0: float
    gamma_star: float


def direct_to_partition(p: ThicknessParams, N: int, max_a: float = 1e6) -> PartitionConstants:
    """Partition constants implied by direct (s, tau)-thickness.

    ``a`` is the first multiple ``k max(1, D)``, ``k >= 2``, whose midpoint
    windows fit inside their cells; the cell lower bound then follows from the
    window centred at each midpoint, and the centre cell from the window at 0.
    """
    base = max(1.0, p.D)
    k = 2
    while True:
        a = k * base
        part = partition_points(a, p.s, N)
        x = part.points
        y = 0.5 * (x[1:-1] + x[2:])
        gaps = x[2:] - x[1:-1]
        if np.all(p.D * japanese(y) ** p.s < 0.5 * gaps):
            break
        k += 1
        if a > max_a:
            raise DomainError("no admissible partition scale found", MODULE)
    gamma0 = p.D * p.gamma / a
    c = float(np.min(2 * p.D * japanese(y) ** p.s / gaps))
    gamma_star = min(1.0, c) * p.gamma ** (2.0 ** (p.tau / (1.0 - p.s)))
    return PartitionConstants(a, min(gamma0, gamma_star), gamma0, gamma_star)


def partition_midpoints(part: Partition) -> np.ndarray:
    x = part.points
    y = 0.5 * (x[1:-1] + x[2:])
    return np.concatenate([-y[::-1], [0.0], y])


def partition_to_direct(part: Partition, tau: float, gamma1: float) -> ThicknessParams:
    """Direct constants (D, gamma) implied by the partition bound.

    D makes every window centred in a cell cover that cell, including the
    centre cell; gamma shrinks gamma1 by the worst ratio of cell length to
    window length.
    """
    s, a = part.s, part.a
    x = part.points
    lo_rho = np.minimum(japanese(x[1:-1]) ** s, japanese(x[2:]) ** s)
    hi_rho = np.maximum(japanese(x[1:-1]) ** s, japanese(x[2:]) ** s)
    gaps = x[2:] - x[1:-1]
    rho0_min = min(1.0, float(japanese(a) ** s))
    rho0_max = max(1.0, float(japanese(a) ** s))
    D = max(float(np.max(gaps / lo_rho)), 2.0 * a / rho0_min) * (1 + 1e-12)
    b = float(np.min(gaps / (2.0 * D * hi_rho)))
    gamma_star = b * gamma1
    gamma0 = gamma1 * a / (D * rho0_max)
    gamma = min(gamma_star, gamma0, 0.5 - 1e-12)
    return ThicknessParams(s, tau, gamma, D)


# -- s = 1 ---------------------------------------------------------------------------

@dataclass
class S1Report:
    passed: bool
    tau: float
    measure: float
    margins: Optional[np.ndarray] = None  # tau = 0: per n
    ns: Optional[np.ndarray] = None
    gamma1_max: Optional[float] = None
    gamma: Optional[float] = None  # tau > 0: gamma from the g(t) maximisation
    D: Optional[float] = None
    half_mass_radius: Optional[float] = None
    note: str = ""


def g_max(gamma: float, N: float) -> float:
    """``max_{t >= 1} gamma^t t^N``."""
    L = math.log(1.0 / gamma)
    t_star = N / L
    if t_star >= 1.0:
        return math.exp(N * math.log(N) - N * math.log(L) - N)
    return gamma


def half_mass_radius(omega: SensorSet) -> float:
    m = omega.measure
    hi = max(abs(omega.hull[0]), abs(omega.hull[1]))
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(omega.measure_in(-mid, mid)) >= 0.5 * m:
            hi = mid
        else:
            lo = mid
    return hi


def is_thick_s1(omega: SensorSet, tau: float, gamma1: float = 0.1, n0: int = 1,
                N: Optional[int] = None) -> S1Report:
    """(1, tau)-thickness.

    tau = 0 checks ``|omega ∩ (-n, n)| >= gamma1 n`` for ``n0 <= n <= N``.
    tau > 0 reduces to positive measure; the report carries a working
    ``gamma`` and ``D = C + 1`` with C the half-mass radius.
    """
    m = omega.measure
    if tau == 0:
        if N is None:
            hull = omega.hull or (0.0, 0.0)
            N = max(n0, int(math.floor(max(abs(hull[0]), abs(hull[1])))))
        ns = np.arange(n0, N + 1, dtype=float)
        meas = omega.measure_in(-ns, ns)
        margins = meas - gamma1 * ns
        g1 = float(np.min(meas / ns)) if ns.size else 0.0
        return S1Report(bool(np.all(margins >= 0)), tau, m, margins, ns, gamma1_max=g1)
    if m <= 0:
        return S1Report(False, tau, m, note="zero measure")
    C = half_mass_radius(omega)
    Nexp = 1.0 / tau
    target = m / (2.0 * (C + 1.0))
    # g_max decreases as gamma shrinks; bisect log(1/gamma) above log 2
    lo, hi = math.log(2.0), math.log(2.0)
    while g_max(math.exp(-hi), Nexp) > target:
        hi *= 2.0
    if g_max(math.exp(-lo), Nexp) <= target:
        gamma = 0.5 * (1 - 1e-12)
    else:
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if g_max(math.exp(-mid), Nexp) <= target:
                hi = mid
            else:
                lo = mid
        gamma = math.exp(-hi)
    return S1Report(True, tau, m, gamma=gamma, D=C + 1.0, half_mass_radius=C)


# -- equivalence battery ---------------------------------------------------------------

@dataclass
class EquivalenceReport:
    direct: MarginReport
    partition: MarginReport
    back: MarginReport  # direct form with constants recovered from the partition
    constants: PartitionConstants
    back_params: ThicknessParams
    multiplicity: int

    @property
    def consistent(self) -> bool:
        """Both implications hold: direct => partition => direct."""
        fwd = (not self.direct.passed) or self.partition.passed
        bwd = (not self.partition.passed) or self.back.passed
        return fwd and bwd

    @property
    def agree(self) -> bool:
        return self.direct.passed and self.partition.passed and self.back.passed


def _inner_centers(lo: float, hi: float, D: float, s: float, step: float) -> np.ndarray:
    c = center_grid(lo, hi, step)
    r = D * japanese(c) ** s
    return c[(c - r >= lo) & (c + r <= hi)]


def check_equivalence(omega: SensorSet, p: ThicknessParams, half_width: float, N: int = 40,
                      step: float = 0.01) -> EquivalenceReport:
    """Run direct => partition => direct on ``[-half_width, half_width]``.

    Direct centres lie on a grid of spacing ``step`` plus the partition
    midpoints, restricted so every window stays inside the partition's reach.
    """
    pc = direct_to_partition(p, N)
    part = partition_for_window(pc.a, p.s, half_width)
    reach = part.reach
    c = np.concatenate([_inner_centers(-reach, reach, p.D, p.s, step), partition_midpoints(part)])
    c = c[np.abs(c) + p.D * japanese(c) ** p.s <= reach]
    direct = is_thick_direct(omega, p, np.unique(c))
    prt = is_thick_partition(omega, part, p.tau, pc.gamma1)
    back_p = partition_to_direct(part, p.tau, pc.gamma1)
    back = is_thick_direct(omega, back_p, _inner_centers(-reach, reach, back_p.D, p.s, step))
    return EquivalenceReport(direct, prt, back, pc, back_p, overlap_multiplicity(part))
