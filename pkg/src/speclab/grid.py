"""Discretization lattice and admissible potential families.

A :class:`PotentialSpec` bundles a potential ``V`` with two nondecreasing
weights ``lower`` and ``upper`` such that ``lower(|x|) <= V(x) <= upper(|x|)``.
The catalog constructors below cover power-law pairs and the three
faster/slower-than-polynomial weight pairs, each carrying the growth exponent
``kappa`` predicted for thick sensor sets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, PotentialError

Weight = Callable[[np.ndarray], np.ndarray]

# 10 e^{-2r+2} <= AGMON_TAIL makes the discarded eigenfunction mass negligible
AGMON_TAIL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform lattice ``x_i = -L + i h`` on ``[-L, L]`` with an odd node count."""

    half_width: float
    n: int

    def __post_init__(self):
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise DomainError(f"half_width must be positive and finite, got {self.half_width!r}",
                              "grid_potential")
        if int(self.n) != self.n or self.n < 3 or self.n % 2 == 0:
            raise DomainError(f"point count must be an odd integer >= 3, got {self.n!r}",
                              "grid_potential")

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        # built from the centre outwards so the lattice is exactly symmetric
        half = self.h * np.arange((self.n - 1) // 2 + 1, dtype=float)
        half[-1] = self.half_width
        return np.concatenate([-half[:0:-1], half])

    @property
    def center_index(self) -> int:
        return (self.n - 1) // 2

    def coordinate(self, i):
        return -self.half_width + np.asarray(i) * self.h

    def index_of(self, x):
        return np.rint((np.asarray(x, dtype=float) + self.half_width) / self.h).astype(int)

    def refined(self) -> "Grid":
        """Same box, half the spacing."""
        return Grid(self.half_width, 2 * self.n - 1)


def make_grid(L: float, n: int) -> Grid:
    return Grid(float(L), n)


@dataclass(frozen=True)
class PotentialSpec:
    name: str
    V: Callable[[np.ndarray], np.ndarray]
    lower: Weight
    upper: Weight
    power: Optional[tuple] = None  # (c1, beta1, c2, beta2)
    kappa: Optional[float] = None
    metadata: dict = field(default_factory=dict)

    def __call__(self, x):
        return np.asarray(self.V(np.asarray(x, dtype=float)), dtype=float)

    @property
    def beta1(self):
        return None if self.power is None else self.power[1]

    @property
    def beta2(self):
        return None if self.power is None else self.power[3]


def _check_weights(lower: Weight, upper: Weight, name: str, t_max: float = 1e4):
    t = np.concatenate([[0.0], np.geomspace(1e-6, t_max, 400)])
    with np.errstate(over="ignore", invalid="ignore"):
        lo, up = np.asarray(lower(t), float), np.asarray(upper(t), float)
    keep = np.isfinite(lo) & np.isfinite(up)
    t, lo, up = t[keep], lo[keep], up[keep]
    if np.any(np.diff(lo) < -1e-12 * np.abs(lo[1:])) or np.any(np.diff(up) < -1e-12 * np.abs(up[1:])):
        raise DomainError(f"{name}: weights must be nondecreasing", "grid_potential")
    bad = lo > up * (1 + 1e-12)
    if np.any(bad):
        t_bad = t[np.argmax(bad)]
        raise DomainError(f"{name}: lower weight exceeds upper weight at t={t_bad:g}",
                          "grid_potential")


def sample_potential(spec: PotentialSpec, grid: Grid, rtol: float = 1e-12) -> np.ndarray:
    """Potential values at the grid nodes, with the weight sandwich rechecked nodewise."""
    x = grid.nodes
    v = spec(x)
    if v.shape != x.shape:
        raise PotentialError(f"{spec.name}: evaluator returned shape {v.shape}, expected {x.shape}")
    bad = ~np.isfinite(v)
    if bad.any():
        i = int(np.argmax(bad))
        raise PotentialError(f"{spec.name}: non-finite value at node {i} (x={x[i]:.6g})", i, x[i])
    t = np.abs(x)
    lo = np.asarray(spec.lower(t), float)
    up = np.asarray(spec.upper(t), float)
    below = lo > v + rtol * np.abs(v) + 1e-300
    above = v > up + rtol * np.abs(up) + 1e-300
    if below.any():
        i = int(np.argmax(below))
        raise PotentialError(
            f"{spec.name}: V(x)={v[i]:.6g} below lower weight {lo[i]:.6g} at node {i} (x={x[i]:.6g})",
            i, x[i])
    if above.any():
        i = int(np.argmax(above))
        raise PotentialError(
            f"{spec.name}: V(x)={v[i]:.6g} above upper weight {up[i]:.6g} at node {i} (x={x[i]:.6g})",
            i, x[i])
    return v


def weight_inverse(weight: Weight, value: float, t_cap: float = 1e12) -> float:
    """Smallest ``t >= 0`` with ``weight(t) >= value`` for a nondecreasing weight.

    Raises :class:`DomainError` when the weight stays below ``value``.
    """
    f = lambda t: float(np.asarray(weight(np.array([t], float)))[0])
    if f(0.0) >= value:
        return 0.0
    hi = 1.0
    while f(hi) < value:
        hi *= 2.0
        if hi > t_cap:
            raise DomainError(f"potential does not confine: weight stays below {value:g}",
                              "grid_potential")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if f(mid) >= value:
            hi = mid
        else:
            lo = mid
    return hi


def agmon_padding(tail: float = AGMON_TAIL) -> float:
    """Width r with ``10 exp(-2r + 2) = tail``."""
    return 1.0 + 0.5 * math.log(10.0 / tail)


def choose_truncation(spec: PotentialSpec, lam_max: float, margin: float = 2.0,
                      tail: float = AGMON_TAIL) -> float:
    phi0 = float(np.asarray(spec.lower(np.array([0.0])))[0])
    if not lam_max > phi0:
        raise DomainError(f"lam_max={lam_max:g} must exceed lower weight at 0 ({phi0:g})",
                          "grid_potential")
    return weight_inverse(spec.lower, lam_max + margin) + agmon_padding(tail)


def auto_grid(spec: PotentialSpec, lam_max: float, margin: float = 2.0,
              points_per_wavelength: float = 40.0, max_h: float = 0.02) -> Grid:
    """Truncated grid resolving oscillations up to energy ``lam_max``."""
    L = choose_truncation(spec, lam_max, margin)
    h = min(max_h, 2 * math.pi / (points_per_wavelength * math.sqrt(max(lam_max, 1.0))))
    n = int(math.ceil(2 * L / h)) + 1
    if n % 2 == 0:
        n += 1
    return Grid(L, n)


# -- catalog -----------------------------------------------------------------

def _abs(x):
    return np.abs(np.asarray(x, dtype=float))


def harmonic(omega2: float = 1.0) -> PotentialSpec:
    """``V = omega2 x^2``; weights equal V, so the lower weight vanishes at 0."""
    f = lambda t: omega2 * np.asarray(t, float) ** 2
    return PotentialSpec("harmonic", lambda x: omega2 * np.asarray(x, float) ** 2, f, f,
                         power=(omega2, 2.0, omega2, 2.0), kappa=0.5,
                         metadata={"V_choice": "exact", "lower_at_zero": 0.0})


def power(c: float, beta: float) -> PotentialSpec:
    if c <= 0 or beta <= 0:
        raise DomainError("power: c and beta must be positive", "grid_potential")
    f = lambda t: c * (np.asarray(t, float) + 1.0) ** beta
    return PotentialSpec(f"power(c={c:g},beta={beta:g})", lambda x: f(_abs(x)), f, f,
                         power=(c, beta, c, beta), kappa=0.5, metadata={"V_choice": "exact"})


def power_pair(c1: float, beta1: float, c2: float, beta2: float, theta: float = 0.0) -> PotentialSpec:
    """``c1 (t+1)^beta1 <= V <= c2 (t+1)^beta2``.

    ``V = lower^(1-theta) upper^theta``; ``theta=0`` puts V on the lower weight.
    """
    if min(c1, beta1, c2, beta2) <= 0 or beta2 < beta1 or c2 < c1:
        raise DomainError("power_pair: need positive parameters, beta2 >= beta1, c2 >= c1",
                          "grid_potential")
    if not 0.0 <= theta <= 1.0:
        raise DomainError("power_pair: theta must lie in [0, 1]", "grid_potential")
    lo = lambda t: c1 * (np.asarray(t, float) + 1.0) ** beta1
    up = lambda t: c2 * (np.asarray(t, float) + 1.0) ** beta2
    V = lambda x: lo(_abs(x)) ** (1 - theta) * up(_abs(x)) ** theta
    return check_catalog_spec(PotentialSpec(
        f"power_pair({c1:g},{beta1:g},{c2:g},{beta2:g})", V, lo, up,
        power=(c1, beta1, c2, beta2), kappa=beta2 / (2 * beta1),
        metadata={"V_choice": "lower" if theta == 0 else f"theta={theta:g}"}))


def stretched_exp(c1: float, a1: float, c2: float, a2: float, gamma: float) -> PotentialSpec:
    """Weights ``c exp(a t^gamma)`` with ``gamma < 1``; V sits on the lower weight."""
    if not (0 < gamma < 1) or min(c1, a1) <= 0 or c2 < c1 or a2 < a1:
        raise DomainError("stretched_exp: need 0<gamma<1, c2>=c1>0, a2>=a1>0", "grid_potential")
    lo = lambda t: c1 * np.exp(a1 * np.asarray(t, float) ** gamma)
    up = lambda t: c2 * np.exp(a2 * np.asarray(t, float) ** gamma)
    return check_catalog_spec(PotentialSpec(
        f"stretched_exp(gamma={gamma:g})", lambda x: lo(_abs(x)), lo, up,
        kappa=a2 / (2 * a1), metadata={"V_choice": "lower"}))


def exp_log_power(c1: float, d1: float, c2: float, d2: float, delta: float) -> PotentialSpec:
    """Weights ``c exp(d log^delta(t+1))``."""
    if delta <= 0 or min(c1, d1) <= 0 or c2 < c1 or d2 < d1:
        raise DomainError("exp_log_power: need delta>0, c2>=c1>0, d2>=d1>0", "grid_potential")
    lo = lambda t: c1 * np.exp(d1 * np.log1p(np.asarray(t, float)) ** delta)
    up = lambda t: c2 * np.exp(d2 * np.log1p(np.asarray(t, float)) ** delta)
    return check_catalog_spec(PotentialSpec(
        f"exp_log_power(delta={delta:g})", lambda x: lo(_abs(x)), lo, up,
        kappa=d2 / (2 * d1), metadata={"V_choice": "lower"}))


def log_power(c1: float, tau1: float, c2: float, tau2: float, offset: float = 1.0) -> PotentialSpec:
    """Weights ``offset + c log^tau(t+1)``.

    The bare logarithmic weight vanishes at 0; the positive offset keeps the
    lower weight bounded away from zero without changing the growth exponent.
    """
    if offset <= 0 or min(c1, tau1) <= 0 or tau2 < tau1 or c2 < c1:
        raise DomainError("log_power: need offset>0, c2>=c1>0, tau2>=tau1>0", "grid_potential")
    up_offset = offset + c1  # dominates the lower weight where log(t+1) < 1
    lo = lambda t: offset + c1 * np.log1p(np.asarray(t, float)) ** tau1
    up = lambda t: up_offset + c2 * np.log1p(np.asarray(t, float)) ** tau2
    return check_catalog_spec(PotentialSpec(
        f"log_power(tau1={tau1:g},tau2={tau2:g})", lambda x: lo(_abs(x)), lo, up,
        kappa=tau2 / (2 * tau1), metadata={"V_choice": "lower", "offset": offset}))


def table(values, grid: Grid) -> PotentialSpec:
    """Potential given by node values on ``grid`` (linear interpolation).

    The weights are the monotone envelopes of the table: the lower weight at t
    is the minimum of V over ``|x| >= t`` and the upper weight the maximum over
    ``|x| <= t``; both are flat beyond the table.
    """
    v = np.asarray(values, dtype=float)
    x = grid.nodes
    if v.shape != x.shape:
        raise DomainError(f"table: expected {x.size} values, got {v.size}", "grid_potential")
    t_nodes = x[grid.center_index:]
    fold = np.maximum(v[grid.center_index:], v[grid.center_index::-1])
    fold_min = np.minimum(v[grid.center_index:], v[grid.center_index::-1])
    upper_env = np.maximum.accumulate(fold)
    lower_env = np.minimum.accumulate(fold_min[::-1])[::-1]

    def V(xq):
        return np.interp(np.asarray(xq, float), x, v)

    def lo(t):
        t = np.asarray(t, float)
        # last node <= t keeps the step below the true envelope
        idx = np.clip(np.searchsorted(t_nodes, t, side="right") - 1, 0, t_nodes.size - 1)
        return lower_env[idx]

    def up(t):
        t = np.asarray(t, float)
        idx = np.clip(np.searchsorted(t_nodes, t, side="left"), 0, t_nodes.size - 1)
        return upper_env[idx]

    return PotentialSpec("table", V, lo, up, metadata={"V_choice": "table"})


def check_catalog_spec(spec: PotentialSpec):
    _check_weights(spec.lower, spec.upper, spec.name)
    return spec
