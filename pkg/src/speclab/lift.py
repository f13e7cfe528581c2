"""Even lift of a spectral-subspace member to the half plane problem.

``u(x, y) = sum_k e_k cosh(sqrt(lambda_k) y) phi_k(x)`` solves
``-Laplace u + V u = 0`` with ``u(x, 0) = phi`` and zero Neumann trace.
Large ``sqrt(lambda) |y|`` switch the field to log-magnitude plus sign.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .eigen import SpectralSubspace
from .errors import DomainError

MODULE = "ghost_lift"
LOG_SWITCH = 30.0


def symmetric_axis(Y: float, ny: int) -> np.ndarray:
    """Odd-length grid on ``[-Y, Y]`` mirrored exactly about 0."""
    if ny < 3 or ny % 2 == 0:
        raise DomainError(f"ny must be odd and >= 3, got {ny}", MODULE)
    if not Y > 0:
        raise DomainError(f"Y must be positive, got {Y!r}", MODULE)
    dy = 2.0 * Y / (ny - 1)
    half = dy * np.arange((ny - 1) // 2 + 1, dtype=float)
    half[-1] = Y
    return np.concatenate([-half[:0:-1], half])


def _scaled_cosh(a: np.ndarray, y: np.ndarray):
    """``cosh(a_k |y_j|) = exp(shift_j) * S_kj`` with ``S`` bounded by 1."""
    t = np.outer(a, np.abs(y))  # (m, ny)
    shift = t.max(axis=0) if t.size else np.zeros(y.size)
    S = 0.5 * (np.exp(t - shift) + np.exp(-t - shift))
    return shift, S


@dataclass(frozen=True)
class LiftedField:
    sub: SpectralSubspace
    coeffs: np.ndarray
    y: np.ndarray
    log_mode: bool
    data: np.ndarray  # linear values, or log|u| in log mode
    sign: Optional[np.ndarray] = None

    @property
    def x(self) -> np.ndarray:
        return self.sub.grid.nodes

    @property
    def h(self) -> float:
        return self.sub.h

    @property
    def dy(self) -> float:
        return float(self.y[1] - self.y[0])

    @property
    def center(self) -> int:
        return (self.y.size - 1) // 2

    @property
    def values(self) -> np.ndarray:
        if not self.log_mode:
            return self.data
        with np.errstate(over="ignore"):
            return self.sign * np.exp(self.data)

    def neumann_trace(self) -> np.ndarray:
        """Centred y-difference at y = 0 (zero by evenness)."""
        c = self.center
        u = self.values
        return (u[:, c + 1] - u[:, c - 1]) / (2.0 * self.dy)

    def slice_norms2(self) -> np.ndarray:
        """``h sum_i u(x_i, y_j)^2`` for every y_j."""
        if not self.log_mode:
            return self.h * np.sum(self.data ** 2, axis=0)
        top = self.data.max(axis=0)
        with np.errstate(under="ignore"):
            s = self.h * np.sum(np.exp(2.0 * (self.data - top)), axis=0)
        return np.exp(2.0 * top) * s

    def evenness_defect(self) -> float:
        d = self.data
        return float(np.max(np.abs(d - d[:, ::-1]))) if d.size else 0.0


def lift(sub: SpectralSubspace, coeffs, Y: float, ny: int) -> LiftedField:
    e = np.asarray(coeffs, dtype=float)
    if e.shape != (sub.m,):
        raise DomainError(f"expected {sub.m} coefficients, got shape {e.shape}", MODULE)
    if np.any(sub.values < 0):
        raise DomainError("negative eigenvalues have no cosh lift", MODULE)
    y = symmetric_axis(Y, ny)
    c = (ny - 1) // 2
    yh = y[c:]  # evaluate on y >= 0 and mirror, so evenness is exact
    a = np.sqrt(sub.values)
    log_mode = float(a.max()) * Y > LOG_SWITCH

    def mirror(half):
        return np.concatenate([half[:, :0:-1], half], axis=1)

    if not log_mode:
        C = np.cosh(np.outer(a, yh))
        u = sub.vectors @ (e[:, None] * C)
        return LiftedField(sub, e, y, False, mirror(u))
    shift, S = _scaled_cosh(a, yh)
    inner = sub.vectors @ (e[:, None] * S)
    with np.errstate(divide="ignore"):
        logabs = np.log(np.abs(inner)) + shift[None, :]
    logabs, inner = mirror(logabs), mirror(inner)
    return LiftedField(sub, e, y, True, logabs, np.sign(inner))


def slice_parseval(f: LiftedField) -> np.ndarray:
    """Relative defect of ``||u(., y)||^2 = sum e_k^2 cosh^2(sqrt(lambda_k) y)`` per slice."""
    a = np.sqrt(f.sub.values)
    shift, S = _scaled_cosh(a, f.y)
    exact_scaled = np.sum((f.coeffs[:, None] * S) ** 2, axis=0)
    got = f.slice_norms2()
    with np.errstate(over="ignore", invalid="ignore"):
        got_scaled = got * np.exp(-2.0 * shift) if not f.log_mode else \
            np.exp(np.log(np.maximum(got, 1e-300)) - 2.0 * shift)
    denom = np.where(exact_scaled > 0, exact_scaled, 1.0)
    return np.abs(got_scaled - exact_scaled) / denom


@dataclass
class ResidualReport:
    max_scaled: float
    max_abs: float
    taylor_prediction: float  # dy^2/12 * max |sum e_k lambda_k^2 cosh phi_k|

    def as_dict(self):
        return {"residual_scaled": self.max_scaled, "residual_abs": self.max_abs,
                "taylor_prediction": self.taylor_prediction}


def pde_residual(f: LiftedField) -> ResidualReport:
    """Five-point residual ``|Laplace_h u - V u|`` on interior nodes.

    Scaled by ``max(1, |u| (lambda_max + ||V||_inf))`` nodewise.
    """
    u = f.values
    if not np.all(np.isfinite(u)):
        raise DomainError("field overflows linear storage; residual needs a smaller Y", MODULE)
    V = f.sub.potential
    h, dy = f.h, f.dy
    core = u[1:-1, 1:-1]
    lap = (u[2:, 1:-1] - 2 * core + u[:-2, 1:-1]) / h ** 2 + (u[1:-1, 2:] - 2 * core + u[1:-1, :-2]) / dy ** 2
    r = np.abs(lap - V[1:-1, None] * core)
    lam_max = float(f.sub.values.max()) if f.sub.m else 0.0
    scale = np.maximum(1.0, np.abs(core) * (lam_max + float(np.max(np.abs(V)))))
    a = np.sqrt(f.sub.values)
    w = f.coeffs * f.sub.values ** 2
    lead = f.sub.vectors @ (w[:, None] * np.cosh(np.outer(a, np.abs(f.y))))
    taylor = dy ** 2 / 12.0 * float(np.max(np.abs(lead[1:-1, 1:-1]))) if lead.size else 0.0
    if not r.size:
        return ResidualReport(0.0, 0.0, taylor)
    return ResidualReport(float(np.max(r / scale)), float(np.max(r)), taylor)


def cosh2_integral(a: float, y0: float, y1: float) -> float:
    """``int_{y0}^{y1} cosh^2(a y) dy`` from the antiderivative ``y/2 + sinh(2ay)/(4a)``."""
    if a == 0:
        return y1 - y0
    return 0.5 * (y1 - y0) + (math.sinh(2 * a * y1) - math.sinh(2 * a * y0)) / (4 * a)


def _field_at(sub: SpectralSubspace, e: np.ndarray, yq: np.ndarray) -> np.ndarray:
    a = np.sqrt(sub.values)
    return sub.vectors @ (e[:, None] * np.cosh(np.outer(a, yq)))


@dataclass
class SlabReport:
    y0: float
    y1: float
    quadrature: float
    closed_form: float
    relative_error: float
    lower_bound: float
    upper_bound: float

    @property
    def identity_ok(self) -> bool:
        return self.relative_error <= 1e-8

    @property
    def bounds_ok(self) -> bool:
        return self.lower_bound <= self.quadrature <= self.upper_bound

    def as_dict(self):
        return {"y0": self.y0, "y1": self.y1, "quadrature": self.quadrature,
                "closed_form": self.closed_form, "relative_error": self.relative_error,
                "lower_bound": self.lower_bound, "upper_bound": self.upper_bound}


def slab_norm_identities(f: LiftedField, y0: float, y1: float, nodes: int = 16) -> SlabReport:
    """Compare ``int int_slab u^2`` (x sum, composite Gauss-Legendre in y) with the closed form."""
    Y = float(np.max(np.abs(f.y)))
    if not (-Y - 1e-12 <= y0 < y1 <= Y + 1e-12):
        raise DomainError(f"slab [{y0}, {y1}] not inside [-{Y}, {Y}]", MODULE)
    sub, e = f.sub, f.coeffs
    a = np.sqrt(sub.values)
    amax = float(a.max()) if a.size else 0.0
    panels = max(1, int(math.ceil((y1 - y0) * max(amax, 1.0))))
    t, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(y0, y1, panels + 1)
    mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * (edges[1:] - edges[:-1])
    yq = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    wq = (half[:, None] * w[None, :]).ravel()
    quad = 0.0
    for chunk in np.array_split(np.arange(yq.size), max(1, yq.size // 64)):
        U = _field_at(sub, e, yq[chunk])
        quad += float(sub.h * np.sum((U ** 2) @ wq[chunk]))
    exact = float(np.sum(e ** 2 * np.array([cosh2_integral(ak, y0, y1) for ak in a])))
    norm2 = float(np.sum(e ** 2))
    length = y1 - y0
    top = max(abs(y0), abs(y1))
    lower = 0.5 * length * norm2
    upper = length * math.exp(2 * amax * top) * norm2
    rel = abs(quad - exact) / exact if exact > 0 else abs(quad)
    return SlabReport(y0, y1, quad, exact, rel, lower, upper)
