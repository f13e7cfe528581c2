"""Discrete Schrodinger operator and its eigenpairs below a cutoff."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import tridiag
from .errors import DomainError, EmptySpectrumError
from .grid import Grid, PotentialSpec, auto_grid, sample_potential, weight_inverse


@dataclass(frozen=True)
class TridiagonalOperator:
    """``-d^2/dx^2 + V`` by central differences with Dirichlet ends."""

    grid: Grid
    potential: np.ndarray
    name: str = ""

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def off(self) -> float:
        return -1.0 / self.grid.h ** 2

    @property
    def diagonal(self) -> np.ndarray:
        return 2.0 / self.grid.h ** 2 + self.potential

    @property
    def offdiagonal(self) -> np.ndarray:
        return np.full(self.n - 1, self.off)

    def norm_estimate(self) -> float:
        lo, hi = tridiag.gershgorin(self.diagonal, self.offdiagonal)
        return max(abs(lo), abs(hi))

    def apply(self, v):
        return tridiag.tridiag_matvec(self.diagonal, self.offdiagonal, v)


def build_hamiltonian(spec: PotentialSpec, grid: Grid) -> TridiagonalOperator:
    v = sample_potential(spec, grid)
    v.setflags(write=False)
    return TridiagonalOperator(grid, v, spec.name)


def sturm_count(op: TridiagonalOperator, lam) -> int:
    """Eigenvalues of ``op`` strictly below ``lam``."""
    if not np.isfinite(lam):
        raise DomainError(f"cutoff must be finite, got {lam!r}", "eigensolver")
    return int(tridiag.sturm_counts(op.diagonal, op.offdiagonal, [lam])[0])


@dataclass(frozen=True)
class SpectralSubspace:
    """Eigenpairs ``lambda_k <= cutoff`` with columns orthonormal in ``h * sum``."""

    cutoff: float
    values: np.ndarray
    vectors: np.ndarray  # (n, m)
    grid: Grid
    potential: np.ndarray
    residuals: np.ndarray
    sturm: int
    meta: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return int(self.values.size)

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def corrected(self) -> np.ndarray:
        """Eigenvalues with the leading O(h^2) stencil error removed.

        The three-point Laplacian overshoots by ``h^2/12 * phi''''``; with
        ``phi'' = (V - lambda) phi`` the first-order correction is
        ``h^2/12 * ||(V - lambda) phi||^2``.
        """
        r = (self.potential[:, None] - self.values[None, :]) * self.vectors
        return self.values + self.h ** 2 / 12.0 * self.h * np.sum(r * r, axis=0)

    def inner(self, f, g):
        return self.h * np.dot(f, g)

    def combine(self, coeffs) -> np.ndarray:
        c = np.asarray(coeffs, dtype=float)
        if c.shape[0] != self.m:
            raise DomainError(f"expected {self.m} coefficients, got {c.shape[0]}", "eigensolver")
        return self.vectors @ c

    def orthonormality_error(self) -> float:
        G = self.h * (self.vectors.T @ self.vectors)
        return float(np.max(np.abs(G - np.eye(self.m)))) if self.m else 0.0

    def truncate(self, lam: float) -> "SpectralSubspace":
        """Nested subspace of the pairs with eigenvalue <= lam."""
        k = int(np.searchsorted(self.values, lam, side="right"))
        if k == 0:
            raise EmptySpectrumError(f"no spectrum below cutoff {lam:g}", "eigensolver")
        return SpectralSubspace(lam, self.values[:k], self.vectors[:, :k], self.grid,
                                self.potential, self.residuals[:k], k, dict(self.meta))


def _split(groups, jobs):
    """Partition cluster groups into at most ``jobs`` contiguous index chunks."""
    total = sum(len(g) for g in groups)
    target = max(1, -(-total // max(1, jobs)))
    chunks, cur = [], []
    for g in groups:
        cur.extend(g)
        if len(cur) >= target:
            chunks.append(cur)
            cur = []
    if cur:
        chunks.append(cur)
    return chunks


def eigenpairs_below(op: TridiagonalOperator, lam: float, jobs: int = 1,
                     seed: int = 0) -> SpectralSubspace:
    """All eigenpairs with eigenvalue strictly below ``lam``.

    Sturm bisection brackets every index, inverse iteration supplies the
    vectors.  Work is split over ``jobs`` threads along cluster boundaries;
    results do not depend on ``jobs``.
    """
    m = sturm_count(op, lam)
    if m == 0:
        raise EmptySpectrumError(f"no spectrum below cutoff {lam:g}", "eigensolver")
    d, e = op.diagonal, op.offdiagonal
    vmin = float(np.min(op.potential))
    values = tridiag.bisect_eigenvalues(d, e, np.arange(m), lo=vmin, hi=lam)
    groups = tridiag.clusters(values)
    chunks = _split(groups, jobs)

    def work(idx):
        idx = np.asarray(idx)
        return idx, tridiag.inverse_iteration(d, e, values[idx], seed=seed, labels=idx)

    if jobs > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    vecs = np.empty((op.n, m))
    res = np.empty(m)
    for idx, (V, r) in parts:
        vecs[:, idx] = V
        res[idx] = r
    vecs /= np.sqrt(op.grid.h)
    vecs.setflags(write=False)
    values.setflags(write=False)
    meta = {"potential": op.name, "L": op.grid.half_width, "n": op.grid.n, "h": op.grid.h}
    return SpectralSubspace(float(lam), values, vecs, op.grid, op.potential, res, m, meta)


def subspace_for(spec: PotentialSpec, lam_max: float, grid: Optional[Grid] = None,
                 jobs: int = 1) -> SpectralSubspace:
    """Convenience: grid (automatic unless given), operator and eigenpairs in one call."""
    grid = grid or auto_grid(spec, lam_max)
    return eigenpairs_below(build_hamiltonian(spec, grid), lam_max, jobs=jobs)


@dataclass(frozen=True)
class LiebThirringTable:
    lams: np.ndarray
    counts: np.ndarray
    radii: np.ndarray  # lower-weight inverse at lam + 1
    ratios: np.ndarray

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios)) if self.ratios.size else 0.0

    def doubling_factors(self):
        """``N(2 lam) / N(lam)`` for every lam whose double is also tabulated."""
        lookup = {float(l): int(c) for l, c in zip(self.lams, self.counts)}
        out = []
        for l, c in zip(self.lams, self.counts):
            c2 = lookup.get(float(2 * l))
            if c2 is not None and c > 0:
                out.append((float(l), c2 / c))
        return out


def lieb_thirring_check(spec: PotentialSpec, lams, grid: Optional[Grid] = None) -> LiebThirringTable:
    """Eigenvalue counts against ``(lam + 1) * Phi^{-1}(lam + 1)`` over a sweep."""
    lams = np.sort(np.asarray(lams, dtype=float))
    grid = grid or auto_grid(spec, float(lams[-1]))
    op = build_hamiltonian(spec, grid)
    # count eigenvalues <= lam: strictly below the next float up
    counts = tridiag.sturm_counts(op.diagonal, op.offdiagonal, np.nextafter(lams, np.inf))
    radii = np.array([weight_inverse(spec.lower, l + 1.0) for l in lams])
    denom = (lams + 1.0) * radii
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(counts == 0, 0.0, counts / denom)
    return LiebThirringTable(lams, counts, radii, ratios)
