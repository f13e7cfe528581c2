"""Symmetric tridiagonal kernels: Sturm counts, bisection, inverse iteration.

Matrices are passed as a diagonal ``d`` (length n) and an off-diagonal ``e``
(length n-1).  Every kernel is vectorized across shifts, so many eigenvalues
are bracketed or refined in one sweep over the matrix.
"""
from __future__ import annotations

import numpy as np

from .errors import NumericalError

_SAFMIN = np.finfo(float).tiny
_EPS = np.finfo(float).eps


def pivot_floor(e) -> float:
    e = np.asarray(e, dtype=float)
    emax2 = float(np.max(e * e)) if e.size else 0.0
    return _SAFMIN * max(1.0, emax2)


def sturm_counts(d, e, shifts) -> np.ndarray:
    """Number of eigenvalues strictly below each shift.

    Uses the LDL^T pivot recurrence ``q_i = d_i - x - e_{i-1}^2 / q_{i-1}``;
    tiny pivots are replaced by ``-pivmin`` so the recurrence never overflows.
    """
    d = np.asarray(d, dtype=float)
    e2 = np.asarray(e, dtype=float) ** 2
    x = np.atleast_1d(np.asarray(shifts, dtype=float))
    pivmin = pivot_floor(e)
    count = np.zeros(x.shape, dtype=np.int64)
    q = d[0] - x
    q = np.where(np.abs(q) < pivmin, -pivmin, q)
    count += q < 0
    for i in range(1, d.size):
        q = (d[i] - x) - e2[i - 1] / q
        q = np.where(np.abs(q) < pivmin, -pivmin, q)
        count += q < 0
    return count


def gershgorin(d, e):
    d = np.asarray(d, dtype=float)
    r = np.zeros_like(d)
    ae = np.abs(np.asarray(e, dtype=float))
    r[:-1] += ae
    r[1:] += ae
    return float(np.min(d - r)), float(np.max(d + r))


def bisect_eigenvalues(d, e, indices, lo=None, hi=None, rtol=4 * _EPS, max_iter=200):
    """Eigenvalues with the given 0-based indices (ascending order) by Sturm bisection."""
    d = np.asarray(d, dtype=float)
    idx = np.asarray(indices, dtype=np.int64)
    glo, ghi = gershgorin(d, e)
    lo = glo if lo is None else max(lo, glo)
    hi = ghi if hi is None else min(hi, ghi)
    # widen so the brackets are strict
    pad = 2 * _EPS * max(abs(lo), abs(hi)) + pivot_floor(e)
    a = np.full(idx.shape, lo - pad)
    b = np.full(idx.shape, hi + pad)
    atol = pivot_floor(e) * 4
    for _ in range(max_iter):
        width = b - a
        active = width > rtol * np.maximum(np.abs(a), np.abs(b)) + atol
        if not active.any():
            break
        sel = np.nonzero(active)[0]
        mid = 0.5 * (a[sel] + b[sel])
        c = sturm_counts(d, e, mid)
        above = c > idx[sel]
        b[sel[above]] = mid[above]
        a[sel[~above]] = mid[~above]
    return 0.5 * (a + b)


def shifted_solve(d, e, shifts, rhs):
    """Solve ``(T - shift_k I) y_k = rhs_k`` for every column k.

    Gaussian elimination without pivoting, with pivots floored like the Sturm
    recurrence; near-singular shifts are exactly what inverse iteration wants.
    """
    d = np.asarray(d, dtype=float)
    e = np.asarray(e, dtype=float)
    n = d.size
    sh = np.atleast_1d(np.asarray(shifts, dtype=float))
    y = np.array(rhs, dtype=float, copy=True).reshape(n, sh.size)
    floor = max(pivot_floor(e), _EPS * max(1.0, float(np.max(np.abs(d)))) * 1e-3)
    piv = np.empty((n, sh.size))
    p = d[0] - sh
    p = np.where(np.abs(p) < floor, np.where(p < 0, -floor, floor), p)
    piv[0] = p
    for i in range(1, n):
        ell = e[i - 1] / piv[i - 1]
        y[i] -= ell * y[i - 1]
        p = (d[i] - sh) - ell * e[i - 1]
        p = np.where(np.abs(p) < floor, np.where(p < 0, -floor, floor), p)
        piv[i] = p
    y[n - 1] /= piv[n - 1]
    for i in range(n - 2, -1, -1):
        y[i] = (y[i] - e[i] * y[i + 1]) / piv[i]
    return y


def tridiag_matvec(d, e, v):
    v = np.asarray(v, dtype=float)
    out = d[:, None] * v if v.ndim == 2 else d * v
    out[:-1] += e[:, None] * v[1:] if v.ndim == 2 else e * v[1:]
    out[1:] += e[:, None] * v[:-1] if v.ndim == 2 else e * v[:-1]
    return out


def clusters(values, rel_gap=1e-6):
    """Groups of consecutive indices whose values are closer than ``rel_gap (1 + |value|)``."""
    groups, cur = [], [0]
    for k in range(1, len(values)):
        if values[k] - values[k - 1] < rel_gap * (1 + abs(values[k])):
            cur.append(k)
        else:
            groups.append(cur)
            cur = [k]
    if len(values):
        groups.append(cur)
    return groups


def _orthogonalize_clusters(V, groups):
    for g in groups:
        if len(g) < 2:
            continue
        for a, j in enumerate(g):
            for i in g[:a]:
                V[:, j] -= (V[:, i] @ V[:, j]) * V[:, i]
            V[:, j] /= np.linalg.norm(V[:, j])


def _start_vectors(n, labels, seed, attempt):
    cols = [np.random.default_rng([seed, int(k), attempt]).standard_normal(n) for k in labels]
    V = np.stack(cols, axis=1) if cols else np.empty((n, 0))
    return V / np.linalg.norm(V, axis=0)


def inverse_iteration(d, e, values, rel_gap=1e-6, iters=3, restarts=4, tol=None, seed=0,
                      labels=None):
    """Unit (Euclidean) eigenvectors for the given eigenvalue approximations.

    Returns ``(vectors, residuals)``; vectors are columns with a deterministic
    sign (first entry above 1e-3 of the max modulus is positive).  Start
    vectors are seeded per label (default: position), so splitting the work
    into batches does not change the result.
    """
    d = np.asarray(d, dtype=float)
    e = np.asarray(e, dtype=float)
    lam = np.asarray(values, dtype=float)
    n, k = d.size, lam.size
    lo, hi = gershgorin(d, e)
    tnorm = max(abs(lo), abs(hi))
    if tol is None:
        tol = np.maximum(1e-9 * np.maximum(1.0, np.abs(lam)), 64 * _EPS * tnorm)
    groups = clusters(lam, rel_gap)
    labels = np.arange(k) if labels is None else np.asarray(labels)
    # tiny distinct perturbations keep clustered shifts from producing identical solves
    shifts = lam.copy()
    for g in groups:
        for j, idx in enumerate(g[1:], start=1):
            shifts[idx] = lam[idx] + j * 4 * _EPS * tnorm
    V = _start_vectors(n, labels, seed, 0)
    todo = np.arange(k)
    res = np.full(k, np.inf)
    for attempt in range(restarts + 1):
        for _ in range(iters):
            W = shifted_solve(d, e, shifts[todo], V[:, todo])
            W /= np.linalg.norm(W, axis=0)
            V[:, todo] = W
            _orthogonalize_clusters(V, [g for g in groups if set(g) & set(todo.tolist())])
        R = tridiag_matvec(d, e, V) - V * lam
        res = np.linalg.norm(R, axis=0)
        bad = np.nonzero(res > tol)[0]
        if bad.size == 0:
            break
        todo = bad
        V[:, todo] = _start_vectors(n, labels[todo], seed, attempt + 1)
    else:
        raise NumericalError(
            f"inverse iteration did not converge for index k={int(labels[todo[0]])} "
            f"(residual {res[todo[0]]:.3e})", "eigensolver")
    fix_signs(V)
    return V, res


def fix_signs(V):
    for j in range(V.shape[1]):
        col = V[:, j]
        big = np.abs(col) > 1e-3 * np.max(np.abs(col))
        if col[np.argmax(big)] < 0:
            V[:, j] = -col
    return V


def householder_tridiagonalize(A):
    """Reduce a symmetric matrix to tridiagonal form ``Q^T A Q = T``.

    Returns ``(d, e, Q)``.
    """
    A = np.array(A, dtype=float, copy=True)
    m = A.shape[0]
    Q = np.eye(m)
    for k in range(m - 2):
        x = A[k + 1:, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        v = x.copy()
        v[0] += np.copysign(alpha, x[0])
        vnorm = np.linalg.norm(v)
        if vnorm == 0.0:
            continue
        v /= vnorm
        A[k + 1:, :] -= 2.0 * np.outer(v, v @ A[k + 1:, :])
        A[:, k + 1:] -= 2.0 * np.outer(A[:, k + 1:] @ v, v)
        Q[:, k + 1:] -= 2.0 * np.outer(Q[:, k + 1:] @ v, v)
    d = np.diag(A).copy()
    e = 0.5 * (np.diag(A, 1) + np.diag(A, -1))
    return d, e, Q


def thomas(lower, diag, upper, rhs):
    """Solve a general tridiagonal system without pivoting.

    ``lower[i]`` multiplies ``x[i-1]`` in row i (``lower[0]`` unused) and
    ``upper[i]`` multiplies ``x[i+1]`` (``upper[-1]`` unused).  Intended for
    diagonally dominant systems.
    """
    a = np.asarray(lower, dtype=float)
    b = np.array(diag, dtype=float, copy=True)
    c = np.asarray(upper, dtype=float)
    x = np.array(rhs, dtype=float, copy=True)
    n = b.size
    for i in range(1, n):
        f = a[i] / b[i - 1]
        b[i] -= f * c[i - 1]
        x[i] -= f * x[i - 1]
    x[n - 1] /= b[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = (x[i] - c[i] * x[i + 1]) / b[i]
    return x
