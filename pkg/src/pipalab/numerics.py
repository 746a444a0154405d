"""Small dense linear algebra used by the subproblem solver and the analysis code.

Matrices are plain two-dimensional numpy arrays. The systems solved here are
at most a few dozen unknowns, so a textbook LU with partial pivoting is all
that is needed.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, SingularMatrixError

PIVOT_RTOL = 1e-12


def as_matrix(entries, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Build a float matrix, optionally from a flat row-major sequence."""
    a = np.array(entries, dtype=float)
    if rows is not None and cols is not None:
        if a.size != rows * cols:
            raise DimensionError(f"expected {rows * cols} entries, got {a.size}")
        a = a.reshape(rows, cols)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got shape {a.shape}")
    return a


def lu_factor(A) -> tuple[np.ndarray, np.ndarray]:
    """LU factorization with partial pivoting.

    Returns ``(lu, perm)`` with unit-lower and upper factors packed into one
    array, such that ``A[perm] == L @ U``. Raises SingularMatrixError when a
    pivot is smaller than ``PIVOT_RTOL`` times the largest initial entry of
    its column.
    """
    a = np.array(A, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"LU needs a square matrix, got shape {a.shape}")
    n = a.shape[0]
    colmax = np.max(np.abs(a), axis=0) if n else np.zeros(0)
    perm = np.arange(n)
    for j in range(n):
        piv = j + int(np.argmax(np.abs(a[j:, j])))
        if abs(a[piv, j]) <= PIVOT_RTOL * colmax[j] or a[piv, j] == 0.0:
            raise SingularMatrixError(f"pivot {a[piv, j]:.3e} in column {j} is negligible")
        if piv != j:
            a[[j, piv]] = a[[piv, j]]
            perm[[j, piv]] = perm[[piv, j]]
        a[j + 1:, j] /= a[j, j]
        a[j + 1:, j + 1:] -= np.outer(a[j + 1:, j], a[j, j + 1:])
    return a, perm


def lu_solve(factors: tuple[np.ndarray, np.ndarray], b) -> np.ndarray:
    lu, perm = factors
    b = np.asarray(b, dtype=float)
    if b.shape[0] != lu.shape[0]:
        raise DimensionError(f"right-hand side has length {b.shape[0]}, matrix is {lu.shape[0]}")
    x = b[perm].copy()
    n = lu.shape[0]
    for i in range(n):
        x[i] -= lu[i, :i] @ x[:i]
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - lu[i, i + 1:] @ x[i + 1:]) / lu[i, i]
    return x


def solve_linear(A, b) -> np.ndarray:
    """Solve ``A x = b`` for square ``A`` by pivoted LU."""
    return lu_solve(lu_factor(A), b)


def null_space(M: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the null space of ``M``, from the SVD."""
    rows, cols = M.shape
    if rows == 0:
        return np.eye(cols)
    _, s, vt = np.linalg.svd(M, full_matrices=True)
    tol = max(rows, cols) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol))
    return vt[rank:].T


def norm(v, kind: str = "two") -> float:
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        return 0.0
    if kind == "two":
        return float(np.linalg.norm(v))
    if kind == "inf":
        return float(np.max(np.abs(v)))
    if kind == "one":
        return float(np.sum(np.abs(v)))
    raise ValueError(f"unknown norm kind {kind!r}")
