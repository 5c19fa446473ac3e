"""Batched symmetric tridiagonal (Thomas) elimination.

Systems are SPD by construction (mass + Schur complements of positive
diagonals), so no pivoting is needed; a non-positive pivot is an input
error and raises NonSPD.  All arrays are (n_lines, m) batches; the
factorization is reusable across right-hand sides.
"""

from __future__ import annotations

import numpy as np

from .errors import NonSPD


def thomas_factor(diag: np.ndarray, off: np.ndarray) -> np.ndarray:
    """Return reciprocal pivots dinv for the batch; raises NonSPD."""
    diag = np.asarray(diag, dtype=float)
    off = np.asarray(off, dtype=float)
    m = diag.shape[-1]
    dinv = np.empty_like(diag)
    piv = diag[..., 0]
    if np.any(piv <= 0.0):
        raise NonSPD("non-positive pivot in tridiagonal factorization")
    dinv[..., 0] = 1.0 / piv
    for i in range(1, m):
        piv = diag[..., i] - off[..., i - 1] ** 2 * dinv[..., i - 1]
        if np.any(piv <= 0.0):
            raise NonSPD("non-positive pivot in tridiagonal factorization")
        dinv[..., i] = 1.0 / piv
    return dinv


def thomas_solve(dinv: np.ndarray, off: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve with a prefactored batch; rhs is not modified."""
    m = rhs.shape[-1]
    y = np.empty_like(rhs, dtype=float)
    y[..., 0] = rhs[..., 0]
    for i in range(1, m):
        y[..., i] = rhs[..., i] - off[..., i - 1] * dinv[..., i - 1] * y[..., i - 1]
    x = np.empty_like(y)
    x[..., m - 1] = y[..., m - 1] * dinv[..., m - 1]
    for i in range(m - 2, -1, -1):
        x[..., i] = (y[..., i] - off[..., i] * x[..., i + 1]) * dinv[..., i]
    return x


def solve_spd_tridiagonal(diag, off, rhs):
    """One-shot factor-and-solve; accepts single systems or batches."""
    diag = np.atleast_2d(np.asarray(diag, dtype=float))
    off = np.atleast_2d(np.asarray(off, dtype=float))
    rhs_in = np.asarray(rhs, dtype=float)
    rhs2 = np.atleast_2d(rhs_in)
    if diag.shape != rhs2.shape or off.shape[-1] != diag.shape[-1] - 1:
        raise ValueError("inconsistent tridiagonal shapes")
    x = thomas_solve(thomas_factor(diag, off), off, rhs2)
    return x[0] if rhs_in.ndim == 1 else x
