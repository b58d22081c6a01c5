"""Small dense elimination routines for 0/1-style constraint matrices."""

from __future__ import annotations

import numpy as np


def rref(A, rel_tol: float = 1e-9) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form by Gauss-Jordan with partial pivoting.

    A pivot is accepted only if it exceeds ``rel_tol`` times the largest
    absolute entry of the input.
    """
    R = np.array(A, dtype=float, copy=True)
    if R.ndim != 2 or R.size == 0:
        return R.reshape(R.shape[0] if R.ndim else 0, -1), []
    rows, cols = R.shape
    scale = np.max(np.abs(R))
    if scale == 0:
        return R, []
    thresh = rel_tol * scale
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = r + int(np.argmax(np.abs(R[r:, c])))
        if abs(R[p, c]) <= thresh:
            R[r:, c] = 0.0
            continue
        R[[r, p]] = R[[p, r]]
        R[r] /= R[r, c]
        others = np.arange(rows) != r
        R[others] -= np.outer(R[others, c], R[r])
        pivots.append(c)
        r += 1
    R[r:] = 0.0
    return R, pivots


def rank(A, rel_tol: float = 1e-9) -> int:
    return len(rref(A, rel_tol)[1])


def null_space(A, n: int | None = None, rel_tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis (as columns) of ``{x : A x = 0}``."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return np.eye(n if n is not None else A.shape[1])
    R, pivots = rref(A, rel_tol)
    cols = A.shape[1]
    free = [c for c in range(cols) if c not in pivots]
    if not free:
        return np.zeros((cols, 0))
    basis = np.zeros((cols, len(free)))
    for m, f in enumerate(free):
        basis[f, m] = 1.0
        for row, pc in enumerate(pivots):
            basis[pc, m] = -R[row, f]
    q, _ = np.linalg.qr(basis)
    return q
