"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Solves ``max c.x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0`` at the sizes
this package needs (a few dozen variables).  Bland's rule trades speed for a
guarantee against cycling on the highly degenerate 0/1 systems that plan
polytopes produce.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleProblem, UnboundedProblem

_EPS = 1e-11


@dataclass
class LPResult:
    x: np.ndarray
    value: float
    iterations: int


def _pivot(T: np.ndarray, r: int, c: int) -> None:
    T[r] /= T[r, c]
    col = T[:, c].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _run(T: np.ndarray, basis: list[int], n_cols: int, max_iter: int) -> int:
    """Maximize the objective stored in the last row (as reduced costs, negated)."""
    it = 0
    while True:
        obj = T[-1, :n_cols]
        entering = next((j for j in range(n_cols) if obj[j] < -_EPS), None)
        if entering is None:
            return it
        col = T[:-1, entering]
        rhs = T[:-1, -1]
        best, leave = None, None
        for i in np.flatnonzero(col > _EPS):
            ratio = rhs[i] / col[i]
            if best is None or ratio < best - _EPS or (abs(ratio - best) <= _EPS and basis[i] < basis[leave]):
                best, leave = ratio, i
        if leave is None:
            raise UnboundedProblem("objective is unbounded on the feasible set")
        _pivot(T, leave, entering)
        basis[leave] = entering
        it += 1
        if it > max_iter:
            raise RuntimeError("simplex iteration limit reached")


def linprog_max(c, A_eq=None, b_eq=None, A_ub=None, b_ub=None, max_iter: int = 10_000) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    m_eq, m_ub = len(b_eq), len(b_ub)
    m = m_eq + m_ub

    # Columns: x (n), slacks (m_ub), artificials (m).  Rows normalized to rhs >= 0.
    A = np.zeros((m, n + m_ub))
    A[:m_eq, :n] = A_eq
    A[m_eq:, :n] = A_ub
    A[m_eq:, n:] = np.eye(m_ub)
    b = np.concatenate([b_eq, b_ub])
    neg = b < 0
    A[neg] *= -1
    b = np.where(neg, -b, b)
    n_real = n + m_ub
    T = np.zeros((m + 1, n_real + m + 1))
    T[:m, :n_real] = A
    T[:m, n_real : n_real + m] = np.eye(m)
    T[:m, -1] = b
    basis = list(range(n_real, n_real + m))
    # Phase I: maximize -sum(artificials).
    T[-1, n_real : n_real + m] = 1.0
    T[-1] -= T[:m].sum(axis=0)
    iters = _run(T, basis, n_real + m, max_iter)
    if T[-1, -1] < -1e-9 * max(1.0, np.abs(b).max(initial=0.0)):
        raise InfeasibleProblem("no point satisfies the constraints")
    # Drive zero-level artificials out of the basis; drop redundant rows.
    keep = []
    for r in range(m):
        if basis[r] >= n_real:
            row = T[r, :n_real]
            cand = np.flatnonzero(np.abs(row) > 1e-9)
            if cand.size:
                _pivot(T, r, int(cand[0]))
                basis[r] = int(cand[0])
                keep.append(r)
        else:
            keep.append(r)
    T = np.vstack([T[keep][:, list(range(n_real)) + [-1]], np.zeros(n_real + 1)])
    basis = [basis[r] for r in keep]
    # Phase II.
    T[-1, :n] = -c
    for r, bv in enumerate(basis):
        if T[-1, bv] != 0:
            T[-1] -= T[-1, bv] * T[r]
    iters += _run(T, basis, n_real, max_iter)
    x = np.zeros(n_real)
    for r, bv in enumerate(basis):
        x[bv] = T[r, -1]
    x = x[:n]
    x[np.abs(x) < 1e-14] = 0.0
    return LPResult(x=x, value=float(c @ x), iterations=iters)
