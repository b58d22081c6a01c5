"""Log-barrier Newton method for concave maximization.

Maximizes a smooth concave ``f(z)`` over ``{z : c_i(z) > 0}`` with every
``c_i`` concave.  Callables return ``(value, gradient, hessian)``.  Starting
from a strictly feasible point, each stage minimizes
``-f(z) / mu - sum_i log c_i(z)`` by damped Newton steps, then divides ``mu``
by ten.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import SolverStall

Oracle = Callable[[np.ndarray], tuple[float, np.ndarray, np.ndarray]]

MU_SCHEDULE = tuple(10.0**-e for e in range(1, 10))


@dataclass
class BarrierResult:
    z: np.ndarray
    value: float
    iterations: int
    decrement: float
    gap: float


def _constraint_values(constraints: Sequence[Oracle], z) -> list:
    return [c(z) for c in constraints]


def _feasible(constraints, z) -> bool:
    return all(c(z)[0] > 0 for c in constraints)


def _merit(f, constraints, z, t) -> float:
    vals = [c(z)[0] for c in constraints]
    if any(v <= 0 for v in vals):
        return np.inf
    return -t * f(z)[0] - float(np.sum(np.log(vals)))


def barrier_maximize(
    f: Oracle,
    constraints: Sequence[Oracle],
    z0,
    mu_schedule: Sequence[float] = MU_SCHEDULE,
    max_iter: int = 200,
    newton_tol: float = 1e-10,
) -> BarrierResult:
    z = np.array(z0, dtype=float)
    if not _feasible(constraints, z):
        raise ValueError("barrier start point is not strictly feasible")
    n = z.size
    total = 0
    lam2 = 0.0
    for mu in mu_schedule:
        t = 1.0 / mu
        for it in range(max_iter + 1):
            _, fg, fh = f(z)
            g = -t * fg
            H = -t * fh
            for cv, cg, ch in _constraint_values(constraints, z):
                g -= cg / cv
                H += np.outer(cg, cg) / cv**2 - ch / cv
            H += 1e-14 * np.trace(H) / max(n, 1) * np.eye(n)
            try:
                step = -np.linalg.solve(H, g)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(H, g, rcond=None)[0]
            lam2 = float(-g @ step)
            F0 = _merit(f, constraints, z, t)
            # below the roundoff floor of the merit no step can be verified
            if lam2 / 2 <= max(newton_tol, 1e-14 * max(1.0, abs(F0))):
                break
            if it == max_iter:
                raise SolverStall(f"Newton decrement {lam2:.3g} after {max_iter} iterations at mu={mu:g}")
            s = 1.0
            while True:
                trial = z + s * step
                F1 = _merit(f, constraints, trial, t)
                if F1 <= F0 - 0.25 * s * lam2:
                    break
                s *= 0.5
                if s < 1e-14:
                    break
            if s < 1e-14:
                # merit differences are at roundoff level; stage is centred
                break
            z = trial
            total += 1
    return BarrierResult(z=z, value=f(z)[0], iterations=total, decrement=lam2, gap=len(constraints) * mu_schedule[-1])
