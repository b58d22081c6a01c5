"""Exchange value of a transport path and the criteria that predict its sign.

The value is ``max S(q) - S(q_bar)`` over plans that are compatible with the
path and leave every consumer at least as well off as under ``q_bar``, where
``S`` sums each consumer's least expenditure for the utility ``q`` gives them.

Two backends:

* ``lp``: every utility is Linear or QuantityOnly, so ``S`` and the floors are
  linear and the dense simplex solves the problem exactly.
* ``barrier``: otherwise.  ``S`` is concave, floors are concave constraints and
  a log-barrier Newton method runs on the affine hull of the feasible set.
  Directions along which some floor or sign constraint can never become slack
  are detected first (one LP per candidate on the tangent cone at ``q_bar``)
  and turned into equalities, so the barrier always starts strictly inside.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .barrier import MU_SCHEDULE, barrier_maximize
from .economy import Economy
from .errors import DimensionMismatch, InfeasibleProblem
from .linalg import null_space
from .plan_polytope import ConstraintSystem, build_constraints, interior_point_test, polytope_dimension_formula
from .simplex import linprog_max
from .tolerances import DEFAULT, Tolerances
from .transport_graph import TransportPath, euler_characteristic, route_matrix

log = logging.getLogger(__name__)

LINEAR_FAMILIES = {"linear", "quantity_only"}
STRICT_FAMILIES = {"cobb_douglas", "ces"}


@dataclass
class ValuationResult:
    value: float
    plan: np.ndarray
    backend: str
    iterations: int
    residual: float
    uniqueness: str = "unknown"
    s_reference: float = 0.0
    s_optimum: float = 0.0
    raw_value: float = 0.0
    clamped: bool = False
    hull_dimension: int = 0
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "V": self.value,
            "q_star": self.plan.tolist(),
            "uniqueness": self.uniqueness,
            "diagnostics": {
                "backend": self.backend,
                "iterations": self.iterations,
                "residual": self.residual,
                "S_reference": self.s_reference,
                "S_optimum": self.s_optimum,
                "raw_value": self.raw_value,
                "clamped": self.clamped,
                "hull_dimension": self.hull_dimension,
                "notes": list(self.notes),
            },
        }


def total_expenditure(economy: Economy, q) -> float:
    """Sum over consumers of the least cost of reaching the utility of ``q_j``."""
    q = np.asarray(q, dtype=float)
    if q.shape != (economy.k, economy.l):
        raise ValueError(f"plan must be {economy.k} x {economy.l}")
    if np.any(q < -1e-12):
        raise ValueError("plan entries must be nonnegative")
    q = np.clip(q, 0.0, None)
    total = 0.0
    for j, c in enumerate(economy.consumers):
        total += c.utility.expenditure(c.prices, c.utility(q[:, j]))
    return total


def _floors(economy: Economy, q_bar: np.ndarray) -> list:
    return [(c.utility, c.utility(q_bar[:, j])) for j, c in enumerate(economy.consumers)]


def _families(economy: Economy) -> set:
    return {c.utility.family for c in economy.consumers}


# --------------------------------------------------------------------------- LP


def _linear_objective(economy: Economy) -> np.ndarray:
    k, l = economy.k, economy.l
    s = np.zeros(k * l)
    for j, c in enumerate(economy.consumers):
        u = c.utility
        s[j::l] = u.index_price(np.asarray(c.prices)) * u.index_grad(np.zeros(k))
    return s


def _linear_floor_rows(economy: Economy, q_bar: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    k, l = economy.k, economy.l
    rows, rhs = [], []
    for j, c in enumerate(economy.consumers):
        if c.utility.family != "linear":
            continue  # quantity-only floors are implied by compatibility
        row = np.zeros(k * l)
        row[j::l] = c.utility.coefficients
        rows.append(-row)
        rhs.append(-c.utility.index(q_bar[:, j]))
    return np.array(rows).reshape(-1, k * l), np.array(rhs)


def _lp_face(economy, cs, q_bar, s, value, slack):
    M, b = cs.equalities()
    F, f = _linear_floor_rows(economy, q_bar)
    A_ub = np.vstack([F, -s[None, :]])
    b_ub = np.concatenate([f, [-(value - slack)]])
    return M, b, A_ub, b_ub


def _solve_lp(economy: Economy, cs: ConstraintSystem, q_bar: np.ndarray):
    M, b = cs.equalities()
    F, f = _linear_floor_rows(economy, q_bar)
    s = _linear_objective(economy)
    res = linprog_max(s, M, b, F, f)
    iters = res.iterations
    # Lexicographically smallest maximizer.
    slack = 1e-12 * max(1.0, abs(res.value))
    M2, b2, A_ub, b_ub = _lp_face(economy, cs, q_bar, s, res.value, slack)
    x = res.x
    n = cs.n_vars
    for r in range(n):
        e = np.zeros(n)
        e[r] = -1.0
        sub = linprog_max(e, M2, b2, A_ub, b_ub)
        iters += sub.iterations
        x = sub.x
        cap = np.zeros(n)
        cap[r] = 1.0
        A_ub = np.vstack([A_ub, cap])
        b_ub = np.append(b_ub, x[r] + 1e-13)
    return np.clip(x, 0.0, None).reshape(cs.k, cs.l), iters


# ---------------------------------------------------------------------- barrier


@dataclass
class _Reduction:
    basis: np.ndarray  # orthonormal directions of the reduced affine hull
    direction: np.ndarray  # strictly improving direction (flat), may be zero
    nonlinear: list  # consumer indices whose concave floor stays active
    linear: list  # consumer indices whose linear floor stays active
    notes: list


def _floor_grad(u, q_j: np.ndarray) -> np.ndarray:
    g = np.asarray(u.index_grad(q_j), dtype=float)
    return np.where(np.isfinite(g), g, 1e6)


def _reduce(economy: Economy, cs: ConstraintSystem, q_bar: np.ndarray, tol: Tolerances) -> _Reduction:
    """Find which sign and floor constraints can be made slack near ``q_bar``.

    Works on the tangent cone at ``q_bar``.  A floor whose directional
    derivative cannot be made positive is tight on the whole feasible set:
    for a strictly quasi-concave utility that pins the consumer's column, for
    a linear one it is an equality.  Iterates until no new equality appears.
    """
    k, l = cs.k, cs.l
    n = k * l
    M, _ = cs.equalities()
    extra: list[np.ndarray] = []
    flat = q_bar.ravel()
    zero_coords = [r for r in range(n) if cs.present_mask()[r] and flat[r] <= tol.interior]
    nonlinear, linear = [], []
    for j, c in enumerate(economy.consumers):
        u = c.utility
        if u.family in STRICT_FAMILIES:
            if u.index(q_bar[:, j]) > 0:
                nonlinear.append(j)
        elif u.family == "linear":
            linear.append(j)
    grads = {j: _floor_grad(economy.consumers[j].utility, q_bar[:, j]) for j in nonlinear + linear}
    notes: list = []

    def objective(cand) -> np.ndarray:
        kind, idx = cand
        row = np.zeros(n)
        if kind == "coord":
            row[idx] = 1.0
        else:
            row[idx::l] = grads[idx]
        return row

    while True:
        cands = [("coord", r) for r in zero_coords] + [("floor", j) for j in nonlinear + linear]
        E = np.vstack([M] + extra) if extra else M
        basis = null_space(E, n, tol.rank)
        if basis.shape[1] == 0 or not cands:
            return _Reduction(basis, np.zeros(n), nonlinear, linear, notes)
        # Variables: d = dp - dm, 0 <= dp, dm <= 1.
        A_eq = np.hstack([E, -E])
        cone = np.vstack([objective(c) for c in cands])
        A_ub = np.vstack([-np.hstack([cone, -cone]), np.eye(2 * n)])
        b_ub = np.concatenate([np.zeros(len(cands)), np.ones(2 * n)])
        slack_found: dict = {}
        for c in cands:
            if c in slack_found:
                continue
            obj = objective(c)
            res = linprog_max(np.concatenate([obj, -obj]), A_eq, np.zeros(len(A_eq)), A_ub, b_ub)
            d = res.x[:n] - res.x[n:]
            if res.value > 1e-9:
                for other in cands:
                    if other not in slack_found and objective(other) @ d > 1e-9:
                        slack_found[other] = d
        stuck = [c for c in cands if c not in slack_found]
        if not stuck:
            direction = np.sum(list({id(d): d for d in slack_found.values()}.values()), axis=0)
            return _Reduction(basis, direction, nonlinear, linear, notes)
        for kind, idx in stuck:
            if kind == "coord":
                row = np.zeros(n)
                row[idx] = 1.0
                extra.append(row[None, :])
                zero_coords.remove(idx)
            elif idx in nonlinear:
                block = np.zeros((k, n))
                for i in range(k):
                    block[i, i * l + idx] = 1.0
                extra.append(block)
                nonlinear.remove(idx)
                notes.append(f"consumer {idx} cannot gain: column fixed at reference")
            else:
                extra.append(objective((kind, idx))[None, :])
                linear.remove(idx)
                notes.append(f"consumer {idx} linear floor is tight on the feasible set")


def _solve_barrier(economy: Economy, cs: ConstraintSystem, q_bar: np.ndarray, tol: Tolerances, max_iter: int):
    k, l = cs.k, cs.l
    red = _reduce(economy, cs, q_bar, tol)
    N = red.basis
    d = N.shape[1]
    base = q_bar.ravel().copy()
    if d == 0:
        return q_bar.copy(), 0, 0.0, 0, red.notes
    moving = [r for r in range(k * l) if np.linalg.norm(N[r]) > 1e-12]
    cons_data = economy.consumers
    weights = [c.utility.index_price(np.asarray(c.prices)) for c in cons_data]
    vbar = {j: cons_data[j].utility.index(q_bar[:, j]) for j in red.nonlinear + red.linear}
    col_rows = [N[j::l] for j in range(l)]  # k x d block per consumer

    def plan(z):
        return base + N @ z

    def objective(z):
        q = plan(z)
        val, grad, hess = 0.0, np.zeros(d), np.zeros((d, d))
        for j, c in enumerate(cons_data):
            qj = q[j::l]
            B = col_rows[j]
            u = c.utility
            val += weights[j] * u.index(qj)
            grad += weights[j] * B.T @ u.index_grad(qj)
            hess += weights[j] * B.T @ u.index_hess(qj) @ B
        return val, grad, hess

    def coord_constraint(r):
        row = N[r]

        def c(z):
            return base[r] + row @ z, row, np.zeros((d, d))

        return c

    def floor_constraint(j):
        u = cons_data[j].utility
        B = col_rows[j]

        def c(z):
            qj = base[j::l] + B @ z
            if np.any(qj <= 0) and u.family in STRICT_FAMILIES:
                return -1.0, np.zeros(d), np.zeros((d, d))
            return u.index(qj) - vbar[j], B.T @ u.index_grad(qj), B.T @ u.index_hess(qj) @ B

        return c

    constraints = [coord_constraint(r) for r in moving]
    constraints += [floor_constraint(j) for j in red.nonlinear + red.linear]
    z_dir = N.T @ red.direction
    eps = 1.0
    z0 = np.zeros(d)
    for _ in range(200):
        trial = eps * z_dir
        if all(c(trial)[0] > 0 for c in constraints):
            z0 = trial
            break
        eps *= 0.5
    else:
        raise InfeasibleProblem("could not find a strictly feasible start for the barrier method")
    res = barrier_maximize(objective, constraints, z0, MU_SCHEDULE, max_iter=max_iter)
    q = plan(res.z).reshape(k, l)
    q[np.abs(q) < 1e-15] = 0.0
    return np.clip(q, 0.0, None), res.iterations, res.decrement, d, red.notes


# ------------------------------------------------------------------ valuation


def exchange_value(
    economy: Economy,
    G: TransportPath,
    q_bar,
    tol: Tolerances = DEFAULT,
    max_iter: int = 200,
    probe: bool = True,
) -> ValuationResult:
    q_bar = np.asarray(q_bar, dtype=float)
    if G.k != economy.k or G.l != economy.l:
        raise DimensionMismatch("path and economy disagree on the number of goods or consumers")
    cs = build_constraints(G, q_bar, _floors(economy, q_bar), tol)
    s_ref = total_expenditure(economy, q_bar)
    if _families(economy) <= LINEAR_FAMILIES:
        q_star, iters = _solve_lp(economy, cs, q_bar)
        backend, residual, notes = "lp", 0.0, []
        dim = cs.hull_basis(tol).shape[1]
    else:
        q_star, iters, residual, dim, notes = _solve_barrier(economy, cs, q_bar, tol, max_iter)
        backend = "barrier"
    s_opt = total_expenditure(economy, q_star)
    raw = s_opt - s_ref
    value, clamped = raw, False
    if raw < tol.opt:
        if raw < -max(tol.opt, 1e-7 * max(1.0, abs(s_ref))):
            log.warning("solver returned a plan worse than the reference by %.3g", -raw)
        value, clamped = 0.0, bool(raw != 0.0)
        if clamped:
            notes = notes + [f"raw value {raw:.3g} clamped to 0"]
    result = ValuationResult(
        value=float(value),
        plan=q_star,
        backend=backend,
        iterations=iters,
        residual=float(residual),
        s_reference=s_ref,
        s_optimum=s_opt,
        raw_value=float(raw),
        clamped=clamped,
        hull_dimension=int(dim),
        notes=notes,
    )
    if probe:
        result.uniqueness = uniqueness_probe(economy, G, result, q_bar=q_bar, tol=tol)
    return result


def uniqueness_probe(economy: Economy, G: TransportPath, result: ValuationResult, q_bar=None, tol: Tolerances = DEFAULT) -> str:
    """'unique', 'non-unique' or 'unknown' for the maximizer set."""
    fams = _families(economy)
    if result.hull_dimension == 0:
        return "unique"
    if fams <= STRICT_FAMILIES:
        return "unique"
    if not fams <= LINEAR_FAMILIES or q_bar is None:
        return "unknown"
    q_bar = np.asarray(q_bar, dtype=float)
    cs = build_constraints(G, q_bar, None, tol)
    s = _linear_objective(economy)
    best = float(s @ result.plan.ravel())
    M, b, A_ub, b_ub = _lp_face(economy, cs, q_bar, s, best, 1e-12 * max(1.0, abs(best)))
    for r in range(cs.n_vars):
        e = np.zeros(cs.n_vars)
        e[r] = 1.0
        hi = linprog_max(e, M, b, A_ub, b_ub).value
        lo = -linprog_max(-e, M, b, A_ub, b_ub).value
        if hi - lo > 1e-7:
            return "non-unique"
    return "unique"


# -------------------------------------------------------------------- criteria


@dataclass
class CriterionReport:
    name: str
    applies: bool
    conclusion: str  # "zero", "positive" or "inconclusive"
    witness: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"name": self.name, "applies": self.applies, "conclusion": self.conclusion, "witness": self.witness}


def criterion_quantity_only(economy: Economy) -> CriterionReport:
    fams = [c.utility.family for c in economy.consumers]
    ok = all(f == "quantity_only" for f in fams)
    return CriterionReport("quantity_only", ok, "zero" if ok else "inconclusive", {"families": fams})


def criterion_collinear_prices(economy: Economy, tol: Tolerances = DEFAULT) -> CriterionReport:
    P = economy.prices()
    p1 = P[:, 0]
    ratios = []
    ok = True
    for j in range(economy.l):
        lam = float(np.dot(P[:, j], p1) / np.dot(p1, p1))
        ratios.append(lam)
        if lam <= 0 or np.max(np.abs(P[:, j] - lam * p1)) > tol.collinear * np.max(np.abs(P[:, j])):
            ok = False
    witness = {"lambda": ratios} if ok else {"lambda": None}
    return CriterionReport("collinear_prices", ok, "zero" if ok else "inconclusive", witness)


def _cross_overlaps(G: TransportPath):
    routes = route_matrix(G)
    k, l = routes.shape
    for i1, i2 in itertools.permutations(range(k), 2):
        for j1, j2 in itertools.permutations(range(l), 2):
            a, b = routes[i1, j2], routes[i2, j1]
            if a is not None and b is not None:
                common = set(a) & set(b)
                if common:
                    yield (i1, i2, j1, j2), common


def criterion_disjoint_routes(G: TransportPath) -> CriterionReport:
    for (i1, i2, j1, j2), common in _cross_overlaps(G):
        witness = {
            "violating_pair": [[i1, j2], [i2, j1]],
            "shared_vertices": sorted(map(str, common)),
        }
        return CriterionReport("disjoint_routes", False, "inconclusive", witness)
    return CriterionReport("disjoint_routes", True, "zero", {})


def _foc_holds(u, p, q_j, rtol=1e-6) -> bool:
    """Gradient proportional to prices on the bundle's support."""
    support = np.flatnonzero(q_j > 0)
    if support.size == 0:
        return False
    grad = u.gradient(q_j)
    if not np.all(np.isfinite(grad[support])):
        return False
    ratios = grad[support] / np.asarray(p)[support]
    return bool(np.ptp(ratios) <= rtol * np.max(np.abs(ratios)))


def criterion_positive(economy: Economy, G: TransportPath, q_bar, tol: Tolerances = DEFAULT) -> CriterionReport:
    """Sufficient conditions for a strictly positive exchange value."""
    q_bar = np.asarray(q_bar, dtype=float)
    fams = [c.utility.family for c in economy.consumers]
    routes = route_matrix(G)
    n_routes, chi = routes.count, euler_characteristic(G)
    witness: dict = {"N": n_routes, "chi": chi, "k_plus_l": G.k + G.l}

    # (a) strictly concave homogeneous utilities, positive dimension, interior plan
    if set(fams) <= STRICT_FAMILIES and G.k + G.l < n_routes + chi:
        cs = build_constraints(G, q_bar, None, tol)
        if interior_point_test(cs, tol=tol):
            witness["route"] = "interior"
            return CriterionReport("positive", True, "positive", witness)

    # (b) overlapping cross routes with the price inequalities
    P = economy.prices()
    differentiable = []
    for j, c in enumerate(economy.consumers):
        u = c.utility
        ok = u.family in STRICT_FAMILIES or (u.family == "linear" and all(x > 0 for x in u.coefficients))
        differentiable.append(ok and _foc_holds(u, c.prices, q_bar[:, j]))
    for (i1, i2, j1, j2), common in _cross_overlaps(G):
        prices_ok = P[i2, j1] > P[i1, j1] and P[i1, j2] > P[i2, j2]
        entries = [q_bar[i1, j1], q_bar[i1, j2], q_bar[i2, j1], q_bar[i2, j2]]
        if prices_ok and min(entries) > tol.interior and differentiable[j1] and differentiable[j2]:
            witness.update(
                route="overlap",
                goods=[i1, i2],
                consumers=[j1, j2],
                shared_vertices=sorted(map(str, common)),
            )
            return CriterionReport("positive", True, "positive", witness)
    witness["formula_dimension"] = polytope_dimension_formula(G)
    return CriterionReport("positive", False, "inconclusive", witness)


def all_criteria(economy: Economy, G: TransportPath | None, q_bar, tol: Tolerances = DEFAULT) -> list[CriterionReport]:
    out = [criterion_quantity_only(economy), criterion_collinear_prices(economy, tol)]
    if economy.l == 1 or economy.k == 1:
        out.append(CriterionReport("single_good_or_consumer", True, "zero", {"k": economy.k, "l": economy.l}))
    if G is not None:
        out.append(criterion_disjoint_routes(G))
        out.append(criterion_positive(economy, G, q_bar, tol))
    return out
