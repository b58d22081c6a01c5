"""Linear constraints of plans compatible with a transport path.

Plans are k x l matrices flattened row-major: entry ``(i, j)`` lives at
``i * l + j``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, DimensionTooLarge, IncompatiblePair
from .linalg import null_space, rank
from .tolerances import DEFAULT, Tolerances
from .transport_graph import RouteMatrix, TransportPath, euler_characteristic, route_matrix


@dataclass(frozen=True)
class ConstraintSystem:
    k: int
    l: int
    routes: RouteMatrix = field(repr=False)
    edges: tuple  # edge order of ``A`` rows
    A: np.ndarray  # edge-equation coefficients, len(edges) x (k*l)
    rhs: np.ndarray  # edge weights recomputed from the reference plan
    zero_routes: tuple[tuple[int, int], ...]
    reference: np.ndarray | None  # k x l
    floors: tuple | None = None  # ((utility, floor value), ...) per consumer

    @property
    def n_vars(self) -> int:
        return self.k * self.l

    def zero_rows(self) -> np.ndarray:
        Z = np.zeros((len(self.zero_routes), self.n_vars))
        for r, (i, j) in enumerate(self.zero_routes):
            Z[r, i * self.l + j] = 1.0
        return Z

    def equalities(self) -> tuple[np.ndarray, np.ndarray]:
        """All linear equalities as ``(M, b)`` with ``M @ vec(q) = b``."""
        Z = self.zero_rows()
        return np.vstack([Z, self.A]), np.concatenate([np.zeros(len(Z)), self.rhs])

    def present_mask(self) -> np.ndarray:
        return self.routes.present().ravel()

    def hull_basis(self, tol: Tolerances = DEFAULT) -> np.ndarray:
        M, _ = self.equalities()
        return null_space(M, self.n_vars, tol.rank)

    def equation_strings(self) -> list[str]:
        out = []
        for row, w in zip(self.A, self.rhs):
            terms = [f"q{i + 1}{j + 1}" for i in range(self.k) for j in range(self.l) if row[i * self.l + j]]
            out.append(" + ".join(terms) + f" = {w:g}")
        return out


def _plan_array(q, k: int, l: int) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (k, l):
        raise DimensionMismatch(f"plan has shape {q.shape}, expected {(k, l)}")
    return q


def _edge_matrix(routes: RouteMatrix, k: int, l: int) -> tuple[tuple, np.ndarray]:
    through = routes.routes_through()
    edges = tuple(sorted(through, key=repr))
    A = np.zeros((len(edges), k * l))
    for r, e in enumerate(edges):
        for i, j in through[e]:
            A[r, i * l + j] = 1.0
    return edges, A


@dataclass(frozen=True)
class CompatibilityReport:
    compatible: bool
    zero_route_residuals: dict
    edge_residuals: dict

    @property
    def max_residual(self) -> float:
        vals = list(self.zero_route_residuals.values()) + list(self.edge_residuals.values())
        return max((abs(v) for v in vals), default=0.0)


def compatibility_check(G: TransportPath, q, tol: Tolerances = DEFAULT) -> CompatibilityReport:
    """Plan vanishes off existing routes and reproduces every edge weight."""
    routes = route_matrix(G)
    q = _plan_array(q, G.k, G.l)
    present = routes.present()
    zero_res = {(i, j): float(q[i, j]) for i in range(G.k) for j in range(G.l) if not present[i, j]}
    through = routes.routes_through()
    edge_res = {}
    for e, w in G.edges.items():
        carried = sum(q[i, j] for i, j in through.get(e, ()))
        edge_res[e] = float(carried - w)
    ok = all(abs(v) <= tol.bal for v in zero_res.values()) and all(abs(v) <= tol.bal for v in edge_res.values())
    return CompatibilityReport(ok, zero_res, edge_res)


def build_constraints(G: TransportPath, q_bar=None, floors=None, tol: Tolerances = DEFAULT) -> ConstraintSystem:
    """Zero-route constraints plus one equation per edge.

    Right-hand sides are recomputed from ``q_bar``; with no plan the graph's
    own weights are used (enough for rank and dimension queries).
    """
    routes = route_matrix(G)
    k, l = G.k, G.l
    edges, A = _edge_matrix(routes, k, l)
    present = routes.present()
    zero = tuple((i, j) for i in range(k) for j in range(l) if not present[i, j])
    if q_bar is None:
        rhs = np.array([G.edges[e] for e in edges])
        ref = None
    else:
        ref = _plan_array(q_bar, k, l)
        rep = compatibility_check(G, ref, tol)
        if not rep.compatible:
            raise IncompatiblePair(f"plan is not compatible with the path (max residual {rep.max_residual:.3g})")
        rhs = A @ ref.ravel()
    missing = set(G.edges) - set(edges)
    if missing:
        raise IncompatiblePair(f"edges {sorted(missing, key=repr)} lie on no source-to-sink route")
    return ConstraintSystem(k, l, routes, edges, A, rhs, zero, ref, None if floors is None else tuple(floors))


def polytope_dimension_rank(cs: ConstraintSystem, tol: Tolerances = DEFAULT) -> int:
    """Affine dimension of the compatible-plan set via elimination rank."""
    return cs.n_vars - len(cs.zero_routes) - rank(cs.A, tol.rank)


def polytope_dimension_formula(G: TransportPath) -> int:
    """Route count plus Euler characteristic minus boundary point count."""
    routes = route_matrix(G)
    return routes.count + euler_characteristic(G) - (G.k + G.l)


def _max_step(q: np.ndarray, d: np.ndarray) -> float:
    neg = d < -1e-15
    if not neg.any():
        return np.inf
    return float(np.min(q[neg] / -d[neg]))


def interior_point_test(cs: ConstraintSystem, q=None, tol: Tolerances = DEFAULT) -> bool:
    """Is the plan in the relative interior of the nonnegative compatible set?"""
    q = cs.reference if q is None else np.asarray(q, dtype=float)
    v = q.ravel()
    mask = cs.present_mask()
    if np.any(v[mask] <= tol.interior):
        return False
    N = cs.hull_basis(tol)
    for d in N.T:
        if min(_max_step(v, d), _max_step(v, -d)) <= tol.interior:
            return False
    return True


def vertices(cs: ConstraintSystem, d_max: int = 6, tol: Tolerances = DEFAULT) -> list[np.ndarray]:
    """Vertices of the compatible-plan polytope by active-set enumeration."""
    if cs.reference is None:
        raise ValueError("vertex enumeration needs a reference plan")
    N = cs.hull_basis(tol)
    d = N.shape[1]
    if d > d_max:
        raise DimensionTooLarge(f"dimension {d} exceeds the enumeration cap {d_max}")
    base = cs.reference.ravel()
    if d == 0:
        return [cs.reference.copy()]
    free = [r for r in range(cs.n_vars) if np.linalg.norm(N[r]) > 1e-12]
    found: list[np.ndarray] = []
    for active in itertools.combinations(free, d):
        B = N[list(active)]
        if abs(np.linalg.det(B)) < 1e-10:
            continue
        z = np.linalg.solve(B, -base[list(active)])
        x = base + N @ z
        if x.min() < -tol.bal:
            continue
        x = np.clip(x, 0.0, None)
        x[np.abs(x) < 1e-13] = 0.0
        if not any(np.max(np.abs(x - y)) <= tol.bal * 10 for y in found):
            found.append(x)
    found.sort(key=lambda x: tuple(np.round(x, 12)))
    return [x.reshape(cs.k, cs.l) for x in found]
