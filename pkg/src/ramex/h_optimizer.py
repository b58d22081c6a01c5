"""Trade transport cost against exchange value over small topology families.

For each candidate topology the exchange value is a constant (it only depends
on which routes share which edges), so the search is: enumerate templates,
keep those compatible with the demand plan, place the interior vertices to
minimize the M_alpha cost, then rank by ``H = M_alpha - sigma * V``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .economy import Economy, demand_profile
from .errors import EmptyCandidateSet, SizeLimit
from .exchange_value import exchange_value
from .tolerances import DEFAULT, Tolerances
from .transport_graph import (
    TransportPath,
    combinatorial_signature,
    edge_weights_from_plan,
    iter_route_vertices,
    m_alpha_cost,
    route_matrix,
)

log = logging.getLogger(__name__)

MAX_TERMINALS = 3
MAX_INTERIOR = 2
MERGE_DISTANCE = 1e-7


@dataclass(frozen=True)
class TopologyCandidate:
    """Combinatorial template: boundary vertices ``x1..xk``, ``y1..yl``, interior ``s1..``."""

    k: int
    l: int
    n_interior: int
    edges: tuple[tuple[str, str], ...]
    signature: str

    @property
    def vertex_names(self) -> list[str]:
        return (
            [f"x{i + 1}" for i in range(self.k)]
            + [f"y{j + 1}" for j in range(self.l)]
            + [f"s{n + 1}" for n in range(self.n_interior)]
        )

    def skeleton(self) -> TransportPath:
        """Unit-weight path on placeholder coordinates (for route queries)."""
        names = self.vertex_names
        verts = {v: (float(n), 0.0) for n, v in enumerate(names)}
        return TransportPath(
            verts,
            {e: 1.0 for e in self.edges},
            tuple((f"x{i + 1}", 1.0) for i in range(self.k)),
            tuple((f"y{j + 1}", 1.0) for j in range(self.l)),
        )

    def describe(self) -> str:
        return f"{self.n_interior} interior, " + ", ".join(f"{a}->{b}" for a, b in self.edges)


def _forests(slots, n_vertices, limit):
    """Yield every acyclic subset of ``slots`` (index pairs) of size <= limit."""

    def rec(start, chosen, parent):
        yield chosen
        if len(chosen) == limit:
            return
        for s in range(start, len(slots)):
            a, b = slots[s]
            pa = parent
            ra, rb = a, b
            while pa[ra] != ra:
                ra = pa[ra]
            while pa[rb] != rb:
                rb = pa[rb]
            if ra == rb:
                continue
            new = list(pa)
            new[ra] = rb
            yield from rec(s + 1, chosen + (s,), new)

    yield from rec(0, (), list(range(n_vertices)))


def _valid_degrees(k, l, n, edges) -> bool:
    out_deg = [0] * (k + l + n)
    in_deg = [0] * (k + l + n)
    for a, b in edges:
        out_deg[a] += 1
        in_deg[b] += 1
    if any(out_deg[i] == 0 for i in range(k)):
        return False
    if any(in_deg[k + j] == 0 for j in range(l)):
        return False
    for v in range(k + l, k + l + n):
        if in_deg[v] == 0 or out_deg[v] == 0 or in_deg[v] + out_deg[v] < 3:
            return False
    return True


@lru_cache(maxsize=None)
def enumerate_topologies(k: int, l: int, max_interior: int = 2) -> tuple[TopologyCandidate, ...]:
    """Distinct templates linking ``k`` sources to ``l`` sinks.

    Covers every bipartite set of direct edges (route uniqueness is automatic
    there) and every forest with 1..``max_interior`` interior vertices, each of
    degree at least three.  Sources only emit and sinks only receive.
    Duplicates are removed by unweighted combinatorial signature.
    """
    if not (1 <= k <= MAX_TERMINALS and 1 <= l <= MAX_TERMINALS):
        raise SizeLimit(f"topology enumeration supports k, l <= {MAX_TERMINALS}")
    if not 0 <= max_interior <= MAX_INTERIOR:
        raise SizeLimit(f"topology enumeration supports at most {MAX_INTERIOR} interior vertices")
    names = lambda n: [f"x{i + 1}" for i in range(k)] + [f"y{j + 1}" for j in range(l)] + [
        f"s{m + 1}" for m in range(n)
    ]
    seen: dict[str, TopologyCandidate] = {}

    def add(n, idx_edges):
        nm = names(n)
        edges = tuple(sorted((nm[a], nm[b]) for a, b in idx_edges))
        tmp = TopologyCandidate(k, l, n, edges, "")
        sig = combinatorial_signature(tmp.skeleton(), with_weights=False)
        if sig not in seen:
            seen[sig] = TopologyCandidate(k, l, n, edges, sig)

    direct = [(i, k + j) for i in range(k) for j in range(l)]
    for r in range(1, len(direct) + 1):
        for subset in itertools.combinations(direct, r):
            if _valid_degrees(k, l, 0, subset):
                add(0, subset)
    for n in range(1, max_interior + 1):
        interior = list(range(k + l, k + l + n))
        slots = list(direct)
        slots += [(i, s) for i in range(k) for s in interior]
        slots += [(s, k + j) for s in interior for j in range(l)]
        slots += [(a, b) for a, b in itertools.permutations(interior, 2)]
        size = k + l + n
        for chosen in _forests(slots, size, size - 1):
            edges = [slots[s] for s in chosen]
            if _valid_degrees(k, l, n, edges):
                add(n, edges)
    return tuple(sorted(seen.values(), key=lambda c: (c.n_interior, len(c.edges), c.edges)))


# ------------------------------------------------------------------ geometry


@dataclass
class GeometryResult:
    path: TransportPath
    cost: float
    initial_cost: float
    converged: bool
    gradient_norm: float
    iterations: int
    merges: list = field(default_factory=list)


def realize(candidate: TopologyCandidate, economy: Economy, plan: np.ndarray) -> TransportPath | None:
    """Place the template in the economy with weights induced by ``plan``.

    Returns None when the plan uses a route the template lacks or when an
    edge would carry no mass.  Interior vertices start at the plan-weighted
    average of where they sit along the routes through them.
    """
    skel = candidate.skeleton()
    routes = route_matrix(skel)
    present = routes.present()
    if np.any(plan[~present] > DEFAULT.bal):
        return None
    weights = edge_weights_from_plan(routes, plan)
    if len(weights) != len(candidate.edges) or min(weights.values()) <= DEFAULT.bal:
        return None
    verts = {f"x{i + 1}": g.location for i, g in enumerate(economy.goods)}
    verts.update({f"y{j + 1}": c.location for j, c in enumerate(economy.consumers)})
    for n in range(candidate.n_interior):
        name = f"s{n + 1}"
        acc, mass = np.zeros(economy.dimension), 0.0
        for i, j, _ in iter_route_vertices(routes):
            r = routes[i, j]
            if name in r and plan[i, j] > 0:
                t = r.index(name) / (len(r) - 1)
                acc += plan[i, j] * ((1 - t) * np.asarray(verts[r[0]]) + t * np.asarray(verts[r[-1]]))
                mass += plan[i, j]
        verts[name] = tuple(acc / mass)
    taken = []
    for v, loc in list(verts.items()):
        bump = 0
        while any(np.allclose(loc, o, atol=1e-9, rtol=0) for o in taken):
            bump += 1
            loc = tuple(np.asarray(loc) + 1e-4 * bump * np.arange(1, len(loc) + 1))
        verts[v] = loc
        taken.append(loc)
    sources = tuple((f"x{i + 1}", float(plan[i].sum())) for i in range(economy.k))
    sinks = tuple((f"y{j + 1}", float(plan[:, j].sum())) for j in range(economy.l))
    return TransportPath(verts, weights, sources, sinks)


class _Geometry:
    def __init__(self, G: TransportPath, alpha: float):
        self.alpha = alpha
        self.fixed = {v: np.asarray(x) for v, x in G.vertices.items()}
        self.free = list(G.interior_vertices())
        self.edges = {e: w for e, w in G.edges.items()}
        self.G = G

    def coeff(self, e):
        return self.edges[e] ** self.alpha

    def positions(self, X):
        pos = dict(self.fixed)
        for n, v in enumerate(self.free):
            pos[v] = X[n]
        return pos

    def cost(self, X):
        pos = self.positions(X)
        return float(sum(self.coeff(e) * np.linalg.norm(pos[e[0]] - pos[e[1]]) for e in self.edges))

    def grad(self, X):
        pos = self.positions(X)
        idx = {v: n for n, v in enumerate(self.free)}
        g = np.zeros_like(X)
        for (a, b) in self.edges:
            d = pos[a] - pos[b]
            L = np.linalg.norm(d)
            if L < 1e-300:
                continue
            u = self.coeff((a, b)) * d / L
            if a in idx:
                g[idx[a]] += u
            if b in idx:
                g[idx[b]] -= u
        return g

    def merge(self, X, v, u):
        """Contract the edge between interior ``v`` and its neighbour ``u``."""
        edges = {}
        for (a, b), w in self.edges.items():
            a2 = u if a == v else a
            b2 = u if b == v else b
            if a2 != b2:
                edges[(a2, b2)] = w
        n = self.free.index(v)
        X = np.delete(X, n, axis=0)
        self.free.remove(v)
        self.edges = edges
        return X

    def neighbours(self, v):
        return [b for a, b in self.edges if a == v] + [a for a, b in self.edges if b == v]

    def to_path(self, X) -> TransportPath:
        pos = self.positions(X)
        used = {v for e in self.edges for v in e} | {v for v, _ in self.G.sources} | {v for v, _ in self.G.sinks}
        verts = {v: tuple(pos[v]) for v in self.G.vertices if v in used}
        return TransportPath(verts, dict(self.edges), self.G.sources, self.G.sinks)


def _snap(geo: _Geometry, X, cost, only_close: bool):
    """Contract the first interior-to-neighbour edge that is (near) zero length
    or, unless ``only_close``, whose contraction does not raise the cost."""
    for v in list(geo.free):
        n = geo.free.index(v)
        for u in geo.neighbours(v):
            target = geo.positions(X)[u]
            trial = X.copy()
            trial[n] = target
            close = np.linalg.norm(X[n] - target) < MERGE_DISTANCE
            if close or (not only_close and geo.cost(trial) <= cost + 1e-15 * max(1.0, cost)):
                return geo.merge(trial, v, u), (v, u)
    return X, None


def _descend(geo: _Geometry, X, tol: Tolerances, budget: int):
    """Barzilai-Borwein gradient descent with Armijo backtracking.

    Stops at a stationary point, when no step lowers the cost (a kink where
    an edge has collapsed), or when two vertices meet and are merged.
    Returns ``(X, cost, gradient norm, iterations, stationary, merge)``.
    """
    cost = geo.cost(X)
    prev_X = prev_g = None
    gnorm = np.inf
    for it in range(budget):
        g = geo.grad(X)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol.geo:
            return X, cost, gnorm, it, True, None
        if prev_X is not None:
            s_vec, y_vec = (X - prev_X).ravel(), (g - prev_g).ravel()
            sy = s_vec @ y_vec
            step = (s_vec @ s_vec) / sy if sy > 1e-300 else 1.0 / gnorm
        else:
            step = 0.1 / max(gnorm, 1e-12)
        while True:
            trial = X - step * g
            c_trial = geo.cost(trial)
            if c_trial <= cost - 1e-4 * step * gnorm**2:
                break
            step *= 0.5
            if step * gnorm < 1e-16:
                return X, cost, gnorm, it, False, None
        prev_X, prev_g = X, g
        X, cost = trial, c_trial
        X, merged = _snap(geo, X, cost, only_close=True)
        if merged is not None:
            return X, geo.cost(X), gnorm, it + 1, False, merged
    return X, cost, gnorm, budget, False, None


def optimize_geometry(G: TransportPath, alpha: float, tol: Tolerances = DEFAULT, max_iter: int = 5000) -> GeometryResult:
    """Minimize the M_alpha cost over interior vertex positions.

    Descends to a stationary point of the current topology, then tries
    contracting each interior vertex onto each neighbour and keeps the first
    contraction that does not raise the cost; that is how a Y degrades to a
    V.  Repeats until no contraction helps.  Vertices that come within
    ``MERGE_DISTANCE`` of a neighbour are merged as well.
    """
    geo = _Geometry(G, alpha)
    if not geo.free:
        c0 = m_alpha_cost(G, alpha)
        return GeometryResult(G, c0, c0, True, 0.0, 0)
    X = np.array([geo.fixed[v] for v in geo.free], dtype=float)
    c0 = cost = geo.cost(X)
    merges: list = []
    iters, gnorm, converged = 0, np.inf, False
    while geo.free and iters < max_iter:
        X, cost, gnorm, used, converged, merged = _descend(geo, X, tol, max_iter - iters)
        iters += used
        if merged is None:
            X, merged = _snap(geo, X, cost, only_close=False)
            if merged is None:
                break
        merges.append(merged)
        cost = geo.cost(X)
    if not geo.free:
        gnorm, converged = 0.0, True
    path = geo.to_path(X)
    return GeometryResult(path, m_alpha_cost(path, alpha), c0, converged, gnorm, iters, merges)


# ------------------------------------------------------------------ H search


def h_cost(economy: Economy, G: TransportPath, q_bar, alpha: float, sigma: float, tol: Tolerances = DEFAULT) -> float:
    """``M_alpha(G) - sigma * V(G)`` for a fixed path (any alpha in [0, 1])."""
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    cost = m_alpha_cost(G, alpha)
    if sigma == 0:
        return cost
    return cost - sigma * exchange_value(economy, G, q_bar, tol, probe=False).value


@dataclass
class CandidateRecord:
    template: TopologyCandidate
    path: TransportPath
    signature: str
    cost: float
    value: float
    converged: bool
    cross_overlap: bool

    def h(self, sigma: float) -> float:
        return self.cost - sigma * self.value

    def to_json(self, sigma: float) -> dict:
        return {
            "signature": self.signature,
            "template": self.template.describe(),
            "interior_vertices": sum(1 for v in self.path.interior_vertices()),
            "edges": [{"tail": a, "head": b, "weight": w} for (a, b), w in self.path.edges.items()],
            "coordinates": {str(v): list(x) for v, x in self.path.vertices.items()},
            "M_alpha": self.cost,
            "V": self.value,
            "H": self.h(sigma),
            "geometry_converged": self.converged,
            "cross_routes_overlap": self.cross_overlap,
        }


@dataclass
class HResult:
    alpha: float
    sigma: float
    candidates: list  # CandidateRecord, ranked by H
    best: CandidateRecord

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "sigma": self.sigma,
            "argmin": self.best.signature,
            "candidates": [c.to_json(self.sigma) for c in self.candidates],
            "search_space": "enumerated templates: bipartite direct edges and forests with <= max_interior Steiner vertices",
        }


def _cross_overlap(G: TransportPath) -> bool:
    routes = route_matrix(G)
    k, l = routes.shape
    for i1, i2 in itertools.permutations(range(k), 2):
        for j1, j2 in itertools.permutations(range(l), 2):
            a, b = routes[i1, j2], routes[i2, j1]
            if a is not None and b is not None and set(a) & set(b):
                return True
    return False


def evaluate_candidates(
    economy: Economy, alpha: float, max_interior: int = 2, q_bar=None, tol: Tolerances = DEFAULT
) -> list[CandidateRecord]:
    """Optimized geometry and exchange value for every compatible template."""
    q_bar = demand_profile(economy).plan if q_bar is None else np.asarray(q_bar, dtype=float)
    records: dict[str, CandidateRecord] = {}
    for cand in enumerate_topologies(economy.k, economy.l, max_interior):
        G = realize(cand, economy, q_bar)
        if G is None:
            continue
        value = exchange_value(economy, G, q_bar, tol, probe=False).value
        geo = optimize_geometry(G, alpha, tol)
        sig = combinatorial_signature(geo.path)
        rec = CandidateRecord(cand, geo.path, sig, geo.cost, value, geo.converged, _cross_overlap(geo.path))
        old = records.get(sig)
        if old is None or rec.cost < old.cost - 1e-12:
            records[sig] = rec
    if not records:
        raise EmptyCandidateSet("no enumerated template is compatible with the demand plan")
    return list(records.values())


def rank_candidates(records, sigma: float, tol: Tolerances = DEFAULT) -> list[CandidateRecord]:
    """Ascending H; near-ties (within tol.opt) broken by signature."""
    ordered = sorted(records, key=lambda r: (r.h(sigma), r.signature))
    best = ordered[0]
    ties = [r for r in ordered if r.h(sigma) <= best.h(sigma) + tol.opt]
    head = min(ties, key=lambda r: r.signature)
    return [head] + [r for r in ordered if r is not head]


def optimize_h(
    economy: Economy, alpha: float, sigma: float, max_interior: int = 2, q_bar=None, tol: Tolerances = DEFAULT
) -> HResult:
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0, 1)")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    records = evaluate_candidates(economy, alpha, max_interior, q_bar, tol)
    ranked = rank_candidates(records, sigma, tol)
    return HResult(alpha, sigma, ranked, ranked[0])


def sigma_sweep(economy: Economy, alpha: float, sigmas, max_interior: int = 2, q_bar=None, tol: Tolerances = DEFAULT):
    """One HResult per sigma; candidate evaluation is shared."""
    records = evaluate_candidates(economy, alpha, max_interior, q_bar, tol)
    out = []
    for s in sigmas:
        ranked = rank_candidates(records, s, tol)
        out.append(HResult(alpha, s, ranked, ranked[0]))
    return out
