"""Weighted directed graphs carrying mass from sources to sinks."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import AmbiguousRoute, HubCollision, UnknownVertex
from .tolerances import DEFAULT, Tolerances

VertexId = Hashable
Edge = tuple  # (tail, head)


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite sum of point masses, as ``((location, mass), ...)``."""

    atoms: tuple[tuple[tuple[float, ...], float], ...]

    def __post_init__(self):
        atoms = tuple((tuple(float(x) for x in loc), float(m)) for loc, m in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if any(m <= 0 for _, m in atoms):
            raise ValueError("atomic masses must be strictly positive")
        locs = [loc for loc, _ in atoms]
        if len(set(locs)) != len(locs):
            raise ValueError("atom locations must be distinct")

    @property
    def total_mass(self) -> float:
        return sum(m for _, m in self.atoms)

    def __len__(self):
        return len(self.atoms)


@dataclass(frozen=True)
class TransportPath:
    """Directed graph with straight-segment edges.

    ``sources[i]`` / ``sinks[j]`` name the vertices holding good ``i`` and
    consumer ``j`` together with their masses; their order fixes the row and
    column order of every plan and route matrix.
    """

    vertices: dict
    edges: dict
    sources: tuple[tuple[VertexId, float], ...]
    sinks: tuple[tuple[VertexId, float], ...]

    def __post_init__(self):
        verts = {v: tuple(float(x) for x in loc) for v, loc in self.vertices.items()}
        edges = {}
        for (a, b), w in self.edges.items():
            if a == b:
                raise ValueError(f"self-loop at vertex {a!r}")
            if a not in verts or b not in verts:
                raise UnknownVertex(f"edge ({a!r}, {b!r}) references an unknown vertex")
            if verts[a] == verts[b]:
                raise ValueError(f"edge ({a!r}, {b!r}) has zero length")
            if w <= 0:
                raise ValueError(f"edge ({a!r}, {b!r}) must carry positive weight")
            edges[(a, b)] = float(w)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "sources", tuple((v, float(m)) for v, m in self.sources))
        object.__setattr__(self, "sinks", tuple((v, float(m)) for v, m in self.sinks))
        for v, _ in self.sources + self.sinks:
            if v not in verts:
                raise UnknownVertex(f"boundary vertex {v!r} is not in the graph")

    @property
    def k(self) -> int:
        return len(self.sources)

    @property
    def l(self) -> int:
        return len(self.sinks)

    def out_edges(self, v) -> list:
        return [e for e in self.edges if e[0] == v]

    def length(self, edge) -> float:
        a, b = edge
        return float(np.linalg.norm(np.subtract(self.vertices[a], self.vertices[b])))

    def interior_vertices(self) -> list:
        boundary = {v for v, _ in self.sources} | {v for v, _ in self.sinks}
        return [v for v in self.vertices if v not in boundary]

    def with_locations(self, moves: dict) -> "TransportPath":
        verts = dict(self.vertices)
        verts.update({v: tuple(loc) for v, loc in moves.items()})
        return TransportPath(verts, dict(self.edges), self.sources, self.sinks)


@dataclass(frozen=True)
class BalanceReport:
    residuals: dict
    valid: bool
    max_residual: float


def _locate(G: TransportPath, loc, tol: float) -> VertexId:
    for v, x in G.vertices.items():
        if np.allclose(x, loc, rtol=0.0, atol=tol):
            return v
    raise UnknownVertex(f"no graph vertex at location {tuple(loc)}")


def validate_balance(
    G: TransportPath,
    a: AtomicMeasure | None = None,
    b: AtomicMeasure | None = None,
    tol: Tolerances = DEFAULT,
) -> BalanceReport:
    """Per-vertex residual of (outflow - inflow - net supply).

    With ``a``/``b`` omitted the graph's own source and sink masses are used;
    otherwise measure atoms are matched to vertices by location.
    """
    supply = {v: 0.0 for v in G.vertices}
    if a is None:
        for v, m in G.sources:
            supply[v] += m
    else:
        for loc, m in a.atoms:
            supply[_locate(G, loc, 1e-12)] += m
    if b is None:
        for v, n in G.sinks:
            supply[v] -= n
    else:
        for loc, n in b.atoms:
            supply[_locate(G, loc, 1e-12)] -= n
    net = {v: 0.0 for v in G.vertices}
    for (t, h), w in G.edges.items():
        net[t] += w
        net[h] -= w
    residuals = {v: net[v] - supply[v] for v in G.vertices}
    worst = max((abs(r) for r in residuals.values()), default=0.0)
    return BalanceReport(residuals, worst <= tol.bal, worst)


class RouteMatrix:
    """k x l table; each entry is a tuple of vertex ids or None (absent)."""

    def __init__(self, routes: list[list[tuple | None]]):
        self.routes = routes

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.routes), len(self.routes[0]) if self.routes else 0

    def __getitem__(self, ij):
        i, j = ij
        return self.routes[i][j]

    def present(self) -> np.ndarray:
        return np.array([[r is not None for r in row] for row in self.routes], dtype=bool)

    @property
    def count(self) -> int:
        return int(self.present().sum())

    def edges_of(self, i: int, j: int) -> list[Edge]:
        r = self.routes[i][j]
        return [] if r is None else list(zip(r[:-1], r[1:]))

    def routes_through(self) -> dict:
        """Map edge -> sorted list of (i, j) whose route contains it."""
        out: dict = {}
        k, l = self.shape
        for i in range(k):
            for j in range(l):
                for e in self.edges_of(i, j):
                    out.setdefault(e, []).append((i, j))
        return out


def route_matrix(G: TransportPath) -> RouteMatrix:
    """Unique directed path from each source to each sink, by DFS.

    The search keeps going after the first completion so a second simple path
    to the same sink is detected and reported.
    """
    adj: dict = {v: [] for v in G.vertices}
    for a, b in G.edges:
        adj[a].append(b)
    for v in adj:
        adj[v].sort(key=repr)
    sink_index: dict = {}
    for j, (v, _) in enumerate(G.sinks):
        sink_index.setdefault(v, []).append(j)
    routes: list[list[tuple | None]] = [[None] * G.l for _ in range(G.k)]
    for i, (src, _) in enumerate(G.sources):
        found: dict[int, tuple] = {}
        stack = [(src, (src,))]
        while stack:
            v, path = stack.pop()
            if len(path) > 1:
                for j in sink_index.get(v, ()):
                    if j in found:
                        raise AmbiguousRoute(i, j)
                    found[j] = path
            for nxt in adj[v]:
                if nxt not in path:
                    stack.append((nxt, path + (nxt,)))
        for j, path in found.items():
            routes[i][j] = path
    return RouteMatrix(routes)


def euler_characteristic(G: TransportPath) -> int:
    return len(G.vertices) - len(G.edges)


def hub_path(a: AtomicMeasure, b: AtomicMeasure, hub: Sequence[float]) -> TransportPath:
    """Star graph routing every source through ``hub`` to every sink."""
    hub = tuple(float(x) for x in hub)
    if any(np.allclose(loc, hub, rtol=0, atol=1e-12) for loc, _ in a.atoms + b.atoms):
        raise HubCollision(f"hub {hub} coincides with a boundary point")
    vertices = {"hub": hub}
    edges = {}
    sources, sinks = [], []
    for i, (loc, m) in enumerate(a.atoms, start=1):
        vertices[f"x{i}"] = loc
        edges[(f"x{i}", "hub")] = m
        sources.append((f"x{i}", m))
    for j, (loc, n) in enumerate(b.atoms, start=1):
        vertices[f"y{j}"] = loc
        edges[("hub", f"y{j}")] = n
        sinks.append((f"y{j}", n))
    return TransportPath(vertices, edges, tuple(sources), tuple(sinks))


def m_alpha_cost(G: TransportPath, alpha: float) -> float:
    """Sum over edges of ``weight**alpha * length``."""
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0, 1]")
    return float(sum(w**alpha * G.length(e) for e, w in G.edges.items()))


def _canonical(value: float, digits: int = 12) -> str:
    return format(float(value), f".{digits}g")


def signature_payload(routes: RouteMatrix, weights: dict | None) -> dict:
    present = routes.present().astype(int).tolist()
    incidence = []
    for e, pairs in routes.routes_through().items():
        item = [sorted(map(list, pairs))]
        if weights is not None:
            item.append(_canonical(weights[e]))
        incidence.append(item)
    incidence.sort(key=json.dumps)
    return {"present": present, "incidence": incidence}


def combinatorial_signature(G: TransportPath, with_weights: bool = True) -> str:
    """Hash of route presence plus the routes sharing each edge.

    Invariant under relabeling vertices and moving them, as long as the
    weighted route/edge incidence is unchanged.
    """
    payload = signature_payload(route_matrix(G), G.edges if with_weights else None)
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def edge_weights_from_plan(routes: RouteMatrix, plan: np.ndarray) -> dict:
    """Weight each edge by the plan mass on the routes through it."""
    return {e: float(sum(plan[i, j] for i, j in pairs)) for e, pairs in routes.routes_through().items()}


def iter_route_vertices(routes: RouteMatrix) -> Iterable[tuple[int, int, frozenset]]:
    k, l = routes.shape
    for i in range(k):
        for j in range(l):
            r = routes[i, j]
            if r is not None:
                yield i, j, frozenset(r)
