"""Independent oracles and random instance generators shared by the tests.

The oracles deliberately avoid the package's numerical code paths: utilities
and expenditures are re-derived from the parameter dictionaries, null spaces
come from numpy's SVD and minimization from scipy.
"""

from __future__ import annotations

import itertools
import math
from pathlib import Path

import numpy as np
from scipy.optimize import linprog, minimize

from ramex.economy import CES, CobbDouglas, Consumer, Economy, Good, Linear, QuantityOnly, demand_profile
from ramex.errors import AmbiguousRoute
from ramex.h_optimizer import enumerate_topologies, realize
from ramex.transport_graph import TransportPath, edge_weights_from_plan, hub_path, route_matrix

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


# ------------------------------------------------------------ fixed instances


def economy_31() -> Economy:
    goods = (Good("g1", (0.0, 0.0)), Good("g2", (0.0, 0.8)))
    consumers = (
        Consumer("c1", (1.0, 0.0), 0.5, (1.0, 6.0), Linear((1.0, 3.0))),
        Consumer("c2", (1.0, 0.8), 0.5, (6.0, 1.0), Linear((3.0, 1.0))),
    )
    return Economy(goods, consumers, 2)


BOUNDARY = {"x1": (0.0, 0.0), "x2": (0.0, 0.8), "y1": (1.0, 0.0), "y2": (1.0, 0.8)}
HALF = (("x1", 0.5), ("x2", 0.5))
HALF_SINKS = (("y1", 0.5), ("y2", 0.5))


def g1() -> TransportPath:
    return TransportPath(dict(BOUNDARY), {("x1", "y1"): 0.5, ("x2", "y2"): 0.5}, HALF, HALF_SINKS)


def g2(a=(0.4, 0.4), b=(0.6, 0.4), plan=None) -> TransportPath:
    verts = dict(BOUNDARY, a=tuple(a), b=tuple(b))
    edges = {("x1", "a"): 0.5, ("x2", "a"): 0.5, ("a", "b"): 1.0, ("b", "y1"): 0.5, ("b", "y2"): 0.5}
    if plan is None:
        return TransportPath(verts, edges, HALF, HALF_SINKS)
    plan = np.asarray(plan, dtype=float)
    G = TransportPath(verts, edges, HALF, HALF_SINKS)
    w = edge_weights_from_plan(route_matrix(G), plan)
    src = tuple((f"x{i + 1}", float(plan[i].sum())) for i in range(2))
    snk = tuple((f"y{j + 1}", float(plan[:, j].sum())) for j in range(2))
    return TransportPath(verts, w, src, snk)


def g3() -> TransportPath:
    return TransportPath(dict(BOUNDARY), {("x1", "y2"): 0.5, ("x2", "y1"): 0.5}, HALF, HALF_SINKS)


def hub_for(economy: Economy, hub=None) -> TransportPath:
    dp = demand_profile(economy)
    if hub is None:
        locs = np.array([g.location for g in economy.goods] + [c.location for c in economy.consumers])
        hub = tuple(locs.mean(axis=0) + 1e-3 * np.arange(1, economy.dimension + 1))
    return hub_path(dp.source_measure(economy), dp.sink_measure(economy), hub)


# ------------------------------------------------------------ independent utility math


def utility_value(spec: dict, q) -> float:
    q = np.asarray(q, dtype=float)
    fam = spec["family"]
    if fam == "linear":
        return float(np.dot(spec["coefficients"], q))
    if fam == "cobb_douglas":
        return float(np.prod(q ** np.asarray(spec["exponents"])))
    if fam == "ces":
        rho, deg = spec["exponent"], spec.get("degree", 1.0)
        return float(np.dot(spec["weights"], q**rho) ** (deg / rho))
    if fam == "quantity_only":
        return float(q.sum() ** spec.get("exponent", 1.0))
    raise ValueError(fam)


def utility_values(spec: dict, Q) -> np.ndarray:
    """Vectorized over rows of ``Q``."""
    Q = np.asarray(Q, dtype=float)
    fam = spec["family"]
    if fam == "linear":
        return Q @ np.asarray(spec["coefficients"])
    if fam == "cobb_douglas":
        with np.errstate(invalid="ignore"):
            return np.prod(np.clip(Q, 0, None) ** np.asarray(spec["exponents"]), axis=1)
    if fam == "ces":
        rho, deg = spec["exponent"], spec.get("degree", 1.0)
        return (np.clip(Q, 0, None) ** rho @ np.asarray(spec["weights"])) ** (deg / rho)
    if fam == "quantity_only":
        return np.clip(Q.sum(axis=1), 0, None) ** spec.get("exponent", 1.0)
    raise ValueError(fam)


def hicksian_expenditure(spec: dict, p, level) -> np.ndarray:
    """Textbook closed forms, written independently of the package."""
    p = np.asarray(p, dtype=float)
    level = np.clip(np.asarray(level, dtype=float), 0, None)
    fam = spec["family"]
    if fam == "linear":
        c = np.asarray(spec["coefficients"], dtype=float)
        with np.errstate(divide="ignore"):
            return level * np.min(np.where(c > 0, p / np.where(c > 0, c, 1), np.inf))
    if fam == "cobb_douglas":
        tau = np.asarray(spec["exponents"], dtype=float)
        T = tau.sum()
        return T * np.prod((p / tau) ** (tau / T)) * level ** (1 / T)
    if fam == "ces":
        g = np.asarray(spec["weights"], dtype=float)
        rho, deg = spec["exponent"], spec.get("degree", 1.0)
        s = 1.0 / (1.0 - rho)
        unit = np.sum(g**s * p ** (1 - s)) ** (1 / (1 - s))
        return unit * level ** (1 / deg)
    if fam == "quantity_only":
        return p.min() * level ** (1 / spec.get("exponent", 1.0))
    raise ValueError(fam)


def numeric_expenditure(spec: dict, p, level: float, starts: int = 6, seed: int = 0) -> float:
    """min p.x s.t. u(x) >= level, by homogeneity reduced to the simplex.

    For u of degree beta, e = level**(1/beta) * min_{x in simplex} p.x / u(x)**(1/beta);
    the simplex is parametrized by softmax logits and searched from several starts.
    """
    p = np.asarray(p, dtype=float)
    k = p.size
    beta = {"cobb_douglas": float(np.sum(spec.get("exponents", [1]))), "ces": spec.get("degree", 1.0)}.get(spec["family"], 1.0)

    def f(z):
        x = np.exp(z - z.max())
        x /= x.sum()
        u = utility_value(spec, x)
        if u <= 0:
            return 1e300
        return math.log(p @ x) - math.log(u) / beta

    rng = np.random.default_rng(seed)
    best = np.inf
    for s in range(starts):
        z0 = np.zeros(k) if s == 0 else rng.normal(size=k)
        r = minimize(f, z0, method="BFGS", options={"gtol": 1e-12, "maxiter": 10_000})
        r = minimize(f, r.x, method="Nelder-Mead", options={"xatol": 1e-13, "fatol": 1e-15, "maxiter": 20_000})
        best = min(best, r.fun)
    return float(math.exp(best) * level ** (1 / beta))


# ------------------------------------------------------------ exchange value oracle


def _equality_system(G: TransportPath):
    rm = route_matrix(G)
    k, l = rm.shape
    through = rm.routes_through()
    rows = []
    for e in G.edges:
        r = np.zeros(k * l)
        for i, j in through.get(e, ()):
            r[i * l + j] = 1
        rows.append(r)
    for i, j in itertools.product(range(k), range(l)):
        if rm[i, j] is None:
            r = np.zeros(k * l)
            r[i * l + j] = 1
            rows.append(r)
    return np.array(rows)


def svd_null_space(M, n):
    if M.size == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(M)
    r = int(np.sum(s > 1e-10 * max(1.0, s.max())))
    return vt[r:].T


def _index_gradient(spec, q) -> np.ndarray:
    """Gradient of the degree-one index, by central differences (finite at q > 0)."""
    q = np.asarray(q, dtype=float)
    if spec["family"] in ("linear", "quantity_only"):
        return np.asarray(spec.get("coefficients", np.ones(q.size)), dtype=float)
    h = 1e-7 * max(1.0, q.max())
    g = np.zeros(q.size)
    for i in range(q.size):
        e = np.zeros(q.size)
        e[i] = h
        lo = np.clip(q - e, 0, None)
        g[i] = (_index_value(spec, q + e) - _index_value(spec, lo)) / (q[i] + h - lo[i])
    return np.minimum(g, 1e6)


def implicit_equalities(economy: Economy, G: TransportPath, q_bar) -> np.ndarray:
    """Equality rows implied by the feasible set, found on its tangent cone.

    Candidates are the zero coordinates of ``q_bar`` and the linearized
    utility floors.  One LP maximizes capped slacks; any candidate whose
    slack stays zero is an implicit equality.  A tight floor of a strictly
    quasi-concave utility pins that consumer's whole column.  Repeats until
    nothing new is found.
    """
    q_bar = np.asarray(q_bar, dtype=float)
    k, l = q_bar.shape
    n = k * l
    E = _equality_system(G)
    flat = q_bar.ravel()
    cands = []
    for r in range(n):
        if flat[r] <= 1e-12 and np.linalg.norm(svd_null_space(E, n)[r]) > 1e-12:
            row = np.zeros(n)
            row[r] = 1
            cands.append(("coord", r, row))
    for j, c in enumerate(economy.consumers):
        spec = c.utility.to_json()
        if spec["family"] == "quantity_only" or _index_value(spec, q_bar[:, j]) <= 0:
            continue
        row = np.zeros(n)
        row[j::l] = _index_gradient(spec, q_bar[:, j])
        cands.append(("floor", j, row))
    while cands:
        m = len(cands)
        A = np.array([c[2] for c in cands])
        # variables: d (n, free; the cone is scale invariant), t (m, in [0, 1])
        cost = np.concatenate([np.zeros(n), -np.ones(m)])
        A_ub = np.hstack([-A, np.eye(m)])
        res = linprog(cost, A_ub=A_ub, b_ub=np.zeros(m), A_eq=np.hstack([E, np.zeros((len(E), m))]),
                      b_eq=np.zeros(len(E)), bounds=[(None, None)] * n + [(0, 1)] * m, method="highs")
        t = res.x[n:]
        tight = [c for c, ti in zip(cands, t) if ti <= 1e-9]
        if not tight:
            break
        for kind, idx, row in tight:
            spec = economy.consumers[idx].utility.to_json() if kind == "floor" else None
            if kind == "floor" and spec["family"] in ("cobb_douglas", "ces"):
                block = np.zeros((k, n))
                for i in range(k):
                    block[i, i * l + idx] = 1
                E = np.vstack([E, block])
            else:
                E = np.vstack([E, row])
        cands = [c for c in cands if all(c is not t_ for t_ in tight)]
    return E


def grid_oracle_value(economy: Economy, G: TransportPath, q_bar, points: int = 21, rounds: int = 60, d_max: int = 3):
    """Exchange value by direct search over the affine hull.

    The hull is first cut down by :func:`implicit_equalities`.  A zooming
    grid (always containing its incumbent, feasibility checked exactly)
    gives a coarse value; a log-barrier path started strictly inside the
    feasible set refines it.  Every evaluated point is exactly feasible, so
    the result never overshoots the true supremum.  Returns ``(V, dimension)``,
    or ``(None, dimension)`` when the hull is larger than ``d_max``.
    """
    q_bar = np.asarray(q_bar, dtype=float)
    k, l = q_bar.shape
    d = svd_null_space(_equality_system(G), k * l).shape[1]
    if d == 0:
        return 0.0, 0
    if d > d_max:
        return None, d
    N = svd_null_space(implicit_equalities(economy, G, q_bar), k * l)
    dim = N.shape[1]
    if dim == 0:
        return 0.0, d
    specs = [c.utility.to_json() for c in economy.consumers]
    prices = [np.asarray(c.prices) for c in economy.consumers]
    floors = np.array([utility_value(s, q_bar[:, j]) for j, s in enumerate(specs)])
    base = q_bar.ravel()

    def S(Q):
        out = np.zeros(len(Q))
        for j, s in enumerate(specs):
            out += hicksian_expenditure(s, prices[j], utility_values(s, Q[:, j::l]))
        return out

    s_ref = float(S(base[None, :])[0])

    def zoom(center, half, shrink, rounds):
        best = float(S((base + N @ center)[None, :])[0])
        for _ in range(rounds):
            axes = [np.linspace(c - half, c + half, points) for c in center]
            Z = np.array(np.meshgrid(*axes, indexing="ij")).reshape(len(center), -1).T
            Z = np.vstack([Z, center])
            Q = base + Z @ N.T
            ok = Q.min(axis=1) >= -1e-13
            for j, s in enumerate(specs):
                ok &= utility_values(s, Q[:, j::l]) >= floors[j] * (1 - 1e-13) - 1e-13
            vals = np.where(ok, S(Q), -np.inf)
            n = int(np.argmax(vals))
            center, best = Z[n], vals[n]
            half *= shrink
            if half < 1e-13:
                break
        return float(best - s_ref), center

    def slacks(Z):
        """Constraint slacks that are not pinned by the reduced hull."""
        Q = base + Z @ N.T
        out = [Q[:, r] for r in coords]
        out += [(utility_values(specs[j], Q[:, j::l]) - floors[j]) / floors[j] for j in curved]
        return np.column_stack(out) if out else np.ones((len(Z), 1))

    def barrier(z):
        """Log-barrier path from a strictly interior point; iterates stay feasible."""
        scale = max(abs(s_ref), 1e-12)
        for mu in np.geomspace(1e-3, 1e-14, 23):
            def f(w, mu=mu):
                sl = slacks(w[None, :])[0]
                if sl.min() <= 0:
                    return np.inf
                return -float(S((base + N @ w)[None, :])[0]) / scale - mu * np.log(sl).sum()

            simplex = z + np.vstack([np.zeros(dim), np.eye(dim) * (1e-2 * np.linalg.norm(z) + 1e-6 * np.sqrt(mu) + 1e-9)])
            res = minimize(f, z, method="Nelder-Mead", options=dict(xatol=1e-15, fatol=1e-17, maxiter=4000, maxfev=8000, adaptive=True, initial_simplex=simplex))
            if np.isfinite(res.fun) and res.fun <= f(z):
                z = res.x
        return float(S((base + N @ z)[None, :])[0] - s_ref)

    value, _ = zoom(np.zeros(dim), 1.5, 0.3, rounds)
    coords = [r for r in range(k * l) if np.linalg.norm(N[r]) > 1e-12]
    curved = [j for j, s in enumerate(specs) if s["family"] != "quantity_only" and floors[j] > 0 and np.linalg.norm(N[j::l]) > 1e-12]
    # strictly interior start: random directions on shrinking spheres around q_bar
    rng = np.random.default_rng(0)
    for r in np.geomspace(1e-1, 1e-8, 36):
        D = rng.normal(size=(400, dim))
        Z = r * D / np.linalg.norm(D, axis=1, keepdims=True)
        m = slacks(Z).min(axis=1)
        if m.max() > 0:
            value = max(value, barrier(Z[int(np.argmax(m))]))
            break
    return value, d


def _index_value(spec, q) -> float:
    u = utility_value(spec, q)
    fam = spec["family"]
    if fam == "cobb_douglas":
        return u ** (1 / float(np.sum(spec["exponents"])))
    if fam == "ces":
        return u ** (1 / spec.get("degree", 1.0))
    if fam == "quantity_only":
        return u ** (1 / spec.get("exponent", 1.0))
    return u


def plan_is_feasible(economy: Economy, G: TransportPath, q, q_bar, tol: float = 1e-8) -> bool:
    """Independent membership test for the feasible set."""
    q, q_bar = np.asarray(q, dtype=float), np.asarray(q_bar, dtype=float)
    M = _equality_system(G)
    if np.max(np.abs(M @ q.ravel() - M @ q_bar.ravel()), initial=0) > max(tol, 1e-9) or q.min() < -tol:
        return False
    for j, c in enumerate(economy.consumers):
        s = c.utility.to_json()
        if utility_value(s, q[:, j]) < utility_value(s, q_bar[:, j]) - tol * max(1.0, abs(utility_value(s, q_bar[:, j]))):
            return False
    return True


def independent_total_expenditure(economy: Economy, q) -> float:
    q = np.asarray(q, dtype=float)
    total = 0.0
    for j, c in enumerate(economy.consumers):
        s = c.utility.to_json()
        total += float(hicksian_expenditure(s, c.prices, utility_value(s, q[:, j])))
    return total


# ------------------------------------------------------------ random instances


def random_utility(rng, k, families=("linear", "cobb_douglas", "ces")):
    fam = families[rng.integers(len(families))]
    if fam == "linear":
        return Linear(tuple(rng.uniform(0.2, 3.0, k)))
    if fam == "cobb_douglas":
        return CobbDouglas(tuple(rng.uniform(0.3, 2.0, k)))
    if fam == "ces":
        return CES(tuple(rng.uniform(0.3, 2.0, k)), float(rng.uniform(0.15, 0.85)), float(rng.uniform(0.5, 1.5)))
    form = "identity" if rng.random() < 0.5 else "power"
    return QuantityOnly(k, form, 1.0 if form == "identity" else float(rng.uniform(0.3, 1.0)))


def _locations(rng, n, dim=2):
    pts = rng.uniform(0, 1, (n, dim))
    pts[:, 0] += np.arange(n)  # distinct by construction
    return [tuple(p) for p in pts]


def random_economy(rng, k, l, families=("linear", "cobb_douglas", "ces"), prices=None):
    """Random economy in which every good is demanded by someone."""
    while True:
        eco = _random_economy(rng, k, l, families, prices)
        if np.all(demand_profile(eco).source_masses > 0):
            return eco


def _random_economy(rng, k, l, families, prices):
    locs = _locations(rng, k + l)
    goods = tuple(Good(f"g{i + 1}", locs[i]) for i in range(k))
    consumers = []
    for j in range(l):
        p = tuple(rng.uniform(0.5, 4.0, k)) if prices is None else tuple(prices[j])
        consumers.append(Consumer(f"c{j + 1}", locs[k + j], float(rng.uniform(0.5, 2.0)), p, random_utility(rng, k, families)))
    return Economy(goods, tuple(consumers), 2)


def collinear_economy(rng, k, l, families=("linear", "cobb_douglas", "ces")):
    base = rng.uniform(0.5, 4.0, k)
    prices = [tuple(base * rng.uniform(0.5, 2.0)) for _ in range(l)]
    return random_economy(rng, k, l, families, prices)


def compatible_templates(economy: Economy, rng, count: int, max_interior: int = 2):
    """Up to ``count`` random enumerated templates realized with the demand plan."""
    plan = demand_profile(economy).plan
    out = []
    cands = list(enumerate_topologies(economy.k, economy.l, max_interior))
    for n in rng.permutation(len(cands)):
        G = realize(cands[n], economy, plan)
        if G is not None:
            out.append(G)
        if len(out) >= count:
            break
    return out


def random_route_unique_path(rng, k, l, n_interior, extra_edges: int = 3, attempts: int = 200):
    """Random route-unique transport path; undirected cycles are allowed.

    Vertices are ordered sources, interior, sinks and edges point forward,
    so the graph is a DAG.  Candidates with ambiguous routes are rejected and
    edges that lie on no source-to-sink route are removed.
    """
    for _ in range(attempts):
        order = [f"x{i + 1}" for i in range(k)] + [f"s{n + 1}" for n in range(n_interior)] + [f"y{j + 1}" for j in range(l)]
        pos = {v: n for n, v in enumerate(order)}
        edges = set()
        # a random spanning tree keeps everything connected; sources feed forward
        for v in order[:k]:
            edges.add((v, order[int(rng.integers(k, len(order)))]))
        for n, v in enumerate(order[k + 1 :], start=k + 1):
            u = order[rng.integers(n)]
            a, b = (u, v) if pos[u] < pos[v] else (v, u)
            if a.startswith("y") or b.startswith("x"):
                continue
            edges.add((a, b))
        for _ in range(extra_edges):
            a, b = sorted(rng.choice(len(order), 2, replace=False))
            a, b = order[a], order[b]
            if not a.startswith("y") and not b.startswith("x"):
                edges.add((a, b))
        verts = dict(zip(order, _locations(rng, len(order))))
        try:
            skel = TransportPath(verts, {e: 1.0 for e in edges}, tuple((f"x{i + 1}", 1.0) for i in range(k)), tuple((f"y{j + 1}", 1.0) for j in range(l)))
            rm = route_matrix(skel)
        except (AmbiguousRoute, ValueError):
            continue
        present = rm.present()
        if not present.any(axis=1).all() or not present.any(axis=0).all():
            continue
        used = set(rm.routes_through())
        edges = {e for e in edges if e in used}
        keep = {v for e in edges for v in e}
        verts = {v: x for v, x in verts.items() if v in keep}
        plan = np.where(present, rng.uniform(0.1, 1.0, present.shape), 0.0)
        plan /= plan.sum()
        skel = TransportPath(verts, {e: 1.0 for e in edges}, tuple((f"x{i + 1}", 1.0) for i in range(k)), tuple((f"y{j + 1}", 1.0) for j in range(l)))
        w = edge_weights_from_plan(route_matrix(skel), plan)
        src = tuple((f"x{i + 1}", float(plan[i].sum())) for i in range(k))
        snk = tuple((f"y{j + 1}", float(plan[:, j].sum())) for j in range(l))
        return TransportPath(verts, w, src, snk), plan
    raise RuntimeError("could not generate a route-unique path")
