"""JSON documents for economies, graphs and plans, plus DOT export.

Parsers report problems as :class:`SchemaError` carrying a JSON pointer to
the offending value, e.g. ``/consumers/0/wealth``.
"""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from .economy import CES, CobbDouglas, Consumer, Economy, Good, Linear, QuantityOnly, UtilityFn
from .errors import RamexError, SchemaError
from .tolerances import DEFAULT, Tolerances
from .transport_graph import TransportPath, validate_balance


def _load(data) -> Any:
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    if isinstance(data, str):
        try:
            return json.loads(data)
        except json.JSONDecodeError as exc:
            raise SchemaError("", f"invalid JSON: {exc}") from None
    return data


def _plain(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"{type(o).__name__} is not JSON serializable")


def dumps(obj, pretty: bool = False) -> str:
    """Serialize with round-trip float precision (``repr`` of each float)."""
    if pretty:
        return json.dumps(obj, indent=2, allow_nan=False, default=_plain)
    return json.dumps(obj, separators=(",", ":"), allow_nan=False, default=_plain)


def _get(doc, key, ptr):
    if not isinstance(doc, dict):
        raise SchemaError(ptr or "/", "expected an object")
    if key not in doc:
        raise SchemaError(f"{ptr}/{key}", "missing required field")
    return doc[key]


def _number(x, ptr, positive=False, nonneg=False) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise SchemaError(ptr, "expected a finite number")
    if positive and x <= 0:
        raise SchemaError(ptr, "must be > 0")
    if nonneg and x < 0:
        raise SchemaError(ptr, "must be >= 0")
    return float(x)


def _vector(x, ptr, length=None, positive=False) -> tuple[float, ...]:
    if not isinstance(x, list):
        raise SchemaError(ptr, "expected an array of numbers")
    if length is not None and len(x) != length:
        raise SchemaError(ptr, f"expected {length} entries, got {len(x)}")
    return tuple(_number(v, f"{ptr}/{n}", positive=positive) for n, v in enumerate(x))


def _string(x, ptr) -> str:
    if not isinstance(x, str) or not x:
        raise SchemaError(ptr, "expected a non-empty string")
    return x


def _array(x, ptr) -> list:
    if not isinstance(x, list) or not x:
        raise SchemaError(ptr, "expected a non-empty array")
    return x


def parse_utility(doc, k: int, ptr: str) -> UtilityFn:
    family = _get(doc, "family", ptr)
    try:
        if family == "linear":
            return Linear(_vector(_get(doc, "coefficients", ptr), f"{ptr}/coefficients", k))
        if family == "cobb_douglas":
            return CobbDouglas(_vector(_get(doc, "exponents", ptr), f"{ptr}/exponents", k, positive=True))
        if family == "ces":
            weights = _vector(_get(doc, "weights", ptr), f"{ptr}/weights", k, positive=True)
            rho = _number(_get(doc, "exponent", ptr), f"{ptr}/exponent")
            degree = _number(doc.get("degree", 1.0), f"{ptr}/degree", positive=True)
            return CES(weights, rho, degree)
        if family == "quantity_only":
            form = doc.get("form", "identity")
            exponent = _number(doc.get("exponent", 1.0), f"{ptr}/exponent", positive=True)
            return QuantityOnly(k, form, exponent)
    except ValueError as exc:
        raise SchemaError(ptr, str(exc)) from None
    except RamexError as exc:
        raise SchemaError(ptr, str(exc)) from None
    raise SchemaError(f"{ptr}/family", f"unsupported utility family {family!r}")


def parse_economy(data) -> Economy:
    doc = _load(data)
    if not isinstance(doc, dict):
        raise SchemaError("/", "expected an object")
    dim = _get(doc, "dimension", "")
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise SchemaError("/dimension", "expected a positive integer")
    goods = []
    for n, g in enumerate(_array(_get(doc, "goods", ""), "/goods")):
        ptr = f"/goods/{n}"
        goods.append(Good(_string(_get(g, "id", ptr), f"{ptr}/id"), _vector(_get(g, "location", ptr), f"{ptr}/location", dim)))
    k = len(goods)
    consumers = []
    for n, c in enumerate(_array(_get(doc, "consumers", ""), "/consumers")):
        ptr = f"/consumers/{n}"
        consumers.append(
            Consumer(
                _string(_get(c, "id", ptr), f"{ptr}/id"),
                _vector(_get(c, "location", ptr), f"{ptr}/location", dim),
                _number(_get(c, "wealth", ptr), f"{ptr}/wealth", positive=True),
                _vector(_get(c, "prices", ptr), f"{ptr}/prices", k, positive=True),
                parse_utility(_get(c, "utility", ptr), k, f"{ptr}/utility"),
            )
        )
    try:
        return Economy(tuple(goods), tuple(consumers), dim)
    except ValueError as exc:
        raise SchemaError("/", str(exc)) from None


def economy_to_dict(economy: Economy) -> dict:
    return {
        "dimension": economy.dimension,
        "goods": [{"id": g.id, "location": list(g.location)} for g in economy.goods],
        "consumers": [
            {
                "id": c.id,
                "location": list(c.location),
                "wealth": c.wealth,
                "prices": list(c.prices),
                "utility": c.utility.to_json(),
            }
            for c in economy.consumers
        ],
    }


def emit_economy(economy: Economy) -> bytes:
    return json.dumps(economy_to_dict(economy), indent=2, sort_keys=True).encode()


def parse_graph(data, tol: Tolerances = DEFAULT) -> TransportPath:
    doc = _load(data)
    if not isinstance(doc, dict):
        raise SchemaError("/", "expected an object")
    verts = {}
    dim = None
    for n, v in enumerate(_array(_get(doc, "vertices", ""), "/vertices")):
        ptr = f"/vertices/{n}"
        vid = _string(_get(v, "id", ptr), f"{ptr}/id")
        if vid in verts:
            raise SchemaError(f"{ptr}/id", f"duplicate vertex id {vid!r}")
        loc = _vector(_get(v, "location", ptr), f"{ptr}/location", dim)
        dim = len(loc)
        verts[vid] = loc

    def vertex_ref(x, ptr):
        vid = _string(x, ptr)
        if vid not in verts:
            raise SchemaError(ptr, f"unknown vertex {vid!r}")
        return vid

    edges = {}
    for n, e in enumerate(_get(doc, "edges", "")):
        ptr = f"/edges/{n}"
        key = (vertex_ref(_get(e, "tail", ptr), f"{ptr}/tail"), vertex_ref(_get(e, "head", ptr), f"{ptr}/head"))
        if key in edges:
            raise SchemaError(ptr, "duplicate edge")
        edges[key] = _number(_get(e, "weight", ptr), f"{ptr}/weight", positive=True)
    terminals = {}
    for name in ("sources", "sinks"):
        out = []
        for n, s in enumerate(_array(_get(doc, name, ""), f"/{name}")):
            ptr = f"/{name}/{n}"
            out.append((vertex_ref(_get(s, "vertex", ptr), f"{ptr}/vertex"), _number(_get(s, "mass", ptr), f"{ptr}/mass", positive=True)))
        terminals[name] = tuple(out)
    try:
        G = TransportPath(verts, edges, terminals["sources"], terminals["sinks"])
    except (ValueError, RamexError) as exc:
        raise SchemaError("/edges", str(exc)) from None
    report = validate_balance(G, tol=tol)
    if not report.valid:
        worst = max(report.residuals, key=lambda v: abs(report.residuals[v]))
        raise SchemaError("/edges", f"mass balance fails at vertex {worst!r} (residual {report.residuals[worst]:.3g})")
    return G


def graph_to_dict(G: TransportPath) -> dict:
    return {
        "vertices": [{"id": v, "location": list(x)} for v, x in G.vertices.items()],
        "edges": [{"tail": a, "head": b, "weight": w} for (a, b), w in G.edges.items()],
        "sources": [{"vertex": v, "mass": m} for v, m in G.sources],
        "sinks": [{"vertex": v, "mass": m} for v, m in G.sinks],
    }


def emit_graph(G: TransportPath) -> bytes:
    return json.dumps(graph_to_dict(G), indent=2).encode()


def parse_plan(data, shape=None) -> np.ndarray:
    """Plan document: ``{"plan": [[...], ...]}`` (rows are sources) or the bare matrix."""
    doc = _load(data)
    ptr = ""
    if isinstance(doc, dict):
        doc = _get(doc, "plan", "")
        ptr = "/plan"
    rows = _array(doc, ptr or "/")
    width = None
    out = []
    for i, row in enumerate(rows):
        r = _vector(row, f"{ptr}/{i}", width)
        width = len(r)
        for j, x in enumerate(r):
            if x < 0:
                raise SchemaError(f"{ptr}/{i}/{j}", "must be >= 0")
        out.append(r)
    q = np.array(out, dtype=float)
    if shape is not None and q.shape != tuple(shape):
        raise SchemaError(ptr or "/", f"plan has shape {q.shape}, expected {tuple(shape)}")
    return q


def emit_plan(q) -> bytes:
    return json.dumps({"plan": np.asarray(q, dtype=float).tolist()}).encode()


def _dot_id(s: str) -> str:
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(G: TransportPath, name: str = "G") -> str:
    """Graphviz digraph; vertices carry ``pos`` and edges are labelled ``w=<weight>``."""
    lines = [f"digraph {_dot_id(name)} {{"]
    roles = {v: "source" for v, _ in G.sources}
    roles.update({v: "sink" for v, _ in G.sinks})
    for v, x in G.vertices.items():
        shape = {"source": "box", "sink": "doublecircle"}.get(roles.get(v), "circle")
        pos = ",".join(repr(float(c)) for c in x)
        lines.append(f'  {_dot_id(v)} [shape={shape}, pos="{pos}"];')
    for (a, b), w in G.edges.items():
        lines.append(f'  {_dot_id(a)} -> {_dot_id(b)} [label="w={w!r}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
