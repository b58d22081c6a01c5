"""Spatial economy: goods at sources, consumers with wealth, prices and utilities.

Every utility family here is homothetic, so it factors as ``u = phi(v)`` with
``v`` homogeneous of degree one and concave (the *index*).  Expenditure then
takes the form ``e(p, u) = K(p) * v`` where ``K(p) = e(p, u=1)`` in index
units, which is what the valuation solvers work with.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import UnreachableUtility, UnsupportedFamily, ZeroTotalMass

_TIE_RTOL = 1e-12


def _as_tuple(values: Sequence[float]) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


class UtilityFn:
    """Common interface of the four utility families."""

    family: str = ""

    @property
    def size(self) -> int:
        raise NotImplementedError

    @property
    def degree(self) -> float | None:
        """Homogeneity degree, or None when the family is not homogeneous."""
        raise NotImplementedError

    # Strictly quasi-concave off rays: every non-collinear pair satisfies the
    # strict midpoint inequality on the index.
    strictly_concave_index: bool = False

    def __call__(self, q) -> float:
        return self.from_index(self.index(q))

    def index(self, q) -> float:
        raise NotImplementedError

    def index_grad(self, q) -> np.ndarray:
        raise NotImplementedError

    def index_hess(self, q) -> np.ndarray:
        raise NotImplementedError

    def from_index(self, v: float) -> float:
        raise NotImplementedError

    def to_index(self, u: float) -> float:
        raise NotImplementedError

    def index_price(self, p) -> float:
        """Least cost of one unit of index at prices ``p``."""
        raise NotImplementedError

    def demand(self, p, w: float) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, q) -> np.ndarray:
        """Gradient of the utility itself (chain rule through the index)."""
        v = self.index(q)
        return self.from_index_derivative(v) * self.index_grad(q)

    def from_index_derivative(self, v: float) -> float:
        raise NotImplementedError

    def utility_at_zero(self) -> float:
        return self.from_index(0.0)

    def expenditure(self, p, level: float) -> float:
        """Minimal cost at prices ``p`` of reaching utility ``level``."""
        p = np.asarray(p, dtype=float)
        if p.shape != (self.size,):
            raise ValueError(f"price vector must have length {self.size}")
        if np.any(p <= 0):
            raise ValueError("prices must be strictly positive")
        u0 = self.utility_at_zero()
        if level < u0:
            if level >= u0 - 1e-12 * max(1.0, abs(u0)):
                level = u0
            else:
                raise UnreachableUtility(f"utility level {level!r} is below u(0) = {u0!r}")
        return self.index_price(p) * self.to_index(level)

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Linear(UtilityFn):
    coefficients: tuple[float, ...]
    family: str = field(default="linear", init=False)

    def __post_init__(self):
        c = _as_tuple(self.coefficients)
        object.__setattr__(self, "coefficients", c)
        if any(x < 0 for x in c) or not any(x > 0 for x in c):
            raise ValueError("linear coefficients must be >= 0 and not all zero")

    @property
    def size(self):
        return len(self.coefficients)

    @property
    def degree(self):
        return 1.0

    def index(self, q):
        return float(np.dot(self.coefficients, q))

    def index_grad(self, q):
        return np.array(self.coefficients)

    def index_hess(self, q):
        return np.zeros((self.size, self.size))

    def from_index(self, v):
        return v

    def to_index(self, u):
        return u

    def from_index_derivative(self, v):
        return 1.0

    def index_price(self, p):
        return min(pi / ci for pi, ci in zip(p, self.coefficients) if ci > 0)

    def demand(self, p, w):
        # Ties in bang-per-buck go to the lowest index.
        ratios = [ci / pi for ci, pi in zip(self.coefficients, p)]
        best = max(ratios)
        i = next(n for n, r in enumerate(ratios) if r >= best * (1 - _TIE_RTOL))
        q = np.zeros(self.size)
        q[i] = w / p[i]
        return q

    def to_json(self):
        return {"family": self.family, "coefficients": list(self.coefficients)}


@dataclass(frozen=True)
class CobbDouglas(UtilityFn):
    exponents: tuple[float, ...]
    family: str = field(default="cobb_douglas", init=False)
    strictly_concave_index = True

    def __post_init__(self):
        t = _as_tuple(self.exponents)
        object.__setattr__(self, "exponents", t)
        if not t or any(x <= 0 for x in t):
            raise ValueError("Cobb-Douglas exponents must be > 0")

    @property
    def size(self):
        return len(self.exponents)

    @property
    def degree(self):
        return float(sum(self.exponents))

    @property
    def _shares(self):
        total = sum(self.exponents)
        return np.array(self.exponents) / total

    def index(self, q):
        q = np.asarray(q, dtype=float)
        if np.any(q <= 0):
            return 0.0
        return float(np.exp(np.dot(self._shares, np.log(q))))

    def index_grad(self, q):
        q = np.asarray(q, dtype=float)
        return self.index(q) * self._shares / q

    def index_hess(self, q):
        q = np.asarray(q, dtype=float)
        a = self._shares
        g = a / q
        return self.index(q) * (np.outer(g, g) - np.diag(a / q**2))

    def from_index(self, v):
        return v ** self.degree

    def to_index(self, u):
        return u ** (1.0 / self.degree)

    def from_index_derivative(self, v):
        return self.degree * v ** (self.degree - 1.0)

    def index_price(self, p):
        a = self._shares
        return float(np.prod((np.asarray(p) / a) ** a))

    def demand(self, p, w):
        return self._shares * w / np.asarray(p, dtype=float)

    def to_json(self):
        return {"family": self.family, "exponents": list(self.exponents)}


@dataclass(frozen=True)
class CES(UtilityFn):
    """``u(q) = (sum_i weights_i * q_i**exponent) ** (degree / exponent)``."""

    weights: tuple[float, ...]
    exponent: float
    degree_: float = 1.0
    family: str = field(default="ces", init=False)
    strictly_concave_index = True

    def __post_init__(self):
        g = _as_tuple(self.weights)
        object.__setattr__(self, "weights", g)
        if not g or any(x <= 0 for x in g):
            raise ValueError("CES weights must be > 0")
        if not 0 < self.exponent < 1:
            raise ValueError("CES exponent must lie in the open interval (0, 1)")
        if self.degree_ <= 0:
            raise ValueError("CES degree must be > 0")

    @property
    def size(self):
        return len(self.weights)

    @property
    def degree(self):
        return float(self.degree_)

    def _aggregate(self, q):
        q = np.clip(np.asarray(q, dtype=float), 0.0, None)
        return float(np.dot(self.weights, q**self.exponent))

    def index(self, q):
        return self._aggregate(q) ** (1.0 / self.exponent)

    def index_grad(self, q):
        q = np.asarray(q, dtype=float)
        rho = self.exponent
        agg = self._aggregate(q)
        return agg ** (1.0 / rho - 1.0) * np.asarray(self.weights) * q ** (rho - 1.0)

    def index_hess(self, q):
        q = np.asarray(q, dtype=float)
        rho = self.exponent
        gam = np.asarray(self.weights)
        agg = self._aggregate(q)
        d = gam * q ** (rho - 1.0)
        return (1.0 - rho) * agg ** (1.0 / rho - 2.0) * np.outer(d, d) + np.diag(
            agg ** (1.0 / rho - 1.0) * gam * (rho - 1.0) * q ** (rho - 2.0)
        )

    def from_index(self, v):
        return v ** self.degree

    def to_index(self, u):
        return u ** (1.0 / self.degree)

    def from_index_derivative(self, v):
        return self.degree * v ** (self.degree - 1.0)

    def index_price(self, p):
        rho = self.exponent
        r = rho / (rho - 1.0)
        gam = np.asarray(self.weights)
        total = np.sum(gam ** (1.0 / (1.0 - rho)) * np.asarray(p, dtype=float) ** r)
        return float(total ** (1.0 / r))

    def demand(self, p, w):
        p = np.asarray(p, dtype=float)
        s = 1.0 / (1.0 - self.exponent)
        shape = (np.asarray(self.weights) / p) ** s
        return w * shape / np.dot(p, shape)

    def to_json(self):
        return {
            "family": self.family,
            "weights": list(self.weights),
            "exponent": self.exponent,
            "degree": self.degree_,
        }


@dataclass(frozen=True)
class QuantityOnly(UtilityFn):
    """Utility that sees only the total quantity: ``f(sum_i q_i)``.

    ``form`` is ``"identity"`` or ``"power"`` (``f(s) = s**exponent`` with the
    exponent in ``(0, 1]``).  Both are strictly increasing, so the floor
    ``u(q) >= u_bar`` is equivalent to ``sum(q) >= sum(q_bar)``.
    """

    size_: int
    form: str = "identity"
    exponent: float = 1.0
    family: str = field(default="quantity_only", init=False)

    def __post_init__(self):
        if self.size_ < 1:
            raise ValueError("QuantityOnly needs at least one good")
        if self.form == "identity":
            object.__setattr__(self, "exponent", 1.0)
        elif self.form == "power":
            if not 0 < self.exponent <= 1:
                raise ValueError("power exponent must lie in (0, 1]")
        else:
            raise UnsupportedFamily(f"QuantityOnly form {self.form!r} is not invertible/supported")

    @property
    def size(self):
        return self.size_

    @property
    def degree(self):
        return self.exponent

    def index(self, q):
        return float(np.sum(q))

    def index_grad(self, q):
        return np.ones(self.size)

    def index_hess(self, q):
        return np.zeros((self.size, self.size))

    def from_index(self, v):
        return max(v, 0.0) ** self.exponent

    def to_index(self, u):
        return u ** (1.0 / self.exponent)

    def from_index_derivative(self, v):
        return self.exponent * v ** (self.exponent - 1.0) if v > 0 else math.inf

    def index_price(self, p):
        return float(min(p))

    def demand(self, p, w):
        i = int(np.argmin(p))
        q = np.zeros(self.size)
        q[i] = w / p[i]
        return q

    def to_json(self):
        out = {"family": self.family, "form": self.form}
        if self.form == "power":
            out["exponent"] = self.exponent
        return out


@dataclass(frozen=True)
class Good:
    id: str
    location: tuple[float, ...]


@dataclass(frozen=True)
class Consumer:
    id: str
    location: tuple[float, ...]
    wealth: float
    prices: tuple[float, ...]
    utility: UtilityFn


@dataclass(frozen=True)
class Economy:
    goods: tuple[Good, ...]
    consumers: tuple[Consumer, ...]
    dimension: int

    def __post_init__(self):
        object.__setattr__(self, "goods", tuple(self.goods))
        object.__setattr__(self, "consumers", tuple(self.consumers))
        k = len(self.goods)
        if k < 1 or not self.consumers:
            raise ValueError("an economy needs at least one good and one consumer")
        for c in self.consumers:
            if c.wealth <= 0:
                raise ValueError(f"consumer {c.id}: wealth must be > 0")
            if len(c.prices) != k or any(p <= 0 for p in c.prices):
                raise ValueError(f"consumer {c.id}: need {k} strictly positive prices")
            if c.utility.size != k:
                raise ValueError(f"consumer {c.id}: utility defined on {c.utility.size} goods, not {k}")
        locs = [g.location for g in self.goods] + [c.location for c in self.consumers]
        if any(len(x) != self.dimension for x in locs):
            raise ValueError("every location must have the ambient dimension")
        if len(set(locs)) != len(locs):
            raise ValueError("locations of goods and consumers must be distinct")

    @property
    def k(self) -> int:
        return len(self.goods)

    @property
    def l(self) -> int:
        return len(self.consumers)

    def consumer_index(self, j) -> int:
        if isinstance(j, int):
            if not 0 <= j < self.l:
                raise KeyError(j)
            return j
        for n, c in enumerate(self.consumers):
            if c.id == j:
                return n
        raise KeyError(j)

    def prices(self) -> np.ndarray:
        """k x l matrix; column j is consumer j's price vector."""
        return np.array([c.prices for c in self.consumers], dtype=float).T


@dataclass(frozen=True)
class DemandProfile:
    plan: np.ndarray  # k x l, normalized to total mass 1
    floors: tuple[float, ...]
    source_masses: np.ndarray
    sink_masses: np.ndarray
    scale: float  # factor applied to raw demands

    def source_measure(self, economy: Economy):
        from .transport_graph import AtomicMeasure

        return AtomicMeasure(tuple((g.location, float(m)) for g, m in zip(economy.goods, self.source_masses)))

    def sink_measure(self, economy: Economy):
        from .transport_graph import AtomicMeasure

        return AtomicMeasure(tuple((c.location, float(n)) for c, n in zip(economy.consumers, self.sink_masses)))


def demand(economy: Economy, j) -> np.ndarray:
    """Utility-maximizing bundle of consumer ``j`` (id or index)."""
    c = economy.consumers[economy.consumer_index(j)]
    return c.utility.demand(np.asarray(c.prices, dtype=float), c.wealth)


def expenditure(u: UtilityFn, p, level: float) -> float:
    return u.expenditure(p, level)


def demand_profile(economy: Economy) -> DemandProfile:
    raw = np.column_stack([demand(economy, j) for j in range(economy.l)])
    total = raw.sum()
    if total <= 0:
        raise ZeroTotalMass("every consumer demands the zero bundle")
    plan = raw / total
    floors = tuple(c.utility(plan[:, j]) for j, c in enumerate(economy.consumers))
    return DemandProfile(
        plan=plan,
        floors=floors,
        source_masses=plan.sum(axis=1),
        sink_masses=plan.sum(axis=0),
        scale=1.0 / total,
    )
