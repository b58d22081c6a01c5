from __future__ import annotations

from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances used across the library.

    ``opt`` governs solver optimality and the clamp applied to exchange
    values; the remaining fields are the structural thresholds for balance,
    rank, interiority, price collinearity, positivity and geometry.
    """

    opt: float = 1e-9
    bal: float = 1e-9
    rank: float = 1e-9
    interior: float = 1e-9
    collinear: float = 1e-9
    positive: float = 1e-7
    geo: float = 1e-8
    numeric_rel: float = 1e-6

    def with_overrides(self, **kwargs: float) -> "Tolerances":
        unknown = set(kwargs) - set(asdict(self))
        if unknown:
            raise KeyError(f"unknown tolerance(s): {sorted(unknown)}")
        return replace(self, **kwargs)

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


DEFAULT = Tolerances()
