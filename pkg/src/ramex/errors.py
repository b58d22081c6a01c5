"""Exception hierarchy shared by every ramex module."""

from __future__ import annotations


class RamexError(Exception):
    """Base class; ``kind`` is the machine-readable tag used by the CLI."""

    kind = "error"


class SchemaError(RamexError):
    kind = "schema"

    def __init__(self, pointer: str, detail: str):
        self.pointer = pointer
        self.detail = detail
        super().__init__(f"{pointer}: {detail}")


class UnsupportedFamily(RamexError):
    kind = "unsupported_family"


class UnreachableUtility(RamexError):
    kind = "unreachable_utility"


class ZeroTotalMass(RamexError):
    kind = "zero_total_mass"


class UnknownVertex(RamexError):
    kind = "unknown_vertex"


class AmbiguousRoute(RamexError):
    kind = "ambiguous_route"

    def __init__(self, i: int, j: int):
        self.i, self.j = i, j
        super().__init__(f"two distinct directed paths from source {i} to sink {j}")


class HubCollision(RamexError):
    kind = "hub_collision"


class IncompatiblePair(RamexError):
    kind = "incompatible_pair"


class DimensionMismatch(RamexError):
    kind = "dimension_mismatch"


class DimensionTooLarge(RamexError):
    kind = "dimension_too_large"


class InfeasibleProblem(RamexError):
    kind = "infeasible"


class UnboundedProblem(RamexError):
    kind = "unbounded"


class SolverStall(RamexError):
    kind = "solver_stall"


class SizeLimit(RamexError):
    kind = "size_limit"


class EmptyCandidateSet(RamexError):
    kind = "empty_candidate_set"


SOLVER_ERRORS = (SolverStall, InfeasibleProblem, UnboundedProblem, EmptyCandidateSet)
