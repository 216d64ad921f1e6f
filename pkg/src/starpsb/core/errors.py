"""Error hierarchy for starpsb."""

from __future__ import annotations


class StarPsbError(Exception):
    """Base exception for all starpsb errors."""

    code = "error"


class ConfigError(StarPsbError):
    """Configuration loading or validation error."""

    code = "config-error"


class ChannelError(StarPsbError):
    """Scene geometry cannot produce a channel (zero distance, wrong side)."""

    code = "channel-error"


class ProgramError(StarPsbError):
    """Malformed conic program (bad dimension, unregistered variable)."""

    code = "program-error"


class ConicSolverError(StarPsbError):
    """The conic solver failed to return a usable point."""

    code = "solver-error"


class InfeasibleSubproblemError(ConicSolverError):
    """A PSB subproblem was reported infeasible by the solver."""

    code = "infeasible"


class SurrogateError(StarPsbError):
    """A linearization point of the log2 upper bound is not strictly positive."""

    code = "bad-surrogate"


class RankDegeneracyError(StarPsbError):
    """The rank-one penalty weight overflowed without reaching a rank-one iterate."""

    code = "rank-degenerate"


class CouplingUnrepresentableError(StarPsbError):
    """Coupled phases cannot be placed on the requested quantization grid."""

    code = "coupling-unrepresentable"


class AuditError(StarPsbError):
    """A brute-force oracle audit failed."""

    code = "audit-failed"


class ResultStoreError(StarPsbError):
    """Writing experiment outputs failed."""

    code = "result-store-error"
