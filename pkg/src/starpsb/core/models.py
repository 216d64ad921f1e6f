"""Domain models for starpsb."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from starpsb.core.errors import ChannelError

TWO_PI = 2.0 * math.pi

Position = tuple[float, float, float]


class Side(str, Enum):
    """Legitimate stream / user: indoor (transmission side) or outdoor (reflection side)."""

    I = "I"  # noqa: E741
    O = "O"  # noqa: E741

    @property
    def other(self) -> Side:
        return Side.O if self is Side.I else Side.I

    @property
    def surface(self) -> Surface:
        """Surface coefficients seen by this side's user."""
        return Surface.T if self is Side.I else Surface.R


class Surface(str, Enum):
    """STAR-RIS coefficient set: transmission or reflection."""

    T = "t"
    R = "r"


EAVESDROPPERS: tuple[int, int] = (1, 2)


def eavesdropper_surface(k: int) -> Surface:
    """E1 sits on the transmission side, E2 on the reflection side."""
    if k not in EAVESDROPPERS:
        raise ValueError(f"Unknown eavesdropper index: {k}")
    return Surface.T if k == 1 else Surface.R


class SchemeId(str, Enum):
    """Beamforming schemes compared in the power and bits sweeps."""

    COUPLED = "coupled-star"
    INDEPENDENT = "independent-star"
    TS = "ts-star"
    CRIS = "c-ris"
    RANDOM = "random-phase"


class SolveStatus(str, Enum):
    """Termination status of a conic solve."""

    OPTIMAL = "optimal"
    NEAR_OPTIMAL = "near-optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration-limit"

    @property
    def usable(self) -> bool:
        """Whether primal values can be consumed."""
        return self in (SolveStatus.OPTIMAL, SolveStatus.NEAR_OPTIMAL, SolveStatus.ITERATION_LIMIT)


class RowStatus(str, Enum):
    """Outcome marker written in the `converged` column of result tables."""

    CONVERGED = "converged"
    NOT_CONVERGED = "not-converged"
    COUPLING_UNREPRESENTABLE = "coupling-unrepresentable"
    FAILED = "failed"


class ExperimentKind(str, Enum):
    """Studies the harness can run."""

    CONVERGENCE = "convergence"
    POWER_SWEEP = "power-sweep"
    BITS_SWEEP = "bits-sweep"
    ORACLE_AUDIT = "oracle-audit"


SIDED_NODES = ("IU", "E1", "OU", "E2")


def side_violation(pos_RIS: Position, positions: dict[str, Position]) -> str | None:
    """IU/E1 belong on the transmission side (+y of the surface), OU/E2 on the reflection side.

    Returns the first violation as a message, or None.
    """
    y_ris = pos_RIS[1]
    for name in ("IU", "E1"):
        if positions[name][1] - y_ris <= 0:
            return f"{name} must lie on the transmission side of the STAR-RIS"
    for name in ("OU", "E2"):
        if positions[name][1] - y_ris >= 0:
            return f"{name} must lie on the reflection side of the STAR-RIS"
    return None


class NetworkConfig(BaseModel):
    """Scene geometry, array sizes and link budget, all powers in watts."""

    model_config = ConfigDict(frozen=True)

    M: int = Field(default=4, ge=1, description="BS antenna count")
    N: int = Field(default=8, ge=1, description="STAR-RIS element count")
    P_max: float = Field(default=10 ** (-3.5), gt=0, description="Transmit power budget (W)")
    sigma2: float = Field(default=10 ** (-13.5), gt=0, description="Noise power (W)")
    pos_BS: Position = Field(default=(0.0, 0.0, 0.0))
    pos_RIS: Position = Field(default=(50.0, 0.0, 0.0))
    pos_IU: Position = Field(default=(50.0, 5.0, 0.0))
    pos_OU: Position = Field(default=(50.0, -5.0, 0.0))
    pos_E1: Position = Field(default=(50.0, 10.0, 0.0))
    pos_E2: Position = Field(default=(50.0, -10.0, 0.0))
    L0: float = Field(default=1e-3, gt=0, description="Path loss at 1 m (linear)")
    alpha_BS: float = Field(default=2.2, ge=0)
    alpha_IU: float = Field(default=2.5, ge=0)
    alpha_OU: float = Field(default=2.5, ge=0)
    alpha_E1: float = Field(default=2.5, ge=0)
    alpha_E2: float = Field(default=2.5, ge=0)
    kappa: float = Field(default=5.0, ge=0, description="Rician factor (linear)")
    rng_seed: int = Field(default=0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _check_sides(self) -> NetworkConfig:
        positions = {name: getattr(self, f"pos_{name}") for name in SIDED_NODES}
        message = side_violation(self.pos_RIS, positions)
        if message:
            raise ChannelError(message)
        return self

    def to_json(self) -> str:
        return self.model_dump_json()

    @classmethod
    def from_json(cls, text: str) -> NetworkConfig:
        return cls.model_validate_json(text)


def _check_finite(name: str, value: np.ndarray) -> None:
    if not np.all(np.isfinite(value)):
        raise ChannelError(f"Channel block {name} has non-finite entries")


@dataclass(frozen=True)
class ChannelSet:
    """Baseband channels: G (N×M, BS→STAR-RIS) and STAR-RIS→node vectors of length N."""

    G: np.ndarray
    h_I: np.ndarray
    h_O: np.ndarray
    h_E1: np.ndarray
    h_E2: np.ndarray

    def __post_init__(self) -> None:
        if self.G.ndim != 2:
            raise ChannelError(f"G must be a matrix, got shape {self.G.shape}")
        n = self.G.shape[0]
        for name in ("h_I", "h_O", "h_E1", "h_E2"):
            h = getattr(self, name)
            if h.shape != (n,):
                raise ChannelError(f"{name} has shape {h.shape}, expected ({n},)")
            _check_finite(name, h)
        _check_finite("G", self.G)

    @property
    def N(self) -> int:
        return int(self.G.shape[0])

    @property
    def M(self) -> int:
        return int(self.G.shape[1])

    def legit(self, side: Side) -> np.ndarray:
        return self.h_I if side is Side.I else self.h_O

    def eve(self, k: int) -> np.ndarray:
        return self.h_E1 if k == 1 else self.h_E2


@dataclass(frozen=True)
class CascadeSet:
    """Cascade matrices V = Gᴴ·diag(h), each M×N."""

    V_I: np.ndarray
    V_O: np.ndarray
    V_E1: np.ndarray
    V_E2: np.ndarray

    def __post_init__(self) -> None:
        shape = self.V_I.shape
        for name in ("V_O", "V_E1", "V_E2"):
            if getattr(self, name).shape != shape:
                raise ChannelError(f"{name} shape {getattr(self, name).shape} != V_I shape {shape}")

    @property
    def M(self) -> int:
        return int(self.V_I.shape[0])

    @property
    def N(self) -> int:
        return int(self.V_I.shape[1])

    def legit(self, side: Side) -> np.ndarray:
        return self.V_I if side is Side.I else self.V_O

    def eve(self, k: int) -> np.ndarray:
        return self.V_E1 if k == 1 else self.V_E2

    def scaled(self, factor: float) -> CascadeSet:
        """Every cascade multiplied by `factor` (received powers scale by factor²)."""
        return CascadeSet(
            V_I=self.V_I * factor,
            V_O=self.V_O * factor,
            V_E1=self.V_E1 * factor,
            V_E2=self.V_E2 * factor,
        )


@dataclass(frozen=True)
class StarCoefficients:
    """Per-element transmission/reflection amplitudes and phases."""

    beta_t: np.ndarray
    beta_r: np.ndarray
    theta_t: np.ndarray
    theta_r: np.ndarray
    coupled: bool = True

    def __post_init__(self) -> None:
        n = self.beta_t.shape
        for name in ("beta_r", "theta_t", "theta_r"):
            if getattr(self, name).shape != n:
                raise ValueError(f"{name} shape does not match beta_t shape {n}")
        if np.any(self.beta_t < 0) or np.any(self.beta_r < 0):
            raise ValueError("Amplitudes must be nonnegative")
        if not np.allclose(self.beta_t + self.beta_r, 1.0, rtol=0.0, atol=1e-8):
            raise ValueError("Energy conservation violated: beta_t + beta_r != 1")
        for name in ("theta_t", "theta_r"):
            theta = getattr(self, name)
            if np.any(theta < 0) or np.any(theta >= TWO_PI):
                raise ValueError(f"{name} must lie in [0, 2π)")
        if self.coupled and self.N > 0 and self.coupling_error() > 1e-6:
            raise ValueError("Phase coupling violated: |θt − θr| must be π/2 or 3π/2")

    @property
    def N(self) -> int:
        return int(self.beta_t.shape[0])

    @property
    def u_t(self) -> np.ndarray:
        return np.sqrt(self.beta_t) * np.exp(1j * self.theta_t)

    @property
    def u_r(self) -> np.ndarray:
        return np.sqrt(self.beta_r) * np.exp(1j * self.theta_r)

    def u(self, surface: Surface) -> np.ndarray:
        return self.u_t if surface is Surface.T else self.u_r

    def phase_offsets(self) -> np.ndarray:
        """θr − θt wrapped to [0, 2π)."""
        return np.mod(self.theta_r - self.theta_t, TWO_PI)

    def coupling_error(self) -> float:
        """Largest distance of |θt − θr| mod 2π from {π/2, 3π/2}."""
        d = np.mod(self.theta_t - self.theta_r, TWO_PI)
        err = np.minimum(np.abs(d - math.pi / 2), np.abs(d - 3 * math.pi / 2))
        return float(np.max(err)) if err.size else 0.0


def wrap_phase(theta: np.ndarray) -> np.ndarray:
    """Map phases to [0, 2π), folding the rounding edge at 2π back to 0."""
    wrapped = np.mod(np.asarray(theta, dtype=float), TWO_PI)
    wrapped[wrapped >= TWO_PI] = 0.0
    return wrapped


@dataclass(frozen=True)
class BeamformingSolution:
    """Transmit covariance matrices and their rank-one factors."""

    W_I: np.ndarray
    W_O: np.ndarray
    w_I: np.ndarray
    w_O: np.ndarray

    @classmethod
    def from_vectors(cls, w_I: np.ndarray, w_O: np.ndarray) -> BeamformingSolution:
        w_I = np.asarray(w_I, dtype=complex)
        w_O = np.asarray(w_O, dtype=complex)
        return cls(
            W_I=np.outer(w_I, w_I.conj()),
            W_O=np.outer(w_O, w_O.conj()),
            w_I=w_I,
            w_O=w_O,
        )

    def w(self, side: Side) -> np.ndarray:
        return self.w_I if side is Side.I else self.w_O

    def W(self, side: Side) -> np.ndarray:
        return self.W_I if side is Side.I else self.W_O

    @property
    def total_power(self) -> float:
        return float(np.real(np.trace(self.W_I) + np.trace(self.W_O)))


class SecrecyReport(BaseModel):
    """Legitimate, eavesdropping and secrecy rates in bits/s/Hz."""

    R_I: float
    R_O: float
    R_E1_I: float
    R_E1_O: float
    R_E2_I: float
    R_E2_O: float
    Rs_I: float = Field(ge=0)
    Rs_O: float = Field(ge=0)
    min_secrecy: float = Field(ge=0)
    worst_eve_I: int = Field(default=1, description="Eavesdropper attaining the max for IU")
    worst_eve_O: int = Field(default=1, description="Eavesdropper attaining the max for OU")

    def R(self, side: Side) -> float:
        return self.R_I if side is Side.I else self.R_O

    def R_E(self, k: int, side: Side) -> float:
        return float(getattr(self, f"R_E{k}_{side.value}"))

    def Rs(self, side: Side) -> float:
        return self.Rs_I if side is Side.I else self.Rs_O


class SchemeResult(BaseModel):
    """One scheme run on one channel realization."""

    scheme: SchemeId
    seed: int
    P_max_dBm: float
    q_bits: int | None = None
    min_secrecy: float | None = None
    Rs_I: float | None = None
    Rs_O: float | None = None
    converged: bool = False
    outer_iters: int = 0
    wall_ms: float = 0.0


@dataclass(frozen=True)
class SolveOutcome:
    """What a solver adapter reports back about one solve."""

    status: SolveStatus
    objective: float | None
    iterations: int = 0
    solver: str = ""
    raw_status: str = ""


class TraceRecord(BaseModel):
    """One outer iteration of the PSB loop."""

    outer: int
    objective: float
    V_t: float
    V_r: float
    rho: float
    tau: float
    inner_iterations: int
    solver_statuses: list[str] = Field(default_factory=list)
    inner_objectives: list[float] = Field(default_factory=list)
    min_secrecy: float = 0.0


@dataclass
class SchemeOutcome:
    """A scheme result together with the artifacts that produced it."""

    result: SchemeResult
    coefficients: StarCoefficients
    beams: BeamformingSolution
    trace: list[TraceRecord] = field(default_factory=list)
    rank_residuals: dict[str, float] = field(default_factory=dict)
    inner_monotone: bool = True
    report: SecrecyReport | None = None
    reflection_phase: tuple[StarCoefficients, BeamformingSolution] | None = None


class ResultRow(BaseModel):
    """One row of a study table."""

    scheme: str
    axis: str
    seed: int
    min_secrecy: float | None = None
    Rs_I: float | None = None
    Rs_O: float | None = None
    status: RowStatus = RowStatus.CONVERGED
    outer_iters: int = 0
    wall_ms: float = 0.0
    axis_index: int = Field(default=0, exclude=True)

    @property
    def sort_key(self) -> tuple[str, int, int]:
        return (self.scheme, self.axis_index, self.seed)


class AggregateRow(BaseModel):
    """Mean and standard error of min-secrecy for one (scheme, axis) cell."""

    scheme: str
    axis: str
    mean: float
    stderr: float
    count: int
