"""Configuration loading and validation for starpsb."""

from __future__ import annotations

import math
import os
from pathlib import Path

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from starpsb.core.errors import ConfigError
from starpsb.core.models import (
    SIDED_NODES,
    ExperimentKind,
    NetworkConfig,
    Position,
    SchemeId,
    side_violation,
)

DEFAULT_CONFIG_PATH = "~/.starpsb/config.yaml"

PAPER_SCALE_SIZE = (8, 20)
PAPER_SCALE_TRIALS = 100


def dbm_to_watts(dbm: float) -> float:
    """Convert a power in dBm to watts."""
    return float(10 ** ((dbm - 30.0) / 10.0))


def watts_to_dbm(watts: float) -> float:
    """Convert a power in watts to dBm."""
    if watts <= 0:
        raise ValueError(f"Power must be positive, got {watts}")
    return 10.0 * math.log10(watts) + 30.0


def db_to_linear(db: float) -> float:
    return float(10 ** (db / 10.0))


class SolverSettings(BaseModel):
    """Conic solver selection and tolerances."""

    name: str = Field(default="CLARABEL", description="cvxpy solver name")
    fallback: str | None = Field(default="SCS", description="Solver retried when `name` errors")
    tolerance: float = Field(default=1e-8, gt=0, description="Feasibility / duality-gap tolerance")
    max_iters: int = Field(default=200, ge=1, description="Interior-point iteration cap")
    scs_max_iters: int = Field(default=20000, ge=1, description="Iteration cap for SCS")
    dump_dir: str | None = Field(default=None, description="Write every program as SCS JSON here")

    @field_validator("name", "fallback")
    @classmethod
    def upper_case(cls, v: str | None) -> str | None:
        return v.upper() if v else v


class PsbConfig(BaseModel):
    """Penalty-based secrecy beamforming knobs."""

    eps_th: float = Field(default=1e-3, gt=0, description="Outer convergence accuracy")
    c1: float = Field(default=0.99, gt=0, lt=1, description="Dual-update acceptance factor")
    c2: float = Field(default=0.99, gt=0, lt=1, description="Penalty shrink factor")
    rho0: float = Field(default=1.0, gt=0)
    tau0: float = Field(default=0.01, gt=0)
    inner_tol: float = Field(default=1e-4, gt=0)
    inner_max_iters: int = Field(default=30, ge=1)
    outer_max_iters: int = Field(default=300, ge=1)
    coupled: bool = True
    q_bits: int = Field(default=0, ge=0, le=8, description="0 means continuous phases")
    rank_tol: float = Field(default=1e-4, gt=0)
    tau_max: float = Field(default=1e6, gt=0)
    sca_max_iters: int = Field(default=10, ge=1)
    paper_faithful: bool = Field(
        default=False, description="Zero both amplitudes in the degenerate amplitude case"
    )
    dual_shift_reference: bool = Field(
        default=True, description="Extract projection references from U - rho*lambda"
    )
    enforce_secrecy_floor: bool = True
    polish_beamforming: bool = True
    phase_alignment_grid: int = Field(
        default=32, ge=1, description="Relative t/r reference phases tried by the projection"
    )


class NetworkTemplate(BaseModel):
    """Scene description in the units people write down (dBm, dB)."""

    M: int = Field(default=4, ge=1)
    N: int = Field(default=8, ge=1)
    p_max_dbm: float = -5.0
    sigma2_dbm: float = -105.0
    l0_db: float = -30.0
    pos_BS: Position = (0.0, 0.0, 0.0)
    pos_RIS: Position = (50.0, 0.0, 0.0)
    pos_IU: Position = (50.0, 5.0, 0.0)
    pos_OU: Position = (50.0, -5.0, 0.0)
    pos_E1: Position = (50.0, 10.0, 0.0)
    pos_E2: Position = (50.0, -10.0, 0.0)
    alpha_BS: float = Field(default=2.2, ge=0)
    alpha_IU: float = Field(default=2.5, ge=0)
    alpha_OU: float = Field(default=2.5, ge=0)
    alpha_E1: float = Field(default=2.5, ge=0)
    alpha_E2: float = Field(default=2.5, ge=0)
    kappa_db: float | None = Field(
        default=None, description="Rician factor in dB (wins over kappa)"
    )
    kappa: float = Field(default=5.0, ge=0, description="Rician factor, linear")

    def to_network(
        self,
        seed: int,
        *,
        M: int | None = None,
        N: int | None = None,
        p_max_dbm: float | None = None,
        pos_RIS: Position | None = None,
    ) -> NetworkConfig:
        """Build the watts-domain NetworkConfig for one trial.

        Raises:
            ChannelError: If a user or eavesdropper sits on the wrong side of the surface.
            ConfigError: If an override yields an otherwise invalid network.
        """
        try:
            return NetworkConfig(
                M=M if M is not None else self.M,
                N=N if N is not None else self.N,
                P_max=dbm_to_watts(p_max_dbm if p_max_dbm is not None else self.p_max_dbm),
                sigma2=dbm_to_watts(self.sigma2_dbm),
                pos_BS=self.pos_BS,
                pos_RIS=pos_RIS if pos_RIS is not None else self.pos_RIS,
                pos_IU=self.pos_IU,
                pos_OU=self.pos_OU,
                pos_E1=self.pos_E1,
                pos_E2=self.pos_E2,
                L0=db_to_linear(self.l0_db),
                alpha_BS=self.alpha_BS,
                alpha_IU=self.alpha_IU,
                alpha_OU=self.alpha_OU,
                alpha_E1=self.alpha_E1,
                alpha_E2=self.alpha_E2,
                kappa=db_to_linear(self.kappa_db) if self.kappa_db is not None else self.kappa,
                rng_seed=seed,
            )
        except ValidationError as e:
            raise ConfigError(f"Invalid network: {e}") from e

    def wrong_side(self, pos_RIS: Position | None = None) -> str | None:
        """Wrong-side message for a surface at pos_RIS (default: the configured one)."""
        positions = {name: getattr(self, f"pos_{name}") for name in SIDED_NODES}
        return side_violation(pos_RIS if pos_RIS is not None else self.pos_RIS, positions)


class SweepConfig(BaseModel):
    """Axes and protocol of the Monte-Carlo studies."""

    p_max_dbm: list[float] = Field(default_factory=lambda: [-15.0, -10.0, -5.0, 0.0, 5.0])
    q_bits: list[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5])
    sizes: list[tuple[int, int]] = Field(default_factory=lambda: [(4, 8)])
    convergence_p_max_dbm: float = -5.0
    trials: int = Field(default=20, ge=1)
    base_seed: int = Field(default=0, ge=0)
    schemes: list[SchemeId] = Field(default_factory=lambda: list(SchemeId))
    reoptimize_beamforming: bool = False
    ts_split: float = Field(default=0.5, gt=0, lt=1)
    ts_split_sweep: list[float] | None = None
    ris_positions: list[Position] | None = None
    record_wall_time: bool = False

    @field_validator("q_bits")
    @classmethod
    def validate_bits(cls, v: list[int]) -> list[int]:
        bad = [q for q in v if not 1 <= q <= 8]
        if bad:
            raise ValueError(f"Quantization bits must lie in 1..8, got {bad}")
        return v

    @field_validator("ts_split_sweep")
    @classmethod
    def validate_splits(cls, v: list[float] | None) -> list[float] | None:
        if v is not None and any(not 0 < s < 1 for s in v):
            raise ValueError("Time splits must lie strictly between 0 and 1")
        return v

    @model_validator(mode="after")
    def _non_empty_axes(self) -> SweepConfig:
        for name in ("p_max_dbm", "q_bits", "sizes", "schemes"):
            if not getattr(self, name):
                raise ValueError(f"Sweep axis {name!r} must not be empty")
        return self


class StarPsbConfig(BaseModel):
    """Top-level starpsb configuration."""

    network: NetworkTemplate = Field(default_factory=NetworkTemplate)
    psb: PsbConfig = Field(default_factory=PsbConfig)
    solver: SolverSettings = Field(default_factory=SolverSettings)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    workers: int = Field(default=1, ge=1, description="Worker processes for trials")
    log_level: str = Field(default="INFO", description="Logging level")

    @model_validator(mode="after")
    def _check_geometry(self) -> StarPsbConfig:
        positions = [self.network.pos_RIS, *(self.sweep.ris_positions or [])]
        for position in positions:
            message = self.network.wrong_side(position)
            if message:
                raise ValueError(f"STAR-RIS at {tuple(position)}: {message}")
        return self


class ExperimentSpec(BaseModel):
    """A fully resolved study: what to run, on which axes, where to write."""

    kind: ExperimentKind
    network: NetworkTemplate
    psb: PsbConfig
    solver: SolverSettings
    sweep: SweepConfig
    trials: int = Field(ge=1)
    base_seed: int = Field(ge=0)
    out_dir: str
    workers: int = Field(default=1, ge=1)

    def seeds(self) -> list[int]:
        """Trial seeds, base_seed + i."""
        return [self.base_seed + i for i in range(self.trials)]


def load_config(path: str | None = None) -> StarPsbConfig:
    """Load and validate configuration from a YAML file.

    Environment variable overrides:
        STARPSB_SOLVER_TOLERANCE: overrides solver.tolerance
        STARPSB_SOLVER: overrides solver.name

    Args:
        path: Path to config file. Without one, ~/.starpsb/config.yaml is used
            if present, else built-in desk-scale defaults.

    Returns:
        Validated StarPsbConfig.

    Raises:
        ConfigError: If config file is missing, unreadable, or invalid.
    """
    data: dict = {}
    if path is not None or Path(DEFAULT_CONFIG_PATH).expanduser().exists():
        data = _read_yaml(Path(path or DEFAULT_CONFIG_PATH).expanduser())

    solver = data.setdefault("solver", {}) or {}
    if not isinstance(solver, dict):
        raise ConfigError("Invalid configuration: solver must be a mapping")
    data["solver"] = solver

    env_tol = os.environ.get("STARPSB_SOLVER_TOLERANCE")
    if env_tol:
        try:
            solver["tolerance"] = float(env_tol)
        except ValueError as e:
            raise ConfigError(f"Invalid STARPSB_SOLVER_TOLERANCE: {env_tol!r}") from e

    env_solver = os.environ.get("STARPSB_SOLVER")
    if env_solver:
        solver["name"] = env_solver

    try:
        return StarPsbConfig(**data)
    except Exception as e:
        raise ConfigError(f"Invalid configuration: {e}") from e


def _read_yaml(config_path: Path) -> dict:
    if not config_path.exists():
        raise ConfigError(f"Config file not found: {config_path}")

    try:
        raw = config_path.read_text()
    except OSError as e:
        raise ConfigError(f"Cannot read config file: {e}") from e

    try:
        data = yaml.safe_load(raw)
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in config file: {e}") from e

    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("Config file must contain a YAML mapping")
    return data


def build_experiment_spec(
    config: StarPsbConfig,
    kind: ExperimentKind,
    *,
    out_dir: str,
    trials: int | None = None,
    seed: int | None = None,
    paper_scale: bool = False,
    schemes: list[SchemeId] | None = None,
    workers: int | None = None,
) -> ExperimentSpec:
    """Resolve CLI overrides against the loaded configuration."""
    sweep = config.sweep.model_copy()
    network = config.network
    if paper_scale:
        sweep.sizes = [PAPER_SCALE_SIZE]
        network = network.model_copy(update={"M": PAPER_SCALE_SIZE[0], "N": PAPER_SCALE_SIZE[1]})
    if schemes:
        sweep.schemes = list(schemes)
    if kind is ExperimentKind.ORACLE_AUDIT:
        network = network.model_copy(update={"M": 1, "N": 2})

    resolved_trials = trials if trials is not None else sweep.trials
    if paper_scale and trials is None:
        resolved_trials = PAPER_SCALE_TRIALS

    try:
        return ExperimentSpec(
            kind=kind,
            network=network,
            psb=config.psb,
            solver=config.solver,
            sweep=sweep,
            trials=resolved_trials,
            base_seed=seed if seed is not None else sweep.base_seed,
            out_dir=out_dir,
            workers=workers if workers is not None else config.workers,
        )
    except Exception as e:
        raise ConfigError(f"Invalid experiment: {e}") from e
