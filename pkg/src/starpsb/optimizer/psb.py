"""Penalty-based secrecy beamforming: the outer augmented-Lagrangian loop.

Each outer iteration alternates three blocks until the augmented objective
settles: transmit covariances W, relaxed coefficient matrices U, and the
exactly-coupled coefficient vector ũ. The dual λ or the penalty ρ is then
updated from how far U is from ũũᴴ.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from starpsb.config import PsbConfig
from starpsb.core.errors import (
    ConicSolverError,
    CouplingUnrepresentableError,
    RankDegeneracyError,
    SurrogateError,
)
from starpsb.core.interfaces import SolverPort
from starpsb.core.models import (
    BeamformingSolution,
    CascadeSet,
    SecrecyReport,
    Side,
    StarCoefficients,
    Surface,
    TraceRecord,
)
from starpsb.metrics import secrecy_report
from starpsb.optimizer.beamforming import optimize_beamforming, solve_beamforming_subproblem
from starpsb.optimizer.coefficients import solve_coefficient_subproblem
from starpsb.optimizer.extraction import (
    extract_rank_one,
    rank_one_residual,
    reference_target,
    reference_vector,
)
from starpsb.optimizer.projection import (
    best_relative_phase,
    project_coupled,
    project_fixed_amplitude,
    project_independent,
    projection_penalty,
    refine_phases,
)
from starpsb.optimizer.quantize import quantize_coupled
from starpsb.optimizer.state import (
    PsbState,
    initial_state,
    normalize_cascades,
    outer,
    refresh_surrogates,
)

logger = logging.getLogger(__name__)

# Block updates that lower the augmented objective by more than this are undone.
MONOTONE_SLACK = 1e-9
MONOTONE_TOL = 1e-6


def active_secrecy(report: SecrecyReport, streams: Sequence[Side]) -> float:
    """min over the served streams of the clamped secrecy rate."""
    return min(report.Rs(side) for side in streams)


@dataclass
class PsbResult:
    """Final iterate in physical units plus the loop's diagnostics."""

    coefficients: StarCoefficients
    beams: BeamformingSolution
    report: SecrecyReport
    active_streams: tuple[Side, ...]
    trace: list[TraceRecord] = field(default_factory=list)
    converged: bool = False
    outer_iters: int = 0
    rank_residuals: dict[str, float] = field(default_factory=dict)
    inner_monotone: bool = True
    failure: str | None = None

    @property
    def min_secrecy(self) -> float:
        return active_secrecy(self.report, self.active_streams)


@dataclass
class _Candidate:
    coefficients: StarCoefficients
    W: dict[Side, np.ndarray]
    U: dict[Surface, np.ndarray]
    beams: BeamformingSolution
    report: SecrecyReport
    score: float


def _candidate(
    cascades: CascadeSet,
    coefficients: StarCoefficients,
    W: dict[Side, np.ndarray],
    U: dict[Surface, np.ndarray],
    streams: Sequence[Side],
) -> _Candidate:
    beams = BeamformingSolution.from_vectors(
        extract_rank_one(W[Side.I]), extract_rank_one(W[Side.O])
    )
    report = secrecy_report(cascades, coefficients, beams, 1.0)
    return _Candidate(
        coefficients=coefficients,
        W=dict(W),
        U=dict(U),
        beams=beams,
        report=report,
        score=active_secrecy(report, streams),
    )


def project_reference(
    state: PsbState, config: PsbConfig, fixed_beta_t: np.ndarray | None = None
) -> StarCoefficients:
    """Project the dominant eigenvectors of U (shifted by ρλ) onto the feasible set."""
    targets = {
        s: reference_target(
            state.U[s], state.rho, state.lam[s], dual_shift=config.dual_shift_reference
        )
        for s in Surface
    }
    refs = {
        s: reference_vector(
            state.U[s], state.rho, state.lam[s], dual_shift=config.dual_shift_reference
        )
        for s in Surface
    }
    u_t, u_r = refs[Surface.T], refs[Surface.R]
    if fixed_beta_t is not None or not config.coupled:
        if fixed_beta_t is not None:
            projected = project_fixed_amplitude(u_t, u_r, fixed_beta_t, state.u_tilde)
        else:
            projected = project_independent(u_t, u_r, state.u_tilde)
        return _closest_uncoupled(projected, state.u_tilde, targets)
    # Eigenvectors carry an arbitrary common phase per surface; align t and r first.
    phi = best_relative_phase(u_t, u_r, config.phase_alignment_grid)
    coefficients, _ = project_coupled(
        u_t, u_r * np.exp(1j * phi), state.u_tilde, paper_faithful=config.paper_faithful
    )
    return coefficients


def _closest_uncoupled(
    projected: StarCoefficients,
    previous: StarCoefficients,
    targets: dict[Surface, np.ndarray],
) -> StarCoefficients:
    """Phase-refine both the fresh projection and the previous ũ; keep the lower penalty.

    The penalty can then never rise across a projection step.
    """
    fresh = refine_phases(projected, targets)
    kept = refine_phases(previous, targets)
    if projection_penalty(fresh, targets) <= projection_penalty(kept, targets):
        return fresh
    return kept


def _keep_if_not_worse(
    state: PsbState,
    cascades: CascadeSet,
    streams: Sequence[Side],
    objectives: list[float],
    restore: Callable[[], None],
    block: str,
) -> None:
    value = state.objective(cascades, streams)
    if value < objectives[-1] - MONOTONE_SLACK:
        logger.debug(
            "%s update lowered the objective (%.6e -> %.6e); reverted", block, objectives[-1], value
        )
        restore()
        value = state.objective(cascades, streams)
    objectives.append(value)


def _inner_loop(
    state: PsbState,
    cascades: CascadeSet,
    config: PsbConfig,
    solver: SolverPort,
    streams: Sequence[Side],
    fixed_beta_t: np.ndarray | None,
) -> tuple[list[float], list[str], int]:
    objectives = [state.objective(cascades, streams)]
    statuses: list[str] = []
    passes = 0
    for _ in range(config.inner_max_iters):
        passes += 1
        start = objectives[-1]

        saved_W = dict(state.W)
        refresh_surrogates(state, cascades, streams)
        step = solve_beamforming_subproblem(state, cascades, config, solver, streams=streams)
        statuses += step.statuses

        def restore_W(saved: dict[Side, np.ndarray] = saved_W) -> None:
            state.W = saved

        _keep_if_not_worse(state, cascades, streams, objectives, restore_W, "Beamforming")

        saved_U = dict(state.U)
        refresh_surrogates(state, cascades, streams)
        step = solve_coefficient_subproblem(
            state, cascades, config, solver, streams=streams, fixed_beta_t=fixed_beta_t
        )
        statuses += step.statuses

        def restore_U(saved: dict[Surface, np.ndarray] = saved_U) -> None:
            state.U = saved

        _keep_if_not_worse(state, cascades, streams, objectives, restore_U, "Coefficient")

        saved_u = state.u_tilde
        state.u_tilde = project_reference(state, config, fixed_beta_t)

        def restore_u(saved: StarCoefficients = saved_u) -> None:
            state.u_tilde = saved

        _keep_if_not_worse(state, cascades, streams, objectives, restore_u, "Projection")

        if abs(objectives[-1] - start) < config.inner_tol * max(1.0, abs(start)):
            break
    return objectives, statuses, passes


def _validate_fixed_beta(fixed_beta_t: np.ndarray | None, N: int) -> np.ndarray | None:
    if fixed_beta_t is None:
        return None
    beta = np.asarray(fixed_beta_t, dtype=float)
    if beta.shape != (N,):
        raise ValueError(f"fixed_beta_t must have shape ({N},), got {beta.shape}")
    if np.any(beta < 0) or np.any(beta > 1):
        raise ValueError("fixed_beta_t entries must lie in [0, 1]")
    return beta


def run_psb(
    config: PsbConfig,
    cascades: CascadeSet,
    *,
    p_max: float,
    sigma2: float,
    solver: SolverPort,
    seed: int = 0,
    fixed_beta_t: np.ndarray | None = None,
    active_streams: Sequence[Side] = (Side.I, Side.O),
    initial: StarCoefficients | None = None,
    initial_beams: BeamformingSolution | None = None,
) -> PsbResult:
    """Jointly optimize beams and STAR-RIS coefficients for max-min secrecy.

    Args:
        config: Loop knobs.
        cascades: Cascaded channels in physical units.
        p_max: Transmit power budget in watts.
        sigma2: Noise power in watts.
        solver: Conic solver port.
        seed: Seed of the random initial phases.
        fixed_beta_t: Pins the transmission amplitudes (C-RIS and TS modes).
        active_streams: Streams that count toward the objective; others get no power.
        initial: Starting coefficients in place of the random ones.
        initial_beams: Starting beams in physical units in place of isotropic covariances.

    Returns:
        The best iterate seen, quantized when `config.q_bits` > 0.

    Raises:
        ValueError: For an empty stream set, a malformed amplitude pattern or a
            starting point of the wrong size.
        CouplingUnrepresentableError: For coupled quantization with q = 1.
    """
    streams = tuple(active_streams)
    if not streams:
        raise ValueError("At least one stream must be active")
    fixed = _validate_fixed_beta(fixed_beta_t, cascades.N)
    if config.q_bits == 1 and config.coupled and fixed is None:
        raise CouplingUnrepresentableError(
            "1-bit phase grid {0, π} cannot hold θr − θt ∈ {π/2, 3π/2}"
        )
    normalized = normalize_cascades(cascades, p_max, sigma2)
    if initial_beams is not None:
        unit = 1.0 / math.sqrt(p_max)
        initial_beams = BeamformingSolution.from_vectors(
            unit * initial_beams.w_I, unit * initial_beams.w_O
        )
    state = initial_state(
        normalized,
        config,
        seed=seed,
        fixed_beta_t=fixed,
        active_streams=streams,
        initial=initial,
        initial_beams=initial_beams,
    )
    best = _candidate(normalized, state.u_tilde, state.W, state.U, streams)

    converged = False
    failure: str | None = None
    V_prev = math.inf
    outer_iters = 0
    for outer_iter in range(1, config.outer_max_iters + 1):
        state.outer_iter = outer_iter
        try:
            objectives, statuses, passes = _inner_loop(
                state, normalized, config, solver, streams, fixed
            )
        except (ConicSolverError, RankDegeneracyError, SurrogateError) as e:
            failure = f"{type(e).__name__}: {e}"
            logger.warning("PSB stopped at outer iteration %d: %s", outer_iter, e)
            break
        outer_iters = outer_iter

        violation = state.violation()
        V = max(violation.values())
        candidate = _candidate(normalized, state.u_tilde, state.W, state.U, streams)
        if candidate.score >= best.score:
            best = candidate
        state.trace.append(
            TraceRecord(
                outer=outer_iter,
                objective=objectives[-1],
                V_t=violation[Surface.T],
                V_r=violation[Surface.R],
                rho=state.rho,
                tau=state.tau,
                inner_iterations=passes,
                solver_statuses=statuses,
                inner_objectives=objectives,
                min_secrecy=candidate.score,
            )
        )
        logger.info(
            "Outer %d: objective=%.6f V=%.3e rho=%.3e min_secrecy=%.4f",
            outer_iter,
            objectives[-1],
            V,
            state.rho,
            candidate.score,
        )
        if V <= config.eps_th:
            converged = True
            break
        if V <= config.c1 * V_prev:
            for s in Surface:
                state.lam[s] = state.lam[s] + state.coupling_gap(s) / state.rho
        else:
            state.rho *= config.c2
        V_prev = V

    coefficients = best.coefficients
    if config.q_bits > 0:
        coefficients = quantize_coupled(coefficients, config.q_bits)
        logger.info("Quantized coefficients to %d bits", config.q_bits)
    chosen = _candidate(normalized, coefficients, best.W, best.U, streams)
    if config.polish_beamforming:
        chosen = _polish(normalized, chosen, config, solver, streams)

    scale = math.sqrt(p_max)
    beams = BeamformingSolution.from_vectors(scale * chosen.beams.w_I, scale * chosen.beams.w_O)
    report = secrecy_report(cascades, chosen.coefficients, beams, sigma2)
    monotone = all(
        b >= a - MONOTONE_TOL
        for record in state.trace
        for a, b in zip(record.inner_objectives, record.inner_objectives[1:], strict=False)
    )
    return PsbResult(
        coefficients=chosen.coefficients,
        beams=beams,
        report=report,
        active_streams=streams,
        trace=state.trace,
        converged=converged,
        outer_iters=outer_iters,
        rank_residuals={
            "W_I": rank_one_residual(best.W[Side.I]),
            "W_O": rank_one_residual(best.W[Side.O]),
            "U_t": rank_one_residual(best.U[Surface.T]),
            "U_r": rank_one_residual(best.U[Surface.R]),
        },
        inner_monotone=monotone,
        failure=failure,
    )


def _polish(
    cascades: CascadeSet,
    chosen: _Candidate,
    config: PsbConfig,
    solver: SolverPort,
    streams: Sequence[Side],
) -> _Candidate:
    """Re-solve W at the final rank-one U; keep it only if secrecy does not drop."""
    try:
        beams, _ = optimize_beamforming(
            cascades, chosen.coefficients, config, solver, streams=streams, initial=chosen.W
        )
    except ConicSolverError as e:
        logger.warning("Beamforming polish failed: %s", e)
        return chosen
    report = secrecy_report(cascades, chosen.coefficients, beams, 1.0)
    score = active_secrecy(report, streams)
    if score < chosen.score:
        return chosen
    return _Candidate(
        coefficients=chosen.coefficients,
        W={side: np.outer(beams.w(side), beams.w(side).conj()) for side in Side},
        U={s: outer(chosen.coefficients.u(s)) for s in Surface},
        beams=beams,
        report=report,
        score=score,
    )
