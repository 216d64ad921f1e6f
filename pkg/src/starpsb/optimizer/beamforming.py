"""Transmit-covariance step: SCA over (W_I, W_O) with the coefficients fixed."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence

import numpy as np

from starpsb.config import PsbConfig
from starpsb.conic import ConicProgram, HermitianVariable
from starpsb.core.errors import InfeasibleSubproblemError
from starpsb.core.interfaces import SolverPort
from starpsb.core.models import (
    BeamformingSolution,
    CascadeSet,
    Side,
    SolveStatus,
    StarCoefficients,
    Surface,
)
from starpsb.optimizer.extraction import extract_rank_one
from starpsb.optimizer.state import PsbState, StepResult, outer, refresh_surrogates
from starpsb.optimizer.surrogate import (
    ActiveBlock,
    RateSlacks,
    SurrogatePoints,
    build_rate_surrogate_constraints,
)

logger = logging.getLogger(__name__)


def _build_program(
    cascades: CascadeSet,
    U: dict[Surface, np.ndarray],
    points: SurrogatePoints,
    streams: Sequence[Side],
    enforce_floor: bool,
) -> tuple[ConicProgram, dict[Side, HermitianVariable], dict[Side, RateSlacks]]:
    M = cascades.M
    program = ConicProgram(name="beamforming")
    W_vars = {side: program.add_hermitian_psd(f"W_{side.value}", M) for side in streams}
    W_map = {side: W_vars.get(side, np.zeros((M, M), dtype=complex)) for side in Side}
    t = program.add_scalar("t")
    program.add_constraint(sum(W.trace() for W in W_vars.values()) <= 1.0)
    slacks = build_rate_surrogate_constraints(
        program, ActiveBlock(cascades, W_map, U), points, streams, enforce_floor=enforce_floor
    )
    for s in slacks.values():
        program.add_constraint(t <= s.lower - s.eve_max)
    program.maximize(t)
    return program, W_vars, slacks


def _sca(
    cascades: CascadeSet,
    U: dict[Surface, np.ndarray],
    W: dict[Side, np.ndarray],
    points: SurrogatePoints,
    config: PsbConfig,
    solver: SolverPort,
    streams: Sequence[Side],
) -> tuple[dict[Side, np.ndarray], SurrogatePoints, StepResult]:
    """Repeat the linearized W-program until t stops improving."""
    floor = config.enforce_secrecy_floor
    result = StepResult(objective=-math.inf, iterations=0)
    W = dict(W)
    for _ in range(config.sca_max_iters):
        program, W_vars, slacks = _build_program(cascades, U, points, streams, floor)
        solution = program.solve(solver)
        if solution.status is SolveStatus.INFEASIBLE and floor:
            logger.warning("Beamforming program infeasible with secrecy floor; dropping floor")
            floor = False
            result.floor_dropped = True
            program, W_vars, slacks = _build_program(cascades, U, points, streams, floor)
            solution = program.solve(solver)
        result.statuses.append(solution.status.value)
        solution.raise_for_status("beamforming")
        result.iterations += 1

        for side, var in W_vars.items():
            W[side] = var.value()
        points = SurrogatePoints(legit=dict(points.legit), eve=dict(points.eve))
        for side, s in slacks.items():
            mu, nu = s.surrogate_updates()
            points.legit[side] = mu
            for k, value in nu.items():
                points.eve[(k, side)] = value

        objective = float(solution.objective)
        improvement = objective - result.objective
        result.objective = objective
        if improvement < config.inner_tol * max(1.0, abs(objective)):
            break
    return W, points, result


def solve_beamforming_subproblem(
    state: PsbState,
    cascades: CascadeSet,
    config: PsbConfig,
    solver: SolverPort,
    *,
    streams: Sequence[Side] = (Side.I, Side.O),
) -> StepResult:
    """Update `state.W` (and the surrogate points) with U held fixed.

    Raises:
        InfeasibleSubproblemError: If the program is infeasible even without the floor.
        ConicSolverError: If the solver fails.
    """
    W, points, result = _sca(cascades, state.U, state.W, state.surrogates, config, solver, streams)
    state.W = W
    state.surrogates = points
    logger.debug("Beamforming step: t=%.6f after %d solves", result.objective, result.iterations)
    return result


def optimize_beamforming(
    cascades: CascadeSet,
    coefficients: StarCoefficients,
    config: PsbConfig,
    solver: SolverPort,
    *,
    streams: Sequence[Side] = (Side.I, Side.O),
    initial: dict[Side, np.ndarray] | None = None,
) -> tuple[BeamformingSolution, StepResult]:
    """Max-min secrecy beamforming at fixed STAR-RIS coefficients (normalized units).

    Returns rank-one beams extracted from the optimized covariances.
    """
    M = cascades.M
    U = {s: outer(coefficients.u(s)) for s in Surface}
    if initial is None:
        initial = {
            side: (
                np.eye(M, dtype=complex) / (2 * M)
                if side in streams
                else np.zeros((M, M), dtype=complex)
            )
            for side in Side
        }
    start = PsbState(W=dict(initial), U=U, u_tilde=coefficients, lam={}, rho=1.0, tau=0.0)
    refresh_surrogates(start, cascades, streams)
    try:
        W, _, result = _sca(cascades, U, start.W, start.surrogates, config, solver, streams)
    except InfeasibleSubproblemError:
        logger.warning("Fixed-coefficient beamforming infeasible; keeping the initial beams")
        W, result = start.W, StepResult(objective=-math.inf, iterations=0, statuses=["infeasible"])
    beams = BeamformingSolution.from_vectors(
        extract_rank_one(W[Side.I]), extract_rank_one(W[Side.O])
    )
    return beams, result
