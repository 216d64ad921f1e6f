"""Coefficient step: difference-of-convex rank penalty over (U_t, U_r) with W fixed."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence

import cvxpy as cp
import numpy as np

from starpsb.config import PsbConfig
from starpsb.conic import ConicProgram, HermitianVariable
from starpsb.core.errors import RankDegeneracyError
from starpsb.core.interfaces import SolverPort
from starpsb.core.models import CascadeSet, Side, SolveStatus, Surface
from starpsb.optimizer.extraction import dominant_eigenvector, trace_gap
from starpsb.optimizer.state import PsbState, StepResult, outer
from starpsb.optimizer.surrogate import (
    ActiveBlock,
    RateSlacks,
    SurrogatePoints,
    build_rate_surrogate_constraints,
)

logger = logging.getLogger(__name__)

# τ doubles unless the rank residual at least halves.
RANK_PROGRESS = 0.5


def rank_residual(U: dict[Surface, np.ndarray]) -> float:
    """Σ_s Tr(U_s) − λmax(U_s)."""
    return float(sum(trace_gap(U[s]) for s in Surface))


def _build_program(
    state: PsbState,
    cascades: CascadeSet,
    points: SurrogatePoints,
    u1: dict[Surface, np.ndarray],
    tau: float,
    streams: Sequence[Side],
    fixed_beta_t: np.ndarray | None,
    enforce_floor: bool,
) -> tuple[ConicProgram, dict[Surface, HermitianVariable], dict[Side, RateSlacks]]:
    N = cascades.N
    program = ConicProgram(name="coefficients")
    U_vars = {s: program.add_hermitian_psd(f"U_{s.value}", N) for s in Surface}
    if fixed_beta_t is None:
        program.add_constraint(U_vars[Surface.T].diag() + U_vars[Surface.R].diag() == 1.0)
    else:
        beta_t = np.asarray(fixed_beta_t, dtype=float)
        program.add_constraint(
            U_vars[Surface.T].diag() == beta_t,
            U_vars[Surface.R].diag() == 1.0 - beta_t,
        )

    t = program.add_scalar("t")
    block = ActiveBlock(cascades, state.W, U_vars)
    slacks = build_rate_surrogate_constraints(
        program, block, points, streams, enforce_floor=enforce_floor
    )
    for s in slacks.values():
        program.add_constraint(t <= s.lower - s.eve_max)

    penalties = []
    for s in Surface:
        target = outer(state.u_tilde.u(s)) + state.rho * state.lam[s]
        p = program.add_scalar(f"p_{s.value}")
        program.add_square_epigraph(U_vars[s].residual(target), p)
        penalties.append(p)

    identity = np.eye(N, dtype=complex)
    dc = sum(U_vars[s].real_trace(identity - outer(u1[s])) for s in Surface)
    program.maximize(t - cp.sum(cp.hstack(penalties)) / (2.0 * state.rho) - tau * dc)
    return program, U_vars, slacks


def solve_coefficient_subproblem(
    state: PsbState,
    cascades: CascadeSet,
    config: PsbConfig,
    solver: SolverPort,
    *,
    streams: Sequence[Side] = (Side.I, Side.O),
    fixed_beta_t: np.ndarray | None = None,
) -> StepResult:
    """Update `state.U`, `state.tau` and the surrogate points with W held fixed.

    Each pass linearizes Tr(U) − λmax(U) at the previous dominant eigenvector
    and re-solves until U is rank one and the objective has settled.

    Raises:
        RankDegeneracyError: If τ escalates past `tau_max` without reaching rank one.
        InfeasibleSubproblemError: If the program is infeasible even without the floor.
        ConicSolverError: If the solver fails.
    """
    floor = config.enforce_secrecy_floor
    result = StepResult(objective=-math.inf, iterations=0)
    u1 = {s: dominant_eigenvector(state.U[s]) for s in Surface}
    points = state.surrogates
    previous_residual = rank_residual(state.U)

    for _ in range(config.inner_max_iters):
        program, U_vars, slacks = _build_program(
            state, cascades, points, u1, state.tau, streams, fixed_beta_t, floor
        )
        solution = program.solve(solver)
        if solution.status is SolveStatus.INFEASIBLE and floor:
            logger.warning("Coefficient program infeasible with secrecy floor; dropping floor")
            floor = False
            result.floor_dropped = True
            program, U_vars, slacks = _build_program(
                state, cascades, points, u1, state.tau, streams, fixed_beta_t, floor
            )
            solution = program.solve(solver)
        result.statuses.append(solution.status.value)
        solution.raise_for_status("coefficients")
        result.iterations += 1

        state.U = {s: U_vars[s].value() for s in Surface}
        points = SurrogatePoints(legit=dict(points.legit), eve=dict(points.eve))
        for side, s in slacks.items():
            mu, nu = s.surrogate_updates()
            points.legit[side] = mu
            for k, value in nu.items():
                points.eve[(k, side)] = value
        u1 = {s: dominant_eigenvector(state.U[s]) for s in Surface}

        objective = float(solution.objective)
        improvement = objective - result.objective
        result.objective = objective
        residual = rank_residual(state.U)
        if residual <= config.rank_tol:
            if improvement < config.inner_tol * max(1.0, abs(objective)):
                break
        elif residual > RANK_PROGRESS * previous_residual:
            state.tau *= 2.0
            if state.tau > config.tau_max:
                raise RankDegeneracyError(
                    f"Rank residual {residual:.3e} persists with tau={state.tau:.3e}"
                )
            logger.debug("Rank residual %.3e stalled; tau -> %.3e", residual, state.tau)
        previous_residual = residual
    else:
        logger.info("Coefficient DC loop hit %d passes", config.inner_max_iters)

    state.surrogates = points
    logger.debug(
        "Coefficient step: objective=%.6f passes=%d tau=%.3e",
        result.objective,
        result.iterations,
        state.tau,
    )
    return result
