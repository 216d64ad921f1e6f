"""The coupled STAR-RIS scheme and the four schemes it is compared against.

Every scheme ends in `secrecy_report` on its own feasible output, so all of
them are scored by the same rate formulas.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from starpsb.config import PsbConfig
from starpsb.core.errors import ConfigError, CouplingUnrepresentableError
from starpsb.core.interfaces import SolverPort
from starpsb.core.models import (
    EAVESDROPPERS,
    BeamformingSolution,
    CascadeSet,
    SchemeId,
    SchemeOutcome,
    SchemeResult,
    SecrecyReport,
    Side,
    StarCoefficients,
    wrap_phase,
)
from starpsb.metrics import secrecy_report
from starpsb.optimizer import PsbResult, active_secrecy, optimize_beamforming, run_psb
from starpsb.optimizer.quantize import quantize_coupled
from starpsb.optimizer.state import normalize_cascades

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SchemeContext:
    """One channel realization and everything a scheme needs to run on it."""

    config: PsbConfig
    cascades: CascadeSet
    p_max: float
    p_max_dbm: float
    sigma2: float
    seed: int
    solver: SolverPort
    ts_split: float = 0.5
    # Outcomes already produced on this realization, by scheme.
    outcomes: dict[SchemeId, SchemeOutcome] = field(default_factory=dict)


def _result(
    scheme: SchemeId,
    ctx: SchemeContext,
    report: SecrecyReport,
    *,
    converged: bool,
    outer_iters: int,
    q_bits: int | None = None,
) -> SchemeResult:
    return SchemeResult(
        scheme=scheme,
        seed=ctx.seed,
        P_max_dBm=ctx.p_max_dbm,
        q_bits=q_bits,
        min_secrecy=report.min_secrecy,
        Rs_I=report.Rs_I,
        Rs_O=report.Rs_O,
        converged=converged,
        outer_iters=outer_iters,
    )


def _from_psb(scheme: SchemeId, ctx: SchemeContext, psb: PsbResult) -> SchemeOutcome:
    return SchemeOutcome(
        result=_result(
            scheme, ctx, psb.report, converged=psb.converged, outer_iters=psb.outer_iters
        ),
        coefficients=psb.coefficients,
        beams=psb.beams,
        trace=psb.trace,
        rank_residuals=psb.rank_residuals,
        inner_monotone=psb.inner_monotone,
        report=psb.report,
    )


def _run(ctx: SchemeContext, config: PsbConfig, **kwargs) -> PsbResult:
    return run_psb(
        config,
        ctx.cascades,
        p_max=ctx.p_max,
        sigma2=ctx.sigma2,
        solver=ctx.solver,
        seed=ctx.seed,
        **kwargs,
    )


def run_coupled(ctx: SchemeContext) -> SchemeOutcome:
    """PSB with both the energy and the phase coupling constraints."""
    config = ctx.config.model_copy(update={"coupled": True})
    return _from_psb(SchemeId.COUPLED, ctx, _run(ctx, config))


def _coupled_outcome(ctx: SchemeContext) -> SchemeOutcome | None:
    cached = ctx.outcomes.get(SchemeId.COUPLED)
    if cached is not None:
        return cached
    try:
        return run_coupled(ctx)
    except CouplingUnrepresentableError as e:
        logger.debug("No coupled warm start: %s", e)
        return None


def run_independent(ctx: SchemeContext) -> SchemeOutcome:
    """Same pipeline with the phase coupling dropped; βt + βr = 1 is kept.

    Every coupled configuration is feasible here, so a second run starts from
    the coupled outcome on the same channel and the better run is kept.
    """
    config = ctx.config.model_copy(update={"coupled": False})
    cold = _run(ctx, config)
    coupled = _coupled_outcome(ctx)
    if coupled is None:
        return _from_psb(SchemeId.INDEPENDENT, ctx, cold)
    warm = _run(ctx, config, initial=coupled.coefficients, initial_beams=coupled.beams)
    logger.debug(
        "Independent runs: random start %.4f, coupled start %.4f",
        cold.min_secrecy,
        warm.min_secrecy,
    )
    best = warm if warm.min_secrecy >= cold.min_secrecy else cold
    return _from_psb(SchemeId.INDEPENDENT, ctx, best)


def combine_time_switched(
    transmission: SecrecyReport, reflection: SecrecyReport, split: float
) -> SecrecyReport:
    """Weight the transmission-phase rates of IU by `split` and OU's by 1 − split."""
    if not 0.0 <= split <= 1.0:
        raise ValueError(f"Time split must lie in [0, 1], got {split}")
    weights = {Side.I: split, Side.O: 1.0 - split}
    phase = {Side.I: transmission, Side.O: reflection}
    values: dict[str, float | int] = {}
    for side in Side:
        report, weight = phase[side], weights[side]
        values[f"R_{side.value}"] = weight * report.R(side)
        for k in EAVESDROPPERS:
            values[f"R_E{k}_{side.value}"] = weight * report.R_E(k, side)
        values[f"Rs_{side.value}"] = weight * report.Rs(side)
        values[f"worst_eve_{side.value}"] = getattr(report, f"worst_eve_{side.value}")
    values["min_secrecy"] = min(values["Rs_I"], values["Rs_O"])
    return SecrecyReport(**values)  # type: ignore[arg-type]


def run_ts(ctx: SchemeContext) -> SchemeOutcome:
    """Transmission-only phase for IU, then reflection-only phase for OU.

    Each phase serves a single user interference-free; only the eavesdropper
    on the active side hears anything.
    """
    config = ctx.config.model_copy(update={"coupled": False})
    N = ctx.cascades.N
    transmission = _run(ctx, config, fixed_beta_t=np.ones(N), active_streams=(Side.I,))
    reflection = _run(ctx, config, fixed_beta_t=np.zeros(N), active_streams=(Side.O,))
    report = combine_time_switched(transmission.report, reflection.report, ctx.ts_split)
    logger.debug(
        "TS phases: Rs_I=%.4f Rs_O=%.4f split=%.2f",
        transmission.report.Rs_I,
        reflection.report.Rs_O,
        ctx.ts_split,
    )
    return SchemeOutcome(
        result=_result(
            SchemeId.TS,
            ctx,
            report,
            converged=transmission.converged and reflection.converged,
            outer_iters=transmission.outer_iters + reflection.outer_iters,
        ),
        coefficients=transmission.coefficients,
        beams=transmission.beams,
        trace=transmission.trace + reflection.trace,
        rank_residuals={
            **{f"{k}_transmission": v for k, v in transmission.rank_residuals.items()},
            **{f"{k}_reflection": v for k, v in reflection.rank_residuals.items()},
        },
        inner_monotone=transmission.inner_monotone and reflection.inner_monotone,
        report=report,
        reflection_phase=(reflection.coefficients, reflection.beams),
    )


def cris_amplitudes(N: int) -> np.ndarray:
    """First half transmit-only, second half reflect-only."""
    if N % 2:
        raise ConfigError(f"C-RIS splits the surface in halves; N={N} is odd")
    return np.concatenate([np.ones(N // 2), np.zeros(N // 2)])


def run_cris(ctx: SchemeContext) -> SchemeOutcome:
    """Co-located transmitting-only and reflecting-only RISs of N/2 elements each."""
    beta_t = cris_amplitudes(ctx.cascades.N)
    config = ctx.config.model_copy(update={"coupled": False})
    return _from_psb(SchemeId.CRIS, ctx, _run(ctx, config, fixed_beta_t=beta_t))


def random_coefficients(N: int, seed: int) -> StarCoefficients:
    """Uniform θt, θr = θt + π/2, equal energy split."""
    rng = np.random.default_rng(seed)
    theta_t = wrap_phase(rng.uniform(0.0, 2 * math.pi, N))
    return StarCoefficients(
        beta_t=np.full(N, 0.5),
        beta_r=np.full(N, 0.5),
        theta_t=theta_t,
        theta_r=wrap_phase(theta_t + math.pi / 2),
    )


def _beamform(
    ctx: SchemeContext,
    coefficients: StarCoefficients,
    streams: Sequence[Side] = (Side.I, Side.O),
) -> tuple[BeamformingSolution, bool]:
    """Physical-unit beams at fixed coefficients, plus whether every solve was usable."""
    normalized = normalize_cascades(ctx.cascades, ctx.p_max, ctx.sigma2)
    beams, step = optimize_beamforming(
        normalized, coefficients, ctx.config, ctx.solver, streams=streams
    )
    scale = math.sqrt(ctx.p_max)
    ok = step.iterations > 0 and "infeasible" not in step.statuses
    return BeamformingSolution.from_vectors(scale * beams.w_I, scale * beams.w_O), ok


def run_random_phase(ctx: SchemeContext) -> SchemeOutcome:
    """Random coupled coefficients; only the beamformers are optimized."""
    coefficients = random_coefficients(ctx.cascades.N, ctx.seed)
    beams, ok = _beamform(ctx, coefficients)
    report = secrecy_report(ctx.cascades, coefficients, beams, ctx.sigma2)
    return SchemeOutcome(
        result=_result(SchemeId.RANDOM, ctx, report, converged=ok, outer_iters=0),
        coefficients=coefficients,
        beams=beams,
        report=report,
    )


def _requantize_phase(
    ctx: SchemeContext,
    coefficients: StarCoefficients,
    beams: BeamformingSolution,
    q: int,
    streams: Sequence[Side],
    reoptimize: bool,
) -> tuple[StarCoefficients, BeamformingSolution, SecrecyReport]:
    quantized = quantize_coupled(coefficients, q)
    report = secrecy_report(ctx.cascades, quantized, beams, ctx.sigma2)
    if reoptimize:
        polished, ok = _beamform(ctx, quantized, streams)
        polished_report = secrecy_report(ctx.cascades, quantized, polished, ctx.sigma2)
        if ok and active_secrecy(polished_report, streams) >= active_secrecy(report, streams):
            return quantized, polished, polished_report
    return quantized, beams, report


def requantize(
    scheme: SchemeId,
    ctx: SchemeContext,
    outcome: SchemeOutcome,
    q: int,
    *,
    reoptimize: bool = False,
) -> SchemeOutcome:
    """Round a continuous outcome's phases to q bits and re-score it.

    Raises:
        CouplingUnrepresentableError: For coupled coefficients at q = 1.
    """
    if scheme is SchemeId.TS:
        if outcome.reflection_phase is None:
            raise ValueError("TS outcome is missing its reflection phase")
        coeffs_t, beams_t, report_t = _requantize_phase(
            ctx, outcome.coefficients, outcome.beams, q, (Side.I,), reoptimize
        )
        coeffs_r, beams_r, report_r = _requantize_phase(
            ctx, *outcome.reflection_phase, q, (Side.O,), reoptimize
        )
        report = combine_time_switched(report_t, report_r, ctx.ts_split)
        return SchemeOutcome(
            result=_result(
                scheme,
                ctx,
                report,
                converged=outcome.result.converged,
                outer_iters=outcome.result.outer_iters,
                q_bits=q,
            ),
            coefficients=coeffs_t,
            beams=beams_t,
            report=report,
            reflection_phase=(coeffs_r, beams_r),
        )

    coefficients, beams, report = _requantize_phase(
        ctx, outcome.coefficients, outcome.beams, q, (Side.I, Side.O), reoptimize
    )
    return SchemeOutcome(
        result=_result(
            scheme,
            ctx,
            report,
            converged=outcome.result.converged,
            outer_iters=outcome.result.outer_iters,
            q_bits=q,
        ),
        coefficients=coefficients,
        beams=beams,
        report=report,
    )
