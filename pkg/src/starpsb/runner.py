"""Trial execution: one channel realization pushed through the selected schemes.

Trials are independent. With more than one worker they are farmed out to a
process pool; output order always follows task order.
"""

from __future__ import annotations

import logging
import time
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Any

from starpsb.channels import build_cascades, channel_digest, generate_channels
from starpsb.config import PsbConfig, watts_to_dbm
from starpsb.core.errors import StarPsbError
from starpsb.core.interfaces import SolverPort
from starpsb.core.models import (
    NetworkConfig,
    ResultRow,
    RowStatus,
    SchemeId,
    SchemeOutcome,
    SchemeResult,
    TraceRecord,
)
from starpsb.schemes import SchemeContext, SchemeRegistry, requantize

logger = logging.getLogger(__name__)

CONTINUOUS_AXIS = "continuous"


@dataclass(frozen=True)
class TrialTask:
    """Picklable unit of work."""

    seed: int
    axis: str
    axis_index: int
    network: NetworkConfig
    psb: PsbConfig
    schemes: tuple[SchemeId, ...]
    ts_split: float = 0.5
    q_bits: tuple[int, ...] = ()
    reoptimize: bool = False
    record_wall_time: bool = False
    keep_traces: bool = False


@dataclass
class TrialOutput:
    """Rows, per-run results, traces and diagnostics produced by one task."""

    seed: int
    axis: str
    digest: str
    rows: list[ResultRow] = field(default_factory=list)
    results: list[SchemeResult] = field(default_factory=list)
    traces: dict[str, list[TraceRecord]] = field(default_factory=dict)
    diagnostics: dict[str, dict[str, Any]] = field(default_factory=dict)


def _row(
    scheme: SchemeId,
    axis: str,
    axis_index: int,
    seed: int,
    outcome: SchemeOutcome | None,
    status: RowStatus,
    wall_ms: float,
) -> ResultRow:
    if outcome is None:
        return ResultRow(
            scheme=scheme.value,
            axis=axis,
            axis_index=axis_index,
            seed=seed,
            status=status,
            wall_ms=wall_ms,
        )
    result = outcome.result
    return ResultRow(
        scheme=scheme.value,
        axis=axis,
        axis_index=axis_index,
        seed=seed,
        min_secrecy=result.min_secrecy,
        Rs_I=result.Rs_I,
        Rs_O=result.Rs_O,
        status=status,
        outer_iters=result.outer_iters,
        wall_ms=wall_ms,
    )


def _status(outcome: SchemeOutcome) -> RowStatus:
    return RowStatus.CONVERGED if outcome.result.converged else RowStatus.NOT_CONVERGED


def failure_status(error: StarPsbError) -> RowStatus:
    """Row marker for a scheme that raised: its error code when that is a marker, else `failed`."""
    try:
        return RowStatus(error.code)
    except ValueError:
        return RowStatus.FAILED


def _log_failure(error: StarPsbError, what: str, seed: int, status: RowStatus) -> None:
    if status is RowStatus.FAILED:
        logger.warning("%s failed on seed=%d [%s]: %s", what, seed, error.code, error)
    else:
        logger.info("%s seed=%d [%s]: %s", what, seed, error.code, error)


def execute_trial(task: TrialTask, *, solver: SolverPort, registry: SchemeRegistry) -> TrialOutput:
    """Generate the task's channel once and run every selected scheme on it.

    Per-scheme failures become `failed` rows; they never abort the trial.
    """
    channels = generate_channels(task.network)
    cascades = build_cascades(channels)
    output = TrialOutput(seed=task.seed, axis=task.axis, digest=channel_digest(channels))
    ctx = SchemeContext(
        config=task.psb,
        cascades=cascades,
        p_max=task.network.P_max,
        p_max_dbm=watts_to_dbm(task.network.P_max),
        sigma2=task.network.sigma2,
        seed=task.seed,
        solver=solver,
        ts_split=task.ts_split,
    )

    for scheme, runner in registry.select(task.schemes):
        start = time.perf_counter()
        outcome: SchemeOutcome | None = None
        try:
            outcome = runner(ctx)
            ctx.outcomes[scheme] = outcome
            status = _status(outcome)
        except StarPsbError as e:
            status = failure_status(e)
            _log_failure(e, f"{scheme.value} axis={task.axis}", task.seed, status)
        wall_ms = (time.perf_counter() - start) * 1000.0 if task.record_wall_time else 0.0

        if outcome is not None:
            output.results.append(outcome.result.model_copy(update={"wall_ms": wall_ms}))
            if status is RowStatus.NOT_CONVERGED:
                logger.warning("%s did not converge on seed=%d", scheme.value, task.seed)
            logger.info(
                "%s seed=%d axis=%s min_secrecy=%.4f status=%s",
                scheme.value,
                task.seed,
                task.axis,
                outcome.result.min_secrecy,
                status.value,
            )
            label = f"{scheme.value}/{task.axis}/seed{task.seed}"
            output.diagnostics[label] = {
                "rank_residuals": outcome.rank_residuals,
                "inner_monotone": outcome.inner_monotone,
                "converged": outcome.result.converged,
            }
            if task.keep_traces:
                output.traces[label] = outcome.trace

        if not task.q_bits:
            output.rows.append(
                _row(scheme, task.axis, task.axis_index, task.seed, outcome, status, wall_ms)
            )
            continue

        output.rows.append(_row(scheme, CONTINUOUS_AXIS, 0, task.seed, outcome, status, wall_ms))
        for q in task.q_bits:
            output.rows.append(_quantized_row(scheme, ctx, outcome, status, q, task))
    return output


def _quantized_row(
    scheme: SchemeId,
    ctx: SchemeContext,
    outcome: SchemeOutcome | None,
    status: RowStatus,
    q: int,
    task: TrialTask,
) -> ResultRow:
    axis = str(q)
    if outcome is None:
        return _row(scheme, axis, q, task.seed, None, status, 0.0)
    try:
        quantized = requantize(scheme, ctx, outcome, q, reoptimize=task.reoptimize)
    except StarPsbError as e:
        failed = failure_status(e)
        _log_failure(e, f"{scheme.value} q={q}", task.seed, failed)
        return _row(scheme, axis, q, task.seed, None, failed, 0.0)
    return _row(scheme, axis, q, task.seed, quantized, status, 0.0)


class ExperimentRunner:
    """Runs trial tasks serially or on a bounded process pool."""

    def __init__(self, solver: SolverPort, registry: SchemeRegistry, workers: int = 1) -> None:
        if workers < 1:
            raise ValueError(f"workers must be >= 1, got {workers}")
        self._solver = solver
        self._registry = registry
        self._workers = workers

    def run(self, tasks: Sequence[TrialTask]) -> list[TrialOutput]:
        """Execute all tasks; the result list is in task order."""
        work = partial(execute_trial, solver=self._solver, registry=self._registry)
        if self._workers == 1 or len(tasks) <= 1:
            return [work(task) for task in tasks]
        logger.info("Running %d trials on %d workers", len(tasks), self._workers)
        with ProcessPoolExecutor(max_workers=self._workers) as pool:
            return list(pool.map(work, tasks))
