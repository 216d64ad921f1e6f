"""The four studies: convergence, power sweep, bits sweep and oracle audit."""

from __future__ import annotations

import logging
from collections import defaultdict
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
from scipy import stats

from starpsb.adapters.result_store import format_number
from starpsb.config import ExperimentSpec
from starpsb.core.interfaces import ResultStorePort, SolverPort
from starpsb.core.models import (
    AggregateRow,
    ExperimentKind,
    Position,
    ResultRow,
    SchemeId,
    SchemeResult,
    TraceRecord,
)
from starpsb.oracles import audit_end_to_end, audit_projection, audit_rates, raise_for_audit
from starpsb.runner import ExperimentRunner, TrialOutput, TrialTask

if TYPE_CHECKING:
    from starpsb.container import Container

logger = logging.getLogger(__name__)

PROJECTION_AUDIT_ELEMENTS = 1000
RATE_AUDIT_INSTANCES = 100


@dataclass
class StudyResult:
    """Everything a study produced, plus where it was written."""

    kind: ExperimentKind
    rows: list[ResultRow] = field(default_factory=list)
    aggregates: list[AggregateRow] = field(default_factory=list)
    traces: dict[str, list[TraceRecord]] = field(default_factory=dict)
    report: dict[str, Any] = field(default_factory=dict)
    paths: dict[str, Path] = field(default_factory=dict)


def aggregate(rows: Sequence[ResultRow]) -> list[AggregateRow]:
    """Mean and standard error of min-secrecy per (scheme, axis), skipping valueless rows."""
    cells: dict[tuple[str, int, str], list[float]] = defaultdict(list)
    for row in rows:
        key = (row.scheme, row.axis_index, row.axis)
        if row.min_secrecy is None:
            cells.setdefault(key, [])
            continue
        cells[key].append(row.min_secrecy)
    out = []
    for (scheme, _, axis), values in sorted(cells.items()):
        if not values:
            continue
        arr = np.asarray(values, dtype=float)
        stderr = float(stats.sem(arr)) if arr.size > 1 else 0.0
        out.append(
            AggregateRow(
                scheme=scheme,
                axis=axis,
                mean=float(np.mean(arr)),
                stderr=stderr,
                count=int(arr.size),
            )
        )
    return out


def plot_points(aggregates: Sequence[AggregateRow]) -> list[tuple[str, str, float, float]]:
    """(scheme, x, mean, stderr) per aggregate cell."""
    return [(a.scheme, a.axis, a.mean, a.stderr) for a in aggregates]


def _collect(
    outputs: Sequence[TrialOutput],
) -> tuple[list[ResultRow], dict[str, list[TraceRecord]]]:
    rows = sorted((row for out in outputs for row in out.rows), key=lambda r: r.sort_key)
    traces: dict[str, list[TraceRecord]] = {}
    for out in outputs:
        traces.update(out.traces)
    return rows, dict(sorted(traces.items()))


def _results(outputs: Sequence[TrialOutput]) -> list[SchemeResult]:
    return [result for out in outputs for result in out.results]


def _tag_rows(outputs: Sequence[TrialOutput], tag: str) -> None:
    if not tag:
        return
    for out in outputs:
        for row in out.rows:
            row.scheme = f"{row.scheme}@{tag}"


def _position_tag(position: Position) -> str:
    return "ris=" + ",".join(format_number(c) for c in position)


def run_convergence_study(
    spec: ExperimentSpec, runner: ExperimentRunner, store: ResultStorePort
) -> StudyResult:
    """Coupled PSB on every (M, N) pair; keeps the outer-iteration traces."""
    tasks = [
        TrialTask(
            seed=seed,
            axis=f"M{M}-N{N}",
            axis_index=index,
            network=spec.network.to_network(
                seed, M=M, N=N, p_max_dbm=spec.sweep.convergence_p_max_dbm
            ),
            psb=spec.psb,
            schemes=(SchemeId.COUPLED,),
            record_wall_time=spec.sweep.record_wall_time,
            keep_traces=True,
        )
        for index, (M, N) in enumerate(spec.sweep.sizes)
        for seed in spec.seeds()
    ]
    logger.info("Convergence study: %d trials", len(tasks))
    outputs = runner.run(tasks)
    rows, traces = _collect(outputs)
    diagnostics = {k: v for out in outputs for k, v in out.diagnostics.items()}

    monotone = all(d["inner_monotone"] for d in diagnostics.values())
    converged = [d["converged"] for d in diagnostics.values()]
    max_rank = max(
        (
            v
            for d in diagnostics.values()
            for k, v in d["rank_residuals"].items()
            if k.startswith("W_")
        ),
        default=0.0,
    )
    mean_iters = {
        axis: float(np.mean([r.outer_iters for r in rows if r.axis == axis]))
        for axis in dict.fromkeys(r.axis for r in rows)
    }
    if not monotone:
        logger.warning("Some inner-loop traces decreased")
    if converged and not all(converged):
        logger.warning("%d of %d runs did not converge", converged.count(False), len(converged))

    result = StudyResult(kind=ExperimentKind.CONVERGENCE, rows=rows, traces=traces)
    result.aggregates = aggregate(rows)
    result.report = {
        "trials": len(tasks),
        "all_monotone": monotone,
        "converged_fraction": float(np.mean(converged)) if converged else 0.0,
        "max_w_rank_residual": max_rank,
        "mean_outer_iters": mean_iters,
        "runs": diagnostics,
    }
    result.paths = {
        "table": store.write_table("convergence", rows),
        "traces": store.write_traces("convergence_traces", traces),
        "runs": store.write_results("convergence_runs", _results(outputs)),
        "report": store.write_report("convergence_report", result.report),
    }
    return result


def run_power_sweep(
    spec: ExperimentSpec, runner: ExperimentRunner, store: ResultStorePort
) -> StudyResult:
    """Every scheme at every P_max on one shared channel per seed.

    With `sweep.ts_split_sweep` set, TS is also run at each listed time split.
    """
    M, N = spec.sweep.sizes[0]
    schemes = tuple(spec.sweep.schemes)

    def tasks_for(selected: tuple[SchemeId, ...], ts_split: float) -> list[TrialTask]:
        return [
            TrialTask(
                seed=seed,
                axis=format_number(p),
                axis_index=index,
                network=spec.network.to_network(seed, M=M, N=N, p_max_dbm=p),
                psb=spec.psb,
                schemes=selected,
                ts_split=ts_split,
                record_wall_time=spec.sweep.record_wall_time,
            )
            for index, p in enumerate(spec.sweep.p_max_dbm)
            for seed in spec.seeds()
        ]

    logger.info(
        "Power sweep: %d powers x %d seeds x %d schemes",
        len(spec.sweep.p_max_dbm),
        spec.trials,
        len(schemes),
    )
    outputs = runner.run(tasks_for(schemes, spec.sweep.ts_split))
    digests = {f"{out.axis}/seed{out.seed}": out.digest for out in outputs}
    for split in spec.sweep.ts_split_sweep or []:
        extra = runner.run(tasks_for((SchemeId.TS,), split))
        _tag_rows(extra, f"split={format_number(split)}")
        outputs += extra

    rows, _ = _collect(outputs)
    result = StudyResult(kind=ExperimentKind.POWER_SWEEP, rows=rows)
    result.aggregates = aggregate(rows)
    shared = {
        seed: len({d for key, d in digests.items() if key.endswith(f"/seed{seed}")}) == 1
        for seed in spec.seeds()
    }
    result.report = {"channel_digests": digests, "shared_channels": all(shared.values())}
    result.paths = {
        "table": store.write_table("power_sweep", rows),
        "summary": store.write_aggregates("power_sweep_summary", result.aggregates),
        "plot": store.write_plot("power_sweep_plot", plot_points(result.aggregates)),
        "runs": store.write_results("power_sweep_runs", _results(outputs)),
        "report": store.write_report("power_sweep_report", result.report),
    }
    return result


def run_bits_sweep(
    spec: ExperimentSpec, runner: ExperimentRunner, store: ResultStorePort
) -> StudyResult:
    """Continuous run per seed, then quantized at every q.

    Coupled rows at q = 1 carry the `coupling-unrepresentable` marker and no
    value. With `sweep.ris_positions` set the sweep is repeated per location.
    """
    M, N = spec.sweep.sizes[0]
    positions: list[Position | None] = [None, *(spec.sweep.ris_positions or [])]
    outputs: list[TrialOutput] = []
    for position in positions:
        tasks = [
            TrialTask(
                seed=seed,
                axis="bits",
                axis_index=0,
                network=spec.network.to_network(seed, M=M, N=N, pos_RIS=position),
                psb=spec.psb,
                schemes=tuple(spec.sweep.schemes),
                ts_split=spec.sweep.ts_split,
                q_bits=tuple(spec.sweep.q_bits),
                reoptimize=spec.sweep.reoptimize_beamforming,
                record_wall_time=spec.sweep.record_wall_time,
            )
            for seed in spec.seeds()
        ]
        logger.info("Bits sweep: %d trials at RIS position %s", len(tasks), position or "default")
        chunk = runner.run(tasks)
        if position is not None:
            _tag_rows(chunk, _position_tag(position))
        outputs += chunk

    rows, _ = _collect(outputs)
    result = StudyResult(kind=ExperimentKind.BITS_SWEEP, rows=rows)
    result.aggregates = aggregate(rows)
    result.report = {
        "unrepresentable_rows": sum(r.status.value == "coupling-unrepresentable" for r in rows)
    }
    result.paths = {
        "table": store.write_table("bits_sweep", rows),
        "summary": store.write_aggregates("bits_sweep_summary", result.aggregates),
        "plot": store.write_plot("bits_sweep_plot", plot_points(result.aggregates)),
        "runs": store.write_results("bits_sweep_runs", _results(outputs)),
    }
    return result


def run_oracle_audit(
    spec: ExperimentSpec, solver: SolverPort, store: ResultStorePort
) -> StudyResult:
    """Projection, rate-formula and end-to-end checks against brute force.

    The report is written before any failure is raised.

    Raises:
        AuditError: If any part fails, naming the offending seeds and inputs.
    """
    M, N = spec.network.M, spec.network.N
    rate_networks = [
        spec.network.to_network(spec.base_seed + i, M=M, N=N)
        for i in range(RATE_AUDIT_INSTANCES)
    ]
    seed_networks = [spec.network.to_network(seed, M=M, N=N) for seed in spec.seeds()]

    logger.info("Oracle audit: projection, rates, end-to-end over %d seeds", spec.trials)
    report: dict[str, Any] = {
        "projection": audit_projection(PROJECTION_AUDIT_ELEMENTS, spec.base_seed),
        "rates": audit_rates(rate_networks),
        "end_to_end": audit_end_to_end(seed_networks, spec.psb, solver),
    }
    report["ok"] = all(section["ok"] for section in report.values())
    result = StudyResult(kind=ExperimentKind.ORACLE_AUDIT, report=report)
    result.paths = {"report": store.write_report("oracle_audit", report)}
    raise_for_audit(report)
    return result


def run_experiment(spec: ExperimentSpec, container: Container) -> StudyResult:
    """Dispatch `spec` to its study using the container's ports."""
    store = container.result_store
    if spec.kind is ExperimentKind.ORACLE_AUDIT:
        return run_oracle_audit(spec, container.solver, store)
    runner = container.runner(spec.workers)
    if spec.kind is ExperimentKind.CONVERGENCE:
        return run_convergence_study(spec, runner, store)
    if spec.kind is ExperimentKind.POWER_SWEEP:
        return run_power_sweep(spec, runner, store)
    return run_bits_sweep(spec, runner, store)
