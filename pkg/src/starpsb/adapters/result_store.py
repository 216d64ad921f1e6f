"""File-based result store: CSV tables, JSON-lines traces and runs, JSON reports."""

from __future__ import annotations

import csv
import json
import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from starpsb.core.errors import ResultStoreError
from starpsb.core.interfaces import ResultStorePort
from starpsb.core.models import AggregateRow, ResultRow, SchemeResult, TraceRecord

logger = logging.getLogger(__name__)

TABLE_HEADER = (
    "scheme",
    "axis",
    "seed",
    "min_secrecy",
    "Rs_I",
    "Rs_O",
    "converged",
    "outer_iters",
    "wall_ms",
)


def format_number(value: float | None) -> str:
    """Fixed-precision text so identical runs give identical files."""
    if value is None:
        return ""
    return f"{value:.10g}"


class FileResultStore(ResultStorePort):
    """Writes study outputs under one directory, creating it on first use."""

    def __init__(self, out_dir: str | Path) -> None:
        self.out_dir = Path(out_dir).expanduser()

    def _path(self, name: str, suffix: str) -> Path:
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ResultStoreError(f"Cannot create output directory {self.out_dir}: {e}") from e
        return self.out_dir / f"{name}{suffix}"

    def _write_rows(self, path: Path, header: Sequence[str], rows: list[list[str]]) -> Path:
        try:
            with path.open("w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(header)
                writer.writerows(rows)
        except OSError as e:
            raise ResultStoreError(f"Cannot write {path}: {e}") from e
        logger.info("Wrote %d rows to %s", len(rows), path)
        return path

    def write_table(self, name: str, rows: Sequence[ResultRow]) -> Path:
        ordered = sorted(rows, key=lambda r: r.sort_key)
        body = [
            [
                r.scheme,
                r.axis,
                str(r.seed),
                format_number(r.min_secrecy),
                format_number(r.Rs_I),
                format_number(r.Rs_O),
                r.status.value,
                str(r.outer_iters),
                format_number(r.wall_ms),
            ]
            for r in ordered
        ]
        return self._write_rows(self._path(name, ".csv"), TABLE_HEADER, body)

    def write_aggregates(self, name: str, rows: Sequence[AggregateRow]) -> Path:
        body = [
            [r.scheme, r.axis, format_number(r.mean), format_number(r.stderr), str(r.count)]
            for r in rows
        ]
        header = ("scheme", "axis", "mean", "stderr", "count")
        return self._write_rows(self._path(name, ".csv"), header, body)

    def write_traces(self, name: str, traces: dict[str, Sequence[TraceRecord]]) -> Path:
        path = self._path(name, ".jsonl")
        try:
            with path.open("w") as fh:
                for label in sorted(traces):
                    for record in traces[label]:
                        line = {"run": label, **record.model_dump(mode="json")}
                        fh.write(json.dumps(line, sort_keys=True) + "\n")
        except OSError as e:
            raise ResultStoreError(f"Cannot write {path}: {e}") from e
        logger.info("Wrote traces for %d runs to %s", len(traces), path)
        return path

    def write_results(self, name: str, results: Sequence[SchemeResult]) -> Path:
        path = self._path(name, ".jsonl")
        ordered = sorted(results, key=lambda r: (r.scheme.value, r.P_max_dBm, r.seed))
        try:
            with path.open("w") as fh:
                for result in ordered:
                    fh.write(json.dumps(result.model_dump(mode="json"), sort_keys=True) + "\n")
        except OSError as e:
            raise ResultStoreError(f"Cannot write {path}: {e}") from e
        logger.info("Wrote %d run results to %s", len(ordered), path)
        return path

    def write_report(self, name: str, report: dict[str, Any]) -> Path:
        path = self._path(name, ".json")
        try:
            path.write_text(json.dumps(report, indent=2, sort_keys=True, default=str) + "\n")
        except OSError as e:
            raise ResultStoreError(f"Cannot write {path}: {e}") from e
        logger.info("Wrote report to %s", path)
        return path

    def write_plot(self, name: str, points: Sequence[tuple[str, str, float, float]]) -> Path:
        body = [[s, x, format_number(m), format_number(e)] for s, x, m, e in points]
        return self._write_rows(self._path(name, ".csv"), ("scheme", "x", "mean", "stderr"), body)
