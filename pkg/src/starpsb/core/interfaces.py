"""Port interfaces for starpsb (hexagonal architecture)."""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from starpsb.core.models import (
    AggregateRow,
    ResultRow,
    SchemeResult,
    SolveOutcome,
    TraceRecord,
)


class SolverPort(ABC):
    """Port for handing an assembled conic problem to a numerical solver."""

    @abstractmethod
    def solve(self, problem: Any, name: str = "program") -> SolveOutcome:
        """Solve a cvxpy problem in place.

        Args:
            problem: A `cvxpy.Problem`; variable values are populated on success.
            name: Label used in logs and program dumps.

        Returns:
            SolveOutcome with the mapped termination status.

        Raises:
            ConicSolverError: If no configured solver returns a status.
        """


class ResultStorePort(ABC):
    """Port for persisting study outputs."""

    @abstractmethod
    def write_table(self, name: str, rows: Sequence[ResultRow]) -> Path:
        """Write result rows as CSV and return the file path."""

    @abstractmethod
    def write_aggregates(self, name: str, rows: Sequence[AggregateRow]) -> Path:
        """Write per-cell means and standard errors as CSV."""

    @abstractmethod
    def write_traces(self, name: str, traces: dict[str, Sequence[TraceRecord]]) -> Path:
        """Write outer-iteration traces as JSON lines, one record per line.

        Args:
            name: File stem.
            traces: Mapping from run label (e.g. ``coupled-star/M4N8/seed3``) to its records.
        """

    @abstractmethod
    def write_results(self, name: str, results: Sequence[SchemeResult]) -> Path:
        """Write one JSON line per scheme run on one channel realization."""

    @abstractmethod
    def write_report(self, name: str, report: dict[str, Any]) -> Path:
        """Write a JSON report (audit outcome, study summary)."""

    @abstractmethod
    def write_plot(self, name: str, points: Sequence[tuple[str, str, float, float]]) -> Path:
        """Write plot data as CSV rows of (scheme, x, mean, stderr)."""
