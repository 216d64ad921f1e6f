"""Dependency injection container for starpsb."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from starpsb.config import StarPsbConfig
from starpsb.core.interfaces import ResultStorePort, SolverPort
from starpsb.runner import ExperimentRunner
from starpsb.schemes.registry import SchemeRegistry


@dataclass
class Container:
    """DI container holding all ports and adapters."""

    config: StarPsbConfig
    solver: SolverPort
    result_store: ResultStorePort
    registry: SchemeRegistry

    def runner(self, workers: int | None = None) -> ExperimentRunner:
        """Trial runner over this container's solver and registry."""
        return ExperimentRunner(
            self.solver,
            self.registry,
            workers=workers if workers is not None else self.config.workers,
        )

    @staticmethod
    def create_default(config: StarPsbConfig, out_dir: str | Path) -> Container:
        """Create a container with production adapters."""
        from starpsb.adapters.cvxpy_solver import CvxpySolver
        from starpsb.adapters.result_store import FileResultStore

        settings = config.solver
        solver = CvxpySolver(
            settings.name,
            fallback=settings.fallback,
            tolerance=settings.tolerance,
            max_iters=settings.max_iters,
            scs_max_iters=settings.scs_max_iters,
            dump_dir=settings.dump_dir,
        )
        return Container(
            config=config,
            solver=solver,
            result_store=FileResultStore(out_dir),
            registry=SchemeRegistry.default(),
        )

    @staticmethod
    def create_for_testing(
        config: StarPsbConfig | None = None,
        solver: SolverPort | None = None,
        result_store: ResultStorePort | None = None,
        registry: SchemeRegistry | None = None,
    ) -> Container:
        """Create a container with test/mock adapters.

        All parameters are optional. Provide mocks for the components
        you want to control in tests.
        """
        if config is None:
            config = StarPsbConfig()

        # Use stubs that raise if accidentally called without being mocked
        class StubSolver(SolverPort):
            def solve(self, problem: Any, name: str = "program") -> Any:
                raise NotImplementedError("Provide a mock solver")

        class StubResultStore(ResultStorePort):
            def write_table(self, name: str, rows: Sequence[Any]) -> Path:
                raise NotImplementedError("Provide a mock result_store")

            def write_aggregates(self, name: str, rows: Sequence[Any]) -> Path:
                raise NotImplementedError("Provide a mock result_store")

            def write_traces(self, name: str, traces: dict[str, Sequence[Any]]) -> Path:
                raise NotImplementedError("Provide a mock result_store")

            def write_results(self, name: str, results: Sequence[Any]) -> Path:
                raise NotImplementedError("Provide a mock result_store")

            def write_report(self, name: str, report: dict[str, Any]) -> Path:
                raise NotImplementedError("Provide a mock result_store")

            def write_plot(self, name: str, points: Sequence[Any]) -> Path:
                raise NotImplementedError("Provide a mock result_store")

        return Container(
            config=config,
            solver=solver or StubSolver(),
            result_store=result_store or StubResultStore(),
            registry=registry or SchemeRegistry.default(),
        )
