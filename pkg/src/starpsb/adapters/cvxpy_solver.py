"""cvxpy solver adapter: solver options, status mapping and program dumps."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

import cvxpy as cp
import numpy as np

from starpsb.core.errors import ConicSolverError, ResultStoreError
from starpsb.core.interfaces import SolverPort
from starpsb.core.models import SolveOutcome, SolveStatus

logger = logging.getLogger(__name__)

_STATUS_MAP = {
    cp.OPTIMAL: SolveStatus.OPTIMAL,
    cp.OPTIMAL_INACCURATE: SolveStatus.NEAR_OPTIMAL,
    cp.INFEASIBLE: SolveStatus.INFEASIBLE,
    cp.INFEASIBLE_INACCURATE: SolveStatus.INFEASIBLE,
    cp.UNBOUNDED: SolveStatus.UNBOUNDED,
    cp.UNBOUNDED_INACCURATE: SolveStatus.UNBOUNDED,
    cp.USER_LIMIT: SolveStatus.ITERATION_LIMIT,
    "infeasible_or_unbounded": SolveStatus.INFEASIBLE,
}


def solver_options(name: str, tolerance: float, max_iters: int, scs_max_iters: int) -> dict:
    """Map generic tolerance / iteration settings to solver keyword arguments."""
    if name == "CLARABEL":
        return {
            "tol_gap_abs": tolerance,
            "tol_gap_rel": tolerance,
            "tol_feas": tolerance,
            "max_iter": max_iters,
        }
    if name == "SCS":
        # first-order method: 1e-8 is out of reach, cap at 1e-6
        eps = max(tolerance, 1e-6)
        return {"eps_abs": eps, "eps_rel": eps, "max_iters": scs_max_iters}
    return {}


class CvxpySolver(SolverPort):
    """Solves cvxpy problems with a primary solver and an optional fallback."""

    def __init__(
        self,
        name: str = "CLARABEL",
        *,
        fallback: str | None = "SCS",
        tolerance: float = 1e-8,
        max_iters: int = 200,
        scs_max_iters: int = 20000,
        dump_dir: str | None = None,
    ) -> None:
        self.name = name.upper()
        self.fallback = fallback.upper() if fallback else None
        self.tolerance = tolerance
        self.max_iters = max_iters
        self.scs_max_iters = scs_max_iters
        self.dump_dir = Path(dump_dir).expanduser() if dump_dir else None
        self._dumps = 0

    def solve(self, problem: Any, name: str = "program") -> SolveOutcome:
        """Solve `problem` in place, retrying with the fallback solver on solver errors."""
        if self.dump_dir is not None:
            self.dump(problem, name)

        attempts = [self.name]
        if self.fallback and self.fallback != self.name:
            attempts.append(self.fallback)

        last_error: Exception | None = None
        for solver_name in attempts:
            options = solver_options(
                solver_name, self.tolerance, self.max_iters, self.scs_max_iters
            )
            try:
                problem.solve(solver=solver_name, **options)
            except cp.error.SolverError as e:
                logger.warning("%s failed on %s: %s", solver_name, name, e)
                last_error = e
                continue
            return self._outcome(problem, solver_name)

        raise ConicSolverError(f"No solver could handle {name}: {last_error}") from last_error

    @staticmethod
    def _outcome(problem: Any, solver_name: str) -> SolveOutcome:
        raw = str(problem.status)
        status = _STATUS_MAP.get(raw)
        if status is None:
            raise ConicSolverError(f"{solver_name} returned unknown status {raw!r}")
        if status is SolveStatus.NEAR_OPTIMAL:
            logger.warning("%s returned %s", solver_name, raw)
        stats = problem.solver_stats
        iterations = int(stats.num_iters) if stats and stats.num_iters is not None else 0
        objective = problem.value if status.usable else None
        return SolveOutcome(
            status=status,
            objective=None if objective is None else float(objective),
            iterations=iterations,
            solver=solver_name,
            raw_status=raw,
        )

    def dump(self, problem: Any, name: str) -> Path:
        """Write the SCS standard form (A as COO, b, c, cone sizes) of `problem` as JSON."""
        assert self.dump_dir is not None
        data, _, _ = problem.get_problem_data(cp.SCS)
        A = data["A"].tocoo()
        dims = data["dims"]
        document = {
            "name": name,
            "A": {
                "shape": list(A.shape),
                "row": A.row.tolist(),
                "col": A.col.tolist(),
                "data": A.data.tolist(),
            },
            "b": np.asarray(data["b"]).tolist(),
            "c": np.asarray(data["c"]).tolist(),
            "cones": {
                "z": int(getattr(dims, "zero", 0)),
                "l": int(getattr(dims, "nonneg", 0)),
                "q": [int(q) for q in getattr(dims, "soc", [])],
                "s": [int(s) for s in getattr(dims, "psd", [])],
                "ep": int(getattr(dims, "exp", 0)),
            },
        }
        path = self.dump_dir / f"{name}-{self._dumps:05d}.json"
        self._dumps += 1
        try:
            self.dump_dir.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(document))
        except OSError as e:
            raise ResultStoreError(f"Cannot write program dump {path}: {e}") from e
        logger.debug("Dumped %s to %s", name, path)
        return path
