"""Conic program construction on top of cvxpy.

Complex Hermitian PSD variables are carried as real symmetric blocks
Z = [[X_re, -X_im], [X_im, X_re]] ⪰ 0 so that any solver with a real PSD
cone can be used. 2^x ≤ a is posed as an exponential cone and squared norms
as second-order-cone epigraphs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any

import cvxpy as cp
import numpy as np

from starpsb.core.errors import ConicSolverError, InfeasibleSubproblemError, ProgramError
from starpsb.core.interfaces import SolverPort
from starpsb.core.models import SolveOutcome, SolveStatus

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)


@dataclass(frozen=True)
class HermitianVariable:
    """Handle on a complex Hermitian PSD matrix embedded as a 2n×2n real block."""

    name: str
    dim: int
    Z: cp.Variable

    @property
    def re(self) -> cp.Expression:
        return self.Z[: self.dim, : self.dim]

    @property
    def im(self) -> cp.Expression:
        return self.Z[self.dim :, : self.dim]

    def trace(self) -> cp.Expression:
        return cp.trace(self.re)

    def diag(self) -> cp.Expression:
        """Real diagonal (the imaginary diagonal is pinned to zero by the embedding)."""
        return cp.diag(self.re)

    def real_trace(self, A: np.ndarray) -> cp.Expression:
        """Re Tr(X·A) as a linear expression."""
        A = np.asarray(A, dtype=complex)
        return cp.sum(cp.multiply(self.re, A.real.T)) - cp.sum(cp.multiply(self.im, A.imag.T))

    def residual(self, target: np.ndarray) -> cp.Expression:
        """Real vector whose squared norm is ‖target − X‖_F²."""
        n = self.dim
        target = np.asarray(target, dtype=complex)
        return cp.hstack(
            [
                cp.reshape(target.real - self.re, (n * n,), order="F"),
                cp.reshape(target.imag - self.im, (n * n,), order="F"),
            ]
        )

    def value(self) -> np.ndarray:
        """Recovered complex matrix, symmetrized."""
        if self.Z.value is None:
            raise ProgramError(f"Variable {self.name!r} has no value; solve the program first")
        return recover_hermitian(np.asarray(self.Z.value), self.dim)


def recover_hermitian(Z: np.ndarray, dim: int) -> np.ndarray:
    X = Z[:dim, :dim] + 1j * Z[dim:, :dim]
    return (X + X.conj().T) / 2.0


@dataclass(frozen=True)
class ConicSolution:
    """Outcome of one conic solve: status, objective and primal values."""

    status: SolveStatus
    objective: float | None
    values: dict[str, Any]
    primal_residual: float
    iterations: int = 0
    solver: str = ""

    def value(self, name: str) -> Any:
        try:
            return self.values[name]
        except KeyError as e:
            raise ProgramError(f"No value recorded for variable {name!r}") from e

    def raise_for_status(self, name: str) -> None:
        """Raise unless primal values can be consumed.

        Raises:
            InfeasibleSubproblemError: If the solver certified infeasibility.
            ConicSolverError: For unbounded or otherwise unusable outcomes.
        """
        if self.status is SolveStatus.INFEASIBLE:
            raise InfeasibleSubproblemError(f"{name} is infeasible")
        if not self.status.usable:
            raise ConicSolverError(f"{name} ended with status {self.status.value}")


@dataclass
class ConicProgram:
    """Single-owner builder for a conic program.

    Variables must be registered through the `add_*` methods; constraints that
    reference anything else are rejected.
    """

    name: str = "program"
    _scalars: dict[str, cp.Variable] = field(default_factory=dict)
    _hermitian: dict[str, HermitianVariable] = field(default_factory=dict)
    _constraints: list[cp.Constraint] = field(default_factory=list)
    _objective: cp.Expression | float = 0.0
    _maximize: bool = True

    @property
    def constraints(self) -> list[cp.Constraint]:
        return list(self._constraints)

    @property
    def variable_names(self) -> list[str]:
        return [*self._scalars, *self._hermitian]

    def _register_name(self, name: str) -> None:
        if name in self._scalars or name in self._hermitian:
            raise ProgramError(f"Variable {name!r} already registered in {self.name}")

    def add_scalar(self, name: str, *, nonneg: bool = False) -> cp.Variable:
        self._register_name(name)
        var = cp.Variable(name=name, nonneg=nonneg)
        self._scalars[name] = var
        return var

    def add_vector(self, name: str, size: int, *, nonneg: bool = False) -> cp.Variable:
        if size < 1:
            raise ProgramError(f"Vector {name!r} needs a positive size, got {size}")
        self._register_name(name)
        var = cp.Variable(size, name=name, nonneg=nonneg)
        self._scalars[name] = var
        return var

    def add_hermitian_psd(self, name: str, dim: int) -> HermitianVariable:
        """Register a complex Hermitian PSD matrix of size `dim`."""
        if dim < 1:
            raise ProgramError(f"Hermitian variable {name!r} needs dim >= 1, got {dim}")
        self._register_name(name)
        Z = cp.Variable((2 * dim, 2 * dim), PSD=True, name=name)
        handle = HermitianVariable(name=name, dim=dim, Z=Z)
        self._hermitian[name] = handle
        self._constraints += [
            Z[:dim, :dim] == Z[dim:, dim:],
            Z[:dim, dim:] == -Z[dim:, :dim],
        ]
        return handle

    def add_constraint(self, *constraints: cp.Constraint) -> None:
        known = {v.id for v in self._scalars.values()} | {
            h.Z.id for h in self._hermitian.values()
        }
        for c in constraints:
            for var in c.variables():
                if var.id not in known:
                    raise ProgramError(
                        f"Constraint references unregistered variable {var.name()!r}"
                    )
            self._constraints.append(c)

    def add_pow2_leq_affine(self, x: cp.Expression, rhs: cp.Expression) -> None:
        """2^x ≤ rhs, i.e. exp(x·ln2) ≤ rhs."""
        self.add_constraint(cp.exp(LN2 * x) <= rhs)

    def add_square_epigraph(self, x: cp.Expression, t: cp.Expression) -> None:
        """‖x‖² ≤ t via ‖(2x, t − 1)‖ ≤ t + 1."""
        tail = cp.reshape(t - 1, (1,), order="F")
        self.add_constraint(cp.SOC(t + 1, cp.hstack([2 * x, tail])))

    def maximize(self, objective: cp.Expression | float) -> None:
        self._objective = objective
        self._maximize = True

    def minimize(self, objective: cp.Expression | float) -> None:
        self._objective = objective
        self._maximize = False

    def to_problem(self) -> cp.Problem:
        sense = cp.Maximize if self._maximize else cp.Minimize
        return cp.Problem(sense(self._objective), self._constraints)

    def solve(self, solver: SolverPort) -> ConicSolution:
        return solve(self, solver)


def solve(program: ConicProgram, solver: SolverPort) -> ConicSolution:
    """Hand the program to `solver` and collect primal values.

    Infeasible and unbounded outcomes are returned as statuses, never raised.
    """
    problem = program.to_problem()
    if not problem.variables():
        value = float(problem.objective.value)
        return ConicSolution(
            status=SolveStatus.OPTIMAL, objective=value, values={}, primal_residual=0.0
        )

    outcome: SolveOutcome = solver.solve(problem, program.name)
    values: dict[str, Any] = {}
    residual = math.inf
    if outcome.status.usable:
        for name, var in program._scalars.items():
            values[name] = None if var.value is None else np.asarray(var.value, dtype=float)
        for name, handle in program._hermitian.items():
            values[name] = None if handle.Z.value is None else handle.value()
        residual = _primal_residual(program.constraints)

    logger.debug(
        "%s: %s objective=%s iterations=%d residual=%.2e",
        program.name,
        outcome.status.value,
        outcome.objective,
        outcome.iterations,
        residual,
    )
    return ConicSolution(
        status=outcome.status,
        objective=outcome.objective,
        values=values,
        primal_residual=residual,
        iterations=outcome.iterations,
        solver=outcome.solver,
    )


def _primal_residual(constraints: list[cp.Constraint]) -> float:
    worst = 0.0
    for c in constraints:
        try:
            violation = c.violation()
        except (ValueError, TypeError):
            continue
        if violation is None:
            continue
        worst = max(worst, float(np.max(np.atleast_1d(violation))))
    return worst
