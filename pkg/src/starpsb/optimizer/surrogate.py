"""Slack-variable rate constraints with the tangent upper bound on log2.

For each active stream ϱ the lower bound on its rate and the upper bounds on
both eavesdroppers' rates are posed as

    2^{l_n} ≤ S + I + 1,   μ ≥ I + 1,   l_d ≥ H(μ, y_ϱ)
    2^{e_d} ≤ I_k + 1,     ν ≥ S_k + I_k + 1,   e_n ≥ H(ν, y_k)

with H(x, y) = log2 y + (x − y)/(y ln 2) ≥ log2 x. Powers are in units of the
noise power. S, I are traces linear in whichever block (W or U) is variable.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from starpsb.conic import LN2, ConicProgram, HermitianVariable
from starpsb.core.errors import ProgramError, SurrogateError
from starpsb.core.models import EAVESDROPPERS, CascadeSet, Side, Surface, eavesdropper_surface


def log2_upper_bound(x: cp.Expression | float, y: float) -> cp.Expression | float:
    """Tangent of log2 at y evaluated at x; never below log2(x)."""
    if not y > 0 or not math.isfinite(y):
        raise SurrogateError(f"Linearization point must be positive and finite, got {y}")
    return math.log2(y) + (x - y) / (y * LN2)


@dataclass
class SurrogatePoints:
    """Linearization points y_ϱ (legitimate) and y_{k,ϱ} (eavesdropper k)."""

    legit: dict[Side, float] = field(default_factory=dict)
    eve: dict[tuple[int, Side], float] = field(default_factory=dict)

    def validate(self) -> None:
        for key, y in [*self.legit.items(), *self.eve.items()]:
            if not y > 0 or not math.isfinite(y):
                raise SurrogateError(f"Surrogate point {key} must be positive, got {y}")


@dataclass(frozen=True)
class ActiveBlock:
    """Which of W or U is variable in the current subproblem; the other is fixed."""

    cascades: CascadeSet
    W: Mapping[Side, HermitianVariable | np.ndarray]
    U: Mapping[Surface, HermitianVariable | np.ndarray]

    def gain(self, V: np.ndarray, surface: Surface, stream: Side) -> cp.Expression:
        """Received power of `stream` through cascade V: Re Tr(W·V·U·Vᴴ)."""
        W = self.W[stream]
        U = self.U[surface]
        if isinstance(W, HermitianVariable) and isinstance(U, HermitianVariable):
            raise ProgramError("W and U cannot both be variable in one subproblem")
        if isinstance(W, HermitianVariable):
            return W.real_trace(V @ U @ V.conj().T)
        if isinstance(U, HermitianVariable):
            return U.real_trace(V.conj().T @ W @ V)
        return cp.Constant(float(np.real(np.trace(W @ V @ U @ V.conj().T))))


@dataclass(frozen=True)
class RateSlacks:
    """Slack variables of one stream."""

    side: Side
    l_n: cp.Variable
    l_d: cp.Variable
    mu: cp.Variable
    e_n: dict[int, cp.Variable]
    e_d: dict[int, cp.Variable]
    nu: dict[int, cp.Variable]
    eve_max: cp.Variable

    @property
    def lower(self) -> cp.Expression:
        """Lower bound on the stream's rate."""
        return self.l_n - self.l_d

    def eve_upper(self, k: int) -> cp.Expression:
        return self.e_n[k] - self.e_d[k]

    def values(self) -> dict[str, float]:
        out = {
            "l_n": _val(self.l_n),
            "l_d": _val(self.l_d),
            "mu": _val(self.mu),
            "eve_max": _val(self.eve_max),
        }
        for k in EAVESDROPPERS:
            out[f"e_n_{k}"] = _val(self.e_n[k])
            out[f"e_d_{k}"] = _val(self.e_d[k])
            out[f"nu_{k}"] = _val(self.nu[k])
        return {f"{name}_{self.side.value}": v for name, v in out.items()}

    def surrogate_updates(self) -> tuple[float, dict[int, float]]:
        """New linearization points y_ϱ ← μ, y_{k,ϱ} ← ν."""
        return _val(self.mu), {k: _val(self.nu[k]) for k in EAVESDROPPERS}


def _val(var: cp.Variable) -> float:
    if var.value is None:
        raise ProgramError(f"Slack {var.name()} has no value")
    return float(np.asarray(var.value))


def build_rate_surrogate_constraints(
    program: ConicProgram,
    block: ActiveBlock,
    points: SurrogatePoints,
    streams: Iterable[Side],
    *,
    enforce_floor: bool = True,
) -> dict[Side, RateSlacks]:
    """Add the rate constraints of every active stream to `program`.

    With `enforce_floor` the rate lower bound must dominate the worst
    eavesdropper bound.

    Raises:
        SurrogateError: If a linearization point is not strictly positive.
    """
    points.validate()
    cascades = block.cascades
    slacks: dict[Side, RateSlacks] = {}
    for side in streams:
        tag = side.value
        V = cascades.legit(side)
        signal = block.gain(V, side.surface, side)
        interference = block.gain(V, side.surface, side.other)

        l_n = program.add_scalar(f"l_n_{tag}")
        l_d = program.add_scalar(f"l_d_{tag}")
        mu = program.add_scalar(f"mu_{tag}")
        eve_max = program.add_scalar(f"eve_max_{tag}")
        program.add_pow2_leq_affine(l_n, signal + interference + 1.0)
        program.add_constraint(mu >= interference + 1.0)
        program.add_constraint(l_d >= log2_upper_bound(mu, points.legit[side]))

        e_n: dict[int, cp.Variable] = {}
        e_d: dict[int, cp.Variable] = {}
        nu: dict[int, cp.Variable] = {}
        for k in EAVESDROPPERS:
            Ve = cascades.eve(k)
            surface = eavesdropper_surface(k)
            eve_signal = block.gain(Ve, surface, side)
            eve_interference = block.gain(Ve, surface, side.other)
            e_n[k] = program.add_scalar(f"e_n_{k}_{tag}")
            e_d[k] = program.add_scalar(f"e_d_{k}_{tag}")
            nu[k] = program.add_scalar(f"nu_{k}_{tag}")
            program.add_pow2_leq_affine(e_d[k], eve_interference + 1.0)
            program.add_constraint(nu[k] >= eve_signal + eve_interference + 1.0)
            program.add_constraint(e_n[k] >= log2_upper_bound(nu[k], points.eve[(k, side)]))
            program.add_constraint(eve_max >= e_n[k] - e_d[k])

        if enforce_floor:
            program.add_constraint(l_n - l_d >= eve_max)

        slacks[side] = RateSlacks(
            side=side, l_n=l_n, l_d=l_d, mu=mu, e_n=e_n, e_d=e_d, nu=nu, eve_max=eve_max
        )
    return slacks
