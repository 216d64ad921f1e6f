"""Iterate state of the PSB loop and the quantities evaluated on it.

All matrices live in normalized units: cascades are scaled by sqrt(P_max/σ²)
so the noise power is 1 and the power budget Tr(W_I) + Tr(W_O) is 1.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from starpsb.config import PsbConfig
from starpsb.core.models import (
    EAVESDROPPERS,
    BeamformingSolution,
    CascadeSet,
    Side,
    StarCoefficients,
    Surface,
    TraceRecord,
    eavesdropper_surface,
    wrap_phase,
)
from starpsb.metrics import received_power
from starpsb.optimizer.surrogate import SurrogatePoints


def normalize_cascades(cascades: CascadeSet, p_max: float, sigma2: float) -> CascadeSet:
    """Cascades in units where the noise is 1 and the power budget is 1."""
    return cascades.scaled(math.sqrt(p_max / sigma2))


def outer(u: np.ndarray) -> np.ndarray:
    return np.outer(u, u.conj())


@dataclass
class PsbState:
    """Everything the outer and inner loops carry between steps."""

    W: dict[Side, np.ndarray]
    U: dict[Surface, np.ndarray]
    u_tilde: StarCoefficients
    lam: dict[Surface, np.ndarray]
    rho: float
    tau: float
    surrogates: SurrogatePoints = field(default_factory=SurrogatePoints)
    slacks: dict[str, float] = field(default_factory=dict)
    outer_iter: int = 0
    trace: list[TraceRecord] = field(default_factory=list)

    @property
    def W_I(self) -> np.ndarray:
        return self.W[Side.I]

    @property
    def W_O(self) -> np.ndarray:
        return self.W[Side.O]

    @property
    def U_t(self) -> np.ndarray:
        return self.U[Surface.T]

    @property
    def U_r(self) -> np.ndarray:
        return self.U[Surface.R]

    @property
    def u_tilde_t(self) -> np.ndarray:
        return self.u_tilde.u_t

    @property
    def u_tilde_r(self) -> np.ndarray:
        return self.u_tilde.u_r

    @property
    def lambda_t(self) -> np.ndarray:
        return self.lam[Surface.T]

    @property
    def lambda_r(self) -> np.ndarray:
        return self.lam[Surface.R]

    def coupling_gap(self, surface: Surface) -> np.ndarray:
        """ũũᴴ − U for one surface."""
        return outer(self.u_tilde.u(surface)) - self.U[surface]

    def violation(self) -> dict[Surface, float]:
        """Entrywise max |ũũᴴ − U| per surface."""
        return {s: float(np.max(np.abs(self.coupling_gap(s)))) for s in Surface}

    def penalty(self) -> float:
        """Σ ‖ũũᴴ − U + ρλ‖_F²."""
        return float(
            sum(
                np.linalg.norm(self.coupling_gap(s) + self.rho * self.lam[s], "fro") ** 2
                for s in Surface
            )
        )

    def secrecy_gap(self, cascades: CascadeSet, streams: Sequence[Side]) -> float:
        """min over active streams of R_ϱ − max_k R_Ek,ϱ at the relaxed (W, U)."""
        gaps = []
        for side in streams:
            V = cascades.legit(side)
            U = self.U[side.surface]
            signal = received_power(V, U, self.W[side])
            interference = received_power(V, U, self.W[side.other])
            legit = math.log2(1.0 + max(signal, 0.0) / (max(interference, 0.0) + 1.0))
            worst = -math.inf
            for k in EAVESDROPPERS:
                Ve = cascades.eve(k)
                Ue = self.U[eavesdropper_surface(k)]
                s_e = max(received_power(Ve, Ue, self.W[side]), 0.0)
                i_e = max(received_power(Ve, Ue, self.W[side.other]), 0.0)
                worst = max(worst, math.log2(1.0 + s_e / (i_e + 1.0)))
            gaps.append(legit - worst)
        return min(gaps)

    def objective(self, cascades: CascadeSet, streams: Sequence[Side]) -> float:
        """Augmented objective: secrecy gap minus (1/2ρ)·penalty."""
        return self.secrecy_gap(cascades, streams) - self.penalty() / (2.0 * self.rho)


@dataclass
class StepResult:
    """Objective and solver bookkeeping of one subproblem (possibly several solves)."""

    objective: float
    iterations: int
    statuses: list[str] = field(default_factory=list)
    floor_dropped: bool = False


def initial_state(
    cascades: CascadeSet,
    config: PsbConfig,
    *,
    seed: int,
    fixed_beta_t: np.ndarray | None = None,
    active_streams: Sequence[Side] = (Side.I, Side.O),
    initial: StarCoefficients | None = None,
    initial_beams: BeamformingSolution | None = None,
) -> PsbState:
    """Uniform random θt, θr = θt + π/2, equal split, isotropic W, zero duals.

    `initial` and `initial_beams` (normalized units) replace the random
    coefficients and the isotropic covariances.
    """
    rng = np.random.default_rng(seed)
    M, N = cascades.M, cascades.N
    theta_t = wrap_phase(rng.uniform(0.0, 2 * math.pi, N))
    theta_r = wrap_phase(theta_t + math.pi / 2)
    beta_t = np.full(N, 0.5)
    if initial is not None:
        if initial.N != N:
            raise ValueError(f"initial coefficients have N={initial.N}, expected {N}")
        beta_t, theta_t, theta_r = initial.beta_t.copy(), initial.theta_t, initial.theta_r
    coupled = config.coupled
    if fixed_beta_t is not None:
        beta_t = np.asarray(fixed_beta_t, dtype=float).copy()
        coupled = False
    u_tilde = StarCoefficients(
        beta_t=beta_t, beta_r=1.0 - beta_t, theta_t=theta_t, theta_r=theta_r, coupled=coupled
    )
    W = {
        side: (np.eye(M, dtype=complex) / (2 * M) if side in active_streams else _zeros(M))
        for side in Side
    }
    if initial_beams is not None:
        W = {
            side: (outer(initial_beams.w(side)) if side in active_streams else _zeros(M))
            for side in Side
        }
    state = PsbState(
        W=W,
        U={s: outer(u_tilde.u(s)) for s in Surface},
        u_tilde=u_tilde,
        lam={s: _zeros(N) for s in Surface},
        rho=config.rho0,
        tau=config.tau0,
    )
    refresh_surrogates(state, cascades, active_streams)
    return state


def _zeros(n: int) -> np.ndarray:
    return np.zeros((n, n), dtype=complex)


def refresh_surrogates(
    state: PsbState, cascades: CascadeSet, streams: Sequence[Side] = (Side.I, Side.O)
) -> None:
    """Re-linearize log2 at the current (W, U): y_ϱ = I_ϱ + 1, y_{k,ϱ} = S_k + I_k + 1."""
    points = SurrogatePoints()
    for side in streams:
        V = cascades.legit(side)
        U = state.U[side.surface]
        points.legit[side] = max(received_power(V, U, state.W[side.other]), 0.0) + 1.0
        for k in EAVESDROPPERS:
            Ve = cascades.eve(k)
            Ue = state.U[eavesdropper_surface(k)]
            total = received_power(Ve, Ue, state.W[side]) + received_power(
                Ve, Ue, state.W[side.other]
            )
            points.eve[(k, side)] = max(total, 0.0) + 1.0
    state.surrogates = points
