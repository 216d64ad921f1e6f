"""Closed-form projection of reference vectors onto feasible STAR-RIS coefficients.

Per element n, with a = u_t(n) and b = u_r(n), the coupled projection maximizes

    Re(conj(a)·√βt·e^{jθt}) + Re(conj(b)·√βr·e^{jθr})

over βt + βr = 1 and θr − θt ∈ {π/2, 3π/2}. The phase step and the four-case
amplitude step are alternated until the objective stalls. The alternation is
started both from the previous coefficients and from the exact per-branch
optimum (top eigenvector of a 2×2 Gram matrix restricted to the quadrant), and
the better end point is kept, so the result is the global maximum.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from starpsb.core.models import StarCoefficients, Surface, wrap_phase

logger = logging.getLogger(__name__)

HALF_PI = math.pi / 2
THREE_HALF_PI = 3 * math.pi / 2
ALTERNATION_TOL = 1e-10
ALTERNATION_MAX_ITERS = 100
PHASE_SWEEPS = 20


@dataclass(frozen=True)
class ProjectionScratch:
    """Intermediate rows of the last alternation pass."""

    v_t: np.ndarray
    v_r: np.ndarray
    psi_t: np.ndarray
    psi_r: np.ndarray
    p: np.ndarray
    q: np.ndarray


def element_objective(
    a: np.ndarray,
    b: np.ndarray,
    beta_t: np.ndarray,
    beta_r: np.ndarray,
    theta_t: np.ndarray,
    theta_r: np.ndarray,
) -> np.ndarray:
    """Per-element value of Re(conj(a)·ũ_t) + Re(conj(b)·ũ_r)."""
    return np.real(np.conj(a) * np.sqrt(beta_t) * np.exp(1j * theta_t)) + np.real(
        np.conj(b) * np.sqrt(beta_r) * np.exp(1j * theta_r)
    )


def phase_step(
    a: np.ndarray,
    b: np.ndarray,
    beta_t: np.ndarray,
    beta_r: np.ndarray,
    theta_t_prev: np.ndarray,
    theta_r_prev: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Optimal coupled phases for fixed amplitudes.

    Returns (θt, θr, v_t, v_r). Branch ties go to θr = θt + π/2; elements with
    v_t = v_r = 0 keep their previous phases.
    """
    v_t = np.conj(a) * np.sqrt(beta_t)
    v_r = np.conj(b) * np.sqrt(beta_r)
    plus = v_t + 1j * v_r
    minus = v_t - 1j * v_r
    use_plus = np.abs(plus) >= np.abs(minus)
    theta_t = np.where(use_plus, -np.angle(plus), -np.angle(minus))
    theta_r = theta_t + np.where(use_plus, HALF_PI, THREE_HALF_PI)
    stuck = (np.abs(plus) == 0) & (np.abs(minus) == 0)
    theta_t = np.where(stuck, theta_t_prev, theta_t)
    theta_r = np.where(stuck, theta_r_prev, theta_r)
    return wrap_phase(theta_t), wrap_phase(theta_r), v_t, v_r


def amplitude_step(
    p: np.ndarray,
    q: np.ndarray,
    beta_t_prev: np.ndarray,
    *,
    paper_faithful: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Maximize p·√βt + q·√βr over βt + βr = 1.

    In the case p ≤ 0, q ≤ 0 the better corner is taken, or both amplitudes are
    zeroed when `paper_faithful` is set. p = q = 0 keeps the previous amplitudes.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    beta_t = np.empty_like(p)
    beta_r = np.empty_like(p)

    only_t = (p > 0) & (q <= 0)
    only_r = (p <= 0) & (q > 0)
    both = (p > 0) & (q > 0)
    otherwise = ~(only_t | only_r | both)
    flat = otherwise & (p == 0) & (q == 0)
    corner = otherwise & ~flat

    beta_t[only_t] = 1.0
    beta_t[only_r] = 0.0
    denom = p[both] ** 2 + q[both] ** 2
    beta_t[both] = p[both] ** 2 / denom
    beta_t[flat] = beta_t_prev[flat]
    beta_t[corner] = np.where(p[corner] >= q[corner], 1.0, 0.0)
    beta_r[:] = 1.0 - beta_t

    if paper_faithful:
        beta_t[corner] = 0.0
        beta_r[corner] = 0.0
    return beta_t, beta_r


def _alternate(
    a: np.ndarray,
    b: np.ndarray,
    beta_t: np.ndarray,
    theta_t: np.ndarray,
    theta_r: np.ndarray,
    *,
    paper_faithful: bool,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, ProjectionScratch]:
    beta_t = beta_t.copy()
    beta_r = 1.0 - beta_t
    value = element_objective(a, b, beta_t, beta_r, theta_t, theta_r)
    scratch: ProjectionScratch | None = None
    for _ in range(ALTERNATION_MAX_ITERS):
        theta_t, theta_r, v_t, v_r = phase_step(a, b, beta_t, beta_r, theta_t, theta_r)
        psi_t = np.conj(a) * np.exp(1j * theta_t)
        psi_r = np.conj(b) * np.exp(1j * theta_r)
        p, q = np.real(psi_t), np.real(psi_r)
        new_t, new_r = amplitude_step(p, q, beta_t, paper_faithful=paper_faithful)
        zeroed = (new_t + new_r) == 0
        if np.any(zeroed):
            logger.debug("Amplitude step zeroed %d elements; keeping previous", int(zeroed.sum()))
            new_t = np.where(zeroed, beta_t, new_t)
        beta_t, beta_r = new_t, 1.0 - new_t
        scratch = ProjectionScratch(v_t=v_t, v_r=v_r, psi_t=psi_t, psi_r=psi_r, p=p, q=q)
        new_value = element_objective(a, b, beta_t, beta_r, theta_t, theta_r)
        improvement = float(np.max(new_value - value)) if value.size else 0.0
        value = new_value
        if improvement < ALTERNATION_TOL:
            break
    assert scratch is not None
    return beta_t, theta_t, theta_r, scratch


def coupled_optimum(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact per-element optimum (βt, θt, value) over both coupling branches."""
    best_beta, best_theta, best_value, _ = _coupled_optimum_with_branch(a, b)
    return best_beta, best_theta, best_value


def _coupled_optimum_with_branch(
    a: np.ndarray, b: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    c1 = np.conj(a)
    results = []
    for rot in (1j, -1j):
        c2 = rot * np.conj(b)
        A = np.abs(c1) ** 2
        C = np.abs(c2) ** 2
        r = np.real(c1 * np.conj(c2))
        phi = 0.5 * np.arctan2(2 * r, A - C)
        x_in, y_in = np.cos(phi), np.sin(phi)
        x_corner = np.where(A >= C, 1.0, 0.0)
        x = np.where(r >= 0, x_in, x_corner)
        y = np.where(r >= 0, y_in, 1.0 - x_corner)
        x, y = np.clip(x, 0.0, 1.0), np.clip(y, 0.0, 1.0)
        combo = x * c1 + y * c2
        results.append((x**2, -np.angle(combo), np.abs(combo)))
    (bt_p, tt_p, v_p), (bt_m, tt_m, v_m) = results
    plus = v_p >= v_m
    return (
        np.where(plus, bt_p, bt_m),
        np.where(plus, tt_p, tt_m),
        np.where(plus, v_p, v_m),
        plus,
    )


def best_relative_phase(u_t: np.ndarray, u_r: np.ndarray, grid: int) -> float:
    """Rotation φ ∈ [0, π) of u_r that maximizes the coupled projection objective.

    Reference vectors are only defined up to a per-surface phase; the coupling
    constraint sees their relative phase. A rotation by π swaps branches, so
    [0, π) covers every distinct case.
    """
    if grid <= 1:
        return 0.0
    best_phi, best_total = 0.0, -math.inf
    for k in range(grid):
        phi = math.pi * k / grid
        _, _, value = coupled_optimum(u_t, u_r * np.exp(1j * phi))
        total = float(np.sum(value))
        if total > best_total + 1e-12:
            best_phi, best_total = phi, total
    return best_phi


def project_coupled(
    u_t: np.ndarray,
    u_r: np.ndarray,
    previous: StarCoefficients | None = None,
    *,
    paper_faithful: bool = False,
) -> tuple[StarCoefficients, ProjectionScratch]:
    """Nearest exactly-coupled coefficients to the reference vectors."""
    a = np.asarray(u_t, dtype=complex)
    b = np.asarray(u_r, dtype=complex)
    n = a.shape[0]
    if previous is None:
        previous = StarCoefficients(
            beta_t=np.full(n, 0.5),
            beta_r=np.full(n, 0.5),
            theta_t=np.zeros(n),
            theta_r=np.full(n, HALF_PI),
        )

    bt_prev, tt_prev, tr_prev, scratch = _alternate(
        a, b, previous.beta_t, previous.theta_t, previous.theta_r, paper_faithful=paper_faithful
    )
    beta_t, theta_t, theta_r = bt_prev, tt_prev, tr_prev

    if not paper_faithful:
        bt0, tt0, _, plus = _coupled_optimum_with_branch(a, b)
        tr0 = tt0 + np.where(plus, HALF_PI, THREE_HALF_PI)
        bt_cf, tt_cf, tr_cf, scratch_cf = _alternate(
            a, b, bt0, wrap_phase(tt0), wrap_phase(tr0), paper_faithful=False
        )
        f_prev = element_objective(a, b, bt_prev, 1.0 - bt_prev, tt_prev, tr_prev)
        f_cf = element_objective(a, b, bt_cf, 1.0 - bt_cf, tt_cf, tr_cf)
        take_cf = f_cf >= f_prev - 1e-14
        beta_t = np.where(take_cf, bt_cf, bt_prev)
        theta_t = np.where(take_cf, tt_cf, tt_prev)
        theta_r = np.where(take_cf, tr_cf, tr_prev)
        scratch = scratch_cf if np.all(take_cf) else scratch

    flat = (np.abs(a) == 0) & (np.abs(b) == 0)
    beta_t = np.where(flat, previous.beta_t, beta_t)
    theta_t = np.where(flat, previous.theta_t, theta_t)
    theta_r = np.where(flat, previous.theta_r, theta_r)

    theta_t = wrap_phase(theta_t)
    coeffs = StarCoefficients(
        beta_t=beta_t,
        beta_r=1.0 - beta_t,
        theta_t=theta_t,
        theta_r=_coupled_partner(theta_t, theta_r),
        coupled=True,
    )
    return coeffs, scratch


def _coupled_partner(theta_t: np.ndarray, theta_r: np.ndarray) -> np.ndarray:
    """Snap θr to θt + π/2 or θt + 3π/2, whichever branch it is on."""
    offset = np.mod(theta_r - theta_t, 2 * math.pi)
    plus = np.abs(offset - HALF_PI) <= np.abs(offset - THREE_HALF_PI)
    return wrap_phase(theta_t + np.where(plus, HALF_PI, THREE_HALF_PI))


def project_independent(
    u_t: np.ndarray, u_r: np.ndarray, previous: StarCoefficients | None = None
) -> StarCoefficients:
    """Nearest coefficients with energy conservation only (phases unconstrained)."""
    a = np.asarray(u_t, dtype=complex)
    b = np.asarray(u_r, dtype=complex)
    n = a.shape[0]
    prev_bt = previous.beta_t if previous is not None else np.full(n, 0.5)
    prev_tt = previous.theta_t if previous is not None else np.zeros(n)
    prev_tr = previous.theta_r if previous is not None else np.zeros(n)

    mag_t, mag_r = np.abs(a), np.abs(b)
    norm = np.sqrt(mag_t**2 + mag_r**2)
    flat = norm == 0
    safe = np.where(flat, 1.0, norm)
    beta_t = np.where(flat, prev_bt, (mag_t / safe) ** 2)
    theta_t = np.where(mag_t > 0, np.angle(a), prev_tt)
    theta_r = np.where(mag_r > 0, np.angle(b), prev_tr)
    return StarCoefficients(
        beta_t=beta_t,
        beta_r=1.0 - beta_t,
        theta_t=wrap_phase(theta_t),
        theta_r=wrap_phase(theta_r),
        coupled=False,
    )


def project_fixed_amplitude(
    u_t: np.ndarray,
    u_r: np.ndarray,
    beta_t: np.ndarray,
    previous: StarCoefficients | None = None,
) -> StarCoefficients:
    """Phase-only projection for amplitude patterns fixed in advance (C-RIS, TS)."""
    a = np.asarray(u_t, dtype=complex)
    b = np.asarray(u_r, dtype=complex)
    n = a.shape[0]
    prev_tt = previous.theta_t if previous is not None else np.zeros(n)
    prev_tr = previous.theta_r if previous is not None else np.zeros(n)
    beta_t = np.asarray(beta_t, dtype=float)
    return StarCoefficients(
        beta_t=beta_t.copy(),
        beta_r=1.0 - beta_t,
        theta_t=wrap_phase(np.where(np.abs(a) > 0, np.angle(a), prev_tt)),
        theta_r=wrap_phase(np.where(np.abs(b) > 0, np.angle(b), prev_tr)),
        coupled=False,
    )


def projection_penalty(coeffs: StarCoefficients, targets: dict[Surface, np.ndarray]) -> float:
    """Σ_s ‖ũ_s ũ_sᴴ − X_s‖_F² against the per-surface targets X_s."""
    total = 0.0
    for s in Surface:
        u = coeffs.u(s)
        total += float(np.linalg.norm(np.outer(u, u.conj()) - targets[s], "fro") ** 2)
    return total


def refine_phases(
    coeffs: StarCoefficients,
    targets: dict[Surface, np.ndarray],
    sweeps: int = PHASE_SWEEPS,
) -> StarCoefficients:
    """Element-wise phase ascent on ũ_sᴴ X_s ũ_s with the amplitudes held fixed.

    ‖ũ_s‖ does not depend on the phases, so every update lowers
    `projection_penalty` or leaves it unchanged. The result is uncoupled.
    """
    theta = {Surface.T: coeffs.theta_t.copy(), Surface.R: coeffs.theta_r.copy()}
    for s in Surface:
        X = (targets[s] + targets[s].conj().T) / 2.0
        amp = np.abs(coeffs.u(s))
        u = coeffs.u(s).astype(complex)
        for _ in range(sweeps):
            moved = 0.0
            for n in np.flatnonzero(amp > 0):
                z = X[n] @ u - X[n, n] * u[n]
                if abs(z) == 0.0:
                    continue
                new = amp[n] * np.exp(1j * np.angle(z))
                moved = max(moved, abs(new - u[n]))
                u[n] = new
            if moved < ALTERNATION_TOL:
                break
        theta[s] = np.where(amp > 0, np.angle(u), theta[s])
    return StarCoefficients(
        beta_t=coeffs.beta_t.copy(),
        beta_r=coeffs.beta_r.copy(),
        theta_t=wrap_phase(theta[Surface.T]),
        theta_r=wrap_phase(theta[Surface.R]),
        coupled=False,
    )
