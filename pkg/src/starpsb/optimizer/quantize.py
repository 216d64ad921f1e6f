"""Nearest-point projection of STAR-RIS phases onto a uniform q-bit grid."""

from __future__ import annotations

import math

import numpy as np

from starpsb.core.errors import CouplingUnrepresentableError
from starpsb.core.models import TWO_PI, StarCoefficients, wrap_phase

HALF_PI = math.pi / 2
THREE_HALF_PI = 3 * math.pi / 2


def grid_step(q: int) -> float:
    if q < 1:
        raise ValueError(f"Quantization needs at least 1 bit, got {q}")
    return TWO_PI / 2**q


def _grid_index(theta: np.ndarray, q: int) -> np.ndarray:
    step = grid_step(q)
    return np.mod(np.round(np.asarray(theta, dtype=float) / step), 2**q).astype(np.int64)


def quantize_phase(theta: np.ndarray, q: int) -> np.ndarray:
    """Nearest grid point 2πk/2^q in circular distance."""
    return wrap_phase(_grid_index(theta, q) * grid_step(q))


def quantize_coupled(coeffs: StarCoefficients, q: int) -> StarCoefficients:
    """Quantize θt and rebuild θr on the input's coupling branch; amplitudes unchanged.

    Raises:
        CouplingUnrepresentableError: For q = 1, whose grid {0, π} has no π/2 offsets.
    """
    if not coeffs.coupled:
        return quantize_independent(coeffs, q)
    if q == 1:
        raise CouplingUnrepresentableError(
            "1-bit phase grid {0, π} cannot hold θr − θt ∈ {π/2, 3π/2}"
        )
    step = grid_step(q)
    levels = 2**q
    k_t = _grid_index(coeffs.theta_t, q)
    offset = coeffs.phase_offsets()
    plus = np.abs(offset - HALF_PI) <= np.abs(offset - THREE_HALF_PI)
    quarter = levels // 4
    k_r = np.mod(k_t + np.where(plus, quarter, 3 * quarter), levels)
    theta_t = wrap_phase(k_t * step)
    theta_r = wrap_phase(k_r * step)
    return StarCoefficients(
        beta_t=coeffs.beta_t.copy(),
        beta_r=coeffs.beta_r.copy(),
        theta_t=theta_t,
        theta_r=theta_r,
        coupled=True,
    )


def quantize_independent(coeffs: StarCoefficients, q: int) -> StarCoefficients:
    """Round θt and θr to the grid separately."""
    return StarCoefficients(
        beta_t=coeffs.beta_t.copy(),
        beta_r=coeffs.beta_r.copy(),
        theta_t=quantize_phase(coeffs.theta_t, q),
        theta_r=quantize_phase(coeffs.theta_r, q),
        coupled=False,
    )


def on_grid(theta: np.ndarray, q: int, tol: float = 1e-12) -> bool:
    """Whether every phase sits on the q-bit grid."""
    step = grid_step(q)
    ratio = np.asarray(theta, dtype=float) / step
    return bool(np.all(np.abs(ratio - np.round(ratio)) <= tol / step))
