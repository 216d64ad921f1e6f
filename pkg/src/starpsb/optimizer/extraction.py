"""Dominant-eigenpair helpers shared by the beamforming and coefficient steps."""

from __future__ import annotations

import logging

import numpy as np
from scipy.linalg import eigh

logger = logging.getLogger(__name__)

# Eigenvalues in (-EIG_CLAMP, 0) are solver noise.
EIG_CLAMP = 1e-9


def hermitian_part(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=complex)
    return (X + X.conj().T) / 2.0


def _eigh_desc(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    values, vectors = eigh(hermitian_part(X))
    values = np.where((values < 0) & (values > -EIG_CLAMP), 0.0, values)
    return values[::-1], vectors[:, ::-1]


def _normalize_phase(v: np.ndarray) -> np.ndarray:
    """Rotate so the first nonzero entry is real and nonnegative."""
    nonzero = np.flatnonzero(np.abs(v) > 1e-12)
    if nonzero.size == 0:
        return v
    return v * np.exp(-1j * np.angle(v[nonzero[0]]))


def rank_one_residual(X: np.ndarray) -> float:
    """λ₂/λ₁ of the Hermitian part of X; 0 for a zero or scalar matrix."""
    values, _ = _eigh_desc(X)
    if values.size < 2 or values[0] <= 0:
        return 0.0
    return float(max(values[1], 0.0) / values[0])


def trace_gap(X: np.ndarray) -> float:
    """Tr(X) − ‖X‖₂, zero exactly when X is PSD of rank at most one."""
    values, _ = _eigh_desc(X)
    return float(np.sum(values) - values[0])


def dominant_eigenvector(X: np.ndarray) -> np.ndarray:
    """Unit-norm eigenvector of the largest eigenvalue."""
    _, vectors = _eigh_desc(X)
    return _normalize_phase(vectors[:, 0])


def extract_rank_one(X: np.ndarray) -> np.ndarray:
    """sqrt(λ₁)·v₁ of a PSD matrix, phase-normalized; zero matrix gives a zero vector."""
    values, vectors = _eigh_desc(X)
    if values[0] <= 0:
        return np.zeros(X.shape[0], dtype=complex)
    residual = float(max(values[1], 0.0) / values[0]) if values.size > 1 else 0.0
    logger.debug("Rank-one extraction: lambda2/lambda1=%.3e", residual)
    return np.sqrt(values[0]) * _normalize_phase(vectors[:, 0])


def reference_target(
    U: np.ndarray, rho: float, lam: np.ndarray, *, dual_shift: bool = True
) -> np.ndarray:
    """U − ρλ, or U alone when `dual_shift` is off."""
    return U - rho * lam if dual_shift else U


def reference_vector(
    U: np.ndarray, rho: float, lam: np.ndarray, *, dual_shift: bool = True
) -> np.ndarray:
    """sqrt(max(λ₁, 0))·v₁ of `reference_target`."""
    values, vectors = _eigh_desc(reference_target(U, rho, lam, dual_shift=dual_shift))
    return np.sqrt(max(values[0], 0.0)) * _normalize_phase(vectors[:, 0])
