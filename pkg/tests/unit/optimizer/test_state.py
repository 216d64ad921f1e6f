"""Tests for the PSB iterate state."""

from __future__ import annotations

import math

import numpy as np
import pytest

from starpsb.config import PsbConfig
from starpsb.core.models import BeamformingSolution, CascadeSet, Side, Surface
from starpsb.optimizer.state import (
    initial_state,
    normalize_cascades,
    outer,
    refresh_surrogates,
)
from tests.conftest import make_coefficients


class TestNormalizeCascades:
    """Tests for normalize_cascades()."""

    def test_scale(self, cascades: CascadeSet) -> None:
        normalized = normalize_cascades(cascades, 1e-3, 1e-13)
        np.testing.assert_allclose(normalized.V_O, cascades.V_O * 1e5)


class TestInitialState:
    """Tests for initial_state()."""

    def test_feasible_start(self, cascades: CascadeSet) -> None:
        state = initial_state(cascades, PsbConfig(), seed=3)
        assert state.u_tilde.coupled
        np.testing.assert_allclose(state.u_tilde.beta_t, 0.5)
        np.testing.assert_allclose(state.u_tilde.phase_offsets(), math.pi / 2, atol=1e-12)
        assert np.real(np.trace(state.W_I) + np.trace(state.W_O)) == pytest.approx(1.0)
        np.testing.assert_allclose(state.U_t, outer(state.u_tilde_t))
        assert state.rho == 1.0
        assert state.tau == 0.01
        assert not np.any(state.lambda_t)

    def test_zero_violation_at_start(self, cascades: CascadeSet) -> None:
        state = initial_state(cascades, PsbConfig(), seed=0)
        assert max(state.violation().values()) == pytest.approx(0.0, abs=1e-15)
        assert state.penalty() == pytest.approx(0.0, abs=1e-15)

    def test_seeded(self, cascades: CascadeSet) -> None:
        a = initial_state(cascades, PsbConfig(), seed=5)
        b = initial_state(cascades, PsbConfig(), seed=5)
        np.testing.assert_array_equal(a.u_tilde.theta_t, b.u_tilde.theta_t)

    def test_fixed_amplitudes(self, cascades: CascadeSet) -> None:
        beta = np.array([1.0, 1.0, 0.0, 0.0])
        state = initial_state(cascades, PsbConfig(), seed=0, fixed_beta_t=beta)
        assert not state.u_tilde.coupled
        np.testing.assert_allclose(np.real(np.diag(state.U_r)), 1.0 - beta)

    def test_inactive_stream_gets_no_power(self, cascades: CascadeSet) -> None:
        state = initial_state(cascades, PsbConfig(), seed=0, active_streams=(Side.I,))
        assert not np.any(state.W_O)
        assert Side.O not in state.surrogates.legit

    def test_uncoupled_config(self, cascades: CascadeSet) -> None:
        state = initial_state(cascades, PsbConfig(coupled=False), seed=0)
        assert not state.u_tilde.coupled

    def test_starting_point(self, cascades: CascadeSet) -> None:
        start = make_coefficients(4, seed=6)
        beams = BeamformingSolution.from_vectors(np.array([0.6, 0.0j]), np.array([0.0, 0.8j]))
        state = initial_state(
            cascades, PsbConfig(coupled=False), seed=0, initial=start, initial_beams=beams
        )
        assert not state.u_tilde.coupled
        np.testing.assert_allclose(state.u_tilde.theta_t, start.theta_t)
        np.testing.assert_allclose(state.U_r, outer(start.u_r))
        np.testing.assert_allclose(state.W_O, outer(beams.w_O))
        assert max(state.violation().values()) == 0.0

    def test_starting_point_wrong_size(self, cascades: CascadeSet) -> None:
        with pytest.raises(ValueError, match="initial coefficients"):
            initial_state(cascades, PsbConfig(), seed=0, initial=make_coefficients(3))


class TestStateQuantities:
    """Tests for penalty, violation and the augmented objective."""

    def test_violation_and_penalty(self, cascades: CascadeSet) -> None:
        state = initial_state(cascades, PsbConfig(), seed=0)
        state.U[Surface.T] = state.U[Surface.T] + 0.1 * np.eye(4)
        assert state.violation()[Surface.T] == pytest.approx(0.1)
        assert state.violation()[Surface.R] == pytest.approx(0.0, abs=1e-15)
        assert state.penalty() == pytest.approx(4 * 0.01)

    def test_penalty_includes_dual(self, cascades: CascadeSet) -> None:
        state = initial_state(cascades, PsbConfig(), seed=0)
        state.lam[Surface.R] = np.eye(4, dtype=complex)
        state.rho = 0.5
        assert state.penalty() == pytest.approx(4 * 0.25)

    def test_objective_subtracts_penalty(self, cascades: CascadeSet) -> None:
        normalized = normalize_cascades(cascades, 10 ** (-3.5), 10 ** (-13.5))
        state = initial_state(normalized, PsbConfig(), seed=0)
        gap = state.secrecy_gap(normalized, (Side.I, Side.O))
        state.U[Surface.T] = state.U[Surface.T] + 0.1 * np.eye(4)
        state.rho = 2.0
        shifted_gap = state.secrecy_gap(normalized, (Side.I, Side.O))
        assert state.objective(normalized, (Side.I, Side.O)) == pytest.approx(
            shifted_gap - 0.04 / 4.0
        )
        assert math.isfinite(gap)


class TestRefreshSurrogates:
    """Tests for refresh_surrogates()."""

    def test_points_are_interference_plus_one(self, cascades: CascadeSet) -> None:
        normalized = normalize_cascades(cascades, 10 ** (-3.5), 10 ** (-13.5))
        state = initial_state(normalized, PsbConfig(), seed=0)
        refresh_surrogates(state, normalized)
        V = normalized.V_I
        expected = np.real(np.trace(state.W_O @ V @ state.U_t @ V.conj().T)) + 1.0
        assert state.surrogates.legit[Side.I] == pytest.approx(expected)
        assert all(y >= 1.0 for y in state.surrogates.eve.values())
        assert len(state.surrogates.eve) == 4
