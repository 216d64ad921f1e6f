"""Tests for core domain models."""

from __future__ import annotations

import math

import numpy as np
import pytest
from pydantic import ValidationError

from starpsb.core.errors import ChannelError
from starpsb.core.models import (
    BeamformingSolution,
    CascadeSet,
    ChannelSet,
    NetworkConfig,
    ResultRow,
    Side,
    SolveStatus,
    StarCoefficients,
    Surface,
    eavesdropper_surface,
    wrap_phase,
)


class TestSide:
    """Tests for Side and the side/surface mapping."""

    def test_other(self) -> None:
        assert Side.I.other is Side.O
        assert Side.O.other is Side.I

    def test_surface(self) -> None:
        assert Side.I.surface is Surface.T
        assert Side.O.surface is Surface.R

    def test_eavesdropper_surface(self) -> None:
        assert eavesdropper_surface(1) is Surface.T
        assert eavesdropper_surface(2) is Surface.R

    def test_unknown_eavesdropper(self) -> None:
        with pytest.raises(ValueError, match="Unknown eavesdropper"):
            eavesdropper_surface(3)


class TestSolveStatus:
    """Tests for SolveStatus.usable."""

    def test_usable(self) -> None:
        assert SolveStatus.OPTIMAL.usable
        assert SolveStatus.NEAR_OPTIMAL.usable
        assert SolveStatus.ITERATION_LIMIT.usable

    def test_not_usable(self) -> None:
        assert not SolveStatus.INFEASIBLE.usable
        assert not SolveStatus.UNBOUNDED.usable


class TestNetworkConfig:
    """Tests for NetworkConfig validation and JSON."""

    def test_defaults(self) -> None:
        config = NetworkConfig()
        assert config.M == 4
        assert config.N == 8
        assert config.pos_RIS == (50.0, 0.0, 0.0)

    def test_json_round_trip(self) -> None:
        config = NetworkConfig(M=3, N=6, rng_seed=42)
        assert NetworkConfig.from_json(config.to_json()) == config

    def test_wrong_side_indoor_user(self) -> None:
        with pytest.raises(ChannelError, match="IU must lie on the transmission side"):
            NetworkConfig(pos_IU=(50.0, -5.0, 0.0))

    def test_wrong_side_outdoor_eavesdropper(self) -> None:
        with pytest.raises(ChannelError, match="E2 must lie on the reflection side"):
            NetworkConfig(pos_E2=(50.0, 3.0, 0.0))

    def test_rejects_zero_antennas(self) -> None:
        with pytest.raises(ValidationError):
            NetworkConfig(M=0)

    def test_frozen(self) -> None:
        config = NetworkConfig()
        with pytest.raises(ValidationError):
            config.M = 5  # type: ignore[misc]


class TestChannelSet:
    """Tests for ChannelSet shape checks."""

    def test_shape_mismatch(self) -> None:
        G = np.ones((4, 2), dtype=complex)
        h = np.ones(4, dtype=complex)
        with pytest.raises(ChannelError, match="h_E2"):
            ChannelSet(G=G, h_I=h, h_O=h, h_E1=h, h_E2=np.ones(3, dtype=complex))

    def test_non_finite(self) -> None:
        G = np.ones((2, 1), dtype=complex)
        h = np.array([1.0, np.nan], dtype=complex)
        with pytest.raises(ChannelError, match="non-finite"):
            ChannelSet(G=G, h_I=h, h_O=h, h_E1=h, h_E2=h)

    def test_dimensions(self) -> None:
        G = np.ones((5, 3), dtype=complex)
        h = np.ones(5, dtype=complex)
        channels = ChannelSet(G=G, h_I=h, h_O=h, h_E1=h, h_E2=h)
        assert channels.N == 5
        assert channels.M == 3


class TestCascadeSet:
    """Tests for CascadeSet."""

    def test_scaled(self) -> None:
        V = np.ones((2, 3), dtype=complex)
        cascades = CascadeSet(V_I=V, V_O=2 * V, V_E1=V, V_E2=V)
        scaled = cascades.scaled(3.0)
        np.testing.assert_allclose(scaled.V_O, 6 * V)
        assert scaled.M == 2
        assert scaled.N == 3

    def test_shape_mismatch(self) -> None:
        with pytest.raises(ChannelError):
            CascadeSet(
                V_I=np.ones((2, 3)),
                V_O=np.ones((2, 3)),
                V_E1=np.ones((2, 2)),
                V_E2=np.ones((2, 3)),
            )


class TestStarCoefficients:
    """Tests for StarCoefficients invariants."""

    def test_valid_coupled(self) -> None:
        coeffs = StarCoefficients(
            beta_t=np.array([0.3, 1.0]),
            beta_r=np.array([0.7, 0.0]),
            theta_t=np.array([0.0, 1.0]),
            theta_r=np.array([math.pi / 2, 1.0 + 3 * math.pi / 2]),
        )
        assert coeffs.coupling_error() < 1e-12
        np.testing.assert_allclose(np.abs(coeffs.u_t) ** 2, [0.3, 1.0])

    def test_energy_violation(self) -> None:
        with pytest.raises(ValueError, match="Energy conservation"):
            StarCoefficients(
                beta_t=np.array([0.5]),
                beta_r=np.array([0.6]),
                theta_t=np.array([0.0]),
                theta_r=np.array([math.pi / 2]),
            )

    def test_coupling_violation(self) -> None:
        with pytest.raises(ValueError, match="Phase coupling"):
            StarCoefficients(
                beta_t=np.array([0.5]),
                beta_r=np.array([0.5]),
                theta_t=np.array([0.0]),
                theta_r=np.array([1.0]),
            )

    def test_uncoupled_allows_any_phase(self) -> None:
        coeffs = StarCoefficients(
            beta_t=np.array([0.5]),
            beta_r=np.array([0.5]),
            theta_t=np.array([0.0]),
            theta_r=np.array([1.0]),
            coupled=False,
        )
        assert coeffs.coupling_error() > 0.5

    def test_phase_range(self) -> None:
        with pytest.raises(ValueError, match=r"\[0, 2π\)"):
            StarCoefficients(
                beta_t=np.array([0.5]),
                beta_r=np.array([0.5]),
                theta_t=np.array([2 * math.pi]),
                theta_r=np.array([math.pi / 2]),
                coupled=False,
            )

    def test_phase_offsets(self) -> None:
        coeffs = StarCoefficients(
            beta_t=np.array([0.5]),
            beta_r=np.array([0.5]),
            theta_t=np.array([3 * math.pi / 2]),
            theta_r=np.array([0.0]),
        )
        np.testing.assert_allclose(coeffs.phase_offsets(), [math.pi / 2])


class TestWrapPhase:
    """Tests for wrap_phase."""

    def test_wraps_negative(self) -> None:
        np.testing.assert_allclose(wrap_phase(np.array([-math.pi / 2])), [3 * math.pi / 2])

    def test_stays_below_two_pi(self) -> None:
        wrapped = wrap_phase(np.array([2 * math.pi, -1e-18, 4 * math.pi]))
        assert np.all(wrapped >= 0)
        assert np.all(wrapped < 2 * math.pi)


class TestBeamformingSolution:
    """Tests for BeamformingSolution."""

    def test_from_vectors(self) -> None:
        beams = BeamformingSolution.from_vectors(np.array([1.0, 1j]), np.array([0.5, 0.0]))
        assert beams.total_power == pytest.approx(2.25)
        np.testing.assert_allclose(beams.W(Side.I), [[1, -1j], [1j, 1]])
        np.testing.assert_allclose(beams.w(Side.O), [0.5, 0.0])


class TestResultRow:
    """Tests for ResultRow ordering."""

    def test_sort_key(self) -> None:
        row = ResultRow(scheme="c-ris", axis="0", axis_index=3, seed=2)
        assert row.sort_key == ("c-ris", 3, 2)

    def test_axis_index_not_serialized(self) -> None:
        row = ResultRow(scheme="c-ris", axis="0", axis_index=3, seed=2)
        assert "axis_index" not in row.model_dump()
