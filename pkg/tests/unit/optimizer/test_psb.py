"""Tests for the PSB outer loop."""

from __future__ import annotations

import math
from unittest.mock import MagicMock

import numpy as np
import pytest

from starpsb.adapters.cvxpy_solver import CvxpySolver
from starpsb.config import PsbConfig
from starpsb.core.errors import ConicSolverError, CouplingUnrepresentableError
from starpsb.core.models import CascadeSet, NetworkConfig, SecrecyReport, Side, Surface
from starpsb.optimizer.psb import active_secrecy, project_reference, run_psb
from starpsb.optimizer.quantize import on_grid
from starpsb.optimizer.state import initial_state, outer


def _run(cascades: CascadeSet, network: NetworkConfig, config: PsbConfig, solver, **kwargs):
    return run_psb(
        config, cascades, p_max=network.P_max, sigma2=network.sigma2, solver=solver, **kwargs
    )


class TestActiveSecrecy:
    """Tests for active_secrecy()."""

    def test_min_over_streams(self) -> None:
        report = SecrecyReport(
            R_I=2.0,
            R_O=3.0,
            R_E1_I=0.5,
            R_E1_O=0.5,
            R_E2_I=0.5,
            R_E2_O=0.5,
            Rs_I=1.5,
            Rs_O=2.5,
            min_secrecy=1.5,
        )
        assert active_secrecy(report, (Side.I, Side.O)) == 1.5
        assert active_secrecy(report, (Side.O,)) == 2.5


class TestProjectReference:
    """Tests for project_reference()."""

    def test_projection_is_feasible(self, cascades: CascadeSet) -> None:
        config = PsbConfig(phase_alignment_grid=4)
        state = initial_state(cascades, config, seed=2)
        state.U = {s: state.U[s] + 0.05 * np.eye(4) for s in Surface}
        projected = project_reference(state, config)
        assert projected.coupling_error() < 1e-9
        np.testing.assert_allclose(projected.beta_t + projected.beta_r, 1.0, atol=1e-12)

    def test_uncoupled_projection(self, cascades: CascadeSet) -> None:
        config = PsbConfig(coupled=False)
        state = initial_state(cascades, config, seed=2)
        projected = project_reference(state, config)
        assert not projected.coupled
        for s in Surface:
            np.testing.assert_allclose(outer(projected.u(s)), state.U[s], atol=1e-8)

    def test_fixed_amplitudes_kept(self, cascades: CascadeSet) -> None:
        config = PsbConfig()
        beta = np.array([1.0, 0.0, 1.0, 0.0])
        state = initial_state(cascades, config, seed=0, fixed_beta_t=beta)
        projected = project_reference(state, config, beta)
        np.testing.assert_allclose(projected.beta_t, beta)


    @pytest.mark.parametrize("fixed", [None, np.array([1.0, 0.0, 1.0, 0.0])], ids=["free", "fixed"])
    def test_uncoupled_projection_never_raises_penalty(
        self, cascades: CascadeSet, fixed: np.ndarray | None
    ) -> None:
        config = PsbConfig(coupled=False)
        state = initial_state(cascades, config, seed=5, fixed_beta_t=fixed)
        rng = np.random.default_rng(5)
        for s in Surface:
            A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            state.U[s] = A @ A.conj().T / 4
            state.lam[s] = 0.1 * (A + A.conj().T)
        before = state.penalty()
        state.u_tilde = project_reference(state, config, fixed)
        assert state.penalty() <= before + 1e-12
        assert not state.u_tilde.coupled


class TestRunPsb:
    """Tests for run_psb()."""

    def test_feasible_output(
        self,
        cascades: CascadeSet,
        network: NetworkConfig,
        fast_psb: PsbConfig,
        solver: CvxpySolver,
    ) -> None:
        result = _run(cascades, network, fast_psb, solver, seed=1)
        assert result.failure is None
        assert result.coefficients.coupling_error() < 1e-9
        np.testing.assert_allclose(
            result.coefficients.beta_t + result.coefficients.beta_r, 1.0, atol=1e-12
        )
        assert result.beams.total_power <= network.P_max * (1 + 1e-6)
        assert result.min_secrecy >= 0.0
        assert len(result.trace) == result.outer_iters
        assert 1 <= result.outer_iters <= fast_psb.outer_max_iters
        assert set(result.rank_residuals) == {"W_I", "W_O", "U_t", "U_r"}

    def test_deterministic(
        self,
        cascades: CascadeSet,
        network: NetworkConfig,
        fast_psb: PsbConfig,
        solver: CvxpySolver,
    ) -> None:
        a = _run(cascades, network, fast_psb, solver, seed=4)
        b = _run(cascades, network, fast_psb, solver, seed=4)
        np.testing.assert_array_equal(a.coefficients.theta_t, b.coefficients.theta_t)
        assert a.min_secrecy == b.min_secrecy

    def test_quantized_output_on_grid(
        self,
        cascades: CascadeSet,
        network: NetworkConfig,
        fast_psb: PsbConfig,
        solver: CvxpySolver,
    ) -> None:
        config = fast_psb.model_copy(update={"q_bits": 3})
        result = _run(cascades, network, config, solver)
        assert on_grid(result.coefficients.theta_t, 3)
        assert on_grid(result.coefficients.theta_r, 3)
        assert result.coefficients.coupling_error() < 1e-9

    def test_one_bit_coupled_rejected(
        self, cascades: CascadeSet, network: NetworkConfig, fast_psb: PsbConfig
    ) -> None:
        config = fast_psb.model_copy(update={"q_bits": 1})
        with pytest.raises(CouplingUnrepresentableError):
            _run(cascades, network, config, MagicMock())

    def test_empty_streams_rejected(
        self, cascades: CascadeSet, network: NetworkConfig, fast_psb: PsbConfig
    ) -> None:
        with pytest.raises(ValueError, match="At least one stream"):
            _run(cascades, network, fast_psb, MagicMock(), active_streams=())

    @pytest.mark.parametrize(
        "beta", [np.ones(3), np.array([0.5, 0.5, 1.5, 0.0])], ids=["shape", "range"]
    )
    def test_bad_fixed_beta(
        self,
        cascades: CascadeSet,
        network: NetworkConfig,
        fast_psb: PsbConfig,
        beta: np.ndarray,
    ) -> None:
        with pytest.raises(ValueError, match="fixed_beta_t"):
            _run(cascades, network, fast_psb, MagicMock(), fixed_beta_t=beta)

    def test_single_stream_mode(
        self,
        cascades: CascadeSet,
        network: NetworkConfig,
        fast_psb: PsbConfig,
        solver: CvxpySolver,
    ) -> None:
        result = _run(
            cascades,
            network,
            fast_psb,
            solver,
            fixed_beta_t=np.ones(4),
            active_streams=(Side.I,),
        )
        assert not np.any(result.beams.w_O)
        np.testing.assert_allclose(result.coefficients.beta_r, 0.0)
        assert result.min_secrecy == result.report.Rs_I

    def test_solver_failure_returns_initial_iterate(
        self, cascades: CascadeSet, network: NetworkConfig, fast_psb: PsbConfig
    ) -> None:
        solver = MagicMock()
        solver.solve.side_effect = ConicSolverError("solver crashed")
        result = _run(cascades, network, fast_psb, solver)
        assert result.failure is not None
        assert "solver crashed" in result.failure
        assert result.outer_iters == 0
        assert result.trace == []
        assert not result.converged
        assert math.isfinite(result.min_secrecy)

    def test_warm_start_never_ends_below_start(
        self,
        cascades: CascadeSet,
        network: NetworkConfig,
        fast_psb: PsbConfig,
        solver: CvxpySolver,
    ) -> None:
        coupled = _run(cascades, network, fast_psb, solver, seed=2)
        config = fast_psb.model_copy(update={"coupled": False})
        warm = _run(
            cascades,
            network,
            config,
            solver,
            initial=coupled.coefficients,
            initial_beams=coupled.beams,
        )
        assert not warm.coefficients.coupled
        assert warm.min_secrecy >= coupled.min_secrecy - 1e-6

    def test_warm_start_kept_when_solver_fails(
        self,
        cascades: CascadeSet,
        network: NetworkConfig,
        fast_psb: PsbConfig,
        solver: CvxpySolver,
    ) -> None:
        coupled = _run(cascades, network, fast_psb, solver, seed=2)
        failing = MagicMock()
        failing.solve.side_effect = ConicSolverError("solver crashed")
        config = fast_psb.model_copy(update={"coupled": False})
        warm = _run(
            cascades,
            network,
            config,
            failing,
            initial=coupled.coefficients,
            initial_beams=coupled.beams,
        )
        assert warm.outer_iters == 0
        assert warm.min_secrecy == pytest.approx(coupled.min_secrecy, abs=1e-9)
