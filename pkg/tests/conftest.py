"""Shared test fixtures for starpsb."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Any
from unittest.mock import MagicMock

import numpy as np
import pytest

from starpsb.adapters.cvxpy_solver import CvxpySolver
from starpsb.channels import build_cascades, generate_channels
from starpsb.config import PsbConfig, StarPsbConfig
from starpsb.container import Container
from starpsb.core.interfaces import ResultStorePort
from starpsb.core.models import (
    CascadeSet,
    ChannelSet,
    NetworkConfig,
    ResultRow,
    RowStatus,
    StarCoefficients,
    wrap_phase,
)


@pytest.fixture()
def network() -> NetworkConfig:
    """Small scene: 2 BS antennas, 4 elements."""
    return NetworkConfig(M=2, N=4, rng_seed=7)


@pytest.fixture()
def channels(network: NetworkConfig) -> ChannelSet:
    return generate_channels(network)


@pytest.fixture()
def cascades(channels: ChannelSet) -> CascadeSet:
    return build_cascades(channels)


@pytest.fixture(scope="session")
def solver() -> CvxpySolver:
    """Real Clarabel-backed solver."""
    return CvxpySolver()


@pytest.fixture()
def fast_psb() -> PsbConfig:
    """PSB knobs capped for sub-second unit runs."""
    return PsbConfig(
        outer_max_iters=3,
        inner_max_iters=2,
        sca_max_iters=2,
        phase_alignment_grid=4,
        polish_beamforming=False,
    )


@pytest.fixture()
def mock_store(tmp_path: Path) -> MagicMock:
    """Result store whose writers return paths under tmp_path."""
    store = MagicMock(spec=ResultStorePort)
    for method in (
        "write_table",
        "write_aggregates",
        "write_traces",
        "write_results",
        "write_report",
        "write_plot",
    ):
        getattr(store, method).side_effect = lambda name, *_, **__: tmp_path / name
    return store


@pytest.fixture()
def test_container(mock_store: MagicMock) -> Container:
    """Container with a real solver and a mocked result store."""
    return Container.create_for_testing(
        config=StarPsbConfig(), solver=CvxpySolver(), result_store=mock_store
    )


def make_coefficients(
    N: int = 4, *, seed: int = 0, beta_t: float | None = None, branch: float = math.pi / 2
) -> StarCoefficients:
    """Coupled coefficients with random phases on the given branch."""
    rng = np.random.default_rng(seed)
    theta_t = wrap_phase(rng.uniform(0.0, 2 * math.pi, N))
    beta = np.full(N, beta_t) if beta_t is not None else rng.random(N)
    return StarCoefficients(
        beta_t=beta,
        beta_r=1.0 - beta,
        theta_t=theta_t,
        theta_r=wrap_phase(theta_t + branch),
    )


def make_row(**kwargs: Any) -> ResultRow:
    """Create a result row with defaults."""
    defaults: dict[str, Any] = {
        "scheme": "coupled-star",
        "axis": "-5",
        "axis_index": 0,
        "seed": 0,
        "min_secrecy": 1.0,
        "Rs_I": 1.0,
        "Rs_O": 1.5,
        "status": RowStatus.CONVERGED,
        "outer_iters": 3,
    }
    defaults.update(kwargs)
    return ResultRow(**defaults)
