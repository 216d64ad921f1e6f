"""Desk-scale acceptance checks (M = 4, N = 8).

The statistical studies take minutes and are marked `slow`; run them with
`pytest -m slow`.
"""

from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path

import numpy as np
import pytest

from starpsb.config import NetworkTemplate, StarPsbConfig, SweepConfig, build_experiment_spec
from starpsb.container import Container
from starpsb.core.models import ExperimentKind, NetworkConfig, ResultRow, RowStatus, SchemeId
from starpsb.experiments import StudyResult, run_experiment
from starpsb.oracles import audit_projection, audit_rates

SEEDS = 20
SLACK = 1e-6


def run_study(kind: ExperimentKind, out: Path, trials: int = SEEDS, **sweep) -> StudyResult:
    config = StarPsbConfig(
        network=NetworkTemplate(M=4, N=8),
        sweep=SweepConfig(**sweep),
        workers=4,
    )
    spec = build_experiment_spec(config, kind, out_dir=str(out), trials=trials, seed=0)
    return run_experiment(spec, Container.create_default(config, spec.out_dir))


def by_scheme(rows: list[ResultRow], axis: str) -> dict[str, dict[int, float]]:
    values: dict[str, dict[int, float]] = defaultdict(dict)
    for row in rows:
        if row.axis == axis and row.min_secrecy is not None:
            values[row.scheme][row.seed] = row.min_secrecy
    return values


def mean(values: dict[int, float]) -> float:
    return float(np.mean(list(values.values())))


def consistency(better: dict[int, float], worse: dict[int, float]) -> float:
    seeds = better.keys() & worse.keys()
    return sum(better[s] >= worse[s] - SLACK for s in seeds) / len(seeds)


class TestAudits:
    """Projection and rate-formula audits at full size."""

    def test_projection_matches_grid(self) -> None:
        report = audit_projection(1000, seed=0)
        assert report["ok"], report["failures"]

    def test_rate_forms_agree(self) -> None:
        networks = [NetworkConfig(M=4, N=8, rng_seed=s) for s in range(100)]
        report = audit_rates(networks)
        assert report["ok"], report["failures"]


@pytest.mark.slow
class TestConvergenceAcceptance:
    """Monotone inner loop, penalty convergence and rank-one beams."""

    @pytest.fixture(scope="class")
    def study(self, tmp_path_factory: pytest.TempPathFactory) -> StudyResult:
        return run_study(
            ExperimentKind.CONVERGENCE, tmp_path_factory.mktemp("convergence"), sizes=[(4, 8)]
        )

    def test_inner_loop_monotone(self, study: StudyResult) -> None:
        assert study.report["all_monotone"]
        for records in study.traces.values():
            for record in records:
                steps = zip(record.inner_objectives, record.inner_objectives[1:], strict=False)
                assert all(b >= a - SLACK for a, b in steps)

    def test_penalty_converges(self, study: StudyResult) -> None:
        assert study.report["converged_fraction"] >= 0.9
        converged = [r for r in study.rows if r.status is RowStatus.CONVERGED]
        assert all(r.outer_iters <= 300 for r in converged)

    def test_beams_rank_one(self, study: StudyResult) -> None:
        assert study.report["max_w_rank_residual"] <= 1e-3


@pytest.mark.slow
class TestSchemeOrderingAcceptance:
    """Scheme ordering at matched seeds."""

    @pytest.fixture(scope="class")
    def study(self, tmp_path_factory: pytest.TempPathFactory) -> StudyResult:
        return run_study(
            ExperimentKind.POWER_SWEEP,
            tmp_path_factory.mktemp("power"),
            p_max_dbm=[-15.0, 5.0],
        )

    @pytest.mark.parametrize("axis", ["-15", "5"])
    def test_coupling_chain(self, study: StudyResult, axis: str) -> None:
        values = by_scheme(study.rows, axis)
        independent = values[SchemeId.INDEPENDENT.value]
        coupled = values[SchemeId.COUPLED.value]
        random = values[SchemeId.RANDOM.value]
        cris = values[SchemeId.CRIS.value]
        assert mean(independent) >= mean(coupled) - SLACK
        assert mean(coupled) >= mean(random) - SLACK
        assert mean(coupled) >= mean(cris) - SLACK
        assert consistency(independent, coupled) >= 0.9
        assert consistency(coupled, random) >= 0.9

    def test_time_switching_crossover(self, study: StudyResult) -> None:
        low = by_scheme(study.rows, "-15")
        high = by_scheme(study.rows, "5")
        ts, coupled = SchemeId.TS.value, SchemeId.COUPLED.value
        assert mean(low[ts]) >= mean(low[coupled]) - SLACK
        assert mean(high[coupled]) >= mean(high[ts]) - SLACK

    def test_channels_shared(self, study: StudyResult) -> None:
        assert study.report["shared_channels"]


@pytest.mark.slow
class TestQuantizationAcceptance:
    """Secrecy against phase resolution."""

    @pytest.fixture(scope="class")
    def study(self, tmp_path_factory: pytest.TempPathFactory) -> StudyResult:
        return run_study(
            ExperimentKind.BITS_SWEEP,
            tmp_path_factory.mktemp("bits"),
            schemes=[SchemeId.COUPLED],
        )

    def test_one_bit_flagged(self, study: StudyResult) -> None:
        rows = [r for r in study.rows if r.axis == "1"]
        assert len(rows) == SEEDS
        assert all(r.status is RowStatus.COUPLING_UNREPRESENTABLE for r in rows)

    def test_four_bits_close_to_continuous(self, study: StudyResult) -> None:
        coupled = SchemeId.COUPLED.value
        continuous = mean(by_scheme(study.rows, "continuous")[coupled])
        four = mean(by_scheme(study.rows, "4")[coupled])
        assert four >= 0.95 * continuous

    def test_means_non_decreasing(self, study: StudyResult) -> None:
        coupled = SchemeId.COUPLED.value
        means = [mean(by_scheme(study.rows, str(q))[coupled]) for q in range(2, 6)]
        assert all(b >= a - SLACK for a, b in zip(means, means[1:], strict=False))


@pytest.mark.slow
class TestEndToEndAcceptance:
    """Quantized PSB against the exhaustive discrete optimum."""

    def test_reaches_ninety_percent(self, tmp_path: Path) -> None:
        result = run_study(ExperimentKind.ORACLE_AUDIT, tmp_path)
        section = result.report["end_to_end"]
        assert section["seeds"] == SEEDS
        assert section["passed"] >= math.ceil(0.9 * SEEDS)
        assert result.report["ok"]


@pytest.mark.slow
class TestDeterminismAcceptance:
    """Identical specs give byte-identical tables."""

    def test_power_sweep_bytes(self, tmp_path: Path) -> None:
        first = run_study(ExperimentKind.POWER_SWEEP, tmp_path / "a", trials=3)
        second = run_study(ExperimentKind.POWER_SWEEP, tmp_path / "b", trials=3)
        assert first.paths["table"].read_bytes() == second.paths["table"].read_bytes()
