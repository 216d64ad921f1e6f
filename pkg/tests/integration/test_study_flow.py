"""Integration test: small studies through the real solver and file store."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from starpsb.adapters.result_store import TABLE_HEADER
from starpsb.config import (
    NetworkTemplate,
    PsbConfig,
    StarPsbConfig,
    SweepConfig,
    build_experiment_spec,
)
from starpsb.container import Container
from starpsb.core.models import ExperimentKind, SchemeId
from starpsb.experiments import run_experiment


def small_config(**sweep) -> StarPsbConfig:
    """Two antennas, two elements, capped loops."""
    defaults = {
        "p_max_dbm": [-5.0, 5.0],
        "q_bits": [1, 3],
        "sizes": [(2, 2)],
        "schemes": [SchemeId.COUPLED, SchemeId.CRIS, SchemeId.RANDOM],
    }
    defaults.update(sweep)
    return StarPsbConfig(
        network=NetworkTemplate(M=2, N=2),
        psb=PsbConfig(outer_max_iters=4, inner_max_iters=3, sca_max_iters=3),
        sweep=SweepConfig(**defaults),
    )


def run(config: StarPsbConfig, kind: ExperimentKind, out: Path, trials: int = 2):
    spec = build_experiment_spec(config, kind, out_dir=str(out), trials=trials, seed=3)
    return run_experiment(spec, Container.create_default(config, spec.out_dir))


def read_table(path: Path) -> list[dict[str, str]]:
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


class TestPowerSweepFlow:
    """Power sweep written to disk."""

    def test_table_and_summary(self, tmp_path: Path) -> None:
        result = run(small_config(), ExperimentKind.POWER_SWEEP, tmp_path)
        table = result.paths["table"]
        assert table == tmp_path / "power_sweep.csv"
        with table.open() as fh:
            assert fh.readline().strip() == ",".join(TABLE_HEADER)
        rows = read_table(table)
        assert len(rows) == 3 * 2 * 2
        assert {r["scheme"] for r in rows} == {"coupled-star", "c-ris", "random-phase"}
        assert all(r["converged"] != "failed" for r in rows)
        assert all(float(r["min_secrecy"]) >= 0.0 for r in rows)
        assert all(r["wall_ms"] == "0" for r in rows)
        assert json.loads(result.paths["report"].read_text())["shared_channels"]
        assert (tmp_path / "power_sweep_summary.csv").exists()
        assert (tmp_path / "power_sweep_plot.csv").exists()

    def test_byte_identical_reruns(self, tmp_path: Path) -> None:
        config = small_config(p_max_dbm=[0.0])
        first = run(config, ExperimentKind.POWER_SWEEP, tmp_path / "a")
        second = run(config, ExperimentKind.POWER_SWEEP, tmp_path / "b")
        assert first.paths["table"].read_bytes() == second.paths["table"].read_bytes()


class TestBitsSweepFlow:
    """Bits sweep with the coupling marker."""

    def test_one_bit_coupled_rows_flagged(self, tmp_path: Path) -> None:
        config = small_config(schemes=[SchemeId.COUPLED, SchemeId.TS])
        result = run(config, ExperimentKind.BITS_SWEEP, tmp_path, trials=1)
        rows = read_table(result.paths["table"])
        by_key = {(r["scheme"], r["axis"]): r for r in rows}
        assert by_key[("coupled-star", "1")]["converged"] == "coupling-unrepresentable"
        assert by_key[("coupled-star", "1")]["min_secrecy"] == ""
        assert by_key[("ts-star", "1")]["min_secrecy"] != ""
        assert by_key[("coupled-star", "3")]["min_secrecy"] != ""
        assert result.report["unrepresentable_rows"] == 1


class TestConvergenceFlow:
    """Convergence study traces."""

    @pytest.mark.parametrize("workers", [1, 2])
    def test_traces_written(self, tmp_path: Path, workers: int) -> None:
        config = small_config()
        config.workers = workers
        result = run(config, ExperimentKind.CONVERGENCE, tmp_path)
        lines = result.paths["traces"].read_text().splitlines()
        records = [json.loads(line) for line in lines]
        assert records
        assert {r["run"] for r in records} <= {
            "coupled-star/M2-N2/seed3",
            "coupled-star/M2-N2/seed4",
        }
        assert all(r["outer"] >= 1 for r in records)
        assert result.report["trials"] == 2
