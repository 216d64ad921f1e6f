"""Tests for the file-based result store."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from starpsb.adapters.result_store import TABLE_HEADER, FileResultStore, format_number
from starpsb.core.errors import ResultStoreError
from starpsb.core.models import AggregateRow, RowStatus, SchemeId, SchemeResult, TraceRecord
from tests.conftest import make_row


class TestFormatNumber:
    """Tests for format_number()."""

    def test_none_is_empty(self) -> None:
        assert format_number(None) == ""

    def test_fixed_precision(self) -> None:
        assert format_number(1.0) == "1"
        assert format_number(1 / 3) == "0.3333333333"
        assert format_number(-15.0) == "-15"


class TestFileResultStore:
    """Tests for FileResultStore writers."""

    def test_write_table(self, tmp_path: Path) -> None:
        store = FileResultStore(tmp_path / "out")
        rows = [
            make_row(scheme="random-phase", seed=1),
            make_row(seed=1, axis_index=1, axis="0"),
            make_row(seed=0, min_secrecy=None, Rs_I=None, Rs_O=None, status=RowStatus.FAILED),
        ]
        path = store.write_table("power_sweep", rows)
        lines = path.read_text().splitlines()
        assert path == tmp_path / "out" / "power_sweep.csv"
        assert lines[0] == ",".join(TABLE_HEADER)
        assert lines[1] == "coupled-star,-5,0,,,,failed,3,0"
        assert lines[2].startswith("coupled-star,0,1,1,1,1.5,converged")
        assert lines[3].startswith("random-phase,")

    def test_table_is_byte_identical_across_writes(self, tmp_path: Path) -> None:
        rows = [make_row(seed=s, min_secrecy=s / 7) for s in range(5)]
        a = FileResultStore(tmp_path / "a").write_table("t", rows)
        b = FileResultStore(tmp_path / "b").write_table("t", list(reversed(rows)))
        assert a.read_bytes() == b.read_bytes()

    def test_write_aggregates(self, tmp_path: Path) -> None:
        store = FileResultStore(tmp_path)
        path = store.write_aggregates(
            "summary", [AggregateRow(scheme="c-ris", axis="5", mean=0.5, stderr=0.1, count=4)]
        )
        assert path.read_text().splitlines() == [
            "scheme,axis,mean,stderr,count",
            "c-ris,5,0.5,0.1,4",
        ]

    def test_write_traces(self, tmp_path: Path) -> None:
        store = FileResultStore(tmp_path)
        record = TraceRecord(
            outer=1, objective=0.2, V_t=1e-2, V_r=2e-2, rho=1.0, tau=0.01, inner_iterations=2
        )
        path = store.write_traces("traces", {"b": [record], "a": [record, record]})
        lines = [json.loads(line) for line in path.read_text().splitlines()]
        assert [line["run"] for line in lines] == ["a", "a", "b"]
        assert lines[0]["V_t"] == pytest.approx(1e-2)

    def test_write_results(self, tmp_path: Path) -> None:
        results = [
            SchemeResult(scheme=SchemeId.TS, seed=1, P_max_dBm=-5.0, min_secrecy=0.5),
            SchemeResult(
                scheme=SchemeId.COUPLED, seed=2, P_max_dBm=-5.0, converged=True, outer_iters=4
            ),
        ]
        path = FileResultStore(tmp_path).write_results("runs", results)
        lines = path.read_text().splitlines()
        assert path.name == "runs.jsonl"
        assert [json.loads(line)["scheme"] for line in lines] == ["coupled-star", "ts-star"]
        assert SchemeResult.model_validate_json(lines[0]) == results[1]
        assert json.loads(lines[1])["min_secrecy"] == 0.5

    def test_write_report(self, tmp_path: Path) -> None:
        path = FileResultStore(tmp_path).write_report("report", {"ok": True, "path": tmp_path})
        document = json.loads(path.read_text())
        assert document["ok"] is True
        assert document["path"] == str(tmp_path)

    def test_write_plot(self, tmp_path: Path) -> None:
        path = FileResultStore(tmp_path).write_plot("plot", [("ts-star", "-15", 0.25, 0.0)])
        assert path.read_text().splitlines()[1] == "ts-star,-15,0.25,0"

    def test_unwritable_directory(self, tmp_path: Path) -> None:
        blocker = tmp_path / "file"
        blocker.write_text("x")
        store = FileResultStore(blocker / "sub")
        with pytest.raises(ResultStoreError, match="Cannot create output directory"):
            store.write_table("t", [])
