"""Tests for aggmin.report module."""

import json

from aggmin.report import DiagnosticRecord, DiagnosticsReport, RunManifest


class TestDiagnosticsReport:
    """Tests for ordered diagnostic records."""

    def test_add_keeps_order(self):
        """Test records come back in the order they were added."""
        report = DiagnosticsReport()
        report.add("a")
        report.add("b", {"k": 1}, {"r": 0.5}, True)
        assert [r.op for r in report.records] == ["a", "b"]
        assert report.records[1].params == {"k": 1}

    def test_pass_alias(self):
        """Test the verdict is serialised as pass."""
        report = DiagnosticsReport()
        report.add("gate", {"M": 100.0}, {}, True)
        data = json.loads(report.to_json())
        assert data["records"][0]["pass"] is True
        assert "passed" not in data["records"][0]

    def test_failed(self):
        """Test only explicit failures are listed."""
        report = DiagnosticsReport()
        report.add("ok", passed=True)
        report.add("info")
        report.add("bad", passed=False)
        assert [r.op for r in report.failed] == ["bad"]

    def test_record_by_alias(self):
        """Test records load from their JSON form."""
        record = DiagnosticRecord.model_validate({"op": "x", "pass": False})
        assert record.passed is False
        assert record.params == {}

    def test_deterministic(self):
        """Test identical reports serialise identically."""
        first, second = DiagnosticsReport(), DiagnosticsReport()
        for report in (first, second):
            report.add("verify_steady", {"M": 12.0, "k": 2}, {"max_abs": 1e-12}, True)
        assert first.to_json() == second.to_json()


class TestRunManifest:
    """Tests for the run manifest."""

    def test_fields(self):
        """Test the manifest round-trips its fields through JSON."""
        manifest = RunManifest(
            command="cantor",
            config={"M": 12.0},
            outputs=["out/cantor.json"],
            version="0.1.0",
            duration=0.5,
        )
        data = json.loads(manifest.model_dump_json())
        assert data["command"] == "cantor"
        assert data["inputs"] == []
        assert data["seed"] is None
        assert data["exit_code"] == 0
