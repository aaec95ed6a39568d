"""Tests for CSV emission and report rendering."""

import csv
import json

import pytest

from robust_consensus.config import RunConfig
from robust_consensus.output import (
    AGGREGATE_COLUMNS,
    TRIAL_COLUMNS,
    default_kept_path,
    log_error,
    log_info,
    render_oracle_table,
    render_sfm_report,
    render_sfm_report_json,
    write_aggregate_csv,
    write_kept_observations,
    write_trials_csv,
)
from robust_consensus.sfm import load_observations, run_sfm_outlier_removal
from robust_consensus.synthbench import TrialRecord, aggregate


def _trial(method="alg1", consensus=9, runtime_ms=1.25, **overrides):
    values = {
        "method": method,
        "M": 12,
        "N": 2,
        "outlier_ratio": 0.25,
        "delta": 0.3,
        "q": None,
        "K": None,
        "seed": 17,
        "consensus_size": consensus,
        "removed": None if consensus is None else 12 - consensus,
        "recall": 1.0,
        "precision": 1.0,
        "rmse": 0.05,
        "runtime_ms": runtime_ms,
    }
    values.update(overrides)
    return TrialRecord(**values)


def _read_csv(path):
    with path.open(encoding="utf-8", newline="") as handle:
        return list(csv.reader(handle))


class TestTrialsCsv:
    def test_header_order(self, temp_dir):
        path = temp_dir / "trials.csv"
        write_trials_csv(path, [_trial()])
        rows = _read_csv(path)
        assert tuple(rows[0]) == TRIAL_COLUMNS
        assert rows[1][0] == "alg1"
        assert rows[1][TRIAL_COLUMNS.index("q")] == ""
        assert rows[1][TRIAL_COLUMNS.index("runtime_ms")] == "1.25"

    def test_no_timing_is_byte_identical(self, temp_dir):
        first, second = temp_dir / "a.csv", temp_dir / "b.csv"
        write_trials_csv(first, [_trial(runtime_ms=1.0)], include_runtime=False)
        write_trials_csv(second, [_trial(runtime_ms=7.5)], include_runtime=False)
        assert first.read_bytes() == second.read_bytes()

    def test_failed_record_keeps_empty_cells(self, temp_dir):
        path = temp_dir / "trials.csv"
        failed = _trial(consensus=None, removed=None, runtime_ms=None, error="boom")
        write_trials_csv(path, [failed], include_runtime=False)
        row = _read_csv(path)[1]
        assert row[TRIAL_COLUMNS.index("consensus_size")] == ""
        assert row[TRIAL_COLUMNS.index("removed")] == ""
        assert row[TRIAL_COLUMNS.index("runtime_ms")] == ""

    def test_creates_parent_directories(self, temp_dir):
        path = temp_dir / "nested" / "out" / "trials.csv"
        write_trials_csv(path, [])
        assert _read_csv(path) == [list(TRIAL_COLUMNS)]

    def test_stdout_when_no_path(self, capsys):
        write_trials_csv(None, [_trial()])
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == ",".join(TRIAL_COLUMNS)
        assert len(lines) == 2


class TestAggregateCsv:
    def test_rows(self, temp_dir):
        path = temp_dir / "aggregate.csv"
        write_aggregate_csv(path, aggregate([_trial(consensus=8), _trial(consensus=10)]))
        rows = _read_csv(path)
        assert tuple(rows[0]) == AGGREGATE_COLUMNS
        assert rows[1][AGGREGATE_COLUMNS.index("consensus_mean")] == "9.0"
        assert rows[1][AGGREGATE_COLUMNS.index("trials")] == "2"

    def test_no_timing(self, temp_dir):
        path = temp_dir / "aggregate.csv"
        write_aggregate_csv(path, aggregate([_trial()]), include_runtime=False)
        assert _read_csv(path)[1][AGGREGATE_COLUMNS.index("runtime_ms_mean")] == "0.0"


class TestMessages:
    def test_error_goes_to_stderr(self, capsys):
        log_error("bad input")
        captured = capsys.readouterr()
        assert captured.err == "Error: bad input\n"
        assert captured.out == ""

    def test_quiet_suppresses(self, capsys):
        log_error("bad input", quiet=True)
        log_info("hello", quiet=True)
        captured = capsys.readouterr()
        assert captured.err == ""
        assert captured.out == ""


class TestSfmReport:
    @pytest.fixture
    def report(self, clean_scene):
        return run_sfm_outlier_removal(clean_scene.problem, "alg2", 1e-3, true_outliers=set())

    @pytest.fixture
    def config(self):
        return RunConfig(command="sfm", methods=("alg2",), delta=1e-3)

    def test_table_layout(self, report, config):
        text = render_sfm_report(report, config)
        lines = text.splitlines()
        assert lines[0].split()[:2] == ["Method", "Removed"]
        assert lines[1].startswith("alg2 (K=2)")
        assert "Inlier recall: 1.0000" in text
        assert "  delta: 0.001" in text

    def test_json_payload(self, report, config):
        payload = json.loads(render_sfm_report_json(report, config))
        assert payload["method"] == "alg2"
        assert payload["K"] == 2
        assert payload["removed"] == 0
        assert payload["removed_indices"] == []
        assert payload["config"]["delta"] == 1e-3

    def test_kept_observations_file(self, temp_dir, clean_scene, report):
        path = temp_dir / "kept.txt"
        write_kept_observations(path, clean_scene.problem, report.result.inliers)
        camera_ids = {c.id for c in clean_scene.problem.cameras}
        assert tuple(load_observations(path, camera_ids)) == clean_scene.problem.observations

    def test_default_kept_path(self, temp_dir):
        assert default_kept_path(temp_dir / "obs.txt") == temp_dir / "obs.kept.txt"

    def test_kept_path_in_reports(self, report, config, temp_dir):
        kept = temp_dir / "kept.txt"
        assert f"Kept observations: {kept}" in render_sfm_report(report, config, kept)
        payload = json.loads(render_sfm_report_json(report, config, kept))
        assert payload["kept_observations"] == str(kept)
        assert json.loads(render_sfm_report_json(report, config))["kept_observations"] is None


class TestOracleTable:
    def test_rows(self):
        rows = [
            {
                "method": "alg1",
                "trials": 5,
                "mean_size": 8.4,
                "mean_gap": 0.2,
                "max_gap": 1,
                "optimal_share": 0.8,
            }
        ]
        lines = render_oracle_table(rows).splitlines()
        assert lines[0].split()[0] == "Method"
        assert lines[1].split() == ["alg1", "5", "8.400", "0.200", "1", "80.0%"]
