"""Console messages, CSV emission, and SfM report rendering."""

import csv
import dataclasses
import json
import sys
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import TextIO

from robust_consensus.config import RunConfig
from robust_consensus.sfm import KnownRotationProblem, SfmReport, write_observations
from robust_consensus.synthbench import AggregateRecord, TrialRecord

TRIAL_COLUMNS = (
    "method",
    "M",
    "N",
    "outlier_ratio",
    "delta",
    "q",
    "K",
    "seed",
    "consensus_size",
    "removed",
    "recall",
    "precision",
    "rmse",
    "runtime_ms",
)

AGGREGATE_COLUMNS = (
    "method",
    "M",
    "N",
    "outlier_ratio",
    "delta",
    "q",
    "K",
    "trials",
    "consensus_mean",
    "consensus_std",
    "removed_mean",
    "removed_std",
    "recall_mean",
    "precision_mean",
    "rmse_mean",
    "runtime_ms_mean",
)


def log_error(message: str, quiet: bool = False):
    """Print error message to stderr unless quiet mode."""
    if not quiet:
        print(f"Error: {message}", file=sys.stderr)


def log_warning(message: str, quiet: bool = False):
    if not quiet:
        print(f"Warning: {message}", file=sys.stderr)


def log_info(message: str, quiet: bool = False):
    """Print info message to stdout unless quiet mode."""
    if not quiet:
        print(message)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _emit(handle: TextIO, columns: Sequence[str], rows: Iterable[dict]):
    writer = csv.DictWriter(handle, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({column: _cell(row[column]) for column in columns})


def _write_rows(path: Path | None, columns: Sequence[str], rows: Iterable[dict]):
    """Write to ``path``, or to stdout when it is None."""
    if path is None:
        _emit(sys.stdout, columns, rows)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        _emit(handle, columns, rows)


def write_trials_csv(
    path: Path | None, records: Iterable[TrialRecord], include_runtime: bool = True
):
    """One row per trial; with ``include_runtime=False`` runtime_ms is written as 0."""

    def rows():
        for record in records:
            row = dataclasses.asdict(record)
            if not include_runtime and row["runtime_ms"] is not None:
                row["runtime_ms"] = 0.0
            yield row

    _write_rows(path, TRIAL_COLUMNS, rows())


def write_aggregate_csv(
    path: Path | None, records: Iterable[AggregateRecord], include_runtime: bool = True
):
    def rows():
        for record in records:
            row = dataclasses.asdict(record)
            if not include_runtime:
                row["runtime_ms_mean"] = 0.0
            yield row

    _write_rows(path, AGGREGATE_COLUMNS, rows())


def write_kept_observations(path: Path, problem: KnownRotationProblem, inliers: Sequence[int]):
    """Kept observations in the dataset observation-file format."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_observations(path, [problem.observations[i] for i in inliers])


def default_kept_path(observations_path: Path) -> Path:
    """``observations.txt`` -> ``observations.kept.txt`` in the same directory."""
    observations_path = Path(observations_path)
    return observations_path.with_name(
        f"{observations_path.stem}.kept{observations_path.suffix}"
    )


def _fmt(value: float | None, spec: str) -> str:
    if value is None or value != value:
        return "n/a"
    return format(value, spec)


def render_sfm_report(
    report: SfmReport, config: RunConfig, kept_path: Path | None = None
) -> str:
    """A table row per method in the Method | Removed | Remaining | RMSE | Runtime layout."""
    label = f"{report.method} (K={report.K})" if report.K is not None else report.method
    header = f"{'Method':<16} {'Removed outliers':>17} {'Remaining inliers':>18} "
    header += f"{'RMSE':>12} {'Runtime (s)':>12}"
    row = (
        f"{label:<16} {report.removed:>17} {report.remaining:>18} "
        f"{_fmt(report.rmse_kept, '.6g'):>12} {report.runtime:>12.3f}"
    )
    lines = [
        header,
        row,
        "",
        f"RMSE over all observations: {_fmt(report.rmse_all, '.6g')}",
        f"Variables: {report.variables}",
    ]
    if kept_path is not None:
        lines.append(f"Kept observations: {kept_path}")
    if report.recall is not None:
        lines.append(f"Inlier recall: {report.recall:.4f}")
        lines.append(f"Outlier precision: {report.precision:.4f}")
    lines.append("")
    lines.append("Configuration:")
    for key, value in config.as_dict().items():
        if value is not None:
            lines.append(f"  {key}: {value}")
    return "\n".join(lines)


def render_sfm_report_json(
    report: SfmReport, config: RunConfig, kept_path: Path | None = None
) -> str:
    def number(value):
        return None if value is None or value != value else value

    payload = {
        "method": report.method,
        "K": report.K,
        "delta": report.delta,
        "removed": report.removed,
        "remaining": report.remaining,
        "rmse_kept": number(report.rmse_kept),
        "rmse_all": number(report.rmse_all),
        "runtime": report.runtime,
        "variables": report.variables,
        "recall": report.recall,
        "precision": report.precision,
        "duality_gap": report.result.duality_gap,
        "removed_indices": report.result.removed.tolist(),
        "kept_observations": None if kept_path is None else str(kept_path),
        "config": config.as_dict(),
    }
    return json.dumps(payload, indent=2)


def render_oracle_table(rows: Sequence[dict]) -> str:
    """Per-method comparison against the exhaustive optimum."""
    header = (
        f"{'Method':<10} {'Trials':>7} {'Mean size':>10} {'Mean gap':>9} "
        f"{'Max gap':>8} {'Optimal':>8}"
    )
    lines = [header]
    for row in rows:
        lines.append(
            f"{row['method']:<10} {row['trials']:>7} {row['mean_size']:>10.3f} "
            f"{row['mean_gap']:>9.3f} {row['max_gap']:>8} {row['optimal_share']:>8.1%}"
        )
    return "\n".join(lines)
