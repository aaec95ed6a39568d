#!/usr/bin/env python3
"""Robust consensus CLI.

Typer-based CLI that dispatches to the synthbench, sfm and consensus modules.
Exit codes: 0 ok, 2 configuration, 3 solver, 4 data.
"""

from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

import typer

from robust_consensus import config as _config
from robust_consensus import output as _output
from robust_consensus import sfm as _sfm
from robust_consensus import synthbench as _synthbench
from robust_consensus.consensus import ReweightParams
from robust_consensus.errors import (
    ConfigError,
    ConsensusError,
    DatasetError,
    DegenerateGeometry,
    NumericalFailure,
    SolverFailure,
    TooLarge,
    UnderconstrainedPoint,
    UnknownId,
)
from robust_consensus.lp_core import SolverTolerances
from robust_consensus.residuals import DepthBounds

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_DATA = 4

app = typer.Typer(
    help="Maximum-consensus outlier removal with slack linear programs",
    add_completion=False,
)


@contextmanager
def _exit_codes(quiet: bool = False) -> Iterator[None]:
    """Turn package errors into an error message and the matching exit code."""
    try:
        yield
    except (ConfigError, TooLarge) as exc:
        _output.log_error(str(exc), quiet)
        raise typer.Exit(code=EXIT_CONFIG) from exc
    except (SolverFailure, NumericalFailure) as exc:
        _output.log_error(str(exc), quiet)
        raise typer.Exit(code=EXIT_SOLVER) from exc
    except (DatasetError, UnknownId, UnderconstrainedPoint, DegenerateGeometry) as exc:
        _output.log_error(str(exc), quiet)
        raise typer.Exit(code=EXIT_DATA) from exc
    except OSError as exc:
        _output.log_error(f"cannot read {exc.filename}: {exc.strerror}", quiet)
        raise typer.Exit(code=EXIT_DATA) from exc
    except ConsensusError as exc:
        _output.log_error(str(exc), quiet)
        raise typer.Exit(code=EXIT_SOLVER) from exc


def _load(command: str, config_path: Path | None, overrides: dict) -> _config.RunConfig:
    defaults = _config.load_defaults(config_path)
    return _config.resolve_config(command, overrides, defaults)


def _params(cfg: _config.RunConfig) -> ReweightParams:
    return ReweightParams(q=cfg.q, epsilon=cfg.epsilon, K=cfg.K)


def _tolerances(cfg: _config.RunConfig) -> SolverTolerances:
    return SolverTolerances(backend=cfg.backend)


def _list(field: str, value: str | None, cast=float) -> tuple | None:
    return None if value is None else _config.parse_list(field, value, cast)


@app.command()
def synth(
    methods: str | None = typer.Option(
        None, "--methods", help="Comma-separated: alg1, alg2, l1full, linf, ransac"
    ),
    delta: float | None = typer.Option(None, "--delta", help="Inlier threshold (e.g. 0.3)"),
    q: str | None = typer.Option(None, "--q", help="Reweighting exponent(s), comma-separated"),
    eps: float | None = typer.Option(None, "--eps", help="Reweighting epsilon"),
    iters: int | None = typer.Option(None, "--iters", help="Reweighting iterations K"),
    ratio: str | None = typer.Option(None, "--ratio", help="Outlier ratio(s), comma-separated"),
    repeats: int | None = typer.Option(None, "--repeats", help="Trials per cell"),
    measurements: int | None = typer.Option(None, "--measurements", help="Measurements M"),
    dim: int | None = typer.Option(None, "--dim", help="Unknowns N"),
    seed: int | None = typer.Option(None, "--seed", help="Base seed"),
    sweep_k: str | None = typer.Option(
        None, "--sweep-k", help="Iteration sweep for alg2, e.g. 1..10"
    ),
    backend: str | None = typer.Option(None, "--backend", help="LP backend: highs or mehrotra"),
    out: Path | None = typer.Option(None, "--out", help="Trial CSV path (default: stdout)"),
    aggregate_out: Path | None = typer.Option(
        None, "--aggregate-out", help="Aggregate CSV path"
    ),
    no_timing: bool = typer.Option(False, "--no-timing", help="Write runtimes as 0"),
    config_path: Path | None = typer.Option(None, "--config", help="JSON defaults file"),
    quiet: bool = typer.Option(False, "--quiet", help="Suppress progress messages"),
):
    """Run synthetic linear-regression trials and write plot-ready CSV."""
    with _exit_codes(quiet):
        cfg = _load(
            "synth",
            config_path,
            {
                "methods": _list("method", methods, str),
                "delta": delta,
                "q_values": _list("q", q),
                "epsilon": eps,
                "K": iters,
                "K_sweep": None if sweep_k is None else _config.parse_range("sweep-k", sweep_k),
                "ratios": _list("ratio", ratio),
                "repeats": repeats,
                "measurements": measurements,
                "dim": dim,
                "seed": seed,
                "backend": backend,
                "out": out,
            },
        )
        scenarios = [
            _synthbench.RegressionScenario(
                M=cfg.measurements,
                N=cfg.dim,
                inlier_sigma=cfg.inlier_sigma,
                outlier_sigma=cfg.outlier_sigma,
                outlier_ratio=r,
            )
            for r in cfg.ratios
        ]
        if cfg.K_sweep is not None:
            records = []
            for index, scenario in enumerate(scenarios):
                records.extend(
                    _synthbench.run_iteration_sweep(
                        K_values=cfg.K_sweep,
                        q_values=cfg.q_values,
                        scenario=scenario,
                        repeats=cfg.repeats,
                        delta=cfg.delta,
                        epsilon=cfg.epsilon,
                        base_seed=_config.derive_seed(cfg.seed, index),
                        tol=_tolerances(cfg),
                    )
                )
        else:
            records = _synthbench.run_sweep(
                scenarios,
                cfg.methods,
                cfg.repeats,
                delta=cfg.delta,
                q_values=cfg.q_values,
                K=cfg.K,
                epsilon=cfg.epsilon,
                base_seed=cfg.seed,
                tol=_tolerances(cfg),
            )

        _output.write_trials_csv(cfg.out, records, include_runtime=not no_timing)
        if aggregate_out is not None:
            _output.write_aggregate_csv(
                aggregate_out, _synthbench.aggregate(records), include_runtime=not no_timing
            )

        failed = [r for r in records if not r.ok]
        for record in failed:
            _output.log_warning(f"{record.method} (seed {record.seed}): {record.error}", quiet)
        if cfg.out is not None:
            message = f"Wrote {len(records)} trial rows to {cfg.out} (seed {cfg.seed})"
            _output.log_info(message, quiet)
        if failed:
            raise typer.Exit(code=EXIT_SOLVER)


def _read_outliers(path: Path) -> set[int]:
    indices = set()
    for line_number, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if not content:
            continue
        try:
            indices.add(int(content))
        except ValueError as exc:
            msg = f"expected an observation index: {content}"
            raise DatasetError(path, line_number, msg) from exc
    return indices


@app.command()
def sfm(
    cameras: Path = typer.Option(..., "--cameras", help="Cameras file"),
    observations: Path = typer.Option(..., "--observations", help="Observations file"),
    method: str | None = typer.Option(None, "--method", help="alg1, alg2, l1full or linf"),
    delta: float | None = typer.Option(None, "--delta", help="Inlier threshold (normalized)"),
    q: str | None = typer.Option(None, "--q", help="Reweighting exponent"),
    eps: float | None = typer.Option(None, "--eps", help="Reweighting epsilon"),
    iters: int | None = typer.Option(None, "--iters", help="Reweighting iterations K"),
    dmin: float | None = typer.Option(None, "--dmin", help="Minimum depth"),
    dmax: float | None = typer.Option(None, "--dmax", help="Maximum depth"),
    norm: str | None = typer.Option(None, "--norm", help="Residual norm: l1 or linf"),
    backend: str | None = typer.Option(None, "--backend", help="LP backend: highs or mehrotra"),
    outliers: Path | None = typer.Option(
        None, "--outliers", help="Known outlier indices, for recall/precision"
    ),
    kept_out: Path | None = typer.Option(
        None, "--kept-out", help="Kept observations file [default: OBSERVATIONS.kept.txt]"
    ),
    json_output: bool = typer.Option(False, "--json", help="Output report as JSON"),
    config_path: Path | None = typer.Option(None, "--config", help="JSON defaults file"),
    quiet: bool = typer.Option(False, "--quiet", help="Suppress error messages"),
):
    """Remove outlier observations from a known-rotation dataset."""
    with _exit_codes(quiet):
        cfg = _load(
            "sfm",
            config_path,
            {
                "methods": None if method is None else (method,),
                "delta": delta,
                "q_values": _list("q", q),
                "epsilon": eps,
                "K": iters,
                "d_min": dmin,
                "d_max": dmax,
                "norm": norm,
                "backend": backend,
                "cameras_path": cameras,
                "observations_path": observations,
                "out": kept_out,
            },
        )
        problem = _sfm.load_dataset(cameras, observations)
        true_outliers = None if outliers is None else _read_outliers(outliers)
        report = _sfm.run_sfm_outlier_removal(
            problem,
            cfg.method,
            cfg.delta,
            _params(cfg),
            depth_bounds=DepthBounds(cfg.d_min, cfg.d_max),
            norm_p=cfg.norm_p,
            tol=_tolerances(cfg),
            true_outliers=true_outliers,
        )
        kept_path = kept_out or _output.default_kept_path(observations)
        _output.write_kept_observations(kept_path, problem, report.result.inliers)

    if json_output:
        typer.echo(_output.render_sfm_report_json(report, cfg, kept_path))
    else:
        typer.echo(_output.render_sfm_report(report, cfg, kept_path))


@app.command()
def oracle(
    methods: str | None = typer.Option(
        None, "--methods", help="Comma-separated methods to compare against the optimum"
    ),
    delta: float | None = typer.Option(None, "--delta", help="Inlier threshold"),
    q: str | None = typer.Option(None, "--q", help="Reweighting exponent"),
    eps: float | None = typer.Option(None, "--eps", help="Reweighting epsilon"),
    iters: int | None = typer.Option(None, "--iters", help="Reweighting iterations K"),
    ratio: float | None = typer.Option(None, "--ratio", help="Outlier ratio"),
    repeats: int | None = typer.Option(None, "--repeats", help="Number of instances"),
    measurements: int | None = typer.Option(None, "--measurements", help="Measurements M (<= 20)"),
    dim: int | None = typer.Option(None, "--dim", help="Unknowns N"),
    seed: int | None = typer.Option(None, "--seed", help="Base seed"),
    backend: str | None = typer.Option(None, "--backend", help="LP backend: highs or mehrotra"),
    out: Path | None = typer.Option(None, "--out", help="Trial CSV path"),
    config_path: Path | None = typer.Option(None, "--config", help="JSON defaults file"),
    quiet: bool = typer.Option(False, "--quiet", help="Suppress error messages"),
):
    """Compare methods with exhaustive maximum consensus on tiny instances."""
    with _exit_codes(quiet):
        cfg = _load(
            "oracle",
            config_path,
            {
                "methods": _list("method", methods, str),
                "delta": delta,
                "q_values": _list("q", q),
                "epsilon": eps,
                "K": iters,
                "ratios": None if ratio is None else (ratio,),
                "repeats": repeats,
                "measurements": measurements,
                "dim": dim,
                "seed": seed,
                "backend": backend,
                "out": out,
            },
        )
        scenario = _synthbench.RegressionScenario(
            M=cfg.measurements,
            N=cfg.dim,
            inlier_sigma=cfg.inlier_sigma,
            outlier_sigma=cfg.outlier_sigma,
            outlier_ratio=cfg.ratios[0],
        )
        summary, records = _synthbench.run_oracle_comparison(
            scenario,
            cfg.methods,
            cfg.repeats,
            cfg.delta,
            _params(cfg),
            base_seed=cfg.seed,
            tol=_tolerances(cfg),
        )
        if cfg.out is not None:
            _output.write_trials_csv(cfg.out, records)

    typer.echo(
        f"M={cfg.measurements} N={cfg.dim} ratio={cfg.ratios[0]} delta={cfg.delta} "
        f"repeats={cfg.repeats} seed={cfg.seed}"
    )
    typer.echo(_output.render_oracle_table(summary))


@app.command()
def scene(
    out: Path = typer.Option(..., "--out", help="Directory for the generated dataset"),
    num_cameras: int = typer.Option(5, "--num-cameras", help="Cameras on the circle"),
    num_points: int = typer.Option(200, "--num-points", help="3D points"),
    corrupt: float = typer.Option(0.1, "--corrupt", help="Share of corrupted observations"),
    noise: float = typer.Option(1e-3, "--noise", help="Image noise sigma (normalized)"),
    seed: int = typer.Option(0, "--seed", help="Random seed"),
    quiet: bool = typer.Option(False, "--quiet", help="Suppress output"),
):
    """Generate a synthetic known-rotation dataset (cameras, observations, outliers)."""
    with _exit_codes(quiet):
        if num_cameras < 2:
            raise ConfigError("num-cameras", f"must be >= 2, got {num_cameras}")
        if num_points < 1:
            raise ConfigError("num-points", f"must be >= 1, got {num_points}")
        if not 0 <= corrupt < 1:
            raise ConfigError("corrupt", f"must lie in [0, 1), got {corrupt}")
        if noise < 0:
            raise ConfigError("noise", f"must be >= 0, got {noise}")
        if seed < 0:
            raise ConfigError("seed", f"must be >= 0, got {seed}")
        data = _synthbench.gen_scene(num_cameras, num_points, corrupt, seed, noise)
        out.mkdir(parents=True, exist_ok=True)
        _sfm.save_dataset(data.problem, out / "cameras.txt", out / "observations.txt")
        lines = ["# corrupted observation indices", *map(str, sorted(data.true_outliers))]
        (out / "outliers.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")

    _output.log_info(
        f"Wrote {data.problem.M} observations of {num_points} points by {num_cameras} "
        f"cameras to {out} ({len(data.true_outliers)} corrupted, seed {seed})",
        quiet,
    )


if __name__ == "__main__":
    app()
