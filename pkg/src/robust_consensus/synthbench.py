"""Synthetic instances and the trial harness behind the ``synth`` and ``oracle`` commands.

Regression instances: ``y = A x + noise`` with A and the true x uniform in [-1, 1],
Gaussian inlier noise, and a chosen share of measurements corrupted by much larger
Gaussian noise. Scenes: cameras on a circle looking at a point cloud, with some
observations displaced by large image offsets.
"""

from __future__ import annotations

import dataclasses
import math
import time
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from robust_consensus import consensus as _consensus
from robust_consensus import sfm as _sfm
from robust_consensus.config import derive_seed
from robust_consensus.errors import ConsensusError, DegenerateGeometry, TooLarge
from robust_consensus.lp_core import DEFAULT_TOLERANCES, SolverTolerances
from robust_consensus.residuals import (
    DepthBounds,
    LinearMeasurement,
    Norm,
    build_linear_system,
)

ITERATION_SWEEP_Q_VALUES = (0.1, 0.2, 0.5)
RATIO_SWEEP_RATIOS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6)
DEFAULT_REGRESSION_DELTA = 0.3


@dataclass(frozen=True)
class RegressionScenario:
    M: int = 500
    N: int = 8
    inlier_sigma: float = 0.1
    outlier_sigma: float = 1.0
    outlier_ratio: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.N < 1 or self.M <= self.N:
            msg = f"need M > N >= 1, got M={self.M}, N={self.N}"
            raise ValueError(msg)
        if not 0 <= self.outlier_ratio < 1:
            msg = f"outlier_ratio must lie in [0, 1), got {self.outlier_ratio}"
            raise ValueError(msg)
        if self.inlier_sigma < 0 or self.outlier_sigma < 0:
            msg = "noise levels must be >= 0"
            raise ValueError(msg)

    @property
    def outlier_count(self) -> int:
        return math.floor(self.outlier_ratio * self.M)


def gen_regression(
    scenario: RegressionScenario,
) -> tuple[list[LinearMeasurement], np.ndarray, frozenset[int]]:
    """Measurements, the ground-truth x, and the indices of corrupted measurements."""
    rng = np.random.default_rng(scenario.seed)
    A = rng.uniform(-1.0, 1.0, size=(scenario.M, scenario.N))
    x_true = rng.uniform(-1.0, 1.0, size=scenario.N)
    y = A @ x_true + rng.normal(0.0, scenario.inlier_sigma, size=scenario.M)
    outliers = rng.choice(scenario.M, size=scenario.outlier_count, replace=False)
    y[outliers] += rng.normal(0.0, scenario.outlier_sigma, size=outliers.size)
    measurements = [LinearMeasurement(a, yi) for a, yi in zip(A, y, strict=True)]
    return measurements, x_true, frozenset(int(i) for i in outliers)


# =============================================================================
# Synthetic scenes
# =============================================================================


@dataclass(frozen=True)
class SceneData:
    problem: _sfm.KnownRotationProblem
    x_true: np.ndarray
    true_outliers: frozenset[int]
    noise_sigma: float


def _look_at(center: np.ndarray) -> np.ndarray:
    forward = -center / np.linalg.norm(center)
    right = np.cross(forward, np.array([0.0, 0.0, 1.0]))
    right /= np.linalg.norm(right)
    return np.vstack([right, np.cross(forward, right), forward])


def gen_scene(
    cameras: int,
    points: int,
    corrupt_ratio: float,
    seed: int,
    noise_sigma: float = 1e-3,
    radius: float = 5.0,
    max_retries: int = 100,
) -> SceneData:
    """Cameras on a circle of ``radius`` looking at points in [-1, 1]^3.

    Every point is seen by every camera. Ground truth is expressed in the gauge of
    the first (anchor) camera, so ``x_true`` has zero anchor translation.
    """
    if cameras < 2:
        msg = f"a scene needs at least 2 cameras, got {cameras}"
        raise ValueError(msg)
    if points < 1:
        msg = f"a scene needs at least 1 point, got {points}"
        raise ValueError(msg)
    if not 0 <= corrupt_ratio < 1:
        msg = f"corrupt_ratio must lie in [0, 1), got {corrupt_ratio}"
        raise ValueError(msg)

    rng = np.random.default_rng(seed)
    bounds = DepthBounds()
    offset = rng.uniform(0.0, 2 * np.pi)
    angles = offset + 2 * np.pi * np.arange(cameras) / cameras
    heights = rng.uniform(-0.5, 0.5, size=cameras)
    centers = np.column_stack([radius * np.cos(angles), radius * np.sin(angles), heights])
    rotations = [_look_at(c) for c in centers]

    cloud = np.empty((points, 3))
    for j in range(points):
        for _ in range(max_retries):
            candidate = rng.uniform(-1.0, 1.0, size=3)
            depths = [R[2] @ (candidate - c) for R, c in zip(rotations, centers, strict=True)]
            if bounds.d_min < min(depths) and max(depths) < bounds.d_max:
                cloud[j] = candidate
                break
        else:
            msg = f"could not place point {j} in front of every camera"
            raise DegenerateGeometry(msg)

    # Move the world origin to the anchor camera's center.
    cloud -= centers[0]
    centers = centers - centers[0]
    translations = {i: -rotations[i] @ centers[i] for i in range(cameras)}

    observations = []
    for j in range(points):
        for i in range(cameras):
            z1, z2, _ = _sfm.project(rotations[i], translations[i], cloud[j])
            noise = rng.normal(0.0, noise_sigma, size=2)
            observations.append(_sfm.Observation(j, i, z1 + noise[0], z2 + noise[1]))

    corrupted_count = math.floor(corrupt_ratio * len(observations))
    corrupted = rng.choice(len(observations), size=corrupted_count, replace=False)
    low, high = max(20 * noise_sigma, 0.02), max(60 * noise_sigma, 0.06)
    for index in corrupted:
        obs = observations[index]
        magnitude = rng.uniform(low, high)
        angle = rng.uniform(0.0, 2 * np.pi)
        observations[index] = dataclasses.replace(
            obs, z1=obs.z1 + magnitude * np.cos(angle), z2=obs.z2 + magnitude * np.sin(angle)
        )

    problem = _sfm.KnownRotationProblem.from_observations(
        [_sfm.Camera(i, rotations[i]) for i in range(cameras)], observations
    )
    x_true = problem.pack({j: cloud[j] for j in range(points)}, translations)
    return SceneData(problem, x_true, frozenset(int(i) for i in corrupted), noise_sigma)


# =============================================================================
# Trials
# =============================================================================


@dataclass(frozen=True)
class TrialRecord:
    """One (instance, method) cell; metrics are None when the cell failed."""

    method: str
    M: int
    N: int
    outlier_ratio: float
    delta: float
    q: float | None
    K: int | None
    seed: int
    consensus_size: int | None
    removed: int | None
    recall: float | None
    precision: float | None
    rmse: float | None
    runtime_ms: float | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def regression_rmse(measurements: Sequence[LinearMeasurement], x, kept) -> float:
    if len(kept) == 0:
        return 0.0
    residuals = [measurements[i].a @ x - measurements[i].y for i in kept]
    return float(np.sqrt(np.mean(np.square(residuals))))


def _record(
    method: str,
    scenario_fields: dict,
    result: _consensus.ConsensusResult,
    true_outliers: frozenset[int],
    rmse: float,
    runtime: float,
    q: float | None = None,
    K: int | None = None,
) -> TrialRecord:
    recall, precision = _consensus.recall_precision(result, true_outliers)
    return TrialRecord(
        method=method,
        q=q,
        K=K,
        consensus_size=result.consensus_size,
        removed=int(result.removed.size),
        recall=recall,
        precision=precision,
        rmse=rmse,
        runtime_ms=1000.0 * runtime,
        **scenario_fields,
    )


def _failed(method, scenario_fields, exc, q=None, K=None) -> TrialRecord:
    return TrialRecord(
        method=method,
        q=q,
        K=K,
        consensus_size=None,
        removed=None,
        recall=None,
        precision=None,
        rmse=None,
        runtime_ms=None,
        error=f"{type(exc).__name__}: {exc}",
        **scenario_fields,
    )


def _method_variants(
    methods: Sequence[str], q_values: Sequence[float]
) -> Iterable[tuple[str, float | None]]:
    for method in methods:
        if method == "alg2":
            for q in q_values:
                yield method, q
        else:
            yield method, None


def run_regression_trial(
    scenario: RegressionScenario,
    method: str,
    delta: float,
    params: _consensus.ReweightParams | None = None,
    tol: SolverTolerances = DEFAULT_TOLERANCES,
    data: tuple | None = None,
) -> TrialRecord:
    """Run one method on one regression instance; solver errors become a failed record."""
    measurements, _, true_outliers = data or gen_regression(scenario)
    params = params or _consensus.ReweightParams()
    fields = {
        "M": scenario.M,
        "N": scenario.N,
        "outlier_ratio": scenario.outlier_ratio,
        "delta": delta,
        "seed": scenario.seed,
    }
    q, K = (params.q, params.K) if method == "alg2" else (None, None)
    try:
        start = time.perf_counter()
        if method == "ransac":
            result = _consensus.solve_ransac(measurements, delta, seed=scenario.seed)
        elif method == "exact":
            result = _consensus.exact_consensus(measurements, delta, tol)
        else:
            system = build_linear_system(measurements, delta)
            result = _consensus.solve(system, method, params, tol)
        runtime = time.perf_counter() - start
    except ConsensusError as exc:
        return _failed(method, fields, exc, q, K)
    rmse = regression_rmse(measurements, result.x, result.inliers)
    return _record(method, fields, result, true_outliers, rmse, runtime, q, K)


def run_sweep(
    grid: Sequence[RegressionScenario],
    methods: Sequence[str],
    repeats: int,
    delta: float = DEFAULT_REGRESSION_DELTA,
    q_values: Sequence[float] = (0.1,),
    K: int = 2,
    epsilon: float = 1e-3,
    base_seed: int = 0,
    tol: SolverTolerances = DEFAULT_TOLERANCES,
    on_record: Callable[[TrialRecord], None] | None = None,
) -> list[TrialRecord]:
    """Every (scenario, repeat, method[, q]) cell, in that nesting order.

    Cell (g, r) draws its instance from ``derive_seed(base_seed, g, r)``; all methods
    of a cell see the same instance. The scenarios' own ``seed`` fields are ignored.
    """
    if not grid:
        msg = "scenario grid is empty"
        raise ValueError(msg)
    records = []
    for g, scenario in enumerate(grid):
        for r in range(repeats):
            cell = dataclasses.replace(scenario, seed=derive_seed(base_seed, g, r))
            data = gen_regression(cell)
            for method, q in _method_variants(methods, q_values):
                params = _consensus.ReweightParams(q=q or 0.1, epsilon=epsilon, K=K)
                record = run_regression_trial(cell, method, delta, params, tol, data)
                records.append(record)
                if on_record:
                    on_record(record)
    return records


def run_iteration_sweep(
    K_values: Sequence[int] = tuple(range(1, 11)),
    q_values: Sequence[float] = ITERATION_SWEEP_Q_VALUES,
    scenario: RegressionScenario | None = None,
    repeats: int = 1,
    delta: float = DEFAULT_REGRESSION_DELTA,
    epsilon: float = 1e-3,
    base_seed: int = 0,
    tol: SolverTolerances = DEFAULT_TOLERANCES,
) -> list[TrialRecord]:
    """Consensus size of alg2 after each of K reweighting iterations, per q.

    One alg2 run with K = max(K_values) per (repeat, q); the record for K = k is read
    from the k-th iteration of its history. Runtimes are cumulative.
    """
    scenario = scenario or RegressionScenario(outlier_ratio=0.5)
    K_max = max(K_values)
    records = []
    for r in range(repeats):
        cell = dataclasses.replace(scenario, seed=derive_seed(base_seed, 0, r))
        measurements, _, true_outliers = gen_regression(cell)
        system = build_linear_system(measurements, delta)
        fields = {
            "M": cell.M,
            "N": cell.N,
            "outlier_ratio": cell.outlier_ratio,
            "delta": delta,
            "seed": cell.seed,
        }
        for q in q_values:
            params = _consensus.ReweightParams(q=q, epsilon=epsilon, K=K_max)
            try:
                full = _consensus.solve_alg2(system, params, tol)
            except ConsensusError as exc:
                records.extend(_failed("alg2", fields, exc, q, k) for k in K_values)
                continue
            for k in K_values:
                step = full.history[k - 1]
                partial = _consensus_at(full, step)
                rmse = regression_rmse(measurements, step.x, partial.inliers)
                records.append(
                    _record("alg2", fields, partial, true_outliers, rmse, step.elapsed, q, k)
                )
    return records


def _consensus_at(
    result: _consensus.ConsensusResult, step: _consensus.IterationRecord
) -> _consensus.ConsensusResult:
    removed = np.array(sorted(step.removed), dtype=int)
    return dataclasses.replace(
        result,
        x=step.x,
        s=step.slack,
        inliers=np.setdiff1d(np.arange(step.slack.size), removed),
        removed=removed,
        objective=step.objective,
        iterations=step.iteration,
        runtime=step.elapsed,
    )


def run_ratio_sweep(
    ratios: Sequence[float] = RATIO_SWEEP_RATIOS,
    methods: Sequence[str] = ("alg1", "alg2", "l1full", "ransac"),
    repeats: int = 100,
    delta: float = DEFAULT_REGRESSION_DELTA,
    K: int = 5,
    q: float = 0.1,
    base_seed: int = 0,
    M: int = 500,
    N: int = 8,
    tol: SolverTolerances = DEFAULT_TOLERANCES,
) -> list[TrialRecord]:
    """Consensus size and runtime per method across outlier ratios."""
    grid = [RegressionScenario(M=M, N=N, outlier_ratio=ratio) for ratio in ratios]
    return run_sweep(grid, methods, repeats, delta, (q,), K, base_seed=base_seed, tol=tol)


def run_scene_trials(
    cameras: int,
    points: int,
    corrupt_ratio: float,
    methods: Sequence[str],
    repeats: int,
    delta: float,
    params: _consensus.ReweightParams | None = None,
    noise_sigma: float = 1e-3,
    norm_p: Norm = Norm.L1,
    depth_bounds: DepthBounds | None = None,
    base_seed: int = 0,
    tol: SolverTolerances = DEFAULT_TOLERANCES,
) -> list[TrialRecord]:
    """Synthetic known-rotation scenes through run_sfm_outlier_removal."""
    params = params or _consensus.ReweightParams()
    records = []
    for r in range(repeats):
        seed = derive_seed(base_seed, r)
        scene = gen_scene(cameras, points, corrupt_ratio, seed, noise_sigma)
        fields = {
            "M": scene.problem.M,
            "N": scene.problem.N,
            "outlier_ratio": corrupt_ratio,
            "delta": delta,
            "seed": seed,
        }
        for method in methods:
            q, K = (params.q, params.K) if method == "alg2" else (None, None)
            try:
                report = _sfm.run_sfm_outlier_removal(
                    scene.problem,
                    method,
                    delta,
                    params,
                    depth_bounds=depth_bounds,
                    norm_p=norm_p,
                    tol=tol,
                    true_outliers=set(scene.true_outliers),
                )
            except ConsensusError as exc:
                records.append(_failed(method, fields, exc, q, K))
                continue
            rmse, runtime = report.rmse_kept, report.runtime
            records.append(
                _record(method, fields, report.result, scene.true_outliers, rmse, runtime, q, K)
            )
    return records


# =============================================================================
# Aggregation
# =============================================================================


@dataclass(frozen=True)
class AggregateRecord:
    method: str
    M: int
    N: int
    outlier_ratio: float
    delta: float
    q: float | None
    K: int | None
    trials: int
    consensus_mean: float
    consensus_std: float
    removed_mean: float
    removed_std: float
    recall_mean: float
    precision_mean: float
    rmse_mean: float
    runtime_ms_mean: float


def _group_key(record: TrialRecord) -> tuple:
    return (
        record.method,
        record.M,
        record.N,
        record.outlier_ratio,
        record.delta,
        record.q,
        record.K,
    )


def aggregate(records: Iterable[TrialRecord]) -> list[AggregateRecord]:
    """Mean and population standard deviation per (method, scenario, q, K) group.

    Groups appear in first-seen order; failed records are left out of the statistics.
    """
    groups: dict[tuple, list[TrialRecord]] = {}
    for record in records:
        groups.setdefault(_group_key(record), []).append(record)

    rows = []
    for key, members in groups.items():
        ok = [r for r in members if r.ok]
        if not ok:
            continue
        consensus = np.array([r.consensus_size for r in ok], dtype=float)
        removed = np.array([r.removed for r in ok], dtype=float)
        method, M, N, ratio, delta, q, K = key
        rows.append(
            AggregateRecord(
                method=method,
                M=M,
                N=N,
                outlier_ratio=ratio,
                delta=delta,
                q=q,
                K=K,
                trials=len(ok),
                consensus_mean=float(consensus.mean()),
                consensus_std=float(consensus.std()),
                removed_mean=float(removed.mean()),
                removed_std=float(removed.std()),
                recall_mean=float(np.mean([r.recall for r in ok])),
                precision_mean=float(np.mean([r.precision for r in ok])),
                rmse_mean=float(np.mean([r.rmse for r in ok])),
                runtime_ms_mean=float(np.mean([r.runtime_ms for r in ok])),
            )
        )
    return rows


# =============================================================================
# Oracle comparison
# =============================================================================


def run_oracle_comparison(
    scenario: RegressionScenario,
    methods: Sequence[str],
    repeats: int,
    delta: float,
    params: _consensus.ReweightParams | None = None,
    base_seed: int = 0,
    tol: SolverTolerances = DEFAULT_TOLERANCES,
) -> tuple[list[dict], list[TrialRecord]]:
    """Each method's consensus size against the exhaustive optimum on tiny instances.

    Returns one summary row per method (trials, mean size, mean and max gap to the
    optimum, share of optimal instances) and every trial record, exact ones included.
    """
    if scenario.M > _consensus.EXACT_MAX_MEASUREMENTS:
        msg = (
            f"the oracle enumerates 2^M subsets; M={scenario.M} exceeds "
            f"{_consensus.EXACT_MAX_MEASUREMENTS}"
        )
        raise TooLarge(msg)
    methods = [m for m in methods if m != "exact"]
    gaps: dict[str, list[int]] = {m: [] for m in methods}
    sizes: dict[str, list[int]] = {m: [] for m in methods}
    records = []
    for r in range(repeats):
        cell = dataclasses.replace(scenario, seed=derive_seed(base_seed, 0, r))
        data = gen_regression(cell)
        exact = run_regression_trial(cell, "exact", delta, params, tol, data)
        records.append(exact)
        if not exact.ok:
            continue
        for method in methods:
            record = run_regression_trial(cell, method, delta, params, tol, data)
            records.append(record)
            if record.ok:
                sizes[method].append(record.consensus_size)
                gaps[method].append(exact.consensus_size - record.consensus_size)

    summary = []
    for method in methods:
        if not gaps[method]:
            continue
        method_gaps = np.array(gaps[method])
        summary.append(
            {
                "method": method,
                "trials": len(method_gaps),
                "mean_size": float(np.mean(sizes[method])),
                "mean_gap": float(method_gaps.mean()),
                "max_gap": int(method_gaps.max()),
                "optimal_share": float(np.mean(method_gaps == 0)),
            }
        )
    return summary, records
