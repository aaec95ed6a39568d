"""Consensus solvers over a ConstraintSystem.

- ``solve_alg1``: one ℓ1 slack program with one slack per measurement.
- ``solve_alg2``: K weighted ℓ1 programs with ℓq-style reweighting.
- ``solve_l1_full``: the full-slack ℓ1 baseline (one slack per row).
- ``solve_linf_iterative``: repeated min-max slack with removal of the worst.
- ``solve_ransac``: hypothesize-and-verify on linear measurements.
- ``exact_consensus``: exhaustive subset enumeration, for small instances.
"""

from __future__ import annotations

import math
import time
from collections.abc import Sequence, Set
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from robust_consensus.errors import (
    DegenerateSample,
    DimensionMismatch,
    NonpositiveDelta,
    SolverFailure,
    TooLarge,
)
from robust_consensus.lp_core import (
    DEFAULT_TOLERANCES,
    LinearProgram,
    LPSolution,
    LPStatus,
    SolverTolerances,
    solve_lp,
)
from robust_consensus.residuals import (
    ConstraintSystem,
    LinearMeasurement,
    build_linear_system,
)

METHODS = ("alg1", "alg2", "l1full", "linf")
FORMULATIONS = ("primal", "dual")

TAU_SLACK = 1e-6
TAU_TIE = 1e-9
EXACT_MAX_MEASUREMENTS = 20
RANSAC_MAX_TRIALS = 10_000


@dataclass(frozen=True)
class ReweightParams:
    q: float = 0.1
    epsilon: float = 1e-3
    K: int = 2

    def __post_init__(self):
        if not 0 < self.q < 1:
            msg = f"q must lie in (0, 1), got {self.q}"
            raise ValueError(msg)
        if not self.epsilon > 0:
            msg = f"epsilon must be > 0, got {self.epsilon}"
            raise ValueError(msg)
        if self.K < 1:
            msg = f"K must be >= 1, got {self.K}"
            raise ValueError(msg)


@dataclass(frozen=True)
class IterationRecord:
    """One weighted solve of the reweighting loop."""

    iteration: int
    weights: np.ndarray
    slack: np.ndarray
    objective: float
    # Current weights applied to the previous iteration's slack.
    previous_objective: float | None
    removed: frozenset[int]
    x: np.ndarray | None = None
    # Seconds since the solver started, at the end of this iteration.
    elapsed: float = 0.0


@dataclass
class ConsensusResult:
    method: str
    x: np.ndarray
    s: np.ndarray
    inliers: np.ndarray
    removed: np.ndarray
    objective: float
    duality_gap: float
    iterations: int
    runtime: float
    history: list[IterationRecord] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def consensus_size(self) -> int:
        return int(self.inliers.size)

    @property
    def M(self) -> int:
        return int(self.s.size)

    @property
    def zero_depth(self) -> list[int]:
        """Kept measurements whose depth is not positive at x (depth-free systems only)."""
        return self.diagnostics.get("zero_depth", [])


def recall_precision(result: ConsensusResult, true_outliers: Set[int]) -> tuple[float, float]:
    """True-inlier recall and true-outlier precision of a result.

    Recall is the share of true inliers that were kept (1.0 when there are none);
    precision is the share of removed measurements that are true outliers (1.0 when
    nothing was removed).
    """
    kept = set(result.inliers.tolist())
    true_inliers = set(range(result.M)) - set(true_outliers)
    recall = len(true_inliers & kept) / len(true_inliers) if true_inliers else 1.0
    if result.removed.size == 0:
        return recall, 1.0
    hits = len(set(true_outliers) & set(result.removed.tolist()))
    return recall, hits / result.removed.size


def _classify(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    removed = np.flatnonzero(s > TAU_SLACK)
    inliers = np.flatnonzero(s <= TAU_SLACK)
    return inliers, removed


def _require_optimal(solution: LPSolution, what: str):
    if solution.status == LPStatus.OPTIMAL:
        return
    if solution.status == LPStatus.INFEASIBLE:
        msg = f"{what}: LP reported infeasible, which slack variables rule out"
    else:
        msg = f"{what}: LP ended with status '{solution.status}' ({solution.message})"
    raise SolverFailure(msg)


def _flag_zero_depth(sys: ConstraintSystem, result: ConsensusResult) -> ConsensusResult:
    # Without depth rows x = 0 satisfies every homogeneous block.
    flagged = sys.zero_depth(result.x, result.inliers, TAU_SLACK)
    if flagged:
        result.diagnostics["zero_depth"] = flagged
    return result


def reweight(s: np.ndarray, params: ReweightParams) -> np.ndarray:
    """w_i = (|s_i| + epsilon)^(q - 1)."""
    return (np.abs(s) + params.epsilon) ** (params.q - 1.0)


def slack_program(sys: ConstraintSystem, weights: np.ndarray) -> LinearProgram:
    """minimize w@s over (x, s) subject to A x - J^T s <= b, s >= 0."""
    N, M = sys.N, sys.M
    ineq = sp.hstack([sys.A, -sys.selector().T], format="csr")
    return LinearProgram(
        cost=np.concatenate([np.zeros(N), weights]),
        ineq_matrix=ineq,
        ineq_rhs=sys.b,
        lower=np.concatenate([np.full(N, -np.inf), np.zeros(M)]),
    )


def dual_slack_program(sys: ConstraintSystem, weights: np.ndarray) -> LinearProgram:
    """minimize b@y over (y, v) subject to A^T y = 0, J y + v = w, y, v >= 0."""
    N, M = sys.N, sys.M
    rows = sys.A.shape[0]
    eq = sp.vstack(
        [
            sp.hstack([sys.A.T, sp.csr_matrix((N, M))]),
            sp.hstack([sys.selector(), sp.identity(M, format="csr")]),
        ],
        format="csr",
    )
    return LinearProgram(
        cost=np.concatenate([sys.b, np.zeros(M)]),
        ineq_matrix=None,
        ineq_rhs=None,
        lower=np.zeros(rows + M),
        eq_matrix=eq,
        eq_rhs=np.concatenate([np.zeros(N), weights]),
    )


def _solve_weighted(
    sys: ConstraintSystem,
    weights: np.ndarray,
    tol: SolverTolerances,
    formulation: str,
) -> tuple[np.ndarray, np.ndarray, float, LPSolution]:
    if formulation == "primal":
        solution = solve_lp(slack_program(sys, weights), tol)
        _require_optimal(solution, "weighted slack program")
        x = solution.primal[: sys.N]
        s = np.maximum(solution.primal[sys.N :], 0.0)
    elif formulation == "dual":
        solution = solve_lp(dual_slack_program(sys, weights), tol)
        _require_optimal(solution, "dual slack program")
        x = solution.eq_dual[: sys.N].copy()
        s = np.maximum(-solution.eq_dual[sys.N :], 0.0)
    else:
        msg = f"formulation must be one of {FORMULATIONS}, got '{formulation}'"
        raise ValueError(msg)
    return x, s, float(weights @ s), solution


def solve_alg1(
    sys: ConstraintSystem,
    tol: SolverTolerances = DEFAULT_TOLERANCES,
    formulation: str = "primal",
) -> ConsensusResult:
    """ℓ1 slack minimization with one slack per measurement; removes s_i > TAU_SLACK."""
    start = time.perf_counter()
    weights = np.ones(sys.M)
    x, s, objective, solution = _solve_weighted(sys, weights, tol, formulation)
    inliers, removed = _classify(s)
    runtime = time.perf_counter() - start
    record = IterationRecord(
        1, weights, s, objective, None, frozenset(removed.tolist()), x=x, elapsed=runtime
    )
    result = ConsensusResult(
        method="alg1",
        x=x,
        s=s,
        inliers=inliers,
        removed=removed,
        objective=objective,
        duality_gap=solution.relative_gap(),
        iterations=1,
        runtime=runtime,
        history=[record],
        diagnostics={"lp_iterations": solution.iterations, "formulation": formulation},
    )
    return _flag_zero_depth(sys, result)


def solve_alg2(
    sys: ConstraintSystem,
    params: ReweightParams | None = None,
    tol: SolverTolerances = DEFAULT_TOLERANCES,
    formulation: str = "primal",
) -> ConsensusResult:
    """K reweighted slack programs starting from unit weights; the K-th slack decides."""
    params = params or ReweightParams()
    start = time.perf_counter()
    weights = np.ones(sys.M)
    history: list[IterationRecord] = []
    previous_s = None
    lp_iterations = 0
    for k in range(1, params.K + 1):
        x, s, objective, solution = _solve_weighted(sys, weights, tol, formulation)
        lp_iterations += solution.iterations
        history.append(
            IterationRecord(
                iteration=k,
                weights=weights,
                slack=s,
                objective=objective,
                previous_objective=None if previous_s is None else float(weights @ previous_s),
                removed=frozenset(np.flatnonzero(s > TAU_SLACK).tolist()),
                x=x,
                elapsed=time.perf_counter() - start,
            )
        )
        previous_s = s
        weights = reweight(s, params)

    inliers, removed = _classify(s)
    result = ConsensusResult(
        method="alg2",
        x=x,
        s=s,
        inliers=inliers,
        removed=removed,
        objective=objective,
        duality_gap=solution.relative_gap(),
        iterations=params.K,
        runtime=time.perf_counter() - start,
        history=history,
        diagnostics={
            "lp_iterations": lp_iterations,
            "formulation": formulation,
            "q": params.q,
            "epsilon": params.epsilon,
            "K": params.K,
        },
    )
    return _flag_zero_depth(sys, result)


def solve_l1_full(
    sys: ConstraintSystem, tol: SolverTolerances = DEFAULT_TOLERANCES
) -> ConsensusResult:
    """One slack per row; a measurement is removed when its largest row slack exceeds TAU_SLACK."""
    start = time.perf_counter()
    N, rows = sys.N, sys.A.shape[0]
    lp = LinearProgram(
        cost=np.concatenate([np.zeros(N), np.ones(rows)]),
        ineq_matrix=sp.hstack([sys.A, -sp.identity(rows, format="csr")], format="csr"),
        ineq_rhs=sys.b,
        lower=np.concatenate([np.full(N, -np.inf), np.zeros(rows)]),
    )
    solution = solve_lp(lp, tol)
    _require_optimal(solution, "full-slack program")
    x = solution.primal[:N]
    row_slack = np.maximum(solution.primal[N:], 0.0)
    s = row_slack.reshape(sys.M, sys.kappa).max(axis=1)
    inliers, removed = _classify(s)
    result = ConsensusResult(
        method="l1full",
        x=x,
        s=s,
        inliers=inliers,
        removed=removed,
        objective=float(row_slack.sum()),
        duality_gap=solution.relative_gap(),
        iterations=1,
        runtime=time.perf_counter() - start,
        diagnostics={"lp_iterations": solution.iterations, "row_slack": row_slack},
    )
    return _flag_zero_depth(sys, result)


def _min_max_slack(
    sys: ConstraintSystem, tol: SolverTolerances
) -> tuple[np.ndarray, float, LPSolution]:
    N, rows = sys.N, sys.A.shape[0]
    lp = LinearProgram(
        cost=np.concatenate([np.zeros(N), [1.0]]),
        ineq_matrix=sp.hstack([sys.A, sp.csr_matrix(-np.ones((rows, 1)))], format="csr"),
        ineq_rhs=sys.b,
        lower=np.concatenate([np.full(N, -np.inf), [0.0]]),
    )
    solution = solve_lp(lp, tol)
    _require_optimal(solution, "min-max slack program")
    return solution.primal[:N], float(solution.primal[N]), solution


def solve_linf_iterative(
    sys: ConstraintSystem, tol: SolverTolerances = DEFAULT_TOLERANCES
) -> ConsensusResult:
    """Minimize the largest slack, drop every measurement tied at it, repeat until it is zero."""
    start = time.perf_counter()
    active = np.arange(sys.M)
    s = np.zeros(sys.M)
    x = np.zeros(sys.N)
    gamma = 0.0
    solves = 0
    lp_iterations = 0
    gap = 0.0
    while active.size:
        sub = sys.subsystem(active)
        x, gamma, solution = _min_max_slack(sub, tol)
        solves += 1
        lp_iterations += solution.iterations
        gap = solution.relative_gap()
        if gamma <= TAU_SLACK:
            break
        violation = sub.row_violation(x).reshape(sub.M, sub.kappa).max(axis=1)
        tied = np.flatnonzero(violation >= gamma - TAU_TIE)
        if tied.size == 0:
            tied = np.array([int(np.argmax(violation))])
        s[active[tied]] = gamma
        active = np.delete(active, tied)

    s[active] = np.maximum(sys.subsystem(active).block_violation(x), 0.0) if active.size else 0.0
    inliers, removed = _classify(s)
    result = ConsensusResult(
        method="linf",
        x=x,
        s=s,
        inliers=inliers,
        removed=removed,
        objective=gamma,
        duality_gap=gap,
        iterations=solves,
        runtime=time.perf_counter() - start,
        diagnostics={"lp_iterations": lp_iterations},
    )
    return _flag_zero_depth(sys, result)


def solve(
    sys: ConstraintSystem,
    method: str,
    params: ReweightParams | None = None,
    tol: SolverTolerances = DEFAULT_TOLERANCES,
    formulation: str = "primal",
) -> ConsensusResult:
    """Dispatch to the named LP-based method."""
    if method == "alg1":
        return solve_alg1(sys, tol, formulation)
    if method == "alg2":
        return solve_alg2(sys, params, tol, formulation)
    if method == "l1full":
        return solve_l1_full(sys, tol)
    if method == "linf":
        return solve_linf_iterative(sys, tol)
    msg = f"unknown method '{method}', expected one of {METHODS}"
    raise ValueError(msg)


def variable_count(sys: ConstraintSystem, method: str) -> int:
    """Number of primal unknowns the method's program solves for."""
    counts = {
        "alg1": sys.N + sys.M,
        "alg2": sys.N + sys.M,
        "l1full": sys.N + sys.kappa * sys.M,
        "linf": sys.N + 1,
    }
    if method not in counts:
        msg = f"unknown method '{method}', expected one of {METHODS}"
        raise ValueError(msg)
    return counts[method]


# =============================================================================
# RANSAC
# =============================================================================


def ransac_trial_count(inlier_fraction: float, sample_size: int, rho: float) -> int:
    """ceil(log(1 - rho) / log(1 - fraction^n)), capped at RANSAC_MAX_TRIALS."""
    p_good = inlier_fraction**sample_size
    if p_good <= 0:
        return RANSAC_MAX_TRIALS
    if p_good >= 1 - 1e-12:
        return 1
    trials = math.ceil(math.log(1 - rho) / math.log(1 - p_good))
    return min(max(trials, 1), RANSAC_MAX_TRIALS)


def _minimal_solve(A: np.ndarray, y: np.ndarray) -> np.ndarray:
    if np.linalg.cond(A) > 1e12:
        msg = "minimal sample is singular"
        raise DegenerateSample(msg)
    try:
        return np.linalg.solve(A, y)
    except np.linalg.LinAlgError as exc:
        msg = "minimal sample is singular"
        raise DegenerateSample(msg) from exc


def solve_ransac(
    measurements: Sequence[LinearMeasurement],
    delta: float,
    rho: float = 0.99,
    seed: int = 0,
) -> ConsensusResult:
    """Hypothesize from N-point minimal samples and keep the largest consensus."""
    if not delta > 0:
        msg = f"inlier threshold delta must be > 0, got {delta}"
        raise NonpositiveDelta(msg)
    if not 0 < rho < 1:
        msg = f"rho must lie in (0, 1), got {rho}"
        raise ValueError(msg)
    start = time.perf_counter()
    A = np.vstack([m.a for m in measurements])
    y = np.array([m.y for m in measurements])
    M, N = A.shape
    if M < N:
        msg = f"RANSAC needs at least N={N} measurements, got {M}"
        raise DimensionMismatch(msg)

    rng = np.random.default_rng(seed)
    best_x = None
    best_count = -1
    needed = RANSAC_MAX_TRIALS
    trials = 0
    degenerate = 0
    while trials < needed:
        trials += 1
        sample = rng.choice(M, size=N, replace=False)
        try:
            x = _minimal_solve(A[sample], y[sample])
        except DegenerateSample:
            degenerate += 1
            continue
        count = int(np.count_nonzero(np.abs(A @ x - y) <= delta))
        if count > best_count:
            best_x, best_count = x, count
            needed = ransac_trial_count(count / M, N, rho)

    if best_x is None:
        msg = f"all {trials} minimal samples were singular"
        raise DegenerateSample(msg)

    s = np.maximum(np.abs(A @ best_x - y) - delta, 0.0)
    inliers, removed = _classify(s)
    return ConsensusResult(
        method="ransac",
        x=best_x,
        s=s,
        inliers=inliers,
        removed=removed,
        objective=float(inliers.size),
        duality_gap=0.0,
        iterations=trials,
        runtime=time.perf_counter() - start,
        diagnostics={"degenerate_samples": degenerate, "rho": rho, "seed": seed},
    )


# =============================================================================
# Exhaustive oracle
# =============================================================================


def exact_consensus_system(
    sys: ConstraintSystem,
    tol: SolverTolerances = DEFAULT_TOLERANCES,
    max_measurements: int = EXACT_MAX_MEASUREMENTS,
) -> ConsensusResult:
    """Largest feasible subset by enumeration; ties go to the lexicographically smallest."""
    if sys.M > max_measurements:
        msg = f"exact consensus enumerates 2^M subsets; M={sys.M} exceeds {max_measurements}"
        raise TooLarge(msg)
    start = time.perf_counter()
    checks = 0
    for size in range(sys.M, 0, -1):
        for subset in combinations(range(sys.M), size):
            checks += 1
            x, gamma, _ = _min_max_slack(sys.subsystem(subset), tol)
            if gamma <= TAU_SLACK:
                return _exact_result(sys, x, subset, checks, start)
    return _exact_result(sys, np.zeros(sys.N), (), checks, start)


def _exact_result(sys, x, subset, checks, start) -> ConsensusResult:
    kept = np.zeros(sys.M, dtype=bool)
    kept[list(subset)] = True
    violation = np.maximum(sys.block_violation(x), 0.0)
    # Membership decides; violations of the excluded set are reported as slack.
    s = np.where(kept, np.minimum(violation, TAU_SLACK), np.maximum(violation, 2 * TAU_SLACK))
    return ConsensusResult(
        method="exact",
        x=x,
        s=s,
        inliers=np.flatnonzero(kept),
        removed=np.flatnonzero(~kept),
        objective=float(kept.sum()),
        duality_gap=0.0,
        iterations=checks,
        runtime=time.perf_counter() - start,
        diagnostics={"subsets_checked": checks},
    )


def exact_consensus(
    measurements: Sequence[LinearMeasurement],
    delta: float,
    tol: SolverTolerances = DEFAULT_TOLERANCES,
) -> ConsensusResult:
    """Exact maximum consensus for linear measurements (M <= 20)."""
    if len(measurements) > EXACT_MAX_MEASUREMENTS:
        msg = (
            f"exact consensus enumerates 2^M subsets; M={len(measurements)} "
            f"exceeds {EXACT_MAX_MEASUREMENTS}"
        )
        raise TooLarge(msg)
    return exact_consensus_system(build_linear_system(measurements, delta), tol)
