"""Linear programming core: problem/solution types and two primal-dual backends.

Every consensus algorithm poses its program as a ``LinearProgram``::

    minimize    cost @ x
    subject to  ineq_matrix @ x <= ineq_rhs
                eq_matrix @ x == eq_rhs          (optional)
                lower <= x <= upper

``solve_lp`` returns primal and dual vectors together and checks the
certificate (relative duality gap and primal feasibility) before reporting
``LPStatus.OPTIMAL``. Two backends are available:

- ``highs``: scipy's HiGHS interior-point method (crossover on), the default.
- ``mehrotra``: an in-package homogeneous self-dual predictor-corrector on the
  Ruiz-equilibrated standard form, with sparse normal equations. It stops once
  the de-scaled iterate passes the same certificate ``solve_lp`` applies.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import linprog

from robust_consensus.errors import MalformedProblem, NumericalFailure

BACKENDS = ("highs", "mehrotra")

# Fraction of the distance to the boundary taken by each Mehrotra step.
_STEP_FRACTION = 0.99995
_DENSE_NORMAL_ROWS = 400
_RUIZ_PASSES = 10
# Diagonal shifts, relative to the largest pivot, tried when a factorization fails.
_REGULARIZATION = (0.0, 1e-14, 1e-12, 1e-10, 1e-8)
# Cap on the smaller half of a split free variable, in units of tau.
_FREE_SPLIT_CAP = 1e3
_STALL_STEP = 1e-10
_STALL_ITERATIONS = 5
# Extra iterations spent tightening a point that already passes the certificate.
_POLISH_ITERATIONS = 10


class LPStatus(StrEnum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class SolverTolerances:
    """Tolerances shared by both backends.

    feas_tol is applied per constraint, scaled by ``1 + |rhs|``; gap_tol is
    relative to ``1 + |primal objective|``.
    """

    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    cs_tol: float = 1e-6
    max_iter: int = 200
    backend: str = "highs"

    def __post_init__(self):
        if self.backend not in BACKENDS:
            msg = f"Unknown LP backend '{self.backend}', expected one of {BACKENDS}"
            raise MalformedProblem(msg)
        if self.feas_tol <= 0 or self.gap_tol <= 0 or self.max_iter < 1:
            msg = "Solver tolerances must be positive and max_iter >= 1"
            raise MalformedProblem(msg)


DEFAULT_TOLERANCES = SolverTolerances()


def _as_csr(matrix, n_cols: int) -> sp.csr_matrix:
    if matrix is None:
        return sp.csr_matrix((0, n_cols))
    if sp.issparse(matrix):
        return sp.csr_matrix(matrix, dtype=float)
    dense = np.atleast_2d(np.asarray(matrix, dtype=float))
    if dense.size == 0:
        return sp.csr_matrix((0, n_cols))
    return sp.csr_matrix(dense)


def _frozen(values) -> np.ndarray:
    array = np.array(values, dtype=float).ravel()
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class LinearProgram:
    """An immutable LP instance; ``lower``/``upper`` default to free variables."""

    cost: np.ndarray
    ineq_matrix: sp.csr_matrix
    ineq_rhs: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    eq_matrix: sp.csr_matrix | None = None
    eq_rhs: np.ndarray | None = None

    def __post_init__(self):
        cost = _frozen(self.cost)
        n = cost.size
        ineq_matrix = _as_csr(self.ineq_matrix, n)
        ineq_rhs = _frozen(self.ineq_rhs if self.ineq_rhs is not None else [])
        eq_matrix = _as_csr(self.eq_matrix, n)
        eq_rhs = _frozen(self.eq_rhs if self.eq_rhs is not None else [])
        lower = _frozen(np.full(n, -np.inf) if self.lower is None else self.lower)
        upper = _frozen(np.full(n, np.inf) if self.upper is None else self.upper)

        if ineq_matrix.shape != (ineq_rhs.size, n):
            msg = (
                f"ineq_matrix has shape {ineq_matrix.shape}, expected "
                f"({ineq_rhs.size}, {n}) from ineq_rhs and cost"
            )
            raise MalformedProblem(msg)
        if eq_matrix.shape != (eq_rhs.size, n):
            msg = (
                f"eq_matrix has shape {eq_matrix.shape}, expected "
                f"({eq_rhs.size}, {n}) from eq_rhs and cost"
            )
            raise MalformedProblem(msg)
        if lower.size != n or upper.size != n:
            msg = f"bounds must have length {n}"
            raise MalformedProblem(msg)
        if np.any(lower > upper):
            msg = "every lower bound must be <= its upper bound"
            raise MalformedProblem(msg)
        if np.any(np.isposinf(lower)) or np.any(np.isneginf(upper)):
            msg = "lower bounds cannot be +inf and upper bounds cannot be -inf"
            raise MalformedProblem(msg)
        if not (np.all(np.isfinite(cost)) and np.all(np.isfinite(ineq_rhs))):
            msg = "cost and ineq_rhs must be finite"
            raise MalformedProblem(msg)

        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "ineq_matrix", ineq_matrix)
        object.__setattr__(self, "ineq_rhs", ineq_rhs)
        object.__setattr__(self, "eq_matrix", eq_matrix)
        object.__setattr__(self, "eq_rhs", eq_rhs)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def n(self) -> int:
        return self.cost.size

    @property
    def m(self) -> int:
        return self.ineq_rhs.size

    @property
    def m_eq(self) -> int:
        return self.eq_rhs.size


@dataclass
class LPSolution:
    """Primal-dual answer of ``solve_lp``.

    ``dual`` holds the nonnegative multipliers of the inequality rows and
    ``eq_dual`` the (free) multipliers of the equality rows, both as
    sensitivities of the optimal value to the corresponding right-hand side
    (with the inequality sign flipped so that ``dual >= 0``).
    """

    status: LPStatus
    primal: np.ndarray | None = None
    dual: np.ndarray | None = None
    eq_dual: np.ndarray | None = None
    primal_objective: float = float("nan")
    dual_objective: float = float("nan")
    iterations: int = 0
    backend: str = "highs"
    runtime: float = 0.0
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == LPStatus.OPTIMAL

    def relative_gap(self) -> float:
        return abs(self.primal_objective - self.dual_objective) / (
            1.0 + abs(self.primal_objective)
        )

    def complementarity(self, lp: LinearProgram) -> float:
        """Sum of dual_i * (rhs_i - row_i @ primal) over the inequality rows."""
        if self.primal is None or self.dual is None or lp.m == 0:
            return 0.0
        surplus = lp.ineq_rhs - lp.ineq_matrix @ self.primal
        return float(np.abs(self.dual @ surplus))


def max_violation(lp: LinearProgram, x: np.ndarray) -> float:
    """Largest scaled violation of any row or bound at ``x``."""
    worst = 0.0
    if lp.m:
        excess = (lp.ineq_matrix @ x - lp.ineq_rhs) / (1.0 + np.abs(lp.ineq_rhs))
        worst = max(worst, float(excess.max()))
    if lp.m_eq:
        excess = np.abs(lp.eq_matrix @ x - lp.eq_rhs) / (1.0 + np.abs(lp.eq_rhs))
        worst = max(worst, float(excess.max()))
    finite_lo = np.isfinite(lp.lower)
    if np.any(finite_lo):
        excess = (lp.lower - x)[finite_lo] / (1.0 + np.abs(lp.lower[finite_lo]))
        worst = max(worst, float(excess.max()))
    finite_hi = np.isfinite(lp.upper)
    if np.any(finite_hi):
        excess = (x - lp.upper)[finite_hi] / (1.0 + np.abs(lp.upper[finite_hi]))
        worst = max(worst, float(excess.max()))
    return worst


def solve_lp(lp: LinearProgram, tol: SolverTolerances = DEFAULT_TOLERANCES) -> LPSolution:
    """Solve ``lp`` and certify the answer.

    Returns a typed status for infeasible, unbounded, and iteration-limited
    problems; raises NumericalFailure when the backend breaks down or when an
    Optimal answer fails the gap or feasibility check.
    """
    if not isinstance(lp, LinearProgram):
        msg = f"solve_lp expects a LinearProgram, got {type(lp).__name__}"
        raise MalformedProblem(msg)

    start = time.perf_counter()
    if tol.backend == "highs":
        solution = _solve_highs(lp, tol)
    else:
        solution = _solve_mehrotra(lp, tol)
    solution.runtime = time.perf_counter() - start

    if solution.optimal:
        _certify(lp, solution, tol)
    return solution


def _certificate_failure(
    lp: LinearProgram, solution: LPSolution, tol: SolverTolerances
) -> str | None:
    gap = solution.relative_gap()
    if not gap <= tol.gap_tol:
        return (
            f"{solution.backend}: relative duality gap {gap:.3e} exceeds "
            f"gap_tol {tol.gap_tol:.1e} (primal {solution.primal_objective:.12g}, "
            f"dual {solution.dual_objective:.12g})"
        )
    violation = max_violation(lp, solution.primal)
    if not violation <= tol.feas_tol:
        return (
            f"{solution.backend}: primal violation {violation:.3e} exceeds "
            f"feas_tol {tol.feas_tol:.1e}"
        )
    return None


def _certify(lp: LinearProgram, solution: LPSolution, tol: SolverTolerances):
    failure = _certificate_failure(lp, solution, tol)
    if failure is not None:
        raise NumericalFailure(failure)


# =============================================================================
# HiGHS backend
# =============================================================================

_HIGHS_STATUS = {
    0: LPStatus.OPTIMAL,
    1: LPStatus.ITERATION_LIMIT,
    2: LPStatus.INFEASIBLE,
    3: LPStatus.UNBOUNDED,
}


def _bound_pairs(lp: LinearProgram) -> list[tuple[float | None, float | None]]:
    return [
        (None if np.isneginf(lo) else float(lo), None if np.isposinf(hi) else float(hi))
        for lo, hi in zip(lp.lower, lp.upper, strict=True)
    ]


def _solve_highs(lp: LinearProgram, tol: SolverTolerances) -> LPSolution:
    # Tighter than the certificate so the check has headroom.
    inner = 0.1 * min(tol.feas_tol, tol.gap_tol)
    res = linprog(
        lp.cost,
        A_ub=lp.ineq_matrix if lp.m else None,
        b_ub=lp.ineq_rhs if lp.m else None,
        A_eq=lp.eq_matrix if lp.m_eq else None,
        b_eq=lp.eq_rhs if lp.m_eq else None,
        bounds=_bound_pairs(lp),
        method="highs-ipm",
        options={
            "maxiter": tol.max_iter,
            "primal_feasibility_tolerance": inner,
            "dual_feasibility_tolerance": inner,
            "ipm_optimality_tolerance": inner,
            "presolve": True,
        },
    )
    if res.status not in _HIGHS_STATUS:
        msg = f"highs: {res.message}"
        raise NumericalFailure(msg)

    status = _HIGHS_STATUS[res.status]
    iterations = int(getattr(res, "nit", 0) or 0)
    if status != LPStatus.OPTIMAL or res.x is None:
        if status == LPStatus.OPTIMAL:
            msg = "highs: reported success without a primal vector"
            raise NumericalFailure(msg)
        return LPSolution(status=status, iterations=iterations, backend="highs",
                          message=res.message)

    primal = np.asarray(res.x, dtype=float)
    ineq_marg = (
        np.asarray(res.ineqlin.marginals, dtype=float) if lp.m else np.zeros(0)
    )
    eq_marg = np.asarray(res.eqlin.marginals, dtype=float) if lp.m_eq else np.zeros(0)
    lower_marg = np.asarray(res.lower.marginals, dtype=float)
    upper_marg = np.asarray(res.upper.marginals, dtype=float)

    # Optimal value as a sum of rhs * sensitivity over rows and finite bounds.
    lo_fin = np.isfinite(lp.lower)
    hi_fin = np.isfinite(lp.upper)
    dual_objective = float(
        lp.ineq_rhs @ ineq_marg
        + lp.eq_rhs @ eq_marg
        + lp.lower[lo_fin] @ lower_marg[lo_fin]
        + lp.upper[hi_fin] @ upper_marg[hi_fin]
    )
    return LPSolution(
        status=status,
        primal=primal,
        dual=np.maximum(-ineq_marg, 0.0),
        eq_dual=eq_marg,
        primal_objective=float(lp.cost @ primal),
        dual_objective=dual_objective,
        iterations=iterations,
        backend="highs",
        message=res.message,
    )


# =============================================================================
# Mehrotra (homogeneous self-dual) backend
# =============================================================================


@dataclass(frozen=True)
class _StandardForm:
    """``min c @ v  s.t.  A @ v == b, v >= 0`` with ``x = offset + T @ v[:n_vars]``.

    A free variable becomes the column pair ``free_pos[k]`` / ``free_neg[k]``.
    """

    A: sp.csc_matrix
    b: np.ndarray
    c: np.ndarray
    c0: float
    transform: sp.csr_matrix
    offset: np.ndarray
    n_vars: int
    m_ineq: int
    m_bound: int
    free_pos: np.ndarray
    free_neg: np.ndarray

    @classmethod
    def from_program(cls, lp: LinearProgram) -> _StandardForm:
        n = lp.n
        rows, cols, vals = [], [], []
        offset = np.zeros(n)
        bound_cols, bound_caps = [], []
        free_pos, free_neg = [], []
        col = 0
        for j in range(n):
            lo, hi = lp.lower[j], lp.upper[j]
            if np.isfinite(lo):
                offset[j] = lo
                rows.append(j)
                cols.append(col)
                vals.append(1.0)
                if np.isfinite(hi):
                    bound_cols.append(col)
                    bound_caps.append(hi - lo)
                col += 1
            elif np.isfinite(hi):
                offset[j] = hi
                rows.append(j)
                cols.append(col)
                vals.append(-1.0)
                col += 1
            else:
                rows.extend([j, j])
                cols.extend([col, col + 1])
                vals.extend([1.0, -1.0])
                free_pos.append(col)
                free_neg.append(col + 1)
                col += 2
        n_vars = col
        transform = sp.csr_matrix((vals, (rows, cols)), shape=(n, n_vars))

        m_bound = len(bound_cols)
        bound_rows = sp.csr_matrix(
            (np.ones(m_bound), (np.arange(m_bound), bound_cols)), shape=(m_bound, n_vars)
        )
        G = sp.vstack([lp.ineq_matrix @ transform, bound_rows], format="csr")
        h = np.concatenate([lp.ineq_rhs - lp.ineq_matrix @ offset, bound_caps])
        E = lp.eq_matrix @ transform
        e = lp.eq_rhs - lp.eq_matrix @ offset

        m_slack = G.shape[0]
        A = sp.vstack(
            [
                sp.hstack([G, sp.identity(m_slack, format="csr")]),
                sp.hstack([E, sp.csr_matrix((E.shape[0], m_slack))]),
            ],
            format="csc",
        )
        b = np.concatenate([h, e])
        c = np.concatenate([transform.T @ lp.cost, np.zeros(m_slack)])
        return cls(
            A=A,
            b=b,
            c=c,
            c0=float(lp.cost @ offset),
            transform=transform,
            offset=offset,
            n_vars=n_vars,
            m_ineq=lp.m,
            m_bound=m_bound,
            free_pos=np.array(free_pos, dtype=int),
            free_neg=np.array(free_neg, dtype=int),
        )


@dataclass(frozen=True)
class _Scaling:
    """Ruiz equilibration ``A' = diag(row) A diag(col)``, with the cost divided by ``cost``.

    The scaled program has ``v = col * v'`` and ``y = cost * row * y'``.
    """

    row: np.ndarray
    col: np.ndarray
    cost: float

    @classmethod
    def equilibrate(
        cls, A: sp.csc_matrix, c: np.ndarray, passes: int = _RUIZ_PASSES
    ) -> tuple[_Scaling, sp.csc_matrix]:
        m, n = A.shape
        row, col = np.ones(m), np.ones(n)
        scaled = A.tocsc(copy=True)
        if m and n:
            for _ in range(passes):
                magnitude = abs(scaled)
                r = np.sqrt(magnitude.max(axis=1).toarray().ravel())
                k = np.sqrt(magnitude.max(axis=0).toarray().ravel())
                r[r == 0] = 1.0
                k[k == 0] = 1.0
                scaled = (sp.diags(1.0 / r) @ scaled @ sp.diags(1.0 / k)).tocsc()
                row /= r
                col /= k
        cost = float(np.abs(col * c).max(initial=0.0)) or 1.0
        return cls(row=row, col=col, cost=cost), scaled


def _normal_solver(A: sp.csc_matrix, d: np.ndarray):
    """Factor ``A diag(d) A^T`` and return a solve callable.

    A factorization that breaks down is retried with a growing diagonal shift.
    """
    m = A.shape[0]
    if m == 0:
        return lambda r: np.zeros(0)
    M = (A @ sp.diags(d) @ A.T).tocsc()
    size = max(1.0, float(np.abs(M.diagonal()).max()))
    if m <= _DENSE_NORMAL_ROWS:
        dense = M.toarray()
        for shift in _REGULARIZATION:
            try:
                factor = sla.cho_factor(dense + shift * size * np.eye(m), check_finite=False)
                break
            except (np.linalg.LinAlgError, ValueError):
                continue
        else:
            msg = "mehrotra: normal-equation factorization failed"
            raise NumericalFailure(msg)
        return lambda r: sla.cho_solve(factor, r, check_finite=False)

    identity = sp.identity(m, format="csc")
    for shift in _REGULARIZATION:
        try:
            lu = spla.splu((M + shift * size * identity).tocsc(), permc_spec="MMD_AT_PLUS_A")
            break
        except RuntimeError:
            continue
    else:
        msg = "mehrotra: normal-equation factorization failed"
        raise NumericalFailure(msg)
    return lu.solve


def _sym_solve(dinv, A, r1, r2, solve):
    v = solve(r2 + A @ (dinv * r1))
    u = dinv * (A.T @ v - r1)
    return u, v


def _max_step(x, d_x, z, d_z, tau, d_tau, kappa, d_kappa, fraction):
    steps = [1.0]
    neg = d_x < 0
    if np.any(neg):
        steps.append(fraction * float(np.min(x[neg] / -d_x[neg])))
    neg = d_z < 0
    if np.any(neg):
        steps.append(fraction * float(np.min(z[neg] / -d_z[neg])))
    if d_tau < 0:
        steps.append(fraction * tau / -d_tau)
    if d_kappa < 0:
        steps.append(fraction * kappa / -d_kappa)
    return min(steps)


def _hsd_direction(A, b, c, x, y, z, tau, kappa):
    """Predictor then Mehrotra corrector direction for the homogeneous model."""
    n = x.size
    r_p = b * tau - A @ x
    r_d = c * tau - A.T @ y - z
    r_g = c @ x - b @ y + kappa
    mu = (x @ z + tau * kappa) / (n + 1)

    dinv = x / z
    solve = _normal_solver(A, dinv)
    p, q = _sym_solve(dinv, A, c, b, solve)
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
        msg = "mehrotra: non-finite normal-equation solution"
        raise NumericalFailure(msg)

    gamma = 0.0
    d_x = d_z = np.zeros(n)
    d_tau = d_kappa = 0.0
    for corrector in (False, True):
        eta = 1.0 - gamma
        rhat_xs = gamma * mu - x * z
        rhat_tk = gamma * mu - tau * kappa
        if corrector:
            rhat_xs = rhat_xs - d_x * d_z
            rhat_tk = rhat_tk - d_tau * d_kappa
        u, v = _sym_solve(dinv, A, eta * r_d - rhat_xs / x, eta * r_p, solve)
        d_tau = (eta * r_g + rhat_tk / tau - (-c @ u + b @ v)) / (
            kappa / tau + (-c @ p + b @ q)
        )
        d_x = u + p * d_tau
        d_y = v + q * d_tau
        d_z = (rhat_xs - z * d_x) / x
        d_kappa = (rhat_tk - kappa * d_tau) / tau
        alpha = _max_step(x, d_x, z, d_z, tau, d_tau, kappa, d_kappa, 1.0)
        gamma = (1.0 - alpha) ** 2 * min(0.1, 1.0 - alpha)
    return d_x, d_y, d_z, d_tau, d_kappa


def _recenter_free(x: np.ndarray, form: _StandardForm, tau: float) -> np.ndarray:
    """Pull both halves of a split free variable down together; A @ x and c @ x are unchanged."""
    if form.free_pos.size == 0:
        return x
    pos, neg = x[form.free_pos], x[form.free_neg]
    shift = np.maximum(np.minimum(pos, neg) - _FREE_SPLIT_CAP * tau, 0.0)
    if not np.any(shift):
        return x
    x = x.copy()
    x[form.free_pos] = pos - shift
    x[form.free_neg] = neg - shift
    return x


def _candidate(
    lp: LinearProgram, form: _StandardForm, scale: _Scaling, x, y, tau, iteration: int
) -> LPSolution:
    v = scale.col * x / tau
    y_hat = scale.row * y * (scale.cost / tau)
    primal = form.offset + form.transform @ v[: form.n_vars]
    m_slack = form.m_ineq + form.m_bound
    return LPSolution(
        status=LPStatus.OPTIMAL,
        primal=primal,
        dual=np.maximum(-y_hat[: form.m_ineq], 0.0),
        eq_dual=y_hat[m_slack:],
        primal_objective=float(lp.cost @ primal),
        dual_objective=float(form.b @ y_hat + form.c0),
        iterations=iteration,
        backend="mehrotra",
    )


def _solve_mehrotra(lp: LinearProgram, tol: SolverTolerances) -> LPSolution:
    form = _StandardForm.from_program(lp)
    scale, A = _Scaling.equilibrate(form.A, form.c)
    b = scale.row * form.b
    c = scale.col * form.c / scale.cost
    m, n = A.shape
    inner = 0.1 * min(tol.feas_tol, tol.gap_tol)
    c_size = 1.0 + float(np.abs(c).max(initial=0.0))

    x, y, z = np.ones(n), np.zeros(m), np.ones(n)
    tau = kappa = 1.0
    r_p0 = max(1.0, float(np.linalg.norm(b - A @ x)))
    r_d0 = max(1.0, float(np.linalg.norm(c - z)))
    r_g0 = max(1.0, abs(1.0 + c @ x))

    status = LPStatus.ITERATION_LIMIT
    message = ""
    best: LPSolution | None = None
    polish = 0
    stalled = 0
    iteration = 0
    with np.errstate(divide="raise", invalid="raise", over="raise"):
        try:
            while iteration < tol.max_iter:
                iteration += 1
                d_x, d_y, d_z, d_tau, d_kappa = _hsd_direction(A, b, c, x, y, z, tau, kappa)
                alpha = _max_step(x, d_x, z, d_z, tau, d_tau, kappa, d_kappa, _STEP_FRACTION)
                x = x + alpha * d_x
                y = y + alpha * d_y
                z = z + alpha * d_z
                tau = tau + alpha * d_tau
                kappa = kappa + alpha * d_kappa
                x = _recenter_free(x, form, tau)

                r_p = b * tau - A @ x
                r_d = c * tau - A.T @ y - z
                dual_residual = float(np.max(np.abs(r_d), initial=0.0)) / (tau * c_size)
                if dual_residual <= tol.feas_tol:
                    candidate = _candidate(lp, form, scale, x, y, tau, iteration)
                    if _certificate_failure(lp, candidate, tol) is None:
                        best = candidate
                        tight = (
                            candidate.relative_gap() <= 0.1 * tol.gap_tol
                            and max_violation(lp, candidate.primal) <= 0.1 * tol.feas_tol
                        )
                        if tight:
                            break
                if best is not None:
                    polish += 1
                    if polish >= _POLISH_ITERATIONS:
                        break
                    continue

                rho_p = np.linalg.norm(r_p) / r_p0
                rho_d = np.linalg.norm(r_d) / r_d0
                rho_g = abs(kappa + c @ x - b @ y) / r_g0
                rho_mu = (x @ z + tau * kappa) / (n + 1)
                if (
                    rho_p < inner and rho_d < inner and rho_g < inner
                    and tau < inner * max(1.0, kappa)
                ) or (rho_mu < inner and tau < inner * min(1.0, kappa)):
                    status = LPStatus.INFEASIBLE if b @ y > inner else LPStatus.UNBOUNDED
                    break
                stalled = stalled + 1 if alpha < _STALL_STEP else 0
                if stalled >= _STALL_ITERATIONS:
                    message = f"mehrotra: no progress after iteration {iteration}"
                    break
        except (FloatingPointError, ZeroDivisionError, np.linalg.LinAlgError) as exc:
            if best is None:
                msg = f"mehrotra: numerical breakdown at iteration {iteration}"
                raise NumericalFailure(msg) from exc

    if best is not None:
        return best
    return LPSolution(status=status, iterations=iteration, backend="mehrotra", message=message)
