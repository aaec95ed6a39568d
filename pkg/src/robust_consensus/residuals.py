"""Measurement and residual types, and the stacked inequality blocks built from them.

Every measurement i contributes a block of ``kappa`` rows to ``A x <= b``; all
rows of a block share the measurement's slack ``s_i`` (``A x <= b + s ⊗ 1_kappa``).
Rows are stored in the canonical form ``row @ x <= rhs``.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
import scipy.sparse as sp

from robust_consensus.errors import (
    DimensionMismatch,
    MixedResidualArity,
    NonpositiveDelta,
    NonpositiveDepth,
)


class Norm(StrEnum):
    L1 = "l1"
    LINF = "linf"


# (sign of u, sign of v) per norm row, in block order.
_L1_SIGNS = ((1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0))
_LINF_SIGNS = ((1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0))


def _row_vector(values, dim: int | None = None) -> sp.csr_matrix:
    if sp.issparse(values):
        row = sp.csr_matrix(values, dtype=float)
        if row.shape[0] != 1:
            row = row.reshape(1, -1).tocsr()
    else:
        row = sp.csr_matrix(np.asarray(values, dtype=float).reshape(1, -1))
    if dim is not None and row.shape[1] != dim:
        msg = f"coefficient vector has length {row.shape[1]}, expected {dim}"
        raise DimensionMismatch(msg)
    return row


@dataclass(frozen=True)
class LinearMeasurement:
    """One regression measurement ``|a @ x - y| <= delta``."""

    a: np.ndarray
    y: float

    def __post_init__(self):
        a = np.array(self.a, dtype=float).ravel()
        if a.size == 0 or not np.any(a):
            msg = "measurement vector a must have at least one nonzero entry"
            raise ValueError(msg)
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "y", float(self.y))

    @property
    def dim(self) -> int:
        return self.a.size

    def residual(self, x: np.ndarray) -> float:
        return abs(float(self.a @ x) - self.y)


@dataclass(frozen=True)
class DepthBounds:
    d_min: float = 0.01
    d_max: float = 1e4

    def __post_init__(self):
        if not 0 < self.d_min < self.d_max:
            msg = f"depth bounds need 0 < d_min < d_max, got ({self.d_min}, {self.d_max})"
            raise ValueError(msg)


@dataclass(frozen=True)
class QuasiConvexResidual:
    """``||(u@x + u_tilde, v@x + v_tilde)||_p / (w@x + w_tilde)``.

    Coefficient vectors are held as 1×N sparse rows; geometric residuals touch
    only a handful of the N unknowns.
    """

    u: sp.csr_matrix
    u_tilde: float
    v: sp.csr_matrix
    v_tilde: float
    w: sp.csr_matrix
    w_tilde: float
    norm_p: Norm = Norm.L1
    depth_bounds: DepthBounds | None = None

    def __post_init__(self):
        u = _row_vector(self.u)
        dim = u.shape[1]
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", _row_vector(self.v, dim))
        object.__setattr__(self, "w", _row_vector(self.w, dim))
        object.__setattr__(self, "u_tilde", float(self.u_tilde))
        object.__setattr__(self, "v_tilde", float(self.v_tilde))
        object.__setattr__(self, "w_tilde", float(self.w_tilde))
        object.__setattr__(self, "norm_p", Norm(self.norm_p))

    @property
    def dim(self) -> int:
        return self.u.shape[1]

    def depth(self, x: np.ndarray) -> float:
        return float((self.w @ x)[0]) + self.w_tilde

    def residual(self, x: np.ndarray) -> float:
        return eval_residual(self, x)


def eval_residual(residual: QuasiConvexResidual, x: np.ndarray) -> float:
    """Evaluate the p-norm residual; raises NonpositiveDepth instead of clamping."""
    x = np.asarray(x, dtype=float)
    depth = residual.depth(x)
    if depth <= 0:
        msg = f"residual denominator w@x + w_tilde = {depth:.6g} is not positive"
        raise NonpositiveDepth(msg)
    first = float((residual.u @ x)[0]) + residual.u_tilde
    second = float((residual.v @ x)[0]) + residual.v_tilde
    if residual.norm_p == Norm.L1:
        numerator = abs(first) + abs(second)
    else:
        numerator = max(abs(first), abs(second))
    return numerator / depth


def kronecker_selector(M: int, kappa: int) -> sp.csr_matrix:
    """J = I_M ⊗ 1_{1×kappa}; ``J.T @ s`` repeats each s_i over its kappa rows."""
    return sp.kron(sp.identity(M, format="csr"), np.ones((1, kappa)), format="csr")


@dataclass(frozen=True)
class ConstraintSystem:
    """Stacked blocks ``A x <= b`` with uniform block size ``kappa``."""

    A: sp.csr_matrix
    b: np.ndarray
    kappa: int
    delta: float
    measurements: tuple

    @property
    def M(self) -> int:
        return len(self.measurements)

    @property
    def N(self) -> int:
        return self.A.shape[1]

    @property
    def measurement_of_row(self) -> np.ndarray:
        return np.repeat(np.arange(self.M), self.kappa)

    def selector(self) -> sp.csr_matrix:
        return kronecker_selector(self.M, self.kappa)

    @property
    def depth_free(self) -> bool:
        """Quasi-convex measurements without depth rows."""
        first = self.measurements[0] if self.measurements else None
        return isinstance(first, QuasiConvexResidual) and first.depth_bounds is None

    def zero_depth(self, x: np.ndarray, indices: Sequence[int], floor: float) -> list[int]:
        """Members of ``indices`` whose depth at ``x`` is at most ``floor``.

        Always empty for linear systems and for systems carrying depth rows.
        """
        if not self.depth_free:
            return []
        return [int(i) for i in indices if self.measurements[i].depth(x) <= floor]

    def rows_of(self, i: int) -> slice:
        return slice(self.kappa * i, self.kappa * (i + 1))

    def row_violation(self, x: np.ndarray) -> np.ndarray:
        """``A x - b`` per row; positive entries are violated rows."""
        return self.A @ np.asarray(x, dtype=float) - self.b

    def block_violation(self, x: np.ndarray) -> np.ndarray:
        """Largest row violation within each measurement's block."""
        return self.row_violation(x).reshape(self.M, self.kappa).max(axis=1)

    def residual_values(self, x: np.ndarray) -> np.ndarray:
        """Residual of every measurement at ``x`` (inf where the depth is not positive)."""
        values = np.empty(self.M)
        for i, measurement in enumerate(self.measurements):
            try:
                values[i] = measurement.residual(x)
            except NonpositiveDepth:
                values[i] = np.inf
        return values

    def subsystem(self, indices: Sequence[int]) -> ConstraintSystem:
        """The system restricted to ``indices`` (in the given order)."""
        indices = np.asarray(indices, dtype=int)
        rows = (indices[:, None] * self.kappa + np.arange(self.kappa)).ravel()
        return ConstraintSystem(
            A=self.A[rows],
            b=self.b[rows],
            kappa=self.kappa,
            delta=self.delta,
            measurements=tuple(self.measurements[i] for i in indices),
        )


def _check_delta(delta: float):
    if not delta > 0:
        msg = f"inlier threshold delta must be > 0, got {delta}"
        raise NonpositiveDelta(msg)


def build_linear_system(
    measurements: Sequence[LinearMeasurement], delta: float
) -> ConstraintSystem:
    """Two rows per measurement: ``a@x <= y + delta`` and ``-a@x <= -y + delta``."""
    _check_delta(delta)
    if not measurements:
        msg = "at least one measurement is required"
        raise DimensionMismatch(msg)
    dims = {m.dim for m in measurements}
    if len(dims) != 1:
        msg = f"measurements disagree on dimension: {sorted(dims)}"
        raise DimensionMismatch(msg)

    coeffs = np.vstack([m.a for m in measurements])
    y = np.array([m.y for m in measurements])
    A = np.empty((2 * len(measurements), coeffs.shape[1]))
    A[0::2] = coeffs
    A[1::2] = -coeffs
    b = np.empty(2 * len(measurements))
    b[0::2] = y + delta
    b[1::2] = -y + delta
    return ConstraintSystem(
        A=sp.csr_matrix(A),
        b=b,
        kappa=2,
        delta=float(delta),
        measurements=tuple(measurements),
    )


def build_quasiconvex_system(
    residuals: Sequence[QuasiConvexResidual], delta: float
) -> ConstraintSystem:
    """Four norm rows per residual, plus two depth rows when bounds are present.

    L1 block order is (+u+v, +u-v, -u+v, -u-v[, -depth, +depth]); Linf block
    order is (+u, -u, +v, -v[, -depth, +depth]).
    """
    _check_delta(delta)
    if not residuals:
        msg = "at least one residual is required"
        raise DimensionMismatch(msg)
    norms = {r.norm_p for r in residuals}
    depth_flags = {r.depth_bounds is not None for r in residuals}
    if len(norms) != 1 or len(depth_flags) != 1:
        msg = "residuals must share norm_p and presence of depth_bounds"
        raise MixedResidualArity(msg)
    dims = {r.dim for r in residuals}
    if len(dims) != 1:
        msg = f"residuals disagree on dimension: {sorted(dims)}"
        raise DimensionMismatch(msg)

    norm = norms.pop()
    with_depth = depth_flags.pop()
    M = len(residuals)
    U = sp.vstack([r.u for r in residuals], format="csr")
    V = sp.vstack([r.v for r in residuals], format="csr")
    W = sp.vstack([r.w for r in residuals], format="csr")
    u_t = np.array([r.u_tilde for r in residuals])
    v_t = np.array([r.v_tilde for r in residuals])
    w_t = np.array([r.w_tilde for r in residuals])

    blocks, rhs = [], []
    for su, sv in _L1_SIGNS if norm == Norm.L1 else _LINF_SIGNS:
        blocks.append(su * U + sv * V - delta * W)
        rhs.append(delta * w_t - (su * u_t + sv * v_t))
    if with_depth:
        d_min = np.array([r.depth_bounds.d_min for r in residuals])
        d_max = np.array([r.depth_bounds.d_max for r in residuals])
        blocks.extend([-W, W])
        rhs.extend([w_t - d_min, d_max - w_t])

    kappa = len(blocks)
    stacked = sp.vstack(blocks, format="csr")
    stacked_rhs = np.concatenate(rhs)
    # stacked row k*M + i becomes block row i*kappa + k
    order = (np.arange(kappa)[None, :] * M + np.arange(M)[:, None]).ravel()
    A = stacked[order]
    A.eliminate_zeros()
    return ConstraintSystem(
        A=A,
        b=stacked_rhs[order],
        kappa=kappa,
        delta=float(delta),
        measurements=tuple(residuals),
    )
