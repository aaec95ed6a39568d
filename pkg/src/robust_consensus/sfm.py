"""Known-rotation structure from motion: residual assembly, RMSE, and dataset files.

Camera rotations are fixed; the unknown vector x stacks every 3D point (in
``point_ids`` order) followed by the translation of every non-anchor camera
(in camera order). The anchor camera's translation is pinned to zero.

``triangulate`` covers the other case: every camera pose known, one unknown point,
with the pose in the residual constants.

Dataset text format (whitespace separated, ``#`` starts a comment):

- cameras file: ``camera_id r11 r12 r13 r21 r22 r23 r31 r32 r33``
- observations file: ``point_id camera_id z1 z2`` (calibrated coordinates)
"""

from __future__ import annotations

import time
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from robust_consensus import consensus as _consensus
from robust_consensus.errors import (
    DatasetError,
    NonpositiveDepth,
    UnderconstrainedPoint,
    UnknownId,
)
from robust_consensus.lp_core import DEFAULT_TOLERANCES, SolverTolerances
from robust_consensus.residuals import (
    DepthBounds,
    Norm,
    QuasiConvexResidual,
    build_quasiconvex_system,
)

ROTATION_TOL = 1e-6


@dataclass(frozen=True)
class Camera:
    id: int
    rotation: np.ndarray

    def __post_init__(self):
        rotation = np.array(self.rotation, dtype=float).reshape(3, 3)
        if not np.allclose(rotation @ rotation.T, np.eye(3), atol=ROTATION_TOL):
            msg = f"camera {self.id}: rotation is not orthonormal"
            raise ValueError(msg)
        if abs(np.linalg.det(rotation) - 1.0) > ROTATION_TOL:
            msg = f"camera {self.id}: rotation determinant is not +1"
            raise ValueError(msg)
        rotation.setflags(write=False)
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "rotation", rotation)


@dataclass(frozen=True)
class Observation:
    point_id: int
    camera_id: int
    z1: float
    z2: float


@dataclass(frozen=True)
class KnownRotationProblem:
    """Cameras, observations and the layout of points/translations inside x."""

    cameras: tuple[Camera, ...]
    point_ids: tuple[int, ...]
    observations: tuple[Observation, ...]
    anchor: int
    point_offset: dict[int, int] = field(init=False, repr=False)
    camera_offset: dict[int, int | None] = field(init=False, repr=False)

    def __post_init__(self):
        camera_ids = [c.id for c in self.cameras]
        if len(set(camera_ids)) != len(camera_ids):
            msg = "camera ids must be unique"
            raise ValueError(msg)
        if self.anchor not in camera_ids:
            msg = f"anchor camera {self.anchor} does not exist"
            raise UnknownId(msg)

        known_points = set(self.point_ids)
        seen: dict[int, set[int]] = {pid: set() for pid in self.point_ids}
        for obs in self.observations:
            if obs.camera_id not in camera_ids:
                msg = f"point {obs.point_id}: unknown camera {obs.camera_id}"
                raise UnknownId(msg)
            if obs.point_id not in known_points:
                msg = f"observation references unknown point {obs.point_id}"
                raise UnknownId(msg)
            seen[obs.point_id].add(obs.camera_id)
        for pid, cams in seen.items():
            if len(cams) < 2:
                msg = f"point {pid} is observed by {len(cams)} camera(s); at least 2 are needed"
                raise UnderconstrainedPoint(msg)

        point_offset = {pid: 3 * k for k, pid in enumerate(self.point_ids)}
        camera_offset: dict[int, int | None] = {}
        next_offset = 3 * len(self.point_ids)
        for camera in self.cameras:
            if camera.id == self.anchor:
                camera_offset[camera.id] = None
            else:
                camera_offset[camera.id] = next_offset
                next_offset += 3
        object.__setattr__(self, "point_offset", point_offset)
        object.__setattr__(self, "camera_offset", camera_offset)

    @classmethod
    def from_observations(
        cls,
        cameras: Sequence[Camera],
        observations: Sequence[Observation],
        anchor: int | None = None,
    ) -> KnownRotationProblem:
        """Point ids are taken in sorted order; the anchor defaults to the first camera."""
        cameras = tuple(cameras)
        if not cameras:
            msg = "at least one camera is required"
            raise ValueError(msg)
        point_ids = tuple(sorted({obs.point_id for obs in observations}))
        return cls(
            cameras=cameras,
            point_ids=point_ids,
            observations=tuple(observations),
            anchor=cameras[0].id if anchor is None else anchor,
        )

    @property
    def N(self) -> int:
        return 3 * len(self.point_ids) + 3 * (len(self.cameras) - 1)

    @property
    def M(self) -> int:
        return len(self.observations)

    def camera(self, camera_id: int) -> Camera:
        for camera in self.cameras:
            if camera.id == camera_id:
                return camera
        msg = f"unknown camera {camera_id}"
        raise UnknownId(msg)

    def pack(
        self, points: dict[int, np.ndarray], translations: dict[int, np.ndarray]
    ) -> np.ndarray:
        """Build x from per-point and per-camera vectors (the anchor's entry is ignored)."""
        x = np.zeros(self.N)
        for pid, offset in self.point_offset.items():
            x[offset : offset + 3] = points[pid]
        for cid, offset in self.camera_offset.items():
            if offset is not None:
                x[offset : offset + 3] = translations[cid]
        return x

    def unpack(self, x: np.ndarray) -> tuple[dict[int, np.ndarray], dict[int, np.ndarray]]:
        points = {pid: x[o : o + 3].copy() for pid, o in self.point_offset.items()}
        translations = {
            cid: np.zeros(3) if o is None else x[o : o + 3].copy()
            for cid, o in self.camera_offset.items()
        }
        return points, translations


def project(
    rotation: np.ndarray, translation: np.ndarray, point: np.ndarray
) -> tuple[float, float, float]:
    """Calibrated projection ``(r1 X + t1, r2 X + t2) / (r3 X + t3)`` and its depth."""
    camera_point = rotation @ point + translation
    depth = float(camera_point[2])
    if depth <= 0:
        msg = f"point projects with nonpositive depth {depth:.6g}"
        raise NonpositiveDepth(msg)
    return float(camera_point[0] / depth), float(camera_point[1] / depth), depth


def assemble_residuals(
    problem: KnownRotationProblem,
    norm_p: Norm = Norm.L1,
    depth_bounds: DepthBounds | None = None,
) -> list[QuasiConvexResidual]:
    """One quasi-convex residual per observation, with denominators cleared.

    u = (z1 r3 - r1) on the point and (-1, 0, z1) on the translation,
    v = (z2 r3 - r2) on the point and (0, -1, z2) on the translation,
    w = r3 on the point and (0, 0, 1) on the translation; constants are zero.
    """
    N = problem.N
    rotations = {c.id: c.rotation for c in problem.cameras}
    residuals = []
    for obs in problem.observations:
        if obs.camera_id not in rotations:
            msg = f"unknown camera {obs.camera_id}"
            raise UnknownId(msg)
        if obs.point_id not in problem.point_offset:
            msg = f"unknown point {obs.point_id}"
            raise UnknownId(msg)
        r1, r2, r3 = rotations[obs.camera_id]
        p = problem.point_offset[obs.point_id]
        t = problem.camera_offset[obs.camera_id]
        cols = [p, p + 1, p + 2]
        u_vals = list(obs.z1 * r3 - r1)
        v_vals = list(obs.z2 * r3 - r2)
        w_vals = list(r3)
        if t is not None:
            cols += [t, t + 1, t + 2]
            u_vals += [-1.0, 0.0, obs.z1]
            v_vals += [0.0, -1.0, obs.z2]
            w_vals += [0.0, 0.0, 1.0]
        residuals.append(
            QuasiConvexResidual(
                u=_sparse_row(cols, u_vals, N),
                u_tilde=0.0,
                v=_sparse_row(cols, v_vals, N),
                v_tilde=0.0,
                w=_sparse_row(cols, w_vals, N),
                w_tilde=0.0,
                norm_p=norm_p,
                depth_bounds=depth_bounds,
            )
        )
    return residuals


def _sparse_row(cols: list[int], values: list[float], N: int) -> sp.csr_matrix:
    row = sp.csr_matrix((values, ([0] * len(cols), cols)), shape=(1, N))
    row.eliminate_zeros()
    return row


# =============================================================================
# Triangulation (fully known cameras, one unknown point)
# =============================================================================


@dataclass(frozen=True)
class View:
    """One calibrated observation of a single point by a camera with known pose."""

    rotation: np.ndarray
    translation: np.ndarray
    z1: float
    z2: float

    def __post_init__(self):
        rotation = np.array(self.rotation, dtype=float).reshape(3, 3)
        translation = np.array(self.translation, dtype=float).reshape(3)
        rotation.setflags(write=False)
        translation.setflags(write=False)
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)
        object.__setattr__(self, "z1", float(self.z1))
        object.__setattr__(self, "z2", float(self.z2))


def assemble_triangulation_residuals(
    views: Sequence[View],
    norm_p: Norm = Norm.L1,
    depth_bounds: DepthBounds | None = None,
) -> list[QuasiConvexResidual]:
    """One residual per view over the point's three coordinates.

    The pose enters the constants: u = z1 r3 - r1 with u~ = z1 t3 - t1,
    v = z2 r3 - r2 with v~ = z2 t3 - t2, and w = r3 with w~ = t3.
    """
    if len(views) < 2:
        msg = f"triangulation needs at least 2 views, got {len(views)}"
        raise UnderconstrainedPoint(msg)
    residuals = []
    for view in views:
        r1, r2, r3 = view.rotation
        t1, t2, t3 = view.translation
        residuals.append(
            QuasiConvexResidual(
                u=view.z1 * r3 - r1,
                u_tilde=view.z1 * t3 - t1,
                v=view.z2 * r3 - r2,
                v_tilde=view.z2 * t3 - t2,
                w=r3,
                w_tilde=t3,
                norm_p=norm_p,
                depth_bounds=depth_bounds,
            )
        )
    return residuals


def triangulate(
    views: Sequence[View],
    delta: float,
    method: str = "alg1",
    params: _consensus.ReweightParams | None = None,
    depth_bounds: DepthBounds | None = None,
    norm_p: Norm = Norm.L1,
    tol: SolverTolerances = DEFAULT_TOLERANCES,
) -> _consensus.ConsensusResult:
    """Robust triangulation of one point; ``result.x`` is the point."""
    residuals = assemble_triangulation_residuals(views, norm_p, depth_bounds or DepthBounds())
    return _consensus.solve(build_quasiconvex_system(residuals, delta), method, params, tol)


def reprojection_errors(
    problem: KnownRotationProblem,
    x: np.ndarray,
    indices: Sequence[int] | None = None,
) -> np.ndarray:
    """Squared image-plane error per observation; raises NonpositiveDepth."""
    points, translations = problem.unpack(np.asarray(x, dtype=float))
    rotations = {c.id: c.rotation for c in problem.cameras}
    selected = range(problem.M) if indices is None else indices
    errors = []
    for i in selected:
        obs = problem.observations[i]
        rotation = rotations[obs.camera_id]
        p1, p2, _ = project(rotation, translations[obs.camera_id], points[obs.point_id])
        errors.append((obs.z1 - p1) ** 2 + (obs.z2 - p2) ** 2)
    return np.array(errors)


def compute_rmse(
    problem: KnownRotationProblem,
    x: np.ndarray,
    indices: Sequence[int] | None = None,
) -> float:
    """Root-mean-square reprojection error over all (or the given) observations."""
    errors = reprojection_errors(problem, x, indices)
    if errors.size == 0:
        return 0.0
    return float(np.sqrt(errors.mean()))


@dataclass
class SfmReport:
    method: str
    delta: float
    removed: int
    remaining: int
    rmse_all: float
    rmse_kept: float
    runtime: float
    variables: int
    result: _consensus.ConsensusResult
    K: int | None = None
    recall: float | None = None
    precision: float | None = None


def run_sfm_outlier_removal(
    problem: KnownRotationProblem,
    method: str,
    delta: float,
    params: _consensus.ReweightParams | None = None,
    depth_bounds: DepthBounds | None = None,
    norm_p: Norm = Norm.L1,
    tol: SolverTolerances = DEFAULT_TOLERANCES,
    true_outliers: set[int] | None = None,
) -> SfmReport:
    """Build the depth-bounded system, run ``method``, and measure what is left."""
    if method not in _consensus.METHODS:
        msg = f"unknown method '{method}', expected one of {_consensus.METHODS}"
        raise ValueError(msg)
    depth_bounds = depth_bounds or DepthBounds()
    start = time.perf_counter()
    system = build_quasiconvex_system(assemble_residuals(problem, norm_p, depth_bounds), delta)
    result = _consensus.solve(system, method, params, tol)
    runtime = time.perf_counter() - start

    report = SfmReport(
        method=method,
        delta=delta,
        removed=int(result.removed.size),
        remaining=int(result.inliers.size),
        rmse_all=_safe_rmse(problem, result.x),
        rmse_kept=_safe_rmse(problem, result.x, result.inliers),
        runtime=runtime,
        variables=_consensus.variable_count(system, method),
        result=result,
        K=(params or _consensus.ReweightParams()).K if method == "alg2" else None,
    )
    if true_outliers is not None:
        report.recall, report.precision = _consensus.recall_precision(result, true_outliers)
    return report


def _safe_rmse(problem, x, indices=None) -> float:
    # Removed observations may sit behind a camera at the returned x.
    try:
        return compute_rmse(problem, x, indices)
    except NonpositiveDepth:
        return float("nan")


# =============================================================================
# Dataset files
# =============================================================================


def _data_lines(path: Path) -> Iterator[tuple[int, list[str]]]:
    with path.open(encoding="utf-8") as handle:
        for line_number, raw in enumerate(handle, start=1):
            content = raw.split("#", 1)[0].strip()
            if content:
                yield line_number, content.split()


def load_cameras(path: Path) -> tuple[list[Camera], dict[int, int]]:
    """Parse a cameras file; returns the cameras and each id's line number."""
    path = Path(path)
    cameras, lines = [], {}
    for line_number, tokens in _data_lines(path):
        if len(tokens) != 10:
            raise DatasetError(path, line_number, f"expected 10 fields, found {len(tokens)}")
        try:
            camera_id = int(tokens[0])
            rotation = np.array([float(t) for t in tokens[1:]]).reshape(3, 3)
        except ValueError as exc:
            raise DatasetError(path, line_number, f"unparsable value ({exc})") from exc
        if camera_id in lines:
            raise DatasetError(path, line_number, f"duplicate camera id {camera_id}")
        try:
            cameras.append(Camera(camera_id, rotation))
        except ValueError as exc:
            raise DatasetError(path, line_number, str(exc)) from exc
        lines[camera_id] = line_number
    if not cameras:
        raise DatasetError(path, 0, "no cameras found")
    return cameras, lines


def load_observations(path: Path, camera_ids: set[int]) -> list[Observation]:
    path = Path(path)
    observations = []
    first_line: dict[int, int] = {}
    for line_number, tokens in _data_lines(path):
        if len(tokens) != 4:
            raise DatasetError(path, line_number, f"expected 4 fields, found {len(tokens)}")
        try:
            obs = Observation(int(tokens[0]), int(tokens[1]), float(tokens[2]), float(tokens[3]))
        except ValueError as exc:
            raise DatasetError(path, line_number, f"unparsable value ({exc})") from exc
        if obs.camera_id not in camera_ids:
            raise DatasetError(path, line_number, f"unknown camera id {obs.camera_id}")
        first_line.setdefault(obs.point_id, line_number)
        observations.append(obs)
    if not observations:
        raise DatasetError(path, 0, "no observations found")

    cams_per_point: dict[int, set[int]] = {}
    for obs in observations:
        cams_per_point.setdefault(obs.point_id, set()).add(obs.camera_id)
    for pid, cams in cams_per_point.items():
        if (count := len(cams)) < 2:
            raise DatasetError(
                path, first_line[pid], f"point {pid} is observed by {count} camera(s); need 2"
            )
    return observations


def load_dataset(cameras_path: Path, observations_path: Path) -> KnownRotationProblem:
    """Load and validate a dataset; the first listed camera is the anchor."""
    cameras, _ = load_cameras(cameras_path)
    observations = load_observations(observations_path, {c.id for c in cameras})
    return KnownRotationProblem.from_observations(cameras, observations)


def save_dataset(problem: KnownRotationProblem, cameras_path: Path, observations_path: Path):
    cameras_path = Path(cameras_path)
    observations_path = Path(observations_path)
    cameras_path.parent.mkdir(parents=True, exist_ok=True)
    observations_path.parent.mkdir(parents=True, exist_ok=True)
    camera_lines = ["# camera_id r11 r12 r13 r21 r22 r23 r31 r32 r33"]
    for camera in problem.cameras:
        values = " ".join(f"{v:.17g}" for v in camera.rotation.ravel())
        camera_lines.append(f"{camera.id} {values}")
    cameras_path.write_text("\n".join(camera_lines) + "\n", encoding="utf-8")
    write_observations(observations_path, problem.observations)


def write_observations(path: Path, observations: Sequence[Observation]):
    lines = ["# point_id camera_id z1 z2"]
    lines.extend(f"{o.point_id} {o.camera_id} {o.z1:.17g} {o.z2:.17g}" for o in observations)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
