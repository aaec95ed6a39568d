"""Shared test fixtures for robust_consensus tests."""

import numpy as np
import pytest
from typer.testing import CliRunner

from robust_consensus.residuals import LinearMeasurement, build_linear_system
from robust_consensus.sfm import save_dataset
from robust_consensus.synthbench import gen_scene


@pytest.fixture
def temp_dir(tmp_path):
    """Create a temporary directory for tests."""
    return tmp_path


@pytest.fixture
def runner():
    return CliRunner()


def line_measurements(ys, a=1.0):
    """One-dimensional measurements ``|a x - y| <= delta``."""
    return [LinearMeasurement([a], y) for y in ys]


@pytest.fixture
def four_point_measurements():
    """Three consistent points and one far outlier on a line."""
    return line_measurements([0.0, 0.0, 0.0, 10.0])


@pytest.fixture
def four_point_system(four_point_measurements):
    return build_linear_system(four_point_measurements, 1.0)


@pytest.fixture
def consistent_measurements():
    """Exact y = A x for a random 3-dimensional x."""
    rng = np.random.default_rng(11)
    A = rng.uniform(-1.0, 1.0, size=(12, 3))
    x_true = np.array([0.5, -1.0, 2.0])
    return [LinearMeasurement(a, float(a @ x_true)) for a in A]


@pytest.fixture
def clean_scene():
    """Noise-free three-camera scene without corrupted observations."""
    return gen_scene(cameras=3, points=8, corrupt_ratio=0.0, seed=5, noise_sigma=0.0)


@pytest.fixture
def corrupted_scene():
    """Four cameras, low noise, a fifth of the observations displaced."""
    return gen_scene(cameras=4, points=15, corrupt_ratio=0.2, seed=3, noise_sigma=1e-4)


@pytest.fixture
def scene_files(temp_dir, corrupted_scene):
    """The corrupted scene written out as dataset files."""
    cameras = temp_dir / "cameras.txt"
    observations = temp_dir / "observations.txt"
    save_dataset(corrupted_scene.problem, cameras, observations)
    outliers = temp_dir / "outliers.txt"
    outliers.write_text(
        "\n".join(str(i) for i in sorted(corrupted_scene.true_outliers)) + "\n",
        encoding="utf-8",
    )
    return cameras, observations, outliers
