"""
Pytest Configuration and Shared Fixtures

Seeded clouds of a few shapes and sizes plus an isolated output directory.
"""

import logging

import numpy as np
import pytest

from src.config.run_config import RunConfig
from src.config.settings import settings
from src.pointcloud.cloud import PointCloud
from src.pointcloud.synth import generate_manifold


@pytest.fixture
def rng() -> np.random.Generator:
    """Fresh seeded generator per test."""
    return np.random.default_rng(12345)


@pytest.fixture
def random_cloud() -> PointCloud:
    """8 generic points in R^3: no ties among distances."""
    return PointCloud(np.random.default_rng(3).normal(size=(8, 3)))


@pytest.fixture
def qsim_cloud() -> PointCloud:
    """12 points in the unit cube, small enough for the dense simulator."""
    return PointCloud(np.random.default_rng(11).uniform(size=(12, 3)))


@pytest.fixture
def qsim_config() -> RunConfig:
    return RunConfig(nn=5, t=1.0, seed=4)


@pytest.fixture
def sphere_cloud() -> PointCloud:
    """Unit 2-sphere, 300 points."""
    return generate_manifold("sphere", 300, {"radius": 1.0}, seed=7)


@pytest.fixture
def plane_cloud() -> PointCloud:
    """Flat patch in R^3, unit mean spacing."""
    return generate_manifold("plane", 300, seed=5)


@pytest.fixture
def circle_cloud() -> PointCloud:
    """40 equispaced points on the unit circle."""
    angle = 2 * np.pi * np.arange(40) / 40
    return PointCloud(np.column_stack([np.cos(angle), np.sin(angle)]))


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    """Point settings.output_dir at a per-test temp directory."""
    monkeypatch.setattr(settings, "output_dir", tmp_path / "out")
    return tmp_path / "out"


@pytest.fixture(autouse=True)
def restore_root_logger():
    """The CLI reconfigures the root logger; undo that after every test."""
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield root
    root.handlers[:] = handlers
    root.setLevel(level)
