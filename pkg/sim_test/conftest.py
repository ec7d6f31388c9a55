import numpy as np
import pytest

from sampling.ppp import PointCloud, Stream, sample_ball
from tree.rst import build

# --- SHARED FIXTURES ---
# Fixed master seeds: every statistical assertion below is deterministic.


@pytest.fixture(scope="session")
def cloud_d1():
    return sample_ball(1, 1.0, 7.0, Stream(2024))


@pytest.fixture(scope="session")
def tree_d1(cloud_d1):
    return build(cloud_d1)


@pytest.fixture(scope="session")
def tree_d2():
    return build(sample_ball(2, 1.0, 3.5, Stream(7)))


def polar_cloud(points, radius=10.0, lam=1.0):
    """d=1 cloud from (radius, angle in degrees) pairs."""
    radii = np.array([r for r, _ in points], dtype=float)
    angles = np.radians([a for _, a in points])
    dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    return PointCloud(1, lam, radius, radii, dirs)


@pytest.fixture
def polar():
    return polar_cloud
