import numpy as np
import pytest

from sshfd.layout import COCO_LAYOUT
from sshfd.pose import Pose2D, Pose3D


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_pose2d(rng, K=17, lo=0.0, hi=200.0, visible=None):
    coords = rng.uniform(lo, hi, (K, 2))
    vis = np.ones(K, dtype=bool) if visible is None else np.asarray(visible, dtype=bool)
    return Pose2D(coords, vis, vis.astype(float))


def random_pose3d(rng, K=17, scale=400.0):
    coords = rng.normal(0.0, scale, (K, 3))
    return Pose3D(coords, np.ones(K, dtype=bool))
