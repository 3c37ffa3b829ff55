import numpy as np
import pytest

from graspdiff.body import Identity, canonical_skeleton


@pytest.fixture(scope="session")
def skeleton():
    return canonical_skeleton()


@pytest.fixture(scope="session")
def identity():
    return Identity(scale=1.0, gender="neutral")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_pose(skeleton, rng, root_translation=None):
    """Random valid pose: 6D blocks drawn well away from degeneracy."""
    pose = np.zeros(skeleton.pose_dim)
    pose[0:3] = rng.normal(0, 0.5, 3) if root_translation is None else root_translation
    r6 = rng.normal(0, 1.0, (skeleton.num_joints, 6))
    # keep columns clearly independent
    r6[:, 0:3] += np.array([2.0, 0, 0])
    r6[:, 3:6] += np.array([0, 2.0, 0])
    pose[3:] = r6.ravel()
    return pose
