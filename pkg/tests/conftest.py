import numpy as np
import pytest

from imuclr.simulate import MotionTimeSeries
from imuclr.skeleton import SkeletonStructure


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_series(rng, t=8, v=4, fs=20.0):
    """Random full-mask recording for augmentation/masking tests."""
    return MotionTimeSeries(rng.standard_normal((6, t, v)), np.ones(v, dtype=bool), fs)


def chain_structure(v):
    """Simple path graph 0-1-2-...-(v-1)."""
    return SkeletonStructure(
        names=tuple(f"j{i}" for i in range(v)),
        parents=(-1,) + tuple(range(v - 1)),
    )
