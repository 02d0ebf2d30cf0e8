from pathlib import Path

import numpy as np
import pytest

from sunnyfix import AffineMap, ClampMap, LpSpace, Representation

CONFIGS = Path(__file__).resolve().parents[1] / "src" / "sunnyfix" / "configs"


def diagonal_family(p=2.0):
    """Clamp onto [0,1]^2 and the coordinate swap; Fix(S) is the diagonal segment."""
    return Representation(LpSpace(2, p), [ClampMap([0, 0], [1, 1]), AffineMap.permutation([1, 0])])


def flip_family():
    """T(x) = -x on R; Fix(S) = {0}."""
    return Representation(LpSpace(1, 2), [AffineMap([[-1.0]])])


@pytest.fixture
def diagonal():
    return diagonal_family()


@pytest.fixture
def flip():
    return flip_family()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def configs():
    return CONFIGS
