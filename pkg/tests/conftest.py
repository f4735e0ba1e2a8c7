import numpy as np
import pytest

from mfl.models import DoubleLayer, GenLinear, McKeanOU, NonlinearF, ParamBox
from mfl.simulate import InitialLaw, TimeGrid

OU_BOX = ParamBox([-3.0, -5.0, -0.1], [-0.2, 5.0, 3.0])
THETA_OU = np.array([-1.0, 1.0, 0.5])


@pytest.fixture
def ou():
    return McKeanOU(OU_BOX)


@pytest.fixture
def centred():
    return InitialLaw("gaussian", mean=0.0, var=0.5)


def all_families():
    """One model per family with an interior parameter, for family-generic tests."""
    return [
        (McKeanOU(OU_BOX), THETA_OU),
        (GenLinear(ParamBox([-2.0, -2.0], [2.0, 2.0]), f="tanh", g="gaussian"), np.array([0.5, -1.0])),
        (DoubleLayer(ParamBox([0.5, 0.3, 0.5, 1.5], [2.0, 0.8, 2.0, 3.0])), np.array([1.0, 0.5, 1.0, 2.0])),
        (NonlinearF(ParamBox([0.2], [3.0])), np.array([1.3])),
    ]


@pytest.fixture
def grid():
    return TimeGrid(1.0, 20)
