import numpy as np
import pytest

from randmatch import figure1_instance


@pytest.fixture
def fig1():
    return figure1_instance()


@pytest.fixture
def fig1_uniform():
    x = np.zeros((5, 5))
    x[:3, :3] = 1 / 3
    x[3:, 3:] = 1 / 2
    return x


@pytest.fixture
def fig1_plra():
    # six block-A entries and four block-B entries at 1/2
    return 0.5 * np.array(
        [
            [1, 0, 1, 0, 0],
            [1, 1, 0, 0, 0],
            [0, 1, 1, 0, 0],
            [0, 0, 0, 1, 1],
            [0, 0, 0, 1, 1],
        ],
        dtype=float,
    )
