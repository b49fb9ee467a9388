import numpy as np
import pytest

from gradfront.grids import Grid1D, Grid2D


@pytest.fixture
def strip_grid():
    return Grid2D(Grid1D.from_spacing(-10.0, 10.0, 0.05), Grid1D.from_spacing(-5.0, 5.0, 0.01))


def gaussian_field_values(grid, scale=1.0):
    _, Y = grid.mesh()
    return np.exp(-scale * Y ** 2)
