import math

import numpy as np
import pytest

from fraburgers.spectral import Grid, Params, random_band_field


@pytest.fixture
def torus():
    """[-pi, pi) with 64 points: integer wavenumbers."""
    return Grid(64, math.pi)


@pytest.fixture
def params():
    return Params(alpha=1.2, eps=0.1, dt=0.01, t_end=1.0)


def band_field(grid, seed, k_lo=None, k_hi=None):
    rng = np.random.default_rng(seed)
    return random_band_field(
        grid, rng, grid.k_min if k_lo is None else k_lo, grid.k_max / 3 if k_hi is None else k_hi
    )
