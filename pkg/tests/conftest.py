"""Shared fixtures: presets and desk-scale grids."""

import numpy as np
import pytest

from fpflow import SpatialGrid, linear_ou, soft_confinement


@pytest.fixture(scope="session")
def ou_spec():
    return linear_ou()


@pytest.fixture(scope="session")
def soft_spec():
    return soft_confinement()


@pytest.fixture(scope="session", params=["linear-ou", "soft-confinement"])
def preset_spec(request, ou_spec, soft_spec):
    return ou_spec if request.param == "linear-ou" else soft_spec


@pytest.fixture(scope="session")
def grid_1d():
    return SpatialGrid(dim=1, half_width=6.0, n=100)


@pytest.fixture(scope="session")
def grid_2d():
    return SpatialGrid(dim=2, half_width=4.0, n=24)


@pytest.fixture()
def rng():
    return np.random.default_rng(42)
