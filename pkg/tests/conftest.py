#!/usr/bin/env python

"""Configure tests for `lptorus` package."""

import pytest

import lptorus as lpt
from lptorus import TorusGrid, examples
from lptorus.sim import SimConfig, simulate
from lptorus.synth import synth_lacunary


@pytest.fixture(scope="session", autouse=True)
def quiet_params():
    lpt.params.update({"workers": 1, "progress_bar": False, "seed": 42, "profile": "bump"})


@pytest.fixture(scope="session")
def grid():
    return TorusGrid(64)


@pytest.fixture(scope="session")
def fine_grid():
    return TorusGrid(256)


@pytest.fixture(scope="session")
def taylor_green(grid):
    return examples.taylor_green(grid)


@pytest.fixture(scope="session")
def lacunary(grid):
    return synth_lacunary(grid, 1 / 3, (1, grid.kmax + 1), seed=1)


@pytest.fixture(scope="session")
def tg_series(grid):
    return simulate(SimConfig(grid, "taylor_green", dt=0.01, steps=40, stride=5))


@pytest.fixture(scope="session")
def random_series(grid):
    conf = SimConfig(
        grid, "random", dt=0.002, steps=40, stride=2, alpha=0.5, shells=(1, 3), seed=3
    )
    return simulate(conf)


@pytest.fixture(scope="session")
def fine_lacunary(fine_grid):
    return synth_lacunary(fine_grid, 0.5, (1, fine_grid.kmax + 1), seed=2)
