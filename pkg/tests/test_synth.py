#!/usr/bin/env python

"""Tests for synthetic lacunary fields and named flows."""

import numpy as np
import pytest
from toolz import partial
from pytest import approx

import lptorus as lpt
from lptorus import examples, synth_lacunary
from lptorus.bank import build_bank
from lptorus.examples import UnknownFlowError
from lptorus.field import check_divergence, sup_norm
from lptorus.synth import ShellRangeError, shell_annulus, synth_named

roughly = partial(approx, rel=0.05)


def test_lacunary_properties(grid, lacunary):
    """Test divergence, shape and mean of a lacunary field."""
    assert lacunary.shape == (2,)
    check_divergence(lacunary)
    assert np.abs(lacunary.mean()).max() < 1e-15


@pytest.mark.parametrize("j", [2, 3])
def test_lacunary_shells(grid, lacunary, j):
    """Test that shell ``j`` carries amplitude ``2^{−αj}``."""
    bank = build_bank(grid)
    assert sup_norm(bank.project_shell(lacunary, j)) == roughly(2.0 ** (-j / 3))


def test_shell_annulus(grid):
    """Test that annuli sit inside their shells."""
    bank = build_bank(grid)
    for j in range(grid.k0 + 1, grid.kmax + 2):
        mask = shell_annulus(grid, j)
        assert mask.any()
        assert bank.multiplier_shell(j)[mask].min() > 0.99
        assert bank.multiplier_shell(j + 1)[mask].max() < 0.01


def test_lacunary_reproducible(grid):
    """Test seeding and independence from the worker count."""
    a = synth_lacunary(grid, 0.5, (1, 3), seed=7)
    b = synth_lacunary(grid, 0.5, (1, 3), seed=7)
    c = synth_lacunary(grid, 0.5, (1, 3), seed=8)
    assert np.array_equal(a.values, b.values)
    assert not np.allclose(a.values, c.values)
    workers = lpt.params["workers"]
    lpt.params["workers"] = 4
    try:
        d = synth_lacunary(grid, 0.5, (1, 3), seed=7)
    finally:
        lpt.params["workers"] = workers
    assert np.array_equal(a.values, d.values)


def test_lacunary_errors(grid):
    """Test shell range and exponent checks."""
    with pytest.raises(ShellRangeError):
        synth_lacunary(grid, 0.5, (grid.k0, 3))
    with pytest.raises(ShellRangeError):
        synth_lacunary(grid, 0.5, (1, grid.kmax + 2))
    with pytest.raises(ShellRangeError):
        synth_lacunary(grid, 0.5, (3, 2))
    with pytest.raises(ValueError):
        synth_lacunary(grid, 1.5, (1, 3))


@pytest.mark.parametrize("name", list(examples.NAMED_FLOWS))
def test_named_flows(grid, name):
    """Test that named flows are divergence-free and dealiased."""
    v = synth_named(grid, name)
    check_divergence(v)
    assert np.abs(v.spectral[:, ~grid.dealias_mask]).max() < 1e-13


def test_unknown_flow(grid):
    """Test the error for unknown flow names."""
    with pytest.raises(UnknownFlowError):
        examples.named_flow(grid, "kolmogorov")
