#!/usr/bin/env python

"""Tests for commutators of advective derivatives and convolutions."""

import numpy as np
import pytest
from pytest import approx

from lptorus import EulerSnapshot
from lptorus.bank import SYMBOLS, LevelRangeError, UnsupportedSymbolError, build_bank
from lptorus.commutator import (
    ConvOp,
    commutator_direct,
    commutator_kernel,
    commutator_norm_scan,
    commutator_second,
    commutator_second_oracle,
    probe_fields,
)
from lptorus.field import DivergenceError, Field, sup_norm
from lptorus.scan import EmptyRangeError


@pytest.fixture(scope="module")
def bank(grid):
    return build_bank(grid)


@pytest.mark.parametrize("name", sorted(SYMBOLS))
def test_kernel_against_direct(bank, lacunary, name):
    """Test the kernel form of the first commutator."""
    u = bank.project_leq(lacunary, 2)
    f = lacunary[0]
    op = ConvOp(bank, 2, name)
    direct = commutator_direct(u, op, f)
    kernel = commutator_kernel(u, op, f)
    assert kernel.shape == op(f).shape
    assert sup_norm(kernel - direct) < 1e-10 * sup_norm(direct)


def test_direct_with_jets(bank, random_series):
    """Test that a constant operand commutes the same with a velocity jet."""
    snapshot = random_series[4]
    u_jet = snapshot.velocity_jet_leq(2)
    f = probe_fields(bank.grid, 2, 1)[0]
    op = ConvOp(bank, 2, "hess_invlap_leq", (0, 1))
    direct = commutator_direct(u_jet, op, f)
    assert sup_norm(commutator_kernel(u_jet.value, op, f) - direct) < 1e-10 * sup_norm(direct)


def test_kernel_needs_divergence_free(bank, grid):
    """Test that the kernel form refuses compressible fields."""
    u = Field.from_function(grid, lambda x1, x2: (np.sin(x1), 0 * x2))
    with pytest.raises(DivergenceError):
        commutator_kernel(u, ConvOp(bank, 2, "eta_leq"), u[1])


@pytest.mark.parametrize(
    "name,index", [("eta_leq", None), ("hess_invlap_leq", (1, 1)), ("grad_invlap_shell", (0,))]
)
def test_second_commutator(bank, random_series, name, index):
    """Test the expansion of the second commutator against the jets."""
    snapshot = random_series[6]
    op = ConvOp(bank, 2, name, index)
    f = probe_fields(bank.grid, 2, 1)[0]
    parts = commutator_second(snapshot, 2, op, f)
    oracle = commutator_second_oracle(snapshot, 2, op, f)
    assert sup_norm(parts.t_iii1 - parts.t_ii) < 1e-9 * sup_norm(parts.t_ii)
    assert sup_norm(parts.total() - oracle) < 1e-9 * sup_norm(oracle)


def test_second_commutator_frozen(bank, lacunary):
    """Test the second commutator of a field frozen in time."""
    snapshot = EulerSnapshot.frozen(lacunary)
    op = ConvOp(bank, 1, "eta_leq")
    f = lacunary[1]
    total = commutator_second(snapshot, 1, op, f).total()
    oracle = commutator_second_oracle(snapshot, 1, op, f)
    assert sup_norm(total - oracle) < 1e-9 * sup_norm(oracle)


def test_conv_op(bank):
    """Test operator metadata and argument checks."""
    op = ConvOp(bank, 2, "grad_eta_leq")
    assert op.homogeneity == 1
    assert op.rank == 1
    assert ConvOp(bank, 2, "grad_eta_leq", (0,)).rank == 0
    assert op.kernel.grid == bank.grid.oversampled()
    with pytest.raises(UnsupportedSymbolError):
        ConvOp(bank, 2, "riesz")
    with pytest.raises(UnsupportedSymbolError):
        ConvOp(bank, 2, "hess_invlap_leq", (0,))
    with pytest.raises(LevelRangeError):
        ConvOp(bank, bank.ktop + 1, "eta_leq")


def test_moment_table(bank):
    """Test the kernel moment table."""
    op = ConvOp(bank, 2, "eta_leq")
    table = op.moment_table()
    assert list(table.columns) == ["m", "A", "value", "scaled"]
    assert len(table) == 21
    assert (table["m"] + table["A"]).max() == 5
    assert op.moment(0, 0) >= 1 - 1e-9
    assert (table["value"] > 0).all()
    row = table[(table["m"] == 0) & (table["A"] == 1)].iloc[0]
    assert row["scaled"] == approx(row["value"] / 2.0**2)


def test_probe_fields(grid):
    """Test that probes are seeded, normalized and band-limited."""
    probes = probe_fields(grid, 2, 3)
    assert len(probes) == 3
    for probe in probes:
        assert sup_norm(probe) == approx(1.0)
        assert abs(probe.mean()) < 1e-15
        outside = (grid.k_norm < 1) | (grid.k_norm >= 8)
        assert np.abs(probe.spectral[outside]).max() < 1e-15
    again = probe_fields(grid, 2, 3)
    assert np.array_equal(probes[1].values, again[1].values)
    assert not np.allclose(probes[0].values, probes[1].values)


def test_norm_scan_bound(grid, lacunary):
    """Test that the surrogate stays below the kernel-moment bound."""
    report = commutator_norm_scan(lacunary, "eta_leq", 1, alpha=1 / 3, probes=2)
    assert report.quantity == "commutator_r1_eta_leq"
    assert report.field_kind == "synthetic"
    assert report.predicted_slope == approx(2 / 3)
    assert {"r", "homogeneity", "surrogate_norm", "l1_bound"} <= set(report.columns)
    assert (report["surrogate_norm"] <= 1.1 * report["l1_bound"]).all()
    assert report.meta == {"probes": 2, "profile": "bump"}
    assert list(report["k"]) == list(range(grid.k0 + 1, grid.kmax + 2))
    assert report.fit_range == (grid.k0 + 2, grid.kmax + 1)
    second = commutator_norm_scan(lacunary, "eta_leq", 2, (1, 3), probes=2)
    assert list(second["r"]) == [2, 2, 2]
    assert list(second["homogeneity"]) == [0, 0, 0]
    assert (second["value"] > 0).all()


@pytest.mark.slow
def test_norm_scan_slope(fine_lacunary):
    """Test the growth of the first commutator with the level."""
    report = commutator_norm_scan(fine_lacunary, "eta_leq", 1, alpha=0.5)
    assert list(report["k"]) == [1, 2, 3, 4, 5, 6]
    assert report.slope == approx(0.5, abs=0.3)


def test_norm_scan_errors(lacunary):
    """Test the argument checks of the commutator scan."""
    with pytest.raises(ValueError):
        commutator_norm_scan(lacunary, "eta_leq", 3)
    with pytest.raises(UnsupportedSymbolError):
        commutator_norm_scan(lacunary, "riesz")
    with pytest.raises(EmptyRangeError):
        commutator_norm_scan(lacunary, "eta_leq", 1, (3, 2))
    with pytest.raises(EmptyRangeError):
        commutator_norm_scan(lacunary, "eta_leq", 1, (1, 2))
    with pytest.raises(LevelRangeError):
        commutator_norm_scan(lacunary, "eta_leq", 1, (1, lacunary.grid.kmax + 3))
