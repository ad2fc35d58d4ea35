#!/usr/bin/env python

"""Tests for pressure, Reynolds stresses and Euler identities."""

import json

import numpy as np
import pytest
from pytest import approx

from lptorus import EulerSnapshot, advective_derivative, analysis_table
from lptorus.bank import LevelRangeError, build_bank
from lptorus.euler import (
    UnsupportedTargetError,
    energy_flux,
    energy_flux_from_jet,
    energy_increment,
    euler_identity_residual,
    lp_pressure_parts,
    lp_pressure_piece,
    pressure,
    pressure_increment,
    pressure_increment_parts,
    pressure_increment_telescope,
    reynolds_stress,
    reynolds_trichotomy,
    save_analysis,
    truncated_energy,
)
from lptorus.field import Field, JetOrderError, sup_norm


def relative(a, b):
    return sup_norm(a - b) / sup_norm(b)


def quadratic_gap(a, b, v):
    return sup_norm(a - b) / sup_norm(v) ** 2


def test_taylor_green_pressure(taylor_green):
    """Test the closed-form Taylor-Green pressure."""
    x1, x2 = taylor_green.grid.coordinates
    p = pressure(taylor_green)
    assert np.allclose(p.values, 0.25 * (np.cos(2 * x1) + np.cos(2 * x2)))


def test_taylor_green_energy(taylor_green):
    """Test truncated energies of a low-mode flow."""
    assert truncated_energy(taylor_green, 3) == approx(np.pi**2)
    assert abs(energy_increment(taylor_green, 3)) < 1e-12


def test_zero_stress(taylor_green):
    """Test that flows band-limited below ``2^{k−2}`` carry no stress."""
    stress = reynolds_stress(taylor_green, 3)
    assert stress.shape == (2, 2)
    assert sup_norm(stress) < 1e-13
    for part in reynolds_trichotomy(taylor_green, 3):
        assert sup_norm(part) < 1e-13
    assert sup_norm(pressure_increment(taylor_green, 3)) < 1e-13


@pytest.mark.parametrize("k", [1, 2, 3])
def test_trichotomy(lacunary, k):
    """Test that the three stress parts sum to the stress."""
    stress = reynolds_stress(lacunary, k)
    parts = reynolds_trichotomy(lacunary, k)
    assert quadratic_gap(parts.total(), stress, lacunary) < 1e-12


@pytest.mark.parametrize("k", [0, 2, 3])
def test_stress_galilean(grid, lacunary, k):
    """Test that a constant velocity does not change the stress."""
    mean = np.array([2.5, -1.5])
    boosted = reynolds_stress(lacunary + Field.constant(grid, mean), k)
    scale = (sup_norm(lacunary) + np.hypot(*mean)) ** 2
    assert sup_norm(boosted - reynolds_stress(lacunary, k)) < 1e-12 * scale


def test_stress_symmetric(lacunary):
    """Test symmetry of the Reynolds stress."""
    stress = reynolds_stress(lacunary, 2)
    assert np.allclose(stress[0, 1].values, stress[1, 0].values, atol=1e-15)


def test_pressure_telescope(grid, lacunary):
    """Test that pressure increments telescope."""
    lo, hi = pressure_increment_telescope(lacunary, grid.k0, grid.kmax + 1)
    assert quadratic_gap(lo, hi, lacunary) < 1e-12


@pytest.mark.parametrize("k", [1, 2, 3])
def test_pressure_increment_parts(lacunary, k):
    """Test that the increment splits into low, high-low and high-high parts."""
    parts = pressure_increment_parts(lacunary, k)
    assert quadratic_gap(parts.total(), pressure_increment(lacunary, k), lacunary) < 1e-12


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_lp_pressure_parts(lacunary, k):
    """Test the frequency split of the pressure shells."""
    bank = build_bank(lacunary.grid)
    expected = bank.project_shell(pressure(lacunary), k)
    assert quadratic_gap(lp_pressure_parts(lacunary, k).total(), expected, lacunary) < 1e-12
    hess = lp_pressure_piece(lacunary, k, 2)
    assert hess.shape == (2, 2)


def test_lp_pressure_range(grid, lacunary):
    """Test that pressure pieces are refused above ``kmax + 1``."""
    with pytest.raises(LevelRangeError):
        lp_pressure_parts(lacunary, grid.kmax + 2)
    with pytest.raises(ValueError):
        lp_pressure_piece(lacunary, 2, 3)


def test_euler_residual(random_series):
    """Test that snapshot jets solve the truncated equations."""
    for snapshot in random_series[::5]:
        residual = euler_identity_residual(snapshot)
        assert residual < 1e-8 * sup_norm(snapshot.velocity) ** 2


def test_energy_flux(random_series):
    """Test the flux identity against the jet."""
    snapshot = random_series[5]
    for k in (1, 2, 3):
        flux = energy_flux(snapshot.velocity, k, snapshot.bank)
        assert energy_flux_from_jet(snapshot, k) == approx(flux, rel=1e-8, abs=1e-14)


def test_shell_velocity_rate(random_series):
    """Test the shell-velocity identity against the jet route."""
    snapshot = random_series[5]
    for k in (1, 2):
        identity = advective_derivative(snapshot, k, "Pk1_v", 1, method="identity")
        jet = advective_derivative(snapshot, k, "Pk1_v", 1, method="jet")
        assert relative(identity, jet) < 1e-10


@pytest.mark.parametrize("k", [0, 1])
def test_steady_shell_rate(taylor_green, k):
    """Test that a steady flow has ``D_{≤k}P_{k+1}v = P_{≤k}v·∇P_{k+1}v``."""
    snapshot = EulerSnapshot(taylor_green)
    bank = snapshot.bank
    expected = bank.project_shell(taylor_green, k + 1).advect(bank.project_leq(taylor_green, k))
    rate = advective_derivative(snapshot, k, "Pk1_v", 1)
    assert sup_norm(rate - expected) < 1e-12 * (1 + sup_norm(expected))


@pytest.mark.parametrize("target", ["Pleqk_v", "grad_Pleqk_v", "Pk_p", "dp_k", "grad_p_k"])
def test_second_order_targets(random_series, target):
    """Test that every target supports second advective derivatives."""
    out = advective_derivative(random_series[3], 2, target, 2)
    assert np.isfinite(out.values).all()


def test_advective_derivative_errors(grid, random_series, lacunary):
    """Test the argument checks of advective derivatives."""
    snapshot = random_series[3]
    with pytest.raises(UnsupportedTargetError):
        advective_derivative(snapshot, 2, "Pk1_v", 3)
    with pytest.raises(UnsupportedTargetError):
        advective_derivative(snapshot, 2, "vorticity")
    with pytest.raises(UnsupportedTargetError):
        advective_derivative(snapshot, 2, "Pk_p", 1, method="identity")
    with pytest.raises(LevelRangeError):
        advective_derivative(snapshot, grid.kmax + 1)
    short = EulerSnapshot(lacunary, jet_order=1)
    with pytest.raises(JetOrderError):
        advective_derivative(short, 2, "Pk1_v", 2)


def test_analysis_table(tmp_path, random_series):
    """Test per-level diagnostics and their files."""
    table = analysis_table(random_series[0], range(1, 3))
    assert list(table.columns) == ["k", "quantity", "D", "r", "value"]
    assert set(table["k"]) == {1, 2}
    assert {"Pk_v", "R_leqk", "Pk_p", "Dk_Pk1_v"} <= set(table["quantity"])
    out = tmp_path / "analysis"
    save_analysis(table, out, meta={"seed": 3})
    assert (tmp_path / "analysis.csv").exists()
    summary = json.loads((tmp_path / "analysis.json").read_text())
    assert summary["seed"] == 3
    assert "Pk_v:D0:r0" in summary["maxima"]
