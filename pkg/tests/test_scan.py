#!/usr/bin/env python

"""Tests for dyadic scans and Hölder measurements."""

import json

import numpy as np
import pandas as pd
import pytest
from pytest import approx

from lptorus import Field, scan
from lptorus.bank import LevelRangeError
from lptorus.scan import (
    SCHEMA,
    EmptyRangeError,
    FieldKindError,
    ScanReport,
    TooFewSamplesError,
    UnknownQuantityError,
    holder_time_exponent,
    structure_function,
    structure_slope,
    time_holder_field,
)
from lptorus.field import sup_norm


def power_law(values=None, k0=0, **kwargs):
    ks = np.arange(1, 7)
    if values is None:
        values = 3 * 2.0 ** (-ks / 3)
    rows = pd.DataFrame({"k": ks, "value": values})
    return ScanReport("Pk_v", rows, -1 / 3, 1 / 3, field_kind="synthetic", k0=k0, **kwargs)


def test_report_power_law():
    """Test fit, calibration and verdict of an exact power law."""
    report = power_law()
    assert report.fit_range == (2, 6)
    assert report.fit.points == 5
    assert report.slope == approx(-1 / 3)
    assert report.calibration == approx(3.6)
    assert report.dispersion == approx(1.0)
    assert report.passed
    assert np.allclose(report["ratio"], 3.0)


def test_report_violation():
    """Test that a growing ratio fails the verdict."""
    values = 3 * 2.0 ** (-np.arange(1, 7) / 3)
    values[-1] *= 2
    assert not power_law(values).passed


def test_report_unasserted_pressure_increment():
    """Test that log-factor bounds are not asserted below one third."""
    values = 3 * 2.0 ** (-np.arange(1, 7) / 3)
    values[-1] *= 100
    report = power_law(values, log_factor=True)
    assert not report.asserted
    assert report.passed
    assert report.to_dict()["asserted"] is False


def test_report_warnings(recwarn):
    """Test the roundoff and short-range warnings of the fit."""
    values = 3 * 2.0 ** (-np.arange(1, 7) / 3)
    values[0] = 0.0
    report = power_law(values)
    assert report.fit.points == 5
    w = recwarn.pop(UserWarning)
    assert str(w.message).startswith("Excluded 1 levels at roundoff")
    report = power_law(fit_range=(5, 6))
    assert report.fit.points == 6
    assert report.fit_range == (1, 6)
    w = recwarn.pop(UserWarning)
    assert "fewer than 4 usable levels" in str(w.message)


def test_report_empty():
    """Test reports of quantities that vanish identically."""
    report = power_law(np.zeros(6))
    assert report.is_empty
    assert report.fit is None
    assert np.isnan(report.slope)
    assert report.passed
    assert report.to_dict()["empty"]
    with pytest.raises(EmptyRangeError):
        ScanReport("Pk_v", {"k": [], "value": []}, 0.0, 0.5)


def test_report_save(tmp_path):
    """Test the CSV and JSON forms of a report."""
    report = power_law(meta={"config_digest": "abc"})
    csv_path, json_path = report.save(tmp_path / "reports")
    assert csv_path.name == "Pk_v.csv"
    frame = pd.read_csv(csv_path)
    assert list(frame["k"]) == list(range(1, 7))
    assert {"predicted", "ratio", "normalized", "field_kind"} <= set(frame.columns)
    data = json.loads(json_path.read_text())
    assert data["schema"] == SCHEMA
    assert data["config_digest"] == "abc"
    assert data["fit"]["k_range"] == [2, 6]
    assert data["passed"] is True


def test_scan_lacunary_shells(fine_lacunary):
    """Test that shells of a lacunary field decay like ``2^{−αk}``."""
    report = scan(fine_lacunary, "Pk_v", alpha=0.5)
    assert report.field_kind == "synthetic"
    assert list(report["k"]) == [1, 2, 3, 4, 5, 6]
    assert report.predicted_slope == -0.5
    assert report.slope == approx(-0.5, abs=0.05)
    assert report.seminorm > 0
    assert report.passed


def test_scan_lacunary_gradients(fine_lacunary):
    """Test the growth of coarse gradients."""
    report = scan(fine_lacunary, "grad_Pleqk_v", alpha=0.5)
    assert report.predicted_slope == 0.5
    assert report.slope == approx(0.5, abs=0.2)


def test_scan_lacunary_stress(fine_lacunary):
    """Test the decay of the coarse Reynolds stress."""
    report = scan(fine_lacunary, "R_leqk", (1, 5), alpha=0.5, fit_range=(1, 5))
    assert report.degree == 2
    assert report.slope == approx(-1.0, abs=0.3)


def test_scan_euler_series(random_series):
    """Test an Euler-only quantity on simulated snapshots."""
    report = scan(list(random_series)[::5], "Dk_Pk1_v", (1, 3), alpha=0.5)
    assert report.field_kind == "euler"
    assert (report.values > 0).all()


def test_scan_errors(grid, lacunary):
    """Test the argument checks of scans."""
    with pytest.raises(UnknownQuantityError):
        scan(lacunary, "vorticity")
    with pytest.raises(EmptyRangeError):
        scan(lacunary, "Pk_v", (3, 2))
    with pytest.raises(EmptyRangeError):
        scan([], "Pk_v")
    with pytest.raises(FieldKindError):
        scan(lacunary, "Dk_Pk1_v")
    with pytest.raises(LevelRangeError):
        scan(lacunary, "Pk_v", (1, grid.kmax + 2))


def test_holder_time_exponent():
    """Test exponents of scalar series."""
    t = np.linspace(-1, 1, 257)
    cusp = holder_time_exponent(np.sqrt(np.abs(t)), dt=t[1] - t[0])
    assert cusp.exponent == approx(0.5)
    assert not cusp.conserved
    assert list(cusp.lags["lag"]) == [2**j for j in range(9)]
    smooth = holder_time_exponent(np.sin(np.linspace(0, 2 * np.pi, 257)))
    assert smooth.exponent == approx(1.0, abs=0.05)
    flat = holder_time_exponent(np.full(100, 2.5))
    assert flat.conserved
    assert flat.exponent == float("inf")
    with pytest.raises(TooFewSamplesError):
        holder_time_exponent(np.zeros(63))


def test_time_holder_field(random_series, tg_series):
    """Test the Lipschitz-in-time constant of a smooth flow."""
    report = time_holder_field(random_series, 1.0)
    rate = max(sup_norm(s.jet[1]) for s in random_series)
    assert report.passed
    assert report.constant == approx(rate, rel=0.3)
    assert list(report.table["lag"]) == [1, 2, 4, 8, 16]
    with pytest.raises(TooFewSamplesError):
        time_holder_field(tg_series, 0.5)


def test_structure_function(grid):
    """Test second-order structure functions of a single shear mode."""
    v = Field.from_function(grid, lambda x1, x2: (0 * x1, np.sin(x1)))
    table = structure_function(v, orders=[2], lags=[0.5, 1.0])
    assert list(table.columns) == ["p", "ell", "S"]
    ell = np.array([0.5, 1.0])
    expected = np.sqrt(
        (4 * np.sin(ell / 2) ** 2 + 8 * np.sin(ell / (2 * np.sqrt(2))) ** 2) / 8
    )
    assert np.allclose(table["S"], expected)
    small = structure_function(v, orders=[2], lags=np.geomspace(0.01, 0.04, 3))
    assert structure_slope(small, 2).slope == approx(1.0, abs=1e-3)
    with pytest.raises(ValueError):
        structure_function(v, orders=[0.5])
