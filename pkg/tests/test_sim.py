#!/usr/bin/env python

"""Tests for the Euler solver and snapshot files."""

import numpy as np
import pytest
from pytest import approx

from lptorus import SimConfig, SnapshotSeries, examples, load_series, simulate
from lptorus.field import sup_norm
from lptorus.sim import (
    HEADER,
    MAGIC,
    CFLError,
    RangeSyntaxError,
    SeriesRangeError,
    SnapshotFormatError,
    _parse_range,
    difference_convergence,
    read_snapshot,
    time_derivative_oracle,
    write_snapshot,
)


def test_config_errors(grid):
    """Test that bad run settings are refused."""
    with pytest.raises(ValueError):
        SimConfig(grid, "vortex_street")
    with pytest.raises(ValueError):
        SimConfig(grid, dealias="three_halves")
    with pytest.raises(ValueError):
        SimConfig(grid, steps=0)
    with pytest.raises(CFLError):
        simulate(SimConfig(grid, dt=1.0, steps=1))


def test_parse_range():
    """Test parsing of integer ranges."""
    assert _parse_range("1:3") == (1, 3)
    assert _parse_range("4") == (4, 4)
    with pytest.raises(RangeSyntaxError):
        _parse_range("a:b")


def test_taylor_green_steady(tg_series, taylor_green):
    """Test that the Taylor-Green flow does not change."""
    assert len(tg_series) == 9
    assert tg_series.stride == approx(0.05)
    assert sup_norm(tg_series[-1].velocity - taylor_green) < 1e-10
    diag = tg_series.diagnostics()
    assert diag["energy"].to_numpy() == approx(np.pi**2, rel=1e-12)
    assert diag["max_vorticity"].to_numpy() == approx(2.0)


def test_conservation(random_series):
    """Test energy and enstrophy conservation of the truncated dynamics."""
    diag = random_series.diagnostics()
    energy = diag["energy"].to_numpy()
    enstrophy = diag["enstrophy"].to_numpy()
    assert np.abs(energy / energy[0] - 1).max() < 1e-8
    assert np.abs(enstrophy / enstrophy[0] - 1).max() < 1e-7
    assert np.abs(diag[["mean_u1", "mean_u2"]].to_numpy()).max() < 1e-14


def test_galilean_boost(grid, taylor_green):
    """Test that a mean velocity translates the flow."""
    conf = SimConfig(grid, "taylor_green", dt=0.01, steps=10, stride=5, mean=(0.5, 0.0))
    series = simulate(conf)
    last = series[-1]
    expected = taylor_green.shift((-0.5 * last.time, 0.0)) + np.array([0.5, 0.0])
    assert sup_norm(last.velocity - expected) < 1e-9
    assert series.diagnostics()["mean_u1"].to_numpy() == approx(0.5)


def test_jets_against_differences(random_series):
    """Test equation-based time derivatives against finite differences."""
    t = random_series.times[10]
    snapshot = random_series[10]
    for order in (1, 2):
        oracle = time_derivative_oracle(random_series, t, order)
        assert sup_norm(oracle - snapshot.jet[order]) < 1e-3 * sup_norm(snapshot.jet[order])


def test_difference_order(random_series):
    """Test that halving the stride shrinks the difference error at order >= 1.8."""
    fit = difference_convergence(random_series, random_series.times[8])
    assert fit.points == 3
    assert fit.slope >= 1.8
    with pytest.raises(SeriesRangeError):
        difference_convergence(random_series, random_series.times[4])


def test_oracle_range(random_series):
    """Test that the difference oracle needs two strides on each side."""
    with pytest.raises(SeriesRangeError):
        time_derivative_oracle(random_series, random_series.times[1])
    with pytest.raises(SeriesRangeError):
        time_derivative_oracle(random_series, 0.0012)
    with pytest.raises(ValueError):
        time_derivative_oracle(random_series, random_series.times[10], 4)


def test_series_validation(grid, taylor_green):
    """Test that series need uniform increasing times."""
    frozen = SnapshotSeries.frozen(taylor_green, [0.0, 0.5, 1.0])
    assert frozen.kind == "synthetic"
    assert frozen.index_of(0.5) == 1
    with pytest.raises(SnapshotFormatError):
        SnapshotSeries.frozen(taylor_green, [0.0, 1.0, 3.0])
    with pytest.raises(SnapshotFormatError):
        SnapshotSeries.frozen(taylor_green, [1.0, 0.0])
    with pytest.raises(SnapshotFormatError):
        SnapshotSeries([])


def test_series_save_and_load(tmp_path, tg_series):
    """Test writing and reading a snapshot series."""
    index = tg_series.save(tmp_path)
    assert index.name == "index.txt"
    assert len(list(tmp_path.glob("*.lpsv"))) == len(tg_series)
    loaded = load_series(tmp_path)
    assert np.array_equal(loaded.times, tg_series.times)
    assert np.array_equal(loaded.velocities(), tg_series.velocities())


def test_snapshot_file(tmp_path, grid):
    """Test a single snapshot file."""
    v = examples.two_shell(grid)
    out = tmp_path / "v.lpsv"
    write_snapshot(out, v, 0.25)
    w, t = read_snapshot(out)
    assert t == 0.25
    assert w.grid == grid
    assert np.array_equal(w.values, v.values)
    assert out.stat().st_size == HEADER.size + 8 * 2 * grid.n**2


def test_snapshot_file_errors(tmp_path, grid):
    """Test that malformed snapshot files are refused."""
    payload = np.zeros((2, grid.n, grid.n)).tobytes()
    bad_magic = tmp_path / "magic.lpsv"
    bad_magic.write_bytes(HEADER.pack(b"LPSV9\0", 2, grid.n, grid.period, 0.0, 2) + payload)
    wrong_dim = tmp_path / "dim.lpsv"
    wrong_dim.write_bytes(HEADER.pack(MAGIC, 3, grid.n, grid.period, 0.0, 2) + payload)
    truncated = tmp_path / "short.lpsv"
    truncated.write_bytes(HEADER.pack(MAGIC, 2, grid.n, grid.period, 0.0, 2) + payload[:100])
    bad_grid = tmp_path / "grid.lpsv"
    bad_grid.write_bytes(HEADER.pack(MAGIC, 2, 48, grid.period, 0.0, 2) + payload)
    for path in (bad_magic, wrong_dim, truncated, bad_grid):
        with pytest.raises(SnapshotFormatError):
            read_snapshot(path)
    with pytest.raises(FileNotFoundError):
        read_snapshot(tmp_path / "missing.lpsv")
    with pytest.raises(FileNotFoundError):
        load_series(tmp_path / "nothing")


def test_index_mismatch(tmp_path, tg_series):
    """Test that index times must match the files."""
    index = tg_series.save(tmp_path)
    lines = index.read_text().splitlines()
    lines[1] = "0.07 " + lines[1].split()[1]
    index.write_text("\n".join(lines))
    with pytest.raises(SnapshotFormatError):
        load_series(tmp_path)
