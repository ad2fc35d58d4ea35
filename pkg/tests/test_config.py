#!/usr/bin/env python

"""Tests for global parameters and run configurations."""

import numpy as np
import pytest

import lptorus as lpt
from lptorus.config import RUN_DEFAULTS, RunConfiguration, make_rng


def test_config_save_and_load(tmp_path):
    """Test saving and loading global parameters."""
    out = tmp_path / "out.params"
    defaults = lpt.params.copy()
    lpt.params.update({"probe_count": 3, "fit_calibration": 1.5})
    changed = lpt.params.copy()
    lpt.params.save(out)
    lpt.params.update(defaults)
    lpt.params.load(out)
    assert lpt.params == changed
    lpt.params.update(defaults)


def test_unknown_parameter(recwarn):
    """Test that unknown parameters are skipped with a warning."""
    lpt.params["lang"] = "cs"
    assert "lang" not in lpt.params
    w = recwarn.pop(UserWarning)
    assert str(w.message) == "Parameter 'lang' not known. Skipping."
    with pytest.raises(FileNotFoundError):
        lpt.params.load("does-not-exist.params")


def test_make_rng():
    """Test derived random streams."""
    a = make_rng(1, 2, seed=5).standard_normal(4)
    b = make_rng(1, 2, seed=5).standard_normal(4)
    c = make_rng(1, 3, seed=5).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_run_configuration(tmp_path, recwarn):
    """Test reading a sectioned configuration file."""
    path = tmp_path / "tg.cfg"
    path.write_text(
        "[grid]\nn = 64\n\n[simulation]\ndt = 0.005\nsteps = 20\ncolour = red\n"
        "\n[output]\nforce = yes\n"
    )
    conf = RunConfiguration.load(path)
    assert conf["grid"]["n"] == 64
    assert conf["simulation"]["dt"] == 0.005
    assert conf["simulation"]["steps"] == 20
    assert conf["simulation"]["initial"] == RUN_DEFAULTS["simulation"]["initial"]
    assert conf["output"]["force"] is True
    w = recwarn.pop(UserWarning)
    assert str(w.message) == "Parameter 'simulation.colour' not known. Skipping."
    with pytest.raises(FileNotFoundError):
        RunConfiguration.load(tmp_path / "missing.cfg")


def test_run_configuration_dump(tmp_path):
    """Test that dumped configurations load back unchanged."""
    conf = RunConfiguration({"scan": {"quantities": "Pk_v", "alpha": 0.4}})
    out = tmp_path / "dump.cfg"
    conf.save(out)
    again = RunConfiguration.load(out)
    assert again == conf
    assert again.digest() == conf.digest()
    assert RunConfiguration().digest() != conf.digest()
    assert "[trajectory]" in conf.dump()
