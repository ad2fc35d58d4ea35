#!/usr/bin/env python

"""Tests for the verification suites."""

import xml.etree.ElementTree as ET

import pandas as pd
import pytest

from lptorus import verify
from lptorus.verify import Check, UnknownSuiteError, VerifyReport


def test_trajectory_suite(tmp_path):
    """Test that the particle-path checks pass and are written out."""
    report = verify("trajectories", n=64, seed=0)
    assert report.passed
    names = [c.name for c in report.checks]
    assert names == ["constant_flow", "stream_conservation", "time_reversal", "taylor_order"]
    report.save(tmp_path)
    root = ET.parse(tmp_path / "junit.xml").getroot()
    suite = root.find("testsuite")
    assert suite.get("name") == "trajectories"
    assert suite.get("failures") == "0"
    assert len(suite.findall("testcase")) == 4
    assert len(pd.read_csv(tmp_path / "summary.csv")) == 4


def test_failed_checks():
    """Test that failures show up in the verdict and the XML."""
    report = VerifyReport(
        [
            Check("identities", "good", True, 1e-14, 1e-12),
            Check("identities", "bad", False, 1e-3, 1e-12),
        ]
    )
    assert not report.passed
    suite = report.to_junit().getroot().find("testsuite")
    assert suite.get("failures") == "1"
    failed = [case for case in suite if case.find("failure") is not None]
    assert [case.get("name") for case in failed] == ["bad"]


def test_unknown_suite():
    """Test the error for unknown suites."""
    with pytest.raises(UnknownSuiteError):
        verify("benchmarks")


def test_identity_suite():
    """Test that the identity checks pass at their quadratic tolerances."""
    report = verify("identities", n=64, seed=0)
    names = [c.name for c in report.checks]
    assert "galilean_stress" in names
    assert "pressure_increment_parts" in names
    assert "jet_convergence_order" in names
    tolerances = {c.name: c.tolerance for c in report.checks}
    assert tolerances["reynolds_trichotomy"] == 1e-12
    assert tolerances["pressure_telescope"] == 1e-12
    assert report.passed, report.to_frame()


@pytest.mark.slow
def test_commutator_suite():
    """Test the seeded kernel cases and the second commutator."""
    report = verify("commutators", n=64, seed=0)
    names = [c.name for c in report.checks]
    assert names[:2] == ["kernel_vs_direct", "second_vs_oracle"]
    assert report.passed, report.to_frame()
