"""Self-checks of the identities, commutator bounds and particle paths."""

from __future__ import annotations

import os
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np
import pandas as pd
from toolz import memoize
from wasabi import msg, table

from ._util import LPTorusError
from .bank import build_bank, reconstruct
from .commutator import (
    ConvOp,
    commutator_direct,
    commutator_kernel,
    commutator_second,
    commutator_second_oracle,
)
from .config import make_rng
from .euler import (
    EulerSnapshot,
    advective_derivative,
    energy_flux,
    energy_flux_from_jet,
    euler_identity_residual,
    lp_pressure_parts,
    pressure_increment,
    pressure_increment_parts,
    pressure_increment_telescope,
    reynolds_stress,
    reynolds_trichotomy,
)
from .examples import cellular_stream
from .field import Field, TorusGrid, sup_norm
from .scan import scan
from .sim import SimConfig, SnapshotSeries, difference_convergence, simulate
from .synth import synth_lacunary
from .trajectory import integrate_flow, taylor_check


class UnknownSuiteError(LPTorusError, ValueError):
    """Raised if a verification suite does not exist."""


#: Stream of the random operands of the kernel checks.
CASE_STREAM = 104_729

#: Seeded cases of the kernel check.
KERNEL_CASES = 20

#: Smallest accepted order of the difference oracle under stride halving.
MIN_DIFFERENCE_ORDER = 1.8


class Check(NamedTuple):
    """Outcome of a single check."""

    suite: str
    name: str
    passed: bool
    value: float
    tolerance: float


class Fixtures:
    """Flows shared by the checks of one run."""

    def __init__(self, n: int = 64, seed: int = 0) -> None:
        self.grid = TorusGrid(n)
        self.seed = seed

    @memoize
    def lacunary(self, alpha: float = 1 / 3, case: int = 0) -> Field:
        g = self.grid
        seed = self.seed + CASE_STREAM * case
        return synth_lacunary(g, alpha, (g.k0 + 1, g.kmax + 1), seed=seed)

    @memoize
    def random_flow(self) -> SnapshotSeries:
        conf = SimConfig(
            self.grid, "random", dt=0.002, steps=40, stride=2, alpha=0.5, shells=(1, 3),
            seed=self.seed,
        )
        return simulate(conf)

    @memoize
    def named_flow(self, name: str) -> SnapshotSeries:
        return simulate(SimConfig(self.grid, name, dt=0.01, steps=100, stride=5))


def _relative(a: Field, b: Field) -> float:
    return sup_norm(a - b) / max(sup_norm(b), 1e-300)


def _identity_checks(fx: Fixtures) -> list[tuple[str, float, float]]:
    grid = fx.grid
    bank = build_bank(grid)
    v = fx.lacunary()
    snap = fx.random_flow()[5]
    k = grid.kmax - 1
    # quadratic identities are compared at the scale of ‖v‖²
    quad = max(sup_norm(v) ** 2, 1e-300)
    stress = reynolds_stress(v, k, bank)
    lo, hi = pressure_increment_telescope(v, grid.k0, grid.kmax + 1, bank)
    mean = np.array([0.7, -1.3])
    boosted = reynolds_stress(v + Field.constant(grid, mean), k, bank)
    flux = energy_flux(snap.velocity, k, bank)
    order = difference_convergence(fx.random_flow(), 0.032).slope
    return [
        ("lp_reconstruction", _relative(reconstruct(bank, v), v), 1e-12),
        (
            "reynolds_trichotomy",
            sup_norm(reynolds_trichotomy(v, k, bank).total() - stress) / quad,
            1e-12,
        ),
        (
            "galilean_stress",
            sup_norm(boosted - stress) / (sup_norm(v) + np.hypot(*mean)) ** 2,
            1e-12,
        ),
        ("pressure_telescope", sup_norm(lo - hi) / quad, 1e-12),
        (
            "pressure_increment_parts",
            sup_norm(
                pressure_increment_parts(v, k, bank).total() - pressure_increment(v, k, bank)
            )
            / quad,
            1e-12,
        ),
        (
            "lp_pressure_pieces",
            sup_norm(
                lp_pressure_parts(v, k, bank).total()
                - bank.project_shell(EulerSnapshot.frozen(v).pressure, k)
            )
            / quad,
            1e-12,
        ),
        (
            "euler_residual",
            euler_identity_residual(snap) / max(sup_norm(snap.velocity) ** 2, 1e-300),
            1e-8,
        ),
        (
            "energy_flux",
            abs(flux - energy_flux_from_jet(snap, k)) / max(abs(flux), 1e-300),
            1e-8,
        ),
        (
            "shell_velocity_rate",
            _relative(
                advective_derivative(snap, k, "Pk1_v", 1, method="identity"),
                advective_derivative(snap, k, "Pk1_v", 1, method="jet"),
            ),
            1e-10,
        ),
        (
            "jet_convergence_order",
            max(MIN_DIFFERENCE_ORDER - order, 0.0),
            0.0,
        ),
    ]


def _kernel_case(fx: Fixtures, level: int, i: int) -> float:
    grid = fx.grid
    bank = build_bank(grid)
    u = bank.project_leq(fx.lacunary(case=i), level)
    rng = make_rng(CASE_STREAM, i, seed=fx.seed)
    f = bank.project_leq(Field(grid, rng.standard_normal((grid.n, grid.n))), level + 1)
    op = ConvOp(bank, level, "hess_invlap_leq", (0, 1))
    gap = sup_norm(commutator_kernel(u, op, f) - commutator_direct(u, op, f))
    return gap / max(sup_norm(u.grad()) * sup_norm(f), 1e-300)


def _commutator_checks(fx: Fixtures) -> list[tuple[str, float, float]]:
    grid = fx.grid
    bank = build_bank(grid)
    snap = fx.random_flow()[5]
    level = grid.k0 + 2
    f = bank.project_leq(fx.lacunary(), level + 1)[0]
    op = ConvOp(bank, level, "hess_invlap_leq", (0, 1))
    second = commutator_second(snap, level, op, f).total()
    report = scan(fx.lacunary(1 / 3), "Pk_v", alpha=1 / 3)
    kernel_gap = max(_kernel_case(fx, level, i) for i in range(KERNEL_CASES))
    return [
        ("kernel_vs_direct", kernel_gap, 1e-10),
        ("second_vs_oracle", _relative(second, commutator_second_oracle(snap, level, op, f)), 1e-8),
        ("lacunary_Pk_v_slope", abs(report.slope + 1 / 3), 0.1),
        ("lacunary_Pk_v_bound", float(not report.passed), 0.5),
    ]


def _trajectory_checks(fx: Fixtures) -> list[tuple[str, float, float]]:
    grid = fx.grid
    mean = np.array([0.3, -0.7])
    const = SnapshotSeries.frozen(Field.constant(grid, mean), [0.0, 0.5, 1.0])
    x0 = np.array([1.0, 2.0])
    path = integrate_flow(const, grid.kmax, x0, 0.0, 1.0)
    expected = np.mod(x0 + mean, grid.period)
    cellular = fx.named_flow("cellular")
    t1 = float(cellular.times[-1])
    orbit = integrate_flow(cellular, grid.kmax, x0, 0.0, t1)
    back = integrate_flow(cellular, grid.kmax, orbit.end, t1, 0.0)
    stream = cellular_stream(orbit.positions[:, 0], grid.period)
    tg = fx.named_flow("taylor_green")
    taylor = taylor_check(tg, grid.kmax, x0, 0.0, 0.4, order=1)
    return [
        ("constant_flow", float(np.abs(path.wrapped()[-1, 0] - expected).max()), 1e-12),
        ("stream_conservation", float(np.ptp(stream)), 1e-8),
        ("time_reversal", float(np.abs(back.end[0] - x0).max()), 1e-8),
        ("taylor_order", abs(taylor.fitted_order - 2.0), 0.2),
    ]


#: Checks of each suite.
SUITES: dict[str, Callable[[Fixtures], list[tuple[str, float, float]]]] = {
    "identities": _identity_checks,
    "commutators": _commutator_checks,
    "trajectories": _trajectory_checks,
}


class VerifyReport:
    """Collected checks of a verification run."""

    def __init__(self, checks: list[Check]) -> None:
        self.checks = checks

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.checks, columns=Check._fields)

    def print(self) -> None:
        rows = [
            (c.suite, c.name, f"{c.value:.3e}", f"{c.tolerance:.1e}", "ok" if c.passed else "FAIL")
            for c in self.checks
        ]
        print(table(rows, header=["Suite", "Check", "Value", "Tolerance", ""], divider=True))
        if self.passed:
            msg.good(f"All {len(self.checks)} checks passed.")
        else:
            failed = sum(not c.passed for c in self.checks)
            msg.fail(f"{failed} of {len(self.checks)} checks failed.")

    def to_junit(self) -> ET.ElementTree:
        """JUnit XML with one test case per check."""
        root = ET.Element("testsuites")
        for suite, group in self.to_frame().groupby("suite", sort=False):
            node = ET.SubElement(
                root,
                "testsuite",
                name=str(suite),
                tests=str(len(group)),
                failures=str(int((~group["passed"]).sum())),
            )
            for row in group.itertuples():
                case = ET.SubElement(node, "testcase", classname=f"lptorus.{suite}", name=row.name)
                if not row.passed:
                    ET.SubElement(case, "failure", message=f"{row.value:.3e} > {row.tolerance:.1e}")
        return ET.ElementTree(root)

    def save(self, directory: os.PathLike[str] | str) -> None:
        """Write ``junit.xml`` and ``summary.csv`` into a directory."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.to_junit().write(directory / "junit.xml", encoding="utf-8", xml_declaration=True)
        self.to_frame().to_csv(directory / "summary.csv", index=False)


def verify(suite: str = "all", n: int = 64, seed: int = 0) -> VerifyReport:
    """
    Run a verification suite.

    Parameters
    ----------
    suite : {"identities", "commutators", "trajectories", "all"}, optional
        Suite to run.
    n : int, optional
        Grid size of the test flows.
    seed : int, optional
        Seed of the random flows.

    Raises
    ------
    UnknownSuiteError
        If the suite does not exist.
    """
    if suite != "all" and suite not in SUITES:
        raise UnknownSuiteError(f"Unknown verification suite '{suite}'.")
    names = list(SUITES) if suite == "all" else [suite]
    fixtures = Fixtures(n, seed)
    checks = []
    for name in names:
        msg.divider(name)
        for check, value, tol in SUITES[name](fixtures):
            checks.append(Check(name, check, bool(value <= tol), float(value), tol))
    return VerifyReport(checks)
