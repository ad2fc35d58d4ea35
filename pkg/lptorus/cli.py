"""Command line interface."""

from __future__ import annotations

import configparser
import json
from pathlib import Path

import click
import numpy as np
import pandas as pd
from wasabi import msg, table

import lptorus as lpt

from ._util import LPTorusError
from .commutator import commutator_norm_scan
from .config import RunConfiguration
from .examples import named_flow
from .field import Field, TorusGrid
from .scan import SCHEMA, EmptyRangeError, ScanReport, UnknownQuantityError, scan
from .sim import (
    SimConfig,
    SnapshotSeries,
    _parse_range,
    load_series,
    read_snapshot,
    simulate,
    write_snapshot,
)
from .synth import synth_lacunary
from .trajectory import integrate_flow, taylor_check
from .verify import verify

#: Exit code of failed inequality verdicts or checks.
EXIT_FAILED = 1

#: Exit code of bad input (malformed files, unknown names, empty ranges).
EXIT_BAD_INPUT = 3


class OutputExistsError(LPTorusError):
    """Raised if an output directory exists and overwriting was not requested."""


class _Group(click.Group):
    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except (LPTorusError, FileNotFoundError, configparser.Error) as err:
            msg.fail(str(err))
            ctx.exit(EXIT_BAD_INPUT)


def _load_config(path: str | None) -> RunConfiguration:
    conf = RunConfiguration.load(path) if path else RunConfiguration()
    lpt.params["profile"] = conf["grid"]["profile"]
    return conf


def _prepare(directory: Path, force: bool) -> Path:
    if directory.exists() and any(directory.iterdir()) and not force:
        raise OutputExistsError(f"Output directory '{directory}' exists; use --force.")
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def _provenance(conf: RunConfiguration, **extra) -> dict:
    return dict(
        version=lpt.__version__,
        config_digest=conf.digest(),
        seed=lpt.params["seed"],
        profile=lpt.params["profile"],
        **extra,
    )


def _read_source(path: Path) -> Field | SnapshotSeries:
    if path.is_dir():
        return load_series(path)
    field, _ = read_snapshot(path)
    return field


config_option = click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    help="Run configuration file.",
)


@click.group(cls=_Group)
@click.version_option(package_name="lptorus")
@click.option("--workers", type=int, help="Worker threads (default: all cores).")
@click.option("--seed", type=int, help="Global seed.")
@click.option("--quiet", is_flag=True, help="Hide progress bars.")
def cli(workers: int | None, seed: int | None, quiet: bool) -> None:
    """Littlewood-Paley calculus on the two-dimensional torus."""
    if workers is not None:
        lpt.params["workers"] = workers
    if seed is not None:
        lpt.params["seed"] = seed
    if quiet:
        lpt.params["progress_bar"] = False


@cli.command("simulate")
@config_option
@click.option("--out", type=click.Path(file_okay=False), help="Output directory.")
@click.option("--force", is_flag=True, help="Overwrite an existing directory.")
def simulate_command(config_path: str | None, out: str | None, force: bool) -> None:
    """Integrate the Euler equations and write a snapshot series."""
    conf = _load_config(config_path)
    directory = _prepare(
        Path(out or conf["output"]["directory"]), force or conf["output"]["force"]
    )
    sim = SimConfig.from_run_config(conf)
    msg.info(f"Simulating {sim!r}")
    series = simulate(sim)
    series.save(directory)
    diag = series.diagnostics()
    drift = float(np.abs(diag["energy"] / diag["energy"].iloc[0] - 1).max())
    meta = _provenance(conf, simulation=sim.to_dict(), energy_drift=drift)
    (directory / "provenance.json").write_text(json.dumps(meta, indent=2))
    diag.to_csv(directory / "diagnostics.csv", index=False)
    msg.good(f"Relative energy drift {drift:.2e} over {len(series)} snapshots.")


@cli.command("synth")
@config_option
@click.option("--alpha", type=float, help="Hölder exponent.")
@click.option("--shells", help="Shell range 'j0:j1'.")
@click.option("--name", help="Named flow instead of a lacunary field.")
@click.option("--grid", "n", type=int, help="Samples per axis.")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="LPSV1 file.")
def synth_command(config_path, alpha, shells, name, n, out) -> None:
    """Write a synthetic or named velocity field as an LPSV1 file."""
    conf = _load_config(config_path)
    grid = TorusGrid(n or conf["grid"]["n"], conf["grid"]["period"])
    name = name or conf["synth"]["name"]
    if name:
        v = named_flow(grid, name)
    else:
        v = synth_lacunary(
            grid,
            alpha if alpha is not None else conf["synth"]["alpha"],
            _parse_range(shells or conf["synth"]["shells"]),
            seed=conf["synth"]["seed"],
        )
    write_snapshot(out, v, 0.0)
    msg.good(f"Wrote field to '{out}'.")


def _scan_one(
    source, quantity: str, k_range, alpha: float, probes: int, meta: dict
) -> ScanReport:
    if quantity.startswith("commutator_r"):
        order, _, symbol = quantity[len("commutator_r") :].partition("_")
        if not order.isdigit():
            raise UnknownQuantityError(f"Unknown quantity '{quantity}'.")
        snapshot = source[0] if isinstance(source, SnapshotSeries) else source
        report = commutator_norm_scan(
            snapshot, symbol, int(order), k_range, alpha, probes=probes
        )
        report.meta.update(meta)
        return report
    return scan(source, quantity, k_range, alpha, meta=meta)


@cli.command("scan")
@click.argument("source", required=False, type=click.Path(exists=True))
@config_option
@click.option("--synth", "synth_alpha", type=float, help="Scan a lacunary field of this exponent.")
@click.option("--quantity", help="Comma-separated quantity identifiers.")
@click.option("--krange", help="Level range 'lo:hi'.")
@click.option("--alpha", type=float, help="Hölder exponent of the prediction.")
@click.option("--grid", "n", type=int, help="Samples per axis of synthetic fields.")
@click.option("--out", type=click.Path(file_okay=False), help="Report directory.")
def scan_command(source, config_path, synth_alpha, quantity, krange, alpha, n, out) -> None:
    """Fit dyadic scaling laws and check the predicted inequalities."""
    conf = _load_config(config_path)
    sc = conf["scan"]
    alpha = alpha if alpha is not None else (synth_alpha or sc["alpha"])
    if source:
        field = _read_source(Path(source))
    elif synth_alpha is not None:
        grid = TorusGrid(n or conf["grid"]["n"], conf["grid"]["period"])
        field = synth_lacunary(grid, synth_alpha, (grid.k0 + 1, grid.kmax + 1))
    else:
        raise click.UsageError("Give a SOURCE or --synth.")
    quantities = [q.strip() for q in (quantity or sc["quantities"]).split(",") if q.strip()]
    if not quantities:
        raise EmptyRangeError("No quantity requested.")
    text = krange or sc["krange"]
    k_range = _parse_range(text) if text else None
    meta = _provenance(conf, source=str(source or f"synth:{synth_alpha}"))
    directory = Path(out or conf["output"]["directory"])
    rows = []
    passed = True
    for q in quantities:
        report = _scan_one(field, q, k_range, alpha, sc["probes"], meta)
        report.save(directory)
        passed &= report.passed
        rows.append(
            (q, f"{report.slope:.3f}", f"{report.predicted_slope:.3f}", "ok" if report.passed else "FAIL")
        )
    print(table(rows, header=["Quantity", "Slope", "Predicted", "Verdict"], divider=True))
    if not passed:
        msg.fail("Some inequality verdicts failed.")
        click.get_current_context().exit(EXIT_FAILED)
    msg.good(f"Reports written to '{directory}'.")


@cli.command("verify")
@click.argument("suite", default="all")
@click.option("--grid", "n", type=int, default=64, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), help="Directory for junit.xml.")
def verify_command(suite: str, n: int, seed: int, out: str | None) -> None:
    """Run a verification suite (identities, commutators, trajectories, all)."""
    report = verify(suite, n, seed)
    report.print()
    if out:
        report.save(out)
    if not report.passed:
        click.get_current_context().exit(EXIT_FAILED)


@cli.command("traject")
@click.argument("source", type=click.Path(exists=True, file_okay=False))
@config_option
@click.option("--k", "level", type=int, help="Level of the advecting field.")
@click.option("--x0", help="Start position 'x1,x2'.")
@click.option("--t0", type=float)
@click.option("--t1", type=float)
@click.option("--order", type=int, help="Taylor degree.")
@click.option("--out", type=click.Path(file_okay=False), help="Output directory.")
def traject_command(source, config_path, level, x0, t0, t1, order, out) -> None:
    """Follow a particle and check the Taylor expansion of its path."""
    conf = _load_config(config_path)
    tc = conf["trajectory"]
    series = load_series(source)
    level = tc["k"] if level is None else level
    start = [float(c) for c in (x0 or tc["x0"]).split(",")]
    t0 = tc["t0"] if t0 is None else t0
    t1 = tc["t1"] if t1 is None else t1
    order = tc["taylor_order"] if order is None else order
    directory = Path(out or conf["output"]["directory"])
    directory.mkdir(parents=True, exist_ok=True)
    path = integrate_flow(series, level, start, t0, t1)
    path.save(directory / f"path_k{level}.csv")
    lo, hi = _parse_range(tc["ladder"])
    report = taylor_check(series, level, start, t0, t1, order, range(lo, hi + 1))
    payload = dict(report.to_dict(), **_provenance(conf, source=str(source), k=level))
    (directory / f"taylor_k{level}.json").write_text(json.dumps(payload, indent=2, default=float))
    msg.good(
        f"Remainder order {report.fitted_order:.2f} (expected {order + 1}); "
        f"end point {path.wrapped()[-1, 0]}."
    )


@cli.command("report")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), help="Summary CSV.")
def report_command(directory: str, out: str | None) -> None:
    """Collect the scan reports of a directory into one table."""
    rows = []
    for file in sorted(Path(directory).glob("*.json")):
        data = json.loads(file.read_text())
        if data.get("schema") != SCHEMA:
            continue
        fit = data.get("fit") or {}
        rows.append(
            dict(
                quantity=data["quantity"],
                field_kind=data["field_kind"],
                alpha=data["alpha"],
                predicted_slope=data["predicted_slope"],
                slope=fit.get("slope", float("nan")),
                r_squared=fit.get("r_squared", float("nan")),
                passed=data["passed"],
            )
        )
    if not rows:
        raise EmptyRangeError(f"No scan reports in '{directory}'.")
    frame = pd.DataFrame(rows)
    print(table(frame.to_numpy().tolist(), header=list(frame.columns), divider=True))
    if out:
        frame.to_csv(out, index=False)


@cli.command("config")
@config_option
@click.option("--dump", is_flag=True, help="Print every setting.")
def config_command(config_path: str | None, dump: bool) -> None:
    """Show the run configuration."""
    conf = _load_config(config_path)
    if dump:
        click.echo(conf.dump())
    else:
        print(repr(conf))


def main() -> None:
    cli(prog_name="lptorus")
