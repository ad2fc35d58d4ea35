"""Implements configuration parameter features.

Global Parameters
-----------------

>>> import lptorus as lpt
>>> lpt.params.update({"workers": 1, "progress_bar": False})
>>> lpt.params["seed"]

``fit_calibration`` (default: 1.2)
  Multiplier applied to the constant calibrated on the first three levels of a
  scan before the inequality verdict is taken.

``oversample`` (default: 2)
  Oversampling factor of the grid on which sup norms and physical kernels are
  evaluated.

``probe_count`` (default: 8)
  Number of random band-limited probe fields used for operator-norm surrogates.

``profile`` (default: "bump")
  Radial cut of the Littlewood-Paley multipliers built by `build_bank` when no
  profile is given, ``"bump"`` or ``"cosine"``.

``progress_bar`` (default: True)
  If True, display a progress bar for long-running tasks in interactive use.

``seed`` (default: random integer)
  Seed from which all random fields and probes are derived. Fix it to get
  reproducible results.

``workers`` (default: number of cores)
  Threads used by the FFTs and by per-level computations.

Run Configuration
-----------------

Command line runs read a flat key-value file with sections, for instance::

    [grid]
    n = 128

    [simulation]
    initial = taylor_green
    dt = 0.01
    steps = 200

All defaults are printed by ``lptorus config --dump``.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import os
import random
import sqlite3
from collections import UserDict
from pathlib import Path
from typing import Any
from warnings import warn

import numpy as np
from wasabi import msg, table


class LPTorusConfiguration(UserDict):
    """Container for global parameters."""

    _valid = {
        "fit_calibration",
        "oversample",
        "probe_count",
        "profile",
        "progress_bar",
        "seed",
        "workers",
    }

    def __setitem__(self, key: str, item: Any) -> None:
        """Set configuration value."""
        if key not in self._valid:
            warn(f"Parameter '{key}' not known. Skipping.")
        else:
            self.data[key] = item

    def save(self, target: os.PathLike[str] | str) -> None:
        """
        Save parameters to file.

        Parameters
        ----------
        target : path
            Location of file to save parameters to.
        """
        conn = sqlite3.connect(Path(target))
        with conn:
            conn.execute("CREATE TABLE IF NOT EXISTS params(data json)")
            conn.execute("INSERT INTO params VALUES (?)", [json.dumps(self.data)])
        conn.close()

    def load(self, source: os.PathLike[str] | str) -> None:
        """
        Load parameters from file.

        Parameters
        ----------
        source : path
            Location of file to load parameters from.

        Raises
        ------
        FileNotFoundError
            If the path does not exist.
        """
        if not Path(source).exists():
            raise FileNotFoundError(f"File '{source}' does not exist.")
        conn = sqlite3.connect(Path(source))
        with conn as c:
            ser = c.execute(
                "SELECT rowid, * FROM params ORDER BY rowid DESC LIMIT 1"
            ).fetchone()[1]
        conn.close()
        self.update(json.loads(ser))
        msg.info(f"Updated global parameters with values loaded from '{source}'.")

    def __repr__(self) -> str:
        return table(self.data, header=["Parameter", "Value"], divider=True)


default_params = {
    "fit_calibration": 1.2,
    "oversample": 2,
    "probe_count": 8,
    "profile": "bump",
    "progress_bar": True,
    "workers": os.cpu_count() or 1,
}

#: Container for global parameters.
params = LPTorusConfiguration(seed=random.randint(0, 10_000), **default_params)


def init_seed() -> None:
    """Initialize the random seed of the standard library and numpy."""
    random.seed(params["seed"])
    np.random.seed(params["seed"])


def make_rng(*keys: int, seed: int | None = None) -> np.random.Generator:
    """
    Return a random generator derived from the global seed.

    Parameters
    ----------
    *keys : int
        Extra entropy (shell index, probe number, ...) so that independent
        streams can be drawn in parallel.
    seed : int, optional
        Overrides ``params["seed"]``.

    Returns
    -------
    `numpy.random.Generator`
    """
    base = params["seed"] if seed is None else seed
    return np.random.default_rng(np.random.SeedSequence([int(base), *map(int, keys)]))


#: Defaults of the run configuration file, by section.
RUN_DEFAULTS: dict[str, dict[str, Any]] = {
    "grid": {"n": 128, "period": 2 * np.pi, "profile": "bump"},
    "simulation": {
        "initial": "taylor_green",
        "dt": 0.01,
        "steps": 200,
        "stride": 10,
        "dealias": "two_thirds",
        "jet_order": 2,
        "alpha": 0.5,
        "shells": "1:3",
        "seed": 0,
    },
    "synth": {"alpha": 1 / 3, "shells": "1:6", "seed": 0, "name": ""},
    "scan": {
        "quantities": "Pk_v,R_leqk",
        "krange": "",
        "alpha": 1 / 3,
        "probes": 8,
    },
    "trajectory": {
        "k": 3,
        "x0": "1.0,2.0",
        "t0": 0.0,
        "t1": 1.0,
        "taylor_order": 2,
        "ladder": "1:5",
    },
    "output": {"directory": "lptorus-out", "force": False},
}


def _coerce(default: Any, raw: str) -> Any:
    if isinstance(default, bool):
        return raw.strip().lower() in {"1", "true", "yes", "on"}
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw.strip()


class RunConfiguration(UserDict):
    """
    Sectioned settings of a command line run.

    Values missing from a configuration file fall back to `RUN_DEFAULTS`.
    Unknown sections and keys are skipped with a warning.
    """

    def __init__(self, overrides: dict[str, dict[str, Any]] | None = None) -> None:
        super().__init__({sec: dict(vals) for sec, vals in RUN_DEFAULTS.items()})
        for section, values in (overrides or {}).items():
            for key, value in values.items():
                self.set(section, key, value)

    def set(self, section: str, key: str, value: Any) -> None:
        """Set a single value, coercing strings to the type of the default."""
        if section not in RUN_DEFAULTS:
            warn(f"Configuration section '{section}' not known. Skipping.")
            return
        if key not in RUN_DEFAULTS[section]:
            warn(f"Parameter '{section}.{key}' not known. Skipping.")
            return
        default = RUN_DEFAULTS[section][key]
        self.data[section][key] = (
            _coerce(default, value) if isinstance(value, str) else value
        )

    @classmethod
    def load(cls, source: os.PathLike[str] | str) -> RunConfiguration:
        """
        Read a run configuration file.

        Parameters
        ----------
        source : path
            Location of the configuration file.

        Raises
        ------
        FileNotFoundError
            If the path does not exist.
        configparser.Error
            If the file cannot be parsed.
        """
        if not Path(source).exists():
            raise FileNotFoundError(f"File '{source}' does not exist.")
        parser = configparser.ConfigParser()
        parser.read(Path(source))
        conf = cls()
        for section in parser.sections():
            for key, value in parser.items(section):
                conf.set(section, key, value)
        return conf

    def dump(self) -> str:
        """Return the configuration in file form."""
        lines = []
        for section, values in self.data.items():
            lines.append(f"[{section}]")
            lines.extend(f"{key} = {value}" for key, value in values.items())
            lines.append("")
        return os.linesep.join(lines)

    def save(self, target: os.PathLike[str] | str) -> None:
        """Write the configuration in file form."""
        Path(target).write_text(self.dump())

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form, embedded in reports."""
        canonical = json.dumps(self.data, sort_keys=True, default=str)
        return hashlib.sha256(canonical.encode()).hexdigest()

    def __repr__(self) -> str:
        rows = [
            (f"{sec}.{key}", val)
            for sec, values in self.data.items()
            for key, val in values.items()
        ]
        return table(rows, header=["Parameter", "Value"], divider=True)
