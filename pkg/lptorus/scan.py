"""Dyadic scaling scans, Hölder-in-time measurements and structure functions."""

from __future__ import annotations

import json
import os
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Iterable, NamedTuple, Sequence, Union
from warnings import warn

import numpy as np
import pandas as pd

import lptorus as lpt

from ._util import LiteFrame, LogLogFit, LPTorusError, fit_log2, ordered_map
from .bank import LevelRangeError
from .euler import (
    EulerSnapshot,
    advective_derivative,
    energy_flux,
    energy_flux_increment,
    energy_increment,
    pressure_increment,
)
from .field import (
    Field,
    TorusGrid,
    derivative_tensor,
    seminorm_holder,
    spatial_shift,
    sup_norm,
)
from .sim import SnapshotSeries


class UnknownQuantityError(LPTorusError, ValueError):
    """Raised if a scan quantity does not exist."""


class EmptyRangeError(LPTorusError, ValueError):
    """Raised if a level range contains no level."""


class FieldKindError(LPTorusError, ValueError):
    """Raised if a quantity is requested for a field it is not asserted on."""


class TooFewSamplesError(LPTorusError, ValueError):
    """Raised if a time series is too short to measure Hölder regularity."""


#: Version tag written into every scan report.
SCHEMA = "scanv1"

#: Values below this fraction of the largest one are roundoff.
ROUNDOFF = 1e-13

#: Smallest number of levels entering a slope fit.
MIN_FIT_POINTS = 4

#: Smallest number of levels an operator-norm scan is run on.
MIN_SCAN_LEVELS = 3

#: Largest change of the time-Hölder constant under halving of the lag.
HALVING_TOLERANCE = 1.3

Source = Union[Field, EulerSnapshot, SnapshotSeries, Sequence[EulerSnapshot]]


def default_fit_range(grid: TorusGrid) -> tuple[int, int]:
    """Levels entering a slope fit unless told otherwise, ``k0 + 2`` to ``kmax + 1``."""
    return grid.k0 + 2, grid.kmax + 1


class Quantity(NamedTuple):
    """A per-level quantity with its predicted dyadic scaling."""

    evaluate: Callable[[EulerSnapshot, int], float]
    slope: Callable[[float], float]
    degree: int
    description: str
    euler_only: bool = False
    log_factor: bool = False
    top: int = 1


def _shell_velocity(s: EulerSnapshot, k: int) -> float:
    return sup_norm(s.bank.project_shell(s.velocity, k))


def _pressure_shell(derivatives: int) -> Callable[[EulerSnapshot, int], float]:
    def evaluate(s: EulerSnapshot, k: int) -> float:
        piece = s.bank.project_shell(s.pressure, k)
        return sup_norm(derivative_tensor(piece, derivatives))

    return evaluate


def _besov_piece(s: EulerSnapshot, k: int) -> float:
    piece = s.bank.project_shell(s.velocity, k).magnitude_squared()
    l3 = (piece.grid.area * np.mean(piece.values**1.5)) ** (1 / 3)
    return 2.0 ** (k / 3) * float(l3)


#: Registry of scan quantities.
QUANTITIES: dict[str, Quantity] = {
    "Pk_v": Quantity(_shell_velocity, lambda a: -a, 1, "‖P_k v‖"),
    "grad_Pleqk_v": Quantity(
        lambda s, k: sup_norm(s.bank.project_leq(s.velocity, k).grad()),
        lambda a: 1 - a,
        1,
        "‖∇P_{≤k} v‖",
    ),
    "R_leqk": Quantity(
        lambda s, k: sup_norm(s.stress(k)), lambda a: -2 * a, 2, "‖R_{≤k}‖"
    ),
    "grad_R_leqk": Quantity(
        lambda s, k: sup_norm(s.stress(k).grad()), lambda a: 1 - 2 * a, 2, "‖∇R_{≤k}‖"
    ),
    "Pk_p": Quantity(_pressure_shell(0), lambda a: -2 * a, 2, "‖P_k p‖"),
    "grad_Pk_p": Quantity(_pressure_shell(1), lambda a: 1 - 2 * a, 2, "‖∇P_k p‖"),
    "hess_Pk_p": Quantity(_pressure_shell(2), lambda a: 2 - 2 * a, 2, "‖∇²P_k p‖"),
    "dp_k": Quantity(
        lambda s, k: sup_norm(pressure_increment(s.velocity, k, s.bank)),
        lambda a: -2 * a,
        2,
        "‖δp_(k)‖",
        log_factor=True,
    ),
    "de_k": Quantity(
        lambda s, k: abs(energy_increment(s.velocity, k, s.bank)),
        lambda a: -2 * a,
        2,
        "|δe_(k)|",
    ),
    "flux": Quantity(
        lambda s, k: abs(energy_flux(s.velocity, k, s.bank)),
        lambda a: 1 - 3 * a,
        3,
        "|d/dt e_{≤k}|",
    ),
    "ddt_de_k": Quantity(
        lambda s, k: abs(energy_flux_increment(s.velocity, k, s.bank)),
        lambda a: 1 - 3 * a,
        3,
        "|d/dt δe_(k)|",
    ),
    "besov": Quantity(_besov_piece, lambda a: 1 / 3 - a, 1, "2^{k/3}‖P_k v‖_{L³}"),
    "Dk_Pk1_v": Quantity(
        lambda s, k: sup_norm(advective_derivative(s, k, "Pk1_v", 1)),
        lambda a: 1 - 2 * a,
        2,
        "‖D_{≤k} P_{k+1} v‖",
        euler_only=True,
        top=0,
    ),
    "D2k_Pk1_v": Quantity(
        lambda s, k: sup_norm(advective_derivative(s, k, "Pk1_v", 2)),
        lambda a: 2 * (1 - a) - a,
        3,
        "‖D²_{≤k} P_{k+1} v‖",
        euler_only=True,
        top=0,
    ),
}


def _as_snapshots(source: Source) -> tuple[list[EulerSnapshot], str]:
    if isinstance(source, Field):
        return [EulerSnapshot.frozen(source)], "synthetic"
    if isinstance(source, EulerSnapshot):
        return [source], "euler"
    if isinstance(source, SnapshotSeries):
        return list(source), source.kind
    snapshots = list(source)
    if not snapshots:
        raise EmptyRangeError("No snapshots to scan.")
    return snapshots, "euler"


class ScanReport(LiteFrame):
    """
    Per-level values of a quantity against its predicted power law.

    Parameters
    ----------
    quantity : str
        Identifier of the quantity.
    rows : `pandas.DataFrame` or dict
        At least the columns ``k`` and ``value``; extra columns are kept.
    predicted_slope : float
        Exponent of the predicted bound ``2^{slope·k}``.
    alpha : float
        Hölder exponent used for the prediction and normalization.
    field_kind : {"euler", "synthetic"}, optional
        Whether the values come from Euler flows or synthetic fields.
    degree : int, optional
        Homogeneity of the quantity in the velocity.
    seminorm : float, optional
        Hölder seminorm of the velocity; values are normalized by its
        ``degree``-th power.
    k0 : int, optional
        Lowest active level, origin of the logarithmic factor.
    fit_range : tuple of int, optional
        Inclusive range of levels used for the slope fit (default: from
        ``k0 + 2`` to the highest row).
    log_factor : bool, optional
        Multiply the prediction by ``1 + |k − k0|``.
    meta : dict, optional
        Extra entries for the JSON form (configuration digest, source).
    """

    def __init__(
        self,
        quantity: str,
        rows: pd.DataFrame | dict,
        predicted_slope: float,
        alpha: float,
        field_kind: str = "euler",
        degree: int = 1,
        seminorm: float = float("nan"),
        k0: int = 0,
        fit_range: tuple[int, int] | None = None,
        log_factor: bool = False,
        meta: dict[str, Any] | None = None,
    ) -> None:
        super().__init__(rows)
        if self.empty:
            raise EmptyRangeError(f"Scan of '{quantity}' has no levels.")
        self.quantity = quantity
        self.predicted_slope = float(predicted_slope)
        self.alpha = float(alpha)
        self.field_kind = field_kind
        self.degree = int(degree)
        self.seminorm = float(seminorm)
        self.k0 = int(k0)
        self.log_factor = log_factor
        self.meta = dict(meta or {})
        ks = self._df["k"].to_numpy()
        self.fit_range = fit_range or (self.k0 + 2, int(ks.max()))
        predicted = 2.0 ** (self.predicted_slope * ks)
        if log_factor:
            predicted = predicted * (1 + np.abs(ks - self.k0))
        self._df["predicted"] = predicted
        self._df["ratio"] = self._df["value"] / predicted
        scale = self.seminorm**self.degree
        self._df["normalized"] = (
            self._df["value"] / scale if scale > 0 else float("nan")
        )
        self._df["field_kind"] = field_kind

    def __repr__(self) -> str:
        return (
            f"<ScanReport '{self.quantity}' on {len(self)} levels, "
            f"{'empty' if self.is_empty else f'slope {self.slope:.3f}'}>"
        )

    @property
    def values(self) -> np.ndarray:
        return self._df["value"].to_numpy()

    @property
    def is_empty(self) -> bool:
        """True if the quantity vanishes at every level."""
        return not bool((np.abs(self.values) > 0).any())

    @cached_property
    def fit(self) -> LogLogFit | None:
        """Least-squares slope over the fit range, or None if not available."""
        if self.is_empty:
            return None
        df = self._df
        usable = df["value"] > ROUNDOFF * df["value"].max()
        if dropped := int((~usable).sum()):
            warn(f"Excluded {dropped} levels at roundoff from the fit of '{self.quantity}'.")
        lo, hi = self.fit_range
        chosen = df[usable & df["k"].between(lo, hi)]
        if len(chosen) < MIN_FIT_POINTS:
            chosen = df[usable]
            warn(
                f"Fit range {lo}..{hi} of '{self.quantity}' has fewer than "
                f"{MIN_FIT_POINTS} usable levels; fitting all levels."
            )
            self.fit_range = (int(chosen["k"].min()), int(chosen["k"].max()))
        if len(chosen) < MIN_FIT_POINTS:
            return None
        return fit_log2(chosen["k"], chosen["value"])

    @property
    def slope(self) -> float:
        return self.fit.slope if self.fit else float("nan")

    @cached_property
    def calibration(self) -> float:
        """``C_fit``, from the first three levels with nonzero values."""
        ratios = self._df["ratio"][self._df["value"] > 0]
        if ratios.empty:
            return 0.0
        return float(lpt.params["fit_calibration"] * ratios.iloc[:3].max())

    @property
    def dispersion(self) -> float:
        """Largest over median ratio to the predicted power."""
        ratios = self._df["ratio"][self._df["value"] > 0]
        if ratios.empty:
            return float("nan")
        return float(ratios.max() / ratios.median())

    @property
    def asserted(self) -> bool:
        """False for pressure increments at ``alpha ≤ 1/3``, where no bound is known."""
        return not (self.log_factor and self.alpha <= 1 / 3)

    @property
    def passed(self) -> bool:
        """Whether ``value ≤ C_fit·predicted`` holds at every asserted level."""
        if self.is_empty or not self.asserted:
            return True
        return bool((self._df["ratio"] <= self.calibration * (1 + 1e-12)).all())

    def to_dict(self) -> dict[str, Any]:
        fit = self.fit
        out = {
            "schema": SCHEMA,
            "version": lpt.__version__,
            "quantity": self.quantity,
            "field_kind": self.field_kind,
            "alpha": self.alpha,
            "degree": self.degree,
            "seminorm": self.seminorm,
            "predicted_slope": self.predicted_slope,
            "log_factor": self.log_factor,
            "empty": self.is_empty,
            "fit": None
            if fit is None
            else dict(fit._asdict(), k_range=list(map(int, self.fit_range))),
            "calibration": self.calibration,
            "dispersion": self.dispersion,
            "asserted": self.asserted,
            "passed": self.passed,
            "levels": [int(k) for k in self._df["k"]],
        }
        out.update(self.meta)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=float)

    def save(self, directory: os.PathLike[str] | str) -> tuple[Path, Path]:
        """
        Write ``<quantity>.csv`` and ``<quantity>.json`` into a directory.

        Returns
        -------
        tuple of Path
            The two files written.
        """
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        csv_path = directory / f"{self.quantity}.csv"
        json_path = directory / f"{self.quantity}.json"
        self.to_csv(csv_path)
        json_path.write_text(self.to_json())
        return csv_path, json_path


def scan(
    source: Source,
    quantity: str,
    k_range: tuple[int, int] | None = None,
    alpha: float = 1 / 3,
    fit_range: tuple[int, int] | None = None,
    field_kind: str | None = None,
    meta: dict[str, Any] | None = None,
) -> ScanReport:
    """
    Measure a quantity level by level and compare it with its prediction.

    Parameters
    ----------
    source : Field, EulerSnapshot or SnapshotSeries
        A bare velocity field is treated as a synthetic, time-independent
        field. For a series the value at each level is the maximum over the
        snapshots.
    quantity : str
        One of `QUANTITIES`.
    k_range : tuple of int, optional
        Inclusive range of levels (default: ``k0 + 1`` up to the highest level
        the quantity is resolved at).
    alpha : float, optional
        Hölder exponent of the prediction.
    fit_range : tuple of int, optional
        Levels entering the slope fit (default: ``k0 + 2`` to ``kmax + 1``).
    field_kind : {"euler", "synthetic"}, optional
        Override the kind inferred from the source.
    meta : dict, optional
        Extra entries for the JSON report.

    Returns
    -------
    ScanReport

    Raises
    ------
    UnknownQuantityError
        If the quantity does not exist.
    FieldKindError
        If a quantity needing Euler time derivatives is requested for a
        synthetic field.
    EmptyRangeError
        If the level range is empty.
    LevelRangeError
        If the level range leaves the bank.
    """
    if quantity not in QUANTITIES:
        raise UnknownQuantityError(f"Unknown scan quantity '{quantity}'.")
    q = QUANTITIES[quantity]
    snapshots, kind = _as_snapshots(source)
    kind = field_kind or kind
    if q.euler_only and kind != "euler":
        raise FieldKindError(f"Quantity '{quantity}' is only asserted on Euler flows.")
    grid = snapshots[0].grid
    top = grid.kmax + q.top
    lo, hi = k_range or (grid.k0 + 1, top)
    if hi < lo:
        raise EmptyRangeError(f"Empty level range {lo}..{hi}.")
    if hi > top:
        raise LevelRangeError(f"'{quantity}' is resolved up to level {top}, not {hi}.")

    def at_level(k: int) -> float:
        return max(q.evaluate(s, k) for s in snapshots)

    ks = list(range(lo, hi + 1))
    values = ordered_map(at_level, ks)
    seminorm = max(seminorm_holder(s.velocity, alpha).lp for s in snapshots)
    return ScanReport(
        quantity,
        pd.DataFrame({"k": ks, "value": values}),
        q.slope(alpha),
        alpha,
        field_kind=kind,
        degree=q.degree,
        seminorm=seminorm,
        k0=grid.k0,
        fit_range=fit_range or default_fit_range(grid),
        log_factor=q.log_factor,
        meta=meta,
    )


class HolderTimeReport(NamedTuple):
    """Hölder exponent of a scalar time series."""

    exponent: float
    conserved: bool
    fit: LogLogFit | None
    lags: pd.DataFrame


def holder_time_exponent(
    samples: Sequence[float], dt: float = 1.0, rtol: float = 1e-8
) -> HolderTimeReport:
    """
    Hölder exponent of ``s(t)`` from its oscillation at dyadic lags.

    ``M(τ) = max_i |s(t_i + τ) − s(t_i)|`` is fitted against ``τ`` over the
    middle four dyadic lags (about one decade).

    Parameters
    ----------
    samples : sequence of float
        At least 64 uniformly spaced samples.
    dt : float, optional
        Sample spacing.
    rtol : float, optional
        The series counts as conserved if ``max M ≤ rtol·max|s|``; the
        exponent is then reported as infinite.

    Raises
    ------
    TooFewSamplesError
        For fewer than 64 samples.
    """
    s = np.asarray(samples, dtype=float)
    if len(s) < 64:
        raise TooFewSamplesError(f"Need at least 64 samples, got {len(s)}.")
    lags = [2**j for j in range(int(np.log2(len(s) - 1)) + 1)]
    osc = [float(np.abs(s[m:] - s[:-m]).max()) for m in lags]
    table = pd.DataFrame({"lag": lags, "tau": np.multiply(lags, dt), "M": osc})
    if max(osc) <= rtol * np.abs(s).max():
        return HolderTimeReport(float("inf"), True, None, table)
    width = min(4, len(lags))
    start = (len(lags) - width) // 2
    window = table.iloc[start : start + width]
    window = window[window["M"] > 0]
    if len(window) < 2:
        return HolderTimeReport(float("nan"), False, None, table)
    fit = fit_log2(np.log2(window["tau"]), window["M"])
    return HolderTimeReport(fit.slope, False, fit, table)


class TimeHolderReport(NamedTuple):
    """Hölder-in-time check of a velocity series."""

    alpha: float
    passed: bool
    constant: float
    norm: float
    table: pd.DataFrame


def time_holder_field(series: SnapshotSeries, alpha: float) -> TimeHolderReport:
    """
    Compare ``max_t ‖v(t+τ) − v(t)‖_{C⁰}`` with ``C·τ^α`` at dyadic lags.

    The constant ``C(τ) = M(τ)/τ^α`` passes if halving the lag never raises
    it by more than 30%. ``normalized`` divides it by
    ``‖v‖_{Ċ^α}·‖v‖_{C⁰}^α``, maximized over the series.

    Raises
    ------
    TooFewSamplesError
        For fewer than 16 snapshots.
    """
    if len(series) < 16:
        raise TooFewSamplesError(f"Need at least 16 snapshots, got {len(series)}.")
    velocities = [s.velocity for s in series]
    lags = [2**j for j in range(int(np.log2(len(series) - 1)) + 1)]

    def oscillation(m: int) -> float:
        return max(
            sup_norm(velocities[i + m] - velocities[i])
            for i in range(len(velocities) - m)
        )

    osc = np.array(ordered_map(oscillation, lags, unit="lags"))
    tau = np.array(lags) * series.stride
    constant = osc / tau**alpha
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.append(constant[:-1] / constant[1:], np.nan)
    norm = max(
        seminorm_holder(v, alpha).lp * sup_norm(v) ** alpha for v in velocities
    )
    table = pd.DataFrame(
        {
            "lag": lags,
            "tau": tau,
            "M": osc,
            "constant": constant,
            "normalized": constant / norm if norm > 0 else np.nan,
            "ratio": ratio,
        }
    )
    checked = ratio[np.isfinite(ratio)]
    passed = bool((checked <= HALVING_TOLERANCE).all())
    return TimeHolderReport(float(alpha), passed, float(constant.max()), float(norm), table)


#: Unit directions of the structure-function average.
DIRECTIONS = np.array(
    [(1, 0), (-1, 0), (0, 1), (0, -1)]
    + [(a / np.sqrt(2), b / np.sqrt(2)) for a in (1, -1) for b in (1, -1)]
)


def structure_function(
    v: Field,
    orders: Iterable[float] = (2, 3, 4),
    lags: Iterable[float] | None = None,
) -> pd.DataFrame:
    """
    ``S_p(ℓ) = ⟨|v(x + ℓe) − v(x)|^p⟩^{1/p}``.

    The average runs over all grid points and eight directions; translates are
    exact spectral shifts.

    Parameters
    ----------
    v : Field
        Velocity (or any) field.
    orders : iterable of float, optional
        Moments ``p ≥ 1``.
    lags : iterable of float, optional
        Lag lengths (default: eight geometric lags from four grid spacings to
        a quarter period).

    Returns
    -------
    `pandas.DataFrame`
        Columns ``p, ell, S``.
    """
    orders = [float(p) for p in orders]
    if any(p < 1 for p in orders):
        raise ValueError("Structure functions need moments p >= 1.")
    grid = v.grid
    if lags is None:
        lags = np.geomspace(4 * grid.spacing, grid.period / 4, 8)
    lags = [float(ell) for ell in lags]

    def moments(ell: float) -> list[float]:
        acc = np.zeros(len(orders))
        for e in DIRECTIONS:
            diff = spatial_shift(v, ell * e) - v
            mag = np.sqrt(diff.magnitude_squared().values)
            acc += [np.mean(mag**p) for p in orders]
        return list(acc / len(DIRECTIONS))

    per_lag = ordered_map(moments, lags, unit="lags")
    rows = [
        dict(p=p, ell=ell, S=per_lag[j][i] ** (1 / p))
        for i, p in enumerate(orders)
        for j, ell in enumerate(lags)
    ]
    return pd.DataFrame(rows, columns=["p", "ell", "S"])


def structure_slope(table: pd.DataFrame, p: float) -> LogLogFit:
    """Slope of ``log S_p`` against ``log ℓ``."""
    rows = table[(table["p"] == p) & (table["S"] > 0)]
    return fit_log2(np.log2(rows["ell"]), rows["S"])
