"""Particle paths of coarse-scale velocities and their Taylor expansions."""

from __future__ import annotations

import json
import os
from math import ceil, factorial
from pathlib import Path as FilePath
from typing import Any, NamedTuple, Sequence
from warnings import warn

import numpy as np
import pandas as pd
from scipy.interpolate import CubicHermiteSpline

from ._util import LogLogFit, fit_log2, ordered_map
from .field import Field, JetOrderError
from .sim import SeriesRangeError, SnapshotSeries

try:
    from ._ext import fourier_eval  # type: ignore
except ImportError:
    warn("Compiled extension not available; using numpy for off-grid evaluation.")

    def fourier_eval(
        points: np.ndarray, modes: np.ndarray, re: np.ndarray, im: np.ndarray
    ) -> np.ndarray:
        """Fallback version of the off-grid Fourier summation."""
        phase = points @ modes.T
        return re @ np.cos(phase).T - im @ np.sin(phase).T


#: RK4 steps per snapshot stride.
SUBSTEPS = 8


def _points(x: Any) -> np.ndarray:
    return np.ascontiguousarray(np.atleast_2d(np.asarray(x, dtype=float)))


class ModalField:
    """
    Band-limited field evaluated anywhere by summing its active modes.

    Parameters
    ----------
    field : Field
        Field to evaluate.
    rtol : float, optional
        Modes with all coefficients below ``rtol`` times the largest are
        dropped.
    """

    def __init__(self, field: Field, rtol: float = 1e-15) -> None:
        coeffs = field.spectral.reshape((-1,) + field.spectral.shape[-2:])
        size = np.abs(coeffs).max(axis=0)
        active = size > rtol * size.max() if size.max() > 0 else size > 0
        k1, k2 = field.grid.wavevector
        self.shape = field.shape
        self.modes = np.ascontiguousarray(np.stack([k1[active], k2[active]], axis=-1))
        self.coeffs = coeffs[:, active]

    def __len__(self) -> int:
        return len(self.modes)

    def __call__(self, x: Any) -> np.ndarray:
        """
        Values at points ``x`` of shape ``(2,)`` or ``(P, 2)``.

        Returns
        -------
        ndarray
            Shape ``component_shape + (P,)``.
        """
        pts = _points(x)
        out = fourier_eval(
            pts,
            self.modes,
            np.ascontiguousarray(self.coeffs.real),
            np.ascontiguousarray(self.coeffs.imag),
        )
        return np.asarray(out).reshape(self.shape + (len(pts),))


class CoarseFlow:
    """
    ``P_{≤k}v(t, x)`` between stored snapshots.

    Coefficients of the active modes are interpolated by cubic Hermite splines
    through the stored velocities and their equation-based time derivatives.
    Points are evaluated by direct mode summation.

    Raises
    ------
    SeriesRangeError
        If the series holds fewer than two snapshots.
    """

    def __init__(self, series: SnapshotSeries, k: int) -> None:
        if len(series) < 2:
            raise SeriesRangeError("Interpolation in time needs two snapshots.")
        bank = series[0].bank
        self.series = series
        self.k = k
        self.grid = series.grid
        values = np.stack([bank.project_leq(s.velocity, k).spectral for s in series])
        rates = np.stack([bank.project_leq(s.jet[1], k).spectral for s in series])
        size = np.maximum(np.abs(values).max(axis=(0, 1)), np.abs(rates).max(axis=(0, 1)))
        active = size > 1e-15 * size.max() if size.max() > 0 else size > 0
        k1, k2 = self.grid.wavevector
        self.modes = np.ascontiguousarray(np.stack([k1[active], k2[active]], axis=-1))
        self.count = int(active.sum())
        y = values[:, :, active]
        dy = rates[:, :, active]
        self.spline = CubicHermiteSpline(
            series.times,
            np.concatenate([y.real, y.imag], axis=-1),
            np.concatenate([dy.real, dy.imag], axis=-1),
            axis=0,
        )

    @property
    def span(self) -> tuple[float, float]:
        times = self.series.times
        return float(times[0]), float(times[-1])

    def __call__(self, t: float, x: Any) -> np.ndarray:
        """Velocity at time ``t`` and points ``x``, shape ``(2, P)``."""
        coeffs = self.spline(t)
        re = np.ascontiguousarray(coeffs[:, : self.count])
        im = np.ascontiguousarray(coeffs[:, self.count :])
        return np.asarray(fourier_eval(_points(x), self.modes, re, im))


class Path:
    """
    Positions of particles at a sequence of times.

    Positions are not reduced modulo the period, so winding is kept.

    Parameters
    ----------
    times : ndarray
        Times, shape ``(T,)``.
    positions : ndarray
        Positions, shape ``(T, P, 2)``.
    k : int
        Level of the advecting field.
    period : float
        Side length of the torus.
    """

    def __init__(self, times: np.ndarray, positions: np.ndarray, k: int, period: float):
        self.times = np.asarray(times, dtype=float)
        self.positions = np.asarray(positions, dtype=float)
        self.k = k
        self.period = period

    def __repr__(self) -> str:
        return f"<Path of {self.positions.shape[1]} particles, {len(self.times)} times>"

    @property
    def end(self) -> np.ndarray:
        """Final positions, shape ``(P, 2)``."""
        return self.positions[-1]

    def wrapped(self) -> np.ndarray:
        """Positions reduced to ``[0, period)``."""
        return np.mod(self.positions, self.period)

    def to_frame(self) -> pd.DataFrame:
        """Rows ``t, particle, x1, x2, k``."""
        steps, count = self.positions.shape[:2]
        return pd.DataFrame(
            {
                "t": np.repeat(self.times, count),
                "particle": np.tile(np.arange(count), steps),
                "x1": self.positions[..., 0].ravel(),
                "x2": self.positions[..., 1].ravel(),
                "k": self.k,
            }
        )

    def save(self, target: os.PathLike[str] | str) -> None:
        """Write the path as CSV."""
        self.to_frame().to_csv(target, index=False)


def _check_span(series: SnapshotSeries, *times: float) -> None:
    lo, hi = series.times[0], series.times[-1]
    slack = 1e-12 * max(1.0, abs(hi))
    for t in times:
        if not lo - slack <= t <= hi + slack:
            raise SeriesRangeError(f"Time {t:g} outside the series span [{lo:g}, {hi:g}].")


def integrate_flow(
    series: SnapshotSeries,
    k: int,
    x0: Sequence[float] | np.ndarray,
    t0: float,
    t1: float,
    steps: int | None = None,
    flow: CoarseFlow | None = None,
) -> Path:
    """
    Solve ``dX/dt = P_{≤k}v(t, X)`` with the classical Runge-Kutta scheme.

    Parameters
    ----------
    series : SnapshotSeries
        Flow to follow.
    k : int
        Level of the advecting field.
    x0 : array_like
        Start position ``(2,)`` or positions ``(P, 2)``.
    t0, t1 : float
        Start and end times inside the series span; ``t1 < t0`` integrates
        backwards.
    steps : int, optional
        Number of steps (default: eight per stride covered).
    flow : CoarseFlow, optional
        Interpolated field, if already built.

    Raises
    ------
    SeriesRangeError
        If the interval leaves the series span.
    """
    _check_span(series, t0, t1)
    flow = flow or CoarseFlow(series, k)
    x = _points(x0).copy()
    if steps is None:
        stride = series.stride
        steps = max(1, ceil(abs(t1 - t0) / stride - 1e-9)) * SUBSTEPS
    h = (t1 - t0) / steps
    times = t0 + h * np.arange(steps + 1)
    positions = [x.copy()]
    for t in times[:-1]:
        k1 = flow(t, x).T
        k2 = flow(t + h / 2, x + h / 2 * k1).T
        k3 = flow(t + h / 2, x + h / 2 * k2).T
        k4 = flow(t + h, x + h * k3).T
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        positions.append(x.copy())
    return Path(times, np.stack(positions), k, series.grid.period)


def material_derivatives(series: SnapshotSeries, k: int, t0: float, order: int) -> list[Field]:
    """
    ``D^r_{≤k}P_{≤k}v`` at a stored time for ``r < order``.

    Raises
    ------
    JetOrderError
        If the snapshot jet is shorter than ``order − 1``.
    """
    snapshot = series[series.index_of(t0)]
    u_jet = snapshot.velocity_jet_leq(k)
    if u_jet.order < order - 1:
        raise JetOrderError(
            f"Taylor order {order} needs a jet of order {order - 1}, got {u_jet.order}."
        )
    out = []
    jet = u_jet
    for _ in range(order):
        out.append(jet.value)
        if jet.order:
            jet = jet.advect(u_jet)
    return out


class TaylorReport(NamedTuple):
    """Remainders of the Taylor polynomial of a particle path."""

    order: int
    fitted_order: float
    fit: LogLogFit | None
    table: pd.DataFrame

    def to_dict(self) -> dict[str, Any]:
        return dict(
            order=self.order,
            expected_order=self.order + 1,
            fitted_order=self.fitted_order,
            fit=None if self.fit is None else self.fit._asdict(),
            ladder=self.table.to_dict(orient="list"),
        )

    def save(self, target: os.PathLike[str] | str) -> None:
        """Write the report as JSON."""
        FilePath(target).write_text(json.dumps(self.to_dict(), indent=2, default=float))


def taylor_check(
    series: SnapshotSeries,
    k: int,
    x0: Sequence[float],
    t0: float,
    t1: float,
    order: int = 2,
    ladder: Sequence[int] = range(1, 6),
) -> TaylorReport:
    """
    Compare a particle path with its Taylor polynomial of degree ``order``.

    The coefficients ``d^r X/dt^r (t0) = D^{r−1}_{≤k}P_{≤k}v(t0, x0)`` come
    from the time jets. Remainders are taken at ``τ = (t1 − t0)·2^{−i}`` for
    ``i`` in the ladder, and the order of the remainder in ``τ`` is fitted.

    Parameters
    ----------
    series : SnapshotSeries
        Flow to follow; ``t0`` must be a stored time.
    k : int
        Level of the advecting field.
    x0 : sequence of float
        Start position.
    t0, t1 : float
        Start time and the longest time of the ladder.
    order : int, optional
        Taylor degree ``N``, 0 to 3.
    ladder : sequence of int, optional
        Halving exponents ``i``.

    Raises
    ------
    JetOrderError
        If the jets are too short for ``order``.
    """
    if not 0 <= order <= 3:
        raise ValueError(f"Taylor degree must lie in [0, 3], got {order}.")
    _check_span(series, t0, t1)
    x0 = np.asarray(x0, dtype=float)
    coefficients = [
        ModalField(f)(x0)[:, 0] / factorial(r + 1)
        for r, f in enumerate(material_derivatives(series, k, t0, order))
    ]
    flow = CoarseFlow(series, k)
    taus = [(t1 - t0) * 2.0**-i for i in ladder]

    def remainder(tau: float) -> float:
        steps = max(1, ceil(abs(tau) / series.stride - 1e-9)) * 4 * SUBSTEPS
        path = integrate_flow(series, k, x0, t0, t0 + tau, steps=steps, flow=flow)
        poly = x0 + sum(c * tau ** (r + 1) for r, c in enumerate(coefficients))
        return float(np.linalg.norm(path.end[0] - poly))

    remainders = ordered_map(remainder, taus, unit="times")
    table = pd.DataFrame({"tau": taus, "remainder": remainders})
    usable = table[table["remainder"] > 0]
    fit = None
    if len(usable) >= 2:
        fit = fit_log2(np.log2(np.abs(usable["tau"])), usable["remainder"])
    return TaylorReport(order, fit.slope if fit else float("nan"), fit, table)


class ConvergenceReport(NamedTuple):
    """Differences of particle paths along a ladder of levels."""

    table: pd.DataFrame
    rate: float
    fit: LogLogFit | None


def trajectory_convergence(
    series: SnapshotSeries,
    x0: Sequence[float],
    ks: Sequence[int],
    t0: float | None = None,
    t1: float | None = None,
) -> ConvergenceReport:
    """
    ``sup_t |X_(k+1)(t) − X_(k)(t)|`` along a ladder of levels.

    A decaying ladder is evidence of convergence of the coarse paths; it does
    not certify uniqueness of the limit.

    Returns
    -------
    ConvergenceReport
        ``rate`` is the fitted decay exponent of the differences in ``k``.
    """
    ks = sorted(ks)
    if len(ks) < 3:
        raise ValueError("A convergence ladder needs at least three levels.")
    times = series.times
    t0 = float(times[0]) if t0 is None else t0
    t1 = float(times[-1]) if t1 is None else t1
    paths = ordered_map(lambda k: integrate_flow(series, k, x0, t0, t1), ks)
    rows = [
        dict(
            k=ka,
            difference=float(
                np.linalg.norm(b.positions - a.positions, axis=-1).max()
            ),
        )
        for ka, a, b in zip(ks, paths, paths[1:])
    ]
    table = pd.DataFrame(rows, columns=["k", "difference"])
    usable = table[table["difference"] > 1e-13]
    fit = fit_log2(usable["k"], usable["difference"]) if len(usable) >= 2 else None
    return ConvergenceReport(table, -fit.slope if fit else float("nan"), fit)
