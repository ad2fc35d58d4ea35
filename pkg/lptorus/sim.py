"""Pseudo-spectral Euler solver and snapshot series."""

from __future__ import annotations

import os
import struct
from functools import cached_property
from pathlib import Path
from typing import Any, Iterator, Sequence

import numpy as np
import pandas as pd
from tqdm.auto import tqdm
from wasabi import msg

from ._util import LogLogFit, LPTorusError, fit_log2, tqdm_args
from .config import RunConfiguration
from .euler import EulerSnapshot
from .examples import NAMED_FLOWS, named_flow
from .field import Field, GridError, TorusGrid, leray_project, sup_norm
from .synth import synth_lacunary


class CFLError(LPTorusError, ValueError):
    """Raised if the time step violates the CFL condition."""


class BlowUpError(LPTorusError, RuntimeError):
    """Raised if the vorticity grows beyond the blow-up guard."""


class SnapshotFormatError(LPTorusError, ValueError):
    """Raised if a snapshot file or series index is malformed."""


class SeriesRangeError(LPTorusError, ValueError):
    """Raised if a time lies outside the usable range of a series."""


class RangeSyntaxError(LPTorusError, ValueError):
    """Raised if an integer range is not of the form ``a:b``."""


#: Largest admissible ``max|v|·Δt·N/L`` at the initial time.
CFL_LIMIT = 0.5

#: Largest admissible growth of ``max|ω|``.
BLOW_UP_FACTOR = 1e6

#: Magic bytes opening every snapshot file.
MAGIC = b"LPSV1\0"

#: Header: magic, dimension, samples per axis, period, time, components.
HEADER = struct.Struct("<6sIIddI")

#: Name of the index file of a series directory.
INDEX_NAME = "index.txt"

#: Initial conditions understood by `SimConfig`.
INITIAL_CONDITIONS = tuple(NAMED_FLOWS) + ("random",)

DEALIAS_RULES = ("two_thirds",)


def _parse_range(text: str) -> tuple[int, int]:
    lo, _, hi = str(text).partition(":")
    try:
        return int(lo), int(hi or lo)
    except ValueError:
        raise RangeSyntaxError(f"Malformed range '{text}', expected 'a:b'.") from None


class SimConfig:
    """
    Settings of a simulation run.

    Parameters
    ----------
    grid : TorusGrid
        Grid to simulate on.
    initial : str, optional
        Initial condition: a named flow or ``"random"`` (lacunary shells).
    dt : float, optional
        Time step.
    steps : int, optional
        Number of time steps.
    stride : int, optional
        Steps between stored snapshots.
    dealias : str, optional
        Dealiasing rule; only ``"two_thirds"`` is supported.
    jet_order : int, optional
        Order of the time jets of the stored snapshots.
    alpha : float, optional
        Hölder exponent of ``"random"`` initial data.
    shells : tuple of int, optional
        Shell range of ``"random"`` initial data.
    seed : int, optional
        Seed of ``"random"`` initial data.
    mean : tuple of float, optional
        Constant velocity added to the initial data.
    velocity : Field, optional
        Explicit initial velocity, overriding ``initial``.

    Raises
    ------
    ValueError
        For unknown initial conditions, dealiasing rules or nonpositive step
        counts.
    """

    def __init__(
        self,
        grid: TorusGrid,
        initial: str = "taylor_green",
        dt: float = 0.01,
        steps: int = 200,
        stride: int = 10,
        dealias: str = "two_thirds",
        jet_order: int = 2,
        alpha: float = 0.5,
        shells: tuple[int, int] = (1, 3),
        seed: int | None = 0,
        mean: Sequence[float] = (0.0, 0.0),
        velocity: Field | None = None,
    ) -> None:
        if velocity is None and initial not in INITIAL_CONDITIONS:
            raise ValueError(f"Unknown initial condition '{initial}'.")
        if dealias not in DEALIAS_RULES:
            raise ValueError(f"Unknown dealiasing rule '{dealias}'.")
        if steps < 1 or stride < 1:
            raise ValueError("Steps and stride must be positive.")
        self.grid = grid
        self.initial = initial if velocity is None else "explicit"
        self.dt = float(dt)
        self.steps = int(steps)
        self.stride = int(stride)
        self.dealias = dealias
        self.jet_order = int(jet_order)
        self.alpha = float(alpha)
        self.shells = tuple(map(int, shells))
        self.seed = seed
        self.mean = tuple(map(float, mean))
        self.velocity = velocity

    def __repr__(self) -> str:
        return (
            f"SimConfig({self.initial!r}, dt={self.dt:g}, steps={self.steps}, "
            f"stride={self.stride}, {self.grid!r})"
        )

    @classmethod
    def from_run_config(cls, conf: RunConfiguration) -> SimConfig:
        """Settings from the ``[grid]`` and ``[simulation]`` sections."""
        grid = TorusGrid(conf["grid"]["n"], conf["grid"]["period"])
        sim = conf["simulation"]
        return cls(
            grid,
            initial=sim["initial"],
            dt=sim["dt"],
            steps=sim["steps"],
            stride=sim["stride"],
            dealias=sim["dealias"],
            jet_order=sim["jet_order"],
            alpha=sim["alpha"],
            shells=_parse_range(sim["shells"]),
            seed=sim["seed"],
        )

    def to_dict(self) -> dict[str, Any]:
        return dict(
            n=self.grid.n,
            period=self.grid.period,
            initial=self.initial,
            dt=self.dt,
            steps=self.steps,
            stride=self.stride,
            dealias=self.dealias,
            jet_order=self.jet_order,
            alpha=self.alpha,
            shells=list(self.shells),
            seed=self.seed,
            mean=list(self.mean),
        )

    def initial_velocity(self) -> Field:
        """Divergence-free initial velocity inside the two-thirds band."""
        if self.velocity is not None:
            v = self.velocity
        elif self.initial == "random":
            v = synth_lacunary(self.grid, self.alpha, self.shells, seed=self.seed)
        else:
            v = named_flow(self.grid, self.initial)
        return leray_project(v.dealias()) + np.asarray(self.mean)

    def cfl_number(self, v: Field) -> float:
        return v.grid_max() * self.dt * self.grid.n / self.grid.period


class VorticitySolver:
    """
    Right-hand side and RK4 step of the vorticity equation.

    ``∂_t ω + v·∇ω = 0`` with ``v = U + ∇^⊥ψ`` and ``Δψ = ω``, where the mean
    velocity ``U`` is carried separately. The quadratic term is restricted to
    the two-thirds band.
    """

    def __init__(self, grid: TorusGrid, mean: Sequence[float] = (0.0, 0.0)) -> None:
        self.grid = grid
        self.mean = np.asarray(mean, dtype=float)
        self.mask = grid.dealias_mask

    @cached_property
    def _stream(self) -> np.ndarray:
        inv = -1.0 / self.grid.k_squared_safe
        inv[0, 0] = 0.0
        return inv

    def velocity_spectral(self, w_hat: np.ndarray) -> np.ndarray:
        ik1, ik2 = self.grid.ik
        psi = self._stream * w_hat
        v_hat = np.stack([-ik2 * psi, ik1 * psi])
        v_hat[:, 0, 0] = self.mean
        return v_hat

    def velocity(self, w_hat: np.ndarray) -> Field:
        return Field.from_spectral(self.grid, self.velocity_spectral(w_hat))

    def rhs(self, w_hat: np.ndarray) -> np.ndarray:
        grid = self.grid
        ik1, ik2 = grid.ik
        v1, v2 = grid.inverse(self.velocity_spectral(w_hat))
        w1, w2 = grid.inverse(np.stack([ik1 * w_hat, ik2 * w_hat]))
        return -self.mask * grid.forward(v1 * w1 + v2 * w2)

    def step(self, w_hat: np.ndarray, dt: float) -> np.ndarray:
        """One classical Runge-Kutta step."""
        k1 = self.rhs(w_hat)
        k2 = self.rhs(w_hat + 0.5 * dt * k1)
        k3 = self.rhs(w_hat + 0.5 * dt * k2)
        k4 = self.rhs(w_hat + dt * k3)
        return w_hat + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    def vorticity_spectral(self, v: Field) -> np.ndarray:
        """Masked vorticity coefficients of a velocity."""
        return self.mask * v.curl().spectral


def simulate(config: SimConfig) -> SnapshotSeries:
    """
    Integrate the Euler equations and store snapshots.

    Parameters
    ----------
    config : SimConfig
        Run settings.

    Returns
    -------
    SnapshotSeries
        Snapshots every ``stride`` steps, the initial state included.

    Raises
    ------
    CFLError
        If ``max|v|·Δt·N/L`` exceeds 0.5 initially.
    BlowUpError
        If ``max|ω|`` grows by more than a factor 10⁶ or stops being finite.
    """
    grid = config.grid
    v0 = config.initial_velocity()
    cfl = config.cfl_number(v0)
    if cfl > CFL_LIMIT:
        raise CFLError(f"CFL number {cfl:.3f} exceeds {CFL_LIMIT}.")
    solver = VorticitySolver(grid, v0.mean())
    w_hat = solver.vorticity_spectral(v0)
    w0 = max(np.abs(grid.inverse(w_hat)).max(), np.finfo(float).tiny)
    snapshots = [EulerSnapshot(v0, 0.0, config.jet_order)]
    for step in tqdm(range(1, config.steps + 1), **tqdm_args("steps")):
        w_hat = solver.step(w_hat, config.dt)
        if step % config.stride:
            continue
        wmax = np.abs(grid.inverse(w_hat)).max()
        if not np.isfinite(wmax) or wmax > BLOW_UP_FACTOR * w0:
            raise BlowUpError(f"Vorticity blew up at step {step}.")
        v = solver.velocity(w_hat)
        snapshots.append(EulerSnapshot(v, step * config.dt, config.jet_order))
    return SnapshotSeries(snapshots, config=config)


class SnapshotSeries:
    """
    Snapshots of a flow at uniformly spaced, increasing times.

    Parameters
    ----------
    snapshots : sequence of EulerSnapshot
        Snapshots in time order, all on one grid.
    config : SimConfig, optional
        Settings of the run that produced the series.
    kind : {"euler", "synthetic"}, optional
        Whether the snapshots solve the Euler equations.

    Raises
    ------
    SnapshotFormatError
        If times do not increase with a uniform stride or grids differ.
    """

    def __init__(
        self,
        snapshots: Sequence[EulerSnapshot],
        config: SimConfig | None = None,
        kind: str = "euler",
    ) -> None:
        self.snapshots = list(snapshots)
        if not self.snapshots:
            raise SnapshotFormatError("A series needs at least one snapshot.")
        self.config = config
        self.kind = kind
        times = self.times
        if len(times) > 1:
            steps = np.diff(times)
            if (steps <= 0).any():
                raise SnapshotFormatError("Snapshot times must increase strictly.")
            if np.abs(steps - steps[0]).max() > 1e-9 * steps[0]:
                raise SnapshotFormatError("Snapshot times must be uniformly spaced.")
        grid = self.snapshots[0].grid
        if any(s.grid != grid for s in self.snapshots):
            raise GridError("Snapshots live on different grids.")

    @classmethod
    def frozen(cls, v: Field, times: Sequence[float], order: int = 2) -> SnapshotSeries:
        """Series of a velocity that is constant in time (pure transport)."""
        snapshots = [EulerSnapshot.frozen(v, t, order) for t in times]
        return cls(snapshots, kind="synthetic")

    def __len__(self) -> int:
        return len(self.snapshots)

    def __getitem__(self, i: int) -> EulerSnapshot:
        return self.snapshots[i]

    def __iter__(self) -> Iterator[EulerSnapshot]:
        return iter(self.snapshots)

    def __repr__(self) -> str:
        return f"<SnapshotSeries of {len(self)} {self.kind} snapshots on {self.grid!r}>"

    @property
    def grid(self) -> TorusGrid:
        return self.snapshots[0].grid

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    @property
    def stride(self) -> float:
        """Time between consecutive snapshots."""
        times = self.times
        return float(times[1] - times[0]) if len(times) > 1 else 0.0

    def index_of(self, t: float) -> int:
        """
        Index of the snapshot at time ``t``.

        Raises
        ------
        SeriesRangeError
            If no snapshot is stored at ``t``.
        """
        times = self.times
        i = int(np.argmin(np.abs(times - t)))
        if abs(times[i] - t) > 1e-9 * max(self.stride, 1.0):
            raise SeriesRangeError(f"No snapshot at time {t:g}.")
        return i

    def velocities(self) -> np.ndarray:
        """Samples of all velocities, shape ``(T, 2, n, n)``."""
        return np.stack([s.velocity.values for s in self.snapshots])

    def diagnostics(self) -> pd.DataFrame:
        """
        Invariants per snapshot.

        Returns
        -------
        `pandas.DataFrame`
            Columns ``time, energy, enstrophy, max_vorticity, mean_u1,
            mean_u2``.
        """
        rows = []
        for s in self.snapshots:
            v = s.velocity
            w = v.curl()
            mean = v.mean()
            rows.append(
                dict(
                    time=s.time,
                    energy=0.5 * float(v.magnitude_squared().integrate()),
                    enstrophy=0.5 * float((w * w).integrate()),
                    max_vorticity=float(np.abs(w.values).max()),
                    mean_u1=float(mean[0]),
                    mean_u2=float(mean[1]),
                )
            )
        return pd.DataFrame(rows)

    def save(self, directory: os.PathLike[str] | str) -> Path:
        """Write the series as LPSV1 snapshots plus an index file."""
        return save_series(self, directory)


def write_snapshot(path: os.PathLike[str] | str, field: Field, time: float) -> None:
    """
    Write a field as an LPSV1 file.

    The header is followed by the samples as little-endian 64-bit floats in
    row-major order, components first.
    """
    grid = field.grid
    ncomp = int(np.prod(field.shape, dtype=int))
    header = HEADER.pack(MAGIC, 2, grid.n, grid.period, float(time), ncomp)
    payload = np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    Path(path).write_bytes(header + payload)


def read_snapshot(path: os.PathLike[str] | str) -> tuple[Field, float]:
    """
    Read an LPSV1 file.

    Returns
    -------
    tuple
        The field (vector fields for two components) and its time.

    Raises
    ------
    FileNotFoundError
        If the file does not exist.
    SnapshotFormatError
        For a bad magic, a dimension other than 2, a bad grid or a truncated
        payload.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"File '{path}' does not exist.")
    data = path.read_bytes()
    if len(data) < HEADER.size:
        raise SnapshotFormatError(f"'{path}' is truncated.")
    magic, dim, n, period, time, ncomp = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotFormatError(f"'{path}' is not an LPSV1 file.")
    if dim != 2:
        raise SnapshotFormatError(f"'{path}' holds a {dim}-dimensional field.")
    try:
        grid = TorusGrid(n, period)
    except GridError as err:
        raise SnapshotFormatError(f"'{path}' has a malformed grid: {err}") from err
    count = ncomp * n * n
    if len(data) < HEADER.size + 8 * count:
        raise SnapshotFormatError(f"'{path}' is truncated.")
    values = np.frombuffer(data, dtype="<f8", count=count, offset=HEADER.size)
    shape = (n, n) if ncomp == 1 else (ncomp, n, n)
    return Field(grid, values.reshape(shape)), time


def save_series(series: SnapshotSeries, directory: os.PathLike[str] | str) -> Path:
    """
    Write a series into a directory.

    Returns
    -------
    Path
        The index file, one ``time filename`` line per snapshot.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = []
    for i, s in enumerate(series):
        name = f"snap_{i:05d}.lpsv"
        write_snapshot(directory / name, s.velocity, s.time)
        lines.append(f"{s.time!r} {name}")
    index = directory / INDEX_NAME
    index.write_text("\n".join(lines) + "\n")
    msg.good(f"Wrote {len(series)} snapshots to '{directory}'.")
    return index


def load_series(directory: os.PathLike[str] | str, jet_order: int = 2) -> SnapshotSeries:
    """
    Read a series written by `save_series`.

    Parameters
    ----------
    directory : path
        Directory holding the index file, or the index file itself.
    jet_order : int, optional
        Order of the time jets attached to the snapshots.

    Raises
    ------
    FileNotFoundError
        If the index or a snapshot file is missing.
    SnapshotFormatError
        If a file is malformed or its time disagrees with the index.
    """
    path = Path(directory)
    index = path if path.is_file() else path / INDEX_NAME
    if not index.exists():
        raise FileNotFoundError(f"File '{index}' does not exist.")
    snapshots = []
    for line in index.read_text().splitlines():
        if not line.strip():
            continue
        try:
            stamp, name = line.split()
            listed = float(stamp)
        except ValueError as err:
            raise SnapshotFormatError(f"Malformed index line '{line}'.") from err
        v, time = read_snapshot(index.parent / name)
        if time != listed:
            raise SnapshotFormatError(
                f"Index lists time {listed!r} for '{name}', file holds {time!r}."
            )
        snapshots.append(EulerSnapshot(v, time, jet_order))
    return SnapshotSeries(snapshots)


def time_derivative_oracle(series: SnapshotSeries, t: float, order: int = 1) -> Field:
    """
    Centered five-point finite difference ``∂_t^r v`` at a stored time.

    Parameters
    ----------
    series : SnapshotSeries
        Uniformly spaced snapshots.
    t : float
        Time of a stored snapshot at least two strides from either end.
    order : int, optional
        Derivative order, 1 to 3.

    Raises
    ------
    SeriesRangeError
        If ``t`` is too close to an end or not stored.
    """
    if order not in (1, 2, 3):
        raise ValueError(f"Difference order must be 1, 2 or 3, got {order}.")
    i = series.index_of(t)
    if i < 2 or i > len(series) - 3:
        raise SeriesRangeError(f"Time {t:g} is within two strides of an end.")
    h = series.stride
    m2, m1, c, p1, p2 = (series[i + j].velocity for j in range(-2, 3))
    if order == 1:
        return (m2 - 8 * m1 + 8 * p1 - p2) / (12 * h)
    if order == 2:
        return (-m2 + 16 * m1 - 30 * c + 16 * p1 - p2) / (12 * h**2)
    return (-m2 + 2 * m1 - 2 * p1 + p2) / (2 * h**3)


def difference_convergence(
    series: SnapshotSeries,
    t: float,
    order: int = 1,
    thinning: Sequence[int] = (1, 2, 4),
) -> LogLogFit:
    """
    Convergence of `time_derivative_oracle` towards the stored jet.

    The series is thinned to every ``m``-th snapshot for each ``m`` in
    ``thinning`` and the C⁰ distance between the difference quotient and
    ``snapshot.jet[order]`` is fitted against ``log2 m``. The slope is the
    observed order of the difference scheme.

    Raises
    ------
    SeriesRangeError
        If ``t`` is within two thinned strides of an end.
    """
    i = series.index_of(t)
    exact = series[i].jet[order]
    errors = []
    for m in thinning:
        start = i % m
        sub = SnapshotSeries(series.snapshots[start::m], kind=series.kind)
        errors.append(sup_norm(time_derivative_oracle(sub, t, order) - exact))
    return fit_log2(np.log2(thinning), errors)
