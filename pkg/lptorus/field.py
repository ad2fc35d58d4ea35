"""Grids, fields and time jets on the periodic square."""

from __future__ import annotations

from functools import cached_property
from math import comb
from typing import Any, Callable, Iterator, NamedTuple, Sequence

import numpy as np
from scipy import fft

import lptorus as lpt

from ._util import LPTorusError


class GridError(LPTorusError, ValueError):
    """Raised if a grid is malformed or fields live on different grids."""


class DivergenceError(LPTorusError, ValueError):
    """Raised if a velocity field must be divergence-free but is not."""


class JetOrderError(LPTorusError, ValueError):
    """Raised if a time jet is too short for the requested derivative."""


#: Largest total order accepted by `derivative`.
MAX_DERIVATIVE_ORDER = 6

#: Maximal order of velocity time jets.
MAX_JET_ORDER = 4


def _pad_last(coeffs: np.ndarray, m: int) -> np.ndarray:
    n = coeffs.shape[-1]
    h = n // 2
    out = np.zeros(coeffs.shape[:-1] + (m,), dtype=complex)
    out[..., :h] = coeffs[..., :h]
    out[..., m - h + 1 :] = coeffs[..., h + 1 :]
    # Nyquist coefficient is split between +n/2 and -n/2
    out[..., h] = 0.5 * coeffs[..., h]
    out[..., m - h] = 0.5 * coeffs[..., h]
    return out


class TorusGrid:
    """
    Uniform grid on the square torus ``[0, period)²``.

    Parameters
    ----------
    n : int
        Samples per axis, a power of two not smaller than 32.
    period : float, optional
        Side length of the torus (default: 2π).

    Raises
    ------
    GridError
        If ``n`` is not an admissible size or the period is not positive.

    Notes
    -----
    Arrays are indexed ``[..., i1, i2]``: the first spatial axis carries
    ``x₁``, the second ``x₂``. Spectral coefficients use the normalization in
    which ``f = Σ c_ξ exp(iξ·x)``.
    """

    def __init__(self, n: int, period: float = 2 * np.pi) -> None:
        n = int(n)
        if n < 32 or n & (n - 1):
            raise GridError(f"Grid size must be a power of two >= 32, got {n}.")
        if not period > 0:
            raise GridError(f"Period must be positive, got {period}.")
        self.n = n
        self.period = float(period)
        if self.kmax < self.k0:
            raise GridError(f"Grid of size {n} resolves no dyadic level.")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TorusGrid):
            return NotImplemented
        return self.n == other.n and self.period == other.period

    def __hash__(self) -> int:
        return hash((self.n, self.period))

    def __repr__(self) -> str:
        return f"TorusGrid(n={self.n}, period={self.period:g})"

    @property
    def spacing(self) -> float:
        """Distance between neighboring samples."""
        return self.period / self.n

    @property
    def area(self) -> float:
        return self.period**2

    @property
    def unit(self) -> float:
        """Lowest nonzero wavenumber."""
        return 2 * np.pi / self.period

    @cached_property
    def k0(self) -> int:
        """Lowest active dyadic level."""
        return int(np.floor(np.log2(self.unit)))

    @cached_property
    def band(self) -> float:
        """Radius of the disc kept by the two-thirds rule."""
        return self.unit * self.n / 3

    @cached_property
    def kmax(self) -> int:
        """Highest resolvable level, with ``2**(kmax + 1) <= band``."""
        return int(np.floor(np.log2(self.band))) - 1

    @cached_property
    def modes(self) -> np.ndarray:
        """Integer mode numbers in FFT order."""
        return np.rint(fft.fftfreq(self.n, 1 / self.n)).astype(int)

    @cached_property
    def kx(self) -> np.ndarray:
        """Wavenumbers along ``x₁`` as a column."""
        return (self.unit * self.modes)[:, None].astype(float)

    @cached_property
    def ky(self) -> np.ndarray:
        """Wavenumbers along ``x₂`` as a row."""
        return (self.unit * self.modes)[None, :].astype(float)

    @cached_property
    def wavevector(self) -> tuple[np.ndarray, np.ndarray]:
        """Full ``(ξ₁, ξ₂)`` arrays."""
        return np.broadcast_arrays(self.kx, self.ky)

    @cached_property
    def ik(self) -> tuple[np.ndarray, np.ndarray]:
        """Multipliers of ``∂₁`` and ``∂₂``, with the Nyquist mode removed."""
        nyq = np.abs(self.modes) == self.n // 2
        ik = 1j * np.where(nyq, 0.0, self.unit * self.modes)
        return ik[:, None], ik[None, :]

    @cached_property
    def k_squared(self) -> np.ndarray:
        return self.kx**2 + self.ky**2

    @cached_property
    def k_squared_safe(self) -> np.ndarray:
        """``|ξ|²`` with the zero mode replaced by one."""
        k2 = self.k_squared.copy()
        k2[0, 0] = 1.0
        return k2

    @cached_property
    def k_norm(self) -> np.ndarray:
        return np.sqrt(self.k_squared)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Modes kept by the two-thirds rule (``|n_i| < n/3``)."""
        keep = 3 * np.abs(self.modes) < self.n
        return keep[:, None] & keep[None, :]

    @cached_property
    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Sample positions ``(x₁, x₂)``."""
        x = self.spacing * np.arange(self.n)
        return np.meshgrid(x, x, indexing="ij")

    def forward(self, values: np.ndarray) -> np.ndarray:
        """Physical samples to spectral coefficients."""
        return fft.fft2(values, norm="forward", workers=lpt.params["workers"])

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        """Spectral coefficients to (real) physical samples."""
        return fft.ifft2(coeffs, norm="forward", workers=lpt.params["workers"]).real

    def oversampled(self, factor: int | None = None) -> TorusGrid:
        """Grid with ``factor`` times as many samples per axis."""
        factor = factor or lpt.params["oversample"]
        return TorusGrid(self.n * factor, self.period)

    def pad(self, coeffs: np.ndarray, factor: int | None = None) -> np.ndarray:
        """Zero-pad spectral coefficients onto the oversampled grid."""
        m = self.oversampled(factor).n
        padded = _pad_last(coeffs, m)
        padded = np.swapaxes(_pad_last(np.swapaxes(padded, -1, -2), m), -1, -2)
        return padded


class Field:
    """
    Real tensor field sampled on a `TorusGrid`.

    Scalars have component shape ``()``, vectors ``(2,)`` and 2-tensors
    ``(2, 2)``. Samples are immutable; the spectral view is computed once.

    Parameters
    ----------
    grid : TorusGrid
        Grid the samples live on.
    values : array_like
        Samples of shape ``component_shape + (n, n)``.
    """

    def __init__(self, grid: TorusGrid, values: Any) -> None:
        values = np.array(values, dtype=np.float64)
        if values.shape[-2:] != (grid.n, grid.n):
            raise GridError(
                f"Samples of shape {values.shape} do not fit grid of size {grid.n}."
            )
        values.flags.writeable = False
        self.grid = grid
        self.values = values

    @classmethod
    def from_spectral(cls, grid: TorusGrid, coeffs: np.ndarray) -> Field:
        """Construct a field from Hermitian spectral coefficients."""
        field = cls(grid, grid.inverse(coeffs))
        coeffs = np.array(coeffs, dtype=complex)
        coeffs.flags.writeable = False
        field.__dict__["spectral"] = coeffs
        return field

    @classmethod
    def from_function(cls, grid: TorusGrid, func: Callable) -> Field:
        """Sample ``func(x1, x2)``, which may return a sequence of components."""
        x1, x2 = grid.coordinates
        out = func(x1, x2)
        if isinstance(out, (tuple, list)):
            out = np.stack([np.broadcast_to(c, x1.shape) for c in out])
        return cls(grid, np.broadcast_to(out, np.shape(out)[:-2] + x1.shape))

    @classmethod
    def zeros(cls, grid: TorusGrid, shape: tuple[int, ...] = ()) -> Field:
        return cls(grid, np.zeros(shape + (grid.n, grid.n)))

    @classmethod
    def constant(cls, grid: TorusGrid, value: Any) -> Field:
        """Field equal to ``value`` (scalar or vector) everywhere."""
        value = np.asarray(value, dtype=float)
        return cls(grid, value[..., None, None] * np.ones((grid.n, grid.n)))

    @classmethod
    def stack(cls, fields: Sequence[Field]) -> Field:
        """Stack fields along a new leading component axis."""
        grid = _common_grid(*fields)
        return cls(grid, np.stack([f.values for f in fields]))

    @cached_property
    def spectral(self) -> np.ndarray:
        """Spectral coefficients (read-only)."""
        coeffs = self.grid.forward(self.values)
        coeffs.flags.writeable = False
        return coeffs

    @property
    def shape(self) -> tuple[int, ...]:
        """Component shape."""
        return self.values.shape[:-2]

    @property
    def rank(self) -> int:
        return len(self.shape)

    def __repr__(self) -> str:
        kind = {0: "scalar", 1: "vector", 2: "tensor"}.get(self.rank, "array")
        return f"<Field {kind} {self.shape} on {self.grid!r}>"

    def __getitem__(self, index) -> Field:
        sub = self.values[index]
        if sub.shape[-2:] != (self.grid.n, self.grid.n):
            raise IndexError("Only component axes can be indexed.")
        return Field(self.grid, sub)

    def __iter__(self) -> Iterator[Field]:
        for i in range(self.shape[0]):
            yield self[i]

    def _other_values(self, other: Any) -> np.ndarray | float:
        if isinstance(other, Field):
            _common_grid(self, other)
            return other.values
        arr = np.asarray(other, dtype=float)
        return arr.reshape(arr.shape + (1, 1)) if arr.ndim else float(arr)

    def __add__(self, other: Any) -> Field:
        return Field(self.grid, self.values + self._other_values(other))

    __radd__ = __add__

    def __sub__(self, other: Any) -> Field:
        return Field(self.grid, self.values - self._other_values(other))

    def __rsub__(self, other: Any) -> Field:
        return Field(self.grid, self._other_values(other) - self.values)

    def __neg__(self) -> Field:
        return Field(self.grid, -self.values)

    def __mul__(self, other: Any) -> Field:
        """Pointwise product; a scalar field broadcasts over components."""
        if isinstance(other, Field) and other.rank and self.rank:
            if other.shape != self.shape:
                raise GridError("Use `outer` for products of tensor fields.")
        return Field(self.grid, self.values * self._other_values(other))

    __rmul__ = __mul__

    def __truediv__(self, other: float) -> Field:
        return Field(self.grid, self.values / other)

    def apply_multiplier(self, multiplier: np.ndarray) -> Field:
        """Apply a Fourier multiplier (broadcast against the spectral view)."""
        return Field.from_spectral(self.grid, self.spectral * multiplier)

    def derivative(self, multi_index: Sequence[int]) -> Field:
        """Spectral derivative ``∂₁^a ∂₂^b``."""
        return derivative(self, multi_index)

    def grad(self) -> Field:
        """Gradient, prepended as the first component axis."""
        ik1, ik2 = self.grid.ik
        return Field.from_spectral(
            self.grid, np.stack([ik1 * self.spectral, ik2 * self.spectral])
        )

    def div(self) -> Field:
        """Divergence over the first component axis."""
        if not self.rank:
            raise GridError("Cannot take the divergence of a scalar field.")
        ik1, ik2 = self.grid.ik
        return Field.from_spectral(
            self.grid, ik1 * self.spectral[0] + ik2 * self.spectral[1]
        )

    def curl(self) -> Field:
        """Scalar curl ``∂₁v² − ∂₂v¹`` of a vector field."""
        ik1, ik2 = self.grid.ik
        return Field.from_spectral(
            self.grid, ik1 * self.spectral[1] - ik2 * self.spectral[0]
        )

    def advect(self, u: Field) -> Field:
        """Transport term ``u·∇f``, evaluated pointwise."""
        grad = self.grad().values
        u_vals = u.values.reshape((2,) + (1,) * self.rank + u.values.shape[-2:])
        return Field(self.grid, np.sum(u_vals * grad, axis=0))

    def outer(self, other: Field) -> Field:
        """Pointwise tensor product."""
        _common_grid(self, other)
        nn = self.values.shape[-2:]
        a = self.values.reshape(self.shape + (1,) * other.rank + nn)
        b = other.values.reshape((1,) * self.rank + other.shape + nn)
        return Field(self.grid, a * b)

    def magnitude_squared(self) -> Field:
        """Pointwise squared Euclidean norm over all components."""
        axes = tuple(range(self.rank))
        return Field(self.grid, np.sum(self.values**2, axis=axes))

    def dealias(self) -> Field:
        """Drop the modes removed by the two-thirds rule."""
        return self.apply_multiplier(self.grid.dealias_mask)

    def mean(self) -> np.ndarray | float:
        """Spatial average, per component."""
        return np.mean(self.values, axis=(-2, -1))

    def integrate(self) -> np.ndarray | float:
        """Integral over the torus, per component."""
        return self.grid.area * self.mean()

    def grid_max(self) -> float:
        """Maximum of the pointwise magnitude over grid points."""
        return float(np.sqrt(self.magnitude_squared().values.max()))

    def sup_norm(self) -> float:
        return sup_norm(self)

    def shift(self, h: Sequence[float]) -> Field:
        return spatial_shift(self, h)


def _common_grid(*fields: Field) -> TorusGrid:
    grid = fields[0].grid
    if any(f.grid != grid for f in fields[1:]):
        raise GridError("Fields live on different grids.")
    return grid


def transform(field: Field, direction: str = "forward") -> np.ndarray | Field:
    """
    Switch between physical and spectral views.

    Parameters
    ----------
    field : Field
        Field to transform.
    direction : {"forward", "inverse"}
        ``"forward"`` returns the spectral coefficients, ``"inverse"`` the
        field re-synthesized from them.
    """
    if direction == "forward":
        return field.spectral
    if direction == "inverse":
        return Field.from_spectral(field.grid, field.spectral)
    raise ValueError(f"Unknown transform direction '{direction}'.")


def derivative(field: Field, multi_index: Sequence[int]) -> Field:
    """
    Differentiate spectrally.

    Parameters
    ----------
    field : Field
        Field to differentiate.
    multi_index : sequence of two int
        Orders ``(a, b)`` of ``∂₁^a ∂₂^b``; ``a + b`` at most 6.

    Returns
    -------
    Field
    """
    a, b = map(int, multi_index)
    if a < 0 or b < 0 or a + b > MAX_DERIVATIVE_ORDER:
        raise ValueError(f"Unsupported derivative order {(a, b)}.")
    ik1, ik2 = field.grid.ik
    return field.apply_multiplier(ik1**a * ik2**b)


def derivative_tensor(field: Field, order: int) -> Field:
    """All derivatives of total ``order``, as leading component axes."""
    for _ in range(order):
        field = field.grad()
    return field


def leray_project(v: Field) -> Field:
    """
    Project a vector field onto its divergence-free part.

    The mean is kept; gradients are annihilated.
    """
    grid = v.grid
    k1, k2 = grid.wavevector
    k2s = grid.k_squared_safe
    c1, c2 = v.spectral
    dot = (k1 * c1 + k2 * c2) / k2s
    return Field.from_spectral(grid, np.stack([c1 - k1 * dot, c2 - k2 * dot]))


def check_divergence(v: Field, rtol: float = 1e-10) -> None:
    """
    Raise if ``v`` is not divergence-free.

    Raises
    ------
    DivergenceError
        If ``max|div v| > rtol·(‖∇v‖ + 1)`` on the grid.
    """
    if v.shape != (2,):
        raise GridError(f"Expected a vector field, got component shape {v.shape}.")
    div = np.abs(v.div().values).max()
    scale = v.grad().grid_max() + 1.0
    if div > rtol * scale:
        raise DivergenceError(f"Velocity divergence {div:.3e} exceeds tolerance.")


def sup_norm(field: Field, factor: int | None = None) -> float:
    """
    C⁰ norm evaluated on the oversampled grid.

    Band-limited fields can peak between collocation points, so the samples
    are re-synthesized on a grid ``factor`` times finer.
    """
    grid = field.grid
    fine = grid.oversampled(factor)
    values = fine.inverse(grid.pad(field.spectral, fine.n // grid.n))
    axes = tuple(range(field.rank))
    return float(np.sqrt(np.sum(values**2, axis=axes).max()))


def spatial_shift(field: Field, h: Sequence[float]) -> Field:
    """Exact translate ``x ↦ f(x + h)`` of a band-limited field."""
    grid = field.grid
    phase = np.exp(1j * (grid.kx * h[0] + grid.ky * h[1]))
    nyq = (np.abs(grid.modes) == grid.n // 2)
    phase[nyq, :] = phase[nyq, :].real
    phase[:, nyq] = phase[:, nyq].real
    return field.apply_multiplier(phase)


class HolderSeminorm(NamedTuple):
    """Two estimators of the homogeneous Hölder seminorm."""

    lp: float
    sampled: float
    alpha: float


def seminorm_holder(field: Field, alpha: float) -> HolderSeminorm:
    """
    Estimate ``‖f‖_{Ċ^α}``.

    Parameters
    ----------
    field : Field
        Field to measure.
    alpha : float
        Exponent in ``(0, 1]``.

    Returns
    -------
    HolderSeminorm
        ``lp`` is the dyadic value ``sup_k 2^{αk}‖P_k f‖_{C⁰}``; ``sampled`` is
        ``sup |f(x+h) − f(x)|/|h|^α`` over grid points and dyadic grid lags in
        the axis and diagonal directions.

    Raises
    ------
    ValueError
        If ``alpha`` lies outside ``(0, 1]``.
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"Hölder exponent must lie in (0, 1], got {alpha}.")
    from .bank import build_bank

    bank = build_bank(field.grid)
    lp = max(
        2.0 ** (alpha * k) * sup_norm(bank.project_shell(field, k))
        for k in range(field.grid.k0, bank.ktop + 1)
    )
    grid = field.grid
    vals = field.values
    axes = tuple(range(field.rank))
    sampled = 0.0
    m = 1
    while m <= grid.n // 4:
        for step in [(m, 0), (0, m), (m, m), (m, -m)]:
            diff = np.roll(vals, (-step[0], -step[1]), axis=(-2, -1)) - vals
            size = np.sqrt(np.sum(diff**2, axis=axes)).max()
            dist = grid.spacing * np.hypot(*step)
            sampled = max(sampled, float(size / dist**alpha))
        m *= 2
    return HolderSeminorm(float(lp), sampled, float(alpha))


def besov_norm(field: Field, s: float = 1 / 3, p: float = 3.0) -> float:
    """
    Dyadic norm ``sup_k 2^{sk}‖P_k f‖_{L^p}``.

    With the defaults this is the Onsager-critical Besov quantity; it serves
    as a diagnostic only.
    """
    if p < 1:
        raise ValueError(f"Integrability exponent must be at least 1, got {p}.")
    from .bank import build_bank

    bank = build_bank(field.grid)
    best = 0.0
    for k in range(field.grid.k0, bank.ktop + 1):
        piece = bank.project_shell(field, k).magnitude_squared()
        lp_norm = (piece.grid.area * np.mean(piece.values ** (p / 2))) ** (1 / p)
        best = max(best, 2.0 ** (s * k) * float(lp_norm))
    return best


class TimeJet:
    """
    A field together with its first time derivatives at a fixed time.

    Parameters
    ----------
    levels : sequence of Field
        ``f, ∂_t f, …, ∂_t^m f``.
    """

    def __init__(self, levels: Sequence[Field]) -> None:
        if not len(levels):
            raise JetOrderError("A time jet needs at least one level.")
        self.levels = tuple(levels)

    @property
    def order(self) -> int:
        return len(self.levels) - 1

    @property
    def value(self) -> Field:
        return self.levels[0]

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, r: int) -> Field:
        return self.levels[r]

    def __iter__(self) -> Iterator[Field]:
        return iter(self.levels)

    def __repr__(self) -> str:
        return f"<TimeJet order {self.order} of {self.value!r}>"

    def require(self, order: int) -> None:
        """Raise `JetOrderError` if the jet is shorter than ``order``."""
        if self.order < order:
            raise JetOrderError(
                f"Time jet of order {self.order} cannot supply order {order}."
            )

    def truncate(self, order: int) -> TimeJet:
        self.require(order)
        return TimeJet(self.levels[: order + 1])

    def map(self, func: Callable[[Field], Field]) -> TimeJet:
        """Apply a time-independent linear operation levelwise."""
        return TimeJet([func(level) for level in self.levels])

    def _zip(self, other: TimeJet) -> zip:
        return zip(self.levels, other.levels)

    def __add__(self, other: TimeJet) -> TimeJet:
        return TimeJet([a + b for a, b in self._zip(other)])

    def __sub__(self, other: TimeJet) -> TimeJet:
        return TimeJet([a - b for a, b in self._zip(other)])

    def __neg__(self) -> TimeJet:
        return TimeJet([-a for a in self.levels])

    def __mul__(self, scalar: float) -> TimeJet:
        return TimeJet([scalar * a for a in self.levels])

    __rmul__ = __mul__

    def product(
        self, other: TimeJet, op: Callable[[Field, Field], Field] = Field.__mul__
    ) -> TimeJet:
        """
        Jet of a bilinear product by the Leibniz rule.

        Level ``r`` is ``Σ_s binom(r, s) op(∂_t^s f, ∂_t^{r−s} g)``.
        """
        order = min(self.order, other.order)
        levels = []
        for r in range(order + 1):
            term = comb(r, 0) * op(self[0], other[r])
            for s in range(1, r + 1):
                term = term + comb(r, s) * op(self[s], other[r - s])
            levels.append(term)
        return TimeJet(levels)

    def outer(self, other: TimeJet) -> TimeJet:
        return self.product(other, Field.outer)

    def advect(self, u: TimeJet) -> TimeJet:
        """
        Jet of the advective derivative ``∂_t Q + u·∇Q``.

        The result is one order shorter than the shorter of the two inputs
        (after accounting for the extra derivative of ``Q``).
        """
        order = min(self.order - 1, u.order)
        if order < 0:
            raise JetOrderError("Advective derivative needs a jet of order >= 1.")
        levels = []
        for r in range(order + 1):
            term = self[r + 1]
            for s in range(r + 1):
                term = term + comb(r, s) * self[r - s].advect(u[s])
            levels.append(term)
        return TimeJet(levels)


def velocity_time_jet(v: Field, m: int) -> TimeJet:
    """
    Time jet of an Euler velocity, obtained from the equation.

    Parameters
    ----------
    v : Field
        Divergence-free velocity, band-limited inside the two-thirds band.
    m : int
        Jet order, at most 4.

    Returns
    -------
    TimeJet
        Level ``r + 1`` is ``−Leray(div Σ_s binom(r, s) ∂_t^s v ⊗ ∂_t^{r−s} v)``,
        with the nonlinearity restricted to the two-thirds band.

    Raises
    ------
    DivergenceError
        If ``v`` is not divergence-free.
    """
    if not 0 <= m <= MAX_JET_ORDER:
        raise JetOrderError(f"Jet order must lie in [0, {MAX_JET_ORDER}], got {m}.")
    check_divergence(v)
    levels = [v]
    for r in range(m):
        flux = levels[0].outer(levels[r])
        for s in range(1, r + 1):
            flux = flux + comb(r, s) * levels[s].outer(levels[r - s])
        levels.append(-leray_project(flux.div().dealias()))
    return TimeJet(levels)
