"""Littlewood-Paley projections and convolution kernels."""

from __future__ import annotations

from itertools import product
from typing import Callable, Iterable, Sequence, Union

import numpy as np
import pandas as pd
from toolz import memoize

import lptorus as lpt

from ._util import LPTorusError
from .field import Field, GridError, TorusGrid


class LevelRangeError(LPTorusError, ValueError):
    """Raised if a dyadic level lies outside the range of the bank."""


class UnsupportedSymbolError(LPTorusError, ValueError):
    """Raised if a kernel symbol is not known."""


class UnknownProfileError(LPTorusError, ValueError):
    """Raised if a radial profile name is not known."""


def _g(s: np.ndarray) -> np.ndarray:
    pos = s > 0
    return np.where(pos, np.exp(-1.0 / np.where(pos, s, 1.0)), 0.0)


def bump_profile(r: np.ndarray) -> np.ndarray:
    """
    Smooth radial cut equal to one on ``[0, 1/2]`` and zero on ``[1, ∞)``.

    ``ψ(r) = g(2 − 2r) / (g(2 − 2r) + g(2r − 1))`` with ``g(s) = exp(−1/s)``
    for positive ``s`` and zero otherwise.
    """
    r = np.asarray(r, dtype=float)
    a = _g(2 - 2 * r)
    b = _g(2 * r - 1)
    return a / (a + b)


def cosine_profile(r: np.ndarray) -> np.ndarray:
    """Raised-cosine cut with the same plateau and support (C¹ only)."""
    r = np.asarray(r, dtype=float)
    ramp = np.cos(np.pi * (np.clip(r, 0.5, 1.0) - 0.5)) ** 2
    return np.where(r <= 0.5, 1.0, np.where(r >= 1.0, 0.0, ramp))


#: Radial profiles selectable by name.
PROFILES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "bump": bump_profile,
    "cosine": cosine_profile,
}

#: Kernel symbols, mapped to (homogeneity, number of derivative indices).
SYMBOLS: dict[str, tuple[int, int]] = {
    "invlap_shell": (-2, 0),
    "grad_invlap_shell": (-1, 1),
    "hess_invlap_shell": (0, 2),
    "hess_invlap_leq": (0, 2),
    "eta_leq": (0, 0),
    "grad_eta_leq": (1, 1),
}

Profile = Union[str, Callable[[np.ndarray], np.ndarray]]


class LPBank:
    """
    Littlewood-Paley multipliers on a grid.

    ``P_{≤k}`` multiplies by ``η̂_{≤k}(ξ) = ψ(|ξ|/2^k)``; ``P_k = P_{≤k} −
    P_{≤k−1}``; ``P_{[a,b]} = P_{≤b} − P_{≤a}``. Levels run from ``k0 − 1``,
    the mean projection, to ``ktop = kmax + 2``.

    The shells up to ``kmax + 1`` lie inside the dealiased band
    ``|ξ| ≤ 2^{kmax+1} ≤ N/3``. The top level is a guard: its shell reaches past
    the band and it is only used as an auxiliary factor, so that formulas at
    level ``k ≤ kmax`` may use ``P_{k+1}`` and ``P_{[k,k+2]}``.

    Parameters
    ----------
    grid : TorusGrid
        Grid to build multipliers for.
    profile : str or callable, optional
        Radial cut ψ, by name (``"bump"``, ``"cosine"``) or as a function.

    Raises
    ------
    GridError
        If the resolvable range leaves the dealiased band.
    UnknownProfileError
        If the profile name is unknown.
    """

    def __init__(self, grid: TorusGrid, profile: Profile = "bump") -> None:
        if isinstance(profile, str):
            if profile not in PROFILES:
                raise UnknownProfileError(f"Unknown radial profile '{profile}'.")
            self.profile_name = profile
            self.psi = PROFILES[profile]
        else:
            self.profile_name = getattr(profile, "__name__", "custom")
            self.psi = profile
        if 2.0 ** (grid.kmax + 1) > grid.band:
            raise GridError("Highest level exceeds the dealiased band.")
        self.grid = grid
        self.levels = range(grid.k0 - 1, grid.kmax + 3)
        self._leq = {k: self._radial(grid, k) for k in self.levels}

    def __repr__(self) -> str:
        return (
            f"<LPBank levels {self.levels.start}..{self.ktop} "
            f"profile '{self.profile_name}' on {self.grid!r}>"
        )

    @property
    def k0(self) -> int:
        return self.grid.k0

    @property
    def kmax(self) -> int:
        return self.grid.kmax

    @property
    def ktop(self) -> int:
        """Highest cached level (``kmax + 2``)."""
        return self.levels.stop - 1

    @property
    def guard_level(self) -> int:
        """Level whose shell leaves the dealiased band."""
        return self.ktop

    def _radial(self, grid: TorusGrid, k: int) -> np.ndarray:
        # every level below the bank is the mean projection
        k = max(k, self.levels.start)
        mult = self.psi(grid.k_norm / 2.0**k)
        mult.flags.writeable = False
        return mult

    def check_level(self, *ks: int) -> None:
        """Raise `LevelRangeError` unless all levels are cached."""
        for k in ks:
            if k > self.ktop:
                raise LevelRangeError(
                    f"Level {k} exceeds the highest level {self.ktop} of the bank."
                )
            if k < self.levels.start:
                raise LevelRangeError(
                    f"Level {k} is below the lowest level {self.levels.start} of the bank."
                )

    def multiplier_leq(self, k: int) -> np.ndarray:
        """``η̂_{≤k}``."""
        self.check_level(k)
        return self._leq[k]

    def multiplier_shell(self, k: int) -> np.ndarray:
        """``η̂_k = η̂_{≤k} − η̂_{≤k−1}``."""
        self.check_level(k)
        return self._leq[k] - self._leq[max(k - 1, self.levels.start)]

    def multiplier_band(self, k1: int, k2: int) -> np.ndarray:
        """``η̂_{≤k2} − η̂_{≤k1}``."""
        return self.multiplier_leq(k2) - self.multiplier_leq(k1)

    def project_leq(self, f: Field, k: int) -> Field:
        """``P_{≤k} f``."""
        return f.apply_multiplier(self.multiplier_leq(k))

    def project_shell(self, f: Field, k: int) -> Field:
        """``P_k f``."""
        return f.apply_multiplier(self.multiplier_shell(k))

    def project_band(self, f: Field, k1: int, k2: int) -> Field:
        """``P_{[k1,k2]} f = P_{≤k2} f − P_{≤k1} f``."""
        return f.apply_multiplier(self.multiplier_band(k1, k2))

    def project_mean(self, f: Field) -> Field:
        """``P_{−∞} f``, the constant average."""
        return Field.constant(f.grid, f.mean())

    def symbol(self, k: int, name: str, grid: TorusGrid | None = None) -> np.ndarray:
        """
        Multiplier of a kernel symbol at level ``k``.

        Derivative indices come first, so ``hess_invlap_leq`` has shape
        ``(2, 2, n, n)``.
        """
        if name not in SYMBOLS:
            raise UnsupportedSymbolError(f"Unsupported kernel symbol '{name}'.")
        self.check_level(k)
        grid = grid or self.grid
        if name.endswith("_shell"):
            radial = self._radial(grid, k) - self._radial(grid, k - 1)
        else:
            radial = self._radial(grid, k)
        if "invlap" in name:
            radial = -radial / grid.k_squared_safe
            radial[0, 0] = 0.0
        mult = radial.astype(complex)
        for _ in range(SYMBOLS[name][1]):
            mult = np.stack([ik * mult for ik in grid.ik])
        return mult

    def kernel_op(
        self,
        f: Field,
        k: int,
        name: str,
        index: Sequence[int] | None = None,
    ) -> Field:
        """
        Apply a kernel symbol to ``f``.

        Parameters
        ----------
        f : Field
            Field to convolve.
        k : int
            Level of the symbol.
        name : str
            One of `SYMBOLS`.
        index : sequence of int, optional
            Derivative component to apply. By default all components are
            applied and prepended to the component shape of ``f``.
        """
        mult = self.symbol(k, name)
        if index is not None:
            return f.apply_multiplier(mult[tuple(index)])
        rank = SYMBOLS[name][1]
        mult = mult.reshape(mult.shape[:rank] + (1,) * f.rank + mult.shape[-2:])
        return Field.from_spectral(f.grid, mult * f.spectral)

    @memoize
    def kernel(self, k: int, name: str, derivatives: int = 0) -> Field:
        """
        Physical kernel ``∇^D K`` on the oversampled grid.

        The kernel is periodic, so ``K ∗ f = Σ m(ξ) f̂(ξ) e^{iξx}`` with
        ``K(h) = L^{−2} Σ m(ξ) e^{iξh}``.
        """
        fine = self.grid.oversampled()
        mult = self.symbol(k, name, grid=fine) / fine.area
        for _ in range(derivatives):
            mult = np.stack([ik * mult for ik in fine.ik])
        return Field.from_spectral(fine, mult)

    def kernel_l1_norm(self, k: int, name: str, derivatives: int = 0) -> float:
        """``‖∇^D K‖_{L¹}``, the operator-norm surrogate of the symbol."""
        kern = self.kernel(k, name, derivatives)
        return float(np.sqrt(kern.magnitude_squared().values).mean() * kern.grid.area)

    def l1_table(
        self,
        names: Iterable[str],
        ks: Iterable[int],
        derivatives: Iterable[int] = (0,),
    ) -> pd.DataFrame:
        """
        Kernel L¹ norms with their dyadic rescaling.

        Returns
        -------
        `pandas.DataFrame`
            Columns ``k, symbol, D, l1_norm, scaled`` where ``scaled`` divides
            by ``2^{(h + D)k}`` for a symbol of homogeneity ``h``.
        """
        rows = []
        for name, k, d in product(list(names), list(ks), list(derivatives)):
            norm = self.kernel_l1_norm(k, name, d)
            hom = SYMBOLS[name][0] + d
            rows.append(
                dict(k=k, symbol=name, D=d, l1_norm=norm, scaled=norm / 2.0 ** (hom * k))
            )
        return pd.DataFrame(rows, columns=["k", "symbol", "D", "l1_norm", "scaled"])


@memoize
def _cached_bank(grid: TorusGrid, profile: Profile) -> LPBank:
    return LPBank(grid, profile)


def build_bank(grid: TorusGrid, profile: Profile | None = None) -> LPBank:
    """
    Build (or fetch) the bank of a grid.

    Parameters
    ----------
    grid : TorusGrid
        Grid to build multipliers for.
    profile : str or callable, optional
        Radial cut (default: ``params["profile"]``).

    Returns
    -------
    LPBank
    """
    return _cached_bank(grid, profile or lpt.params["profile"])


def reconstruct(bank: LPBank, f: Field, k_hi: int | None = None) -> Field:
    """Sum ``P_{−∞} f + Σ_{k=k0}^{k_hi} P_k f``."""
    k_hi = bank.ktop if k_hi is None else k_hi
    out = bank.project_mean(f)
    for k in range(bank.k0, k_hi + 1):
        out = out + bank.project_shell(f, k)
    return out

