"""Synthetic divergence-free fields of prescribed Hölder regularity."""

from __future__ import annotations

import numpy as np

from ._util import LPTorusError, ordered_map
from .config import make_rng
from .examples import named_flow
from .field import Field, TorusGrid, leray_project, sup_norm


class ShellRangeError(LPTorusError, ValueError):
    """Raised if synthetic shells fall outside the resolvable band."""


#: Half-width, in octaves, of the annulus a shell field occupies.
SHELL_HALF_WIDTH = 1 / 8


def shell_annulus(grid: TorusGrid, j: int) -> np.ndarray:
    """
    Modes of the shell-``j`` annulus.

    The annulus is centred on ``|ξ| = 2^{j−1}``, where ``P_j`` has multiplier
    one, and is narrow enough that neighbouring shells barely see it.
    """
    centre = 2.0 ** (j - 1)
    lo, hi = centre * 2**-SHELL_HALF_WIDTH, centre * 2**SHELL_HALF_WIDTH
    return (grid.k_norm >= lo) & (grid.k_norm <= hi) & grid.dealias_mask


def shell_field(grid: TorusGrid, j: int, rng: np.random.Generator) -> Field:
    """
    Random divergence-free field on shell ``j`` with unit C⁰ norm.

    White noise is projected on divergence-free vectors, restricted to the
    shell annulus and normalized on the oversampled grid.
    """
    mask = shell_annulus(grid, j)
    if not mask.any():
        raise ShellRangeError(f"Shell {j} contains no lattice modes.")
    noise = Field(grid, rng.standard_normal((2, grid.n, grid.n)))
    field = leray_project(noise.apply_multiplier(mask))
    return field / sup_norm(field)


def synth_lacunary(
    grid: TorusGrid,
    alpha: float,
    shells: tuple[int, int],
    seed: int | None = None,
) -> Field:
    """
    Lacunary field ``Σ_j 2^{−αj} W_j`` saturating ``Ċ^α`` regularity.

    Parameters
    ----------
    grid : TorusGrid
        Grid to synthesize on.
    alpha : float
        Hölder exponent in ``(0, 1]``.
    shells : tuple of int
        Inclusive shell range ``(j0, j1)`` with ``k0 < j0 ≤ j1 ≤ kmax + 1``.
    seed : int, optional
        Seed; defaults to ``params["seed"]``. Each shell draws from its own
        derived stream, so the result does not depend on the worker count.

    Raises
    ------
    ShellRangeError
        If the shells leave the resolvable band.
    ValueError
        If ``alpha`` lies outside ``(0, 1]``.
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"Hölder exponent must lie in (0, 1], got {alpha}.")
    j0, j1 = map(int, shells)
    if j0 > j1 or j0 <= grid.k0 or j1 > grid.kmax + 1:
        raise ShellRangeError(
            f"Shells {j0}..{j1} outside {grid.k0 + 1}..{grid.kmax + 1} on {grid!r}."
        )

    def one_shell(j: int) -> Field:
        return shell_field(grid, j, make_rng(j, seed=seed))

    fields = ordered_map(one_shell, range(j0, j1 + 1), unit="shells")
    out = Field.zeros(grid, (2,))
    for j, w in zip(range(j0, j1 + 1), fields):
        out = out + 2.0 ** (-alpha * j) * w
    return out


def synth_named(grid: TorusGrid, name: str) -> Field:
    """Closed-form field by name (see `lptorus.examples`)."""
    return named_flow(grid, name)
