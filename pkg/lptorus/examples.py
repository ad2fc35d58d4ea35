"""Closed-form flows used as oracles throughout the package."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ._util import LPTorusError
from .field import Field, TorusGrid


class UnknownFlowError(LPTorusError, ValueError):
    """Raised if a named flow does not exist."""


def taylor_green(grid: TorusGrid) -> Field:
    """Steady cellular flow with stream function ``ψ = sin x₁ sin x₂``."""
    c = grid.unit
    return Field.from_function(
        grid,
        lambda x1, x2: (
            -np.sin(c * x1) * np.cos(c * x2),
            np.cos(c * x1) * np.sin(c * x2),
        ),
    )


def shear(grid: TorusGrid) -> Field:
    """Steady shear ``(cos x₂, 0)``."""
    c = grid.unit
    return Field.from_function(
        grid, lambda x1, x2: (np.cos(c * x2), np.zeros_like(x1))
    )


def two_shell(grid: TorusGrid) -> Field:
    """
    Crossed shears with modes at ``|ξ| = 2`` and ``|ξ| = 16``.

    A low and a high shell, for high-low interaction tests. Modes outside the
    two-thirds band are dropped.
    """
    c = grid.unit
    v = Field.from_function(
        grid,
        lambda x1, x2: (
            np.cos(2 * c * x2) + 0.25 * np.sin(16 * c * x2),
            0.5 * np.sin(2 * c * x1) + 0.125 * np.cos(16 * c * x1),
        ),
    )
    return v.dealias()


def cellular(grid: TorusGrid) -> Field:
    """Steady flow with stream function ``ψ = cos x₁ + cos x₂``."""
    c = grid.unit
    return Field.from_function(
        grid, lambda x1, x2: (np.sin(c * x2), -np.sin(c * x1))
    )


def cellular_stream(x: np.ndarray, period: float = 2 * np.pi) -> np.ndarray:
    """Stream function of `cellular` at points ``x`` of shape ``(..., 2)``."""
    c = 2 * np.pi / period
    return np.cos(c * x[..., 0]) + np.cos(c * x[..., 1])


#: Named flows, by name.
NAMED_FLOWS: dict[str, Callable[[TorusGrid], Field]] = {
    "taylor_green": taylor_green,
    "shear": shear,
    "two_shell": two_shell,
    "cellular": cellular,
}


def named_flow(grid: TorusGrid, name: str) -> Field:
    """
    Closed-form velocity field by name.

    Parameters
    ----------
    grid : TorusGrid
        Grid to sample on.
    name : str
        One of `NAMED_FLOWS`.

    Raises
    ------
    UnknownFlowError
        If the name is not known.
    """
    try:
        return NAMED_FLOWS[name](grid)
    except KeyError:
        raise UnknownFlowError(f"Unknown flow '{name}'.") from None
