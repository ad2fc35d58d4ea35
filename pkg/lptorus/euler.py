"""Pressure, Reynolds stresses and other Euler diagnostics."""

from __future__ import annotations

import json
import os
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np
import pandas as pd
from toolz import memoize

from ._util import LPTorusError, ordered_map
from .bank import LevelRangeError, LPBank, build_bank
from .field import (
    Field,
    JetOrderError,
    TimeJet,
    check_divergence,
    derivative_tensor,
    sup_norm,
    velocity_time_jet,
)


class UnsupportedTargetError(LPTorusError, ValueError):
    """Raised if an advective derivative is requested for an unknown target."""


#: Targets accepted by `advective_derivative`.
TARGETS = ("Pk1_v", "Pleqk_v", "grad_Pleqk_v", "Pk_p", "dp_k", "grad_p_k")


def solve_pressure(flux: Field, mask: np.ndarray | None = None) -> Field:
    """
    Mean-zero solution of ``Δp = −∂_j∂_l T^{jl}``.

    Parameters
    ----------
    flux : Field
        Symmetric 2-tensor ``T``.
    mask : ndarray, optional
        Spectral mask applied to ``T`` first (the two-thirds rule for the full
        pressure).
    """
    grid = flux.grid
    k1, k2 = grid.wavevector
    t = flux.spectral
    contraction = k1 * k1 * t[0, 0] + k1 * k2 * (t[0, 1] + t[1, 0]) + k2 * k2 * t[1, 1]
    coeffs = -contraction / grid.k_squared_safe
    coeffs[..., 0, 0] = 0.0
    if mask is not None:
        coeffs = coeffs * mask
    return Field.from_spectral(grid, coeffs)


def pressure(v: Field) -> Field:
    """
    Pressure of a divergence-free velocity.

    Returns the mean-zero ``p`` with ``Δp = −∂_j∂_l(v^j v^l)``, the quadratic
    term being restricted to the two-thirds band like the dynamics.

    Raises
    ------
    DivergenceError
        If ``v`` is not divergence-free.
    """
    check_divergence(v)
    return solve_pressure(v.outer(v), v.grid.dealias_mask)


def _bank(v: Field, bank: LPBank | None) -> LPBank:
    return bank or build_bank(v.grid)


def reynolds_stress(v: Field, k: int, bank: LPBank | None = None) -> Field:
    """
    ``R^{jl}_{≤k} = P_{≤k}v^j P_{≤k}v^l − P_{≤k}(v^j v^l)``.

    Returns
    -------
    Field
        Symmetric 2-tensor field.
    """
    bank = _bank(v, bank)
    u = bank.project_leq(v, k)
    return u.outer(u) - bank.project_leq(v.outer(v), k)


class StressTriple(NamedTuple):
    """Reynolds stress split by the frequency classes of its factors."""

    hh: Field
    hl: Field
    ll: Field

    def total(self) -> Field:
        return self.hh + self.hl + self.ll


def reynolds_trichotomy(v: Field, k: int, bank: LPBank | None = None) -> StressTriple:
    """
    Split ``R_{≤k}`` into high-high, high-low and low-low parts.

    With ``u = P_{≤k}v`` and ``w = v − u``::

        R_HH = −P_{≤k}(w⊗w)
        R_HL = −[P_{≤k}(w⊗u) − P_{≤k}w⊗u + P_{≤k}(u⊗w) − u⊗P_{≤k}w]
        R_LL = −[P_{≤k}(u⊗u) − u⊗P_{≤k}u − P_{≤k}u⊗u + u⊗u]

    The high-low part only sees ``w`` through ``P_{[k,k+2]}v``, which is used
    in its place. The minus signs come from writing ``R_{≤k}`` as minus the
    local variance of ``v`` around ``u``.
    """
    bank = _bank(v, bank)

    def leq(f: Field) -> Field:
        return bank.project_leq(f, k)

    u = leq(v)
    w = v - u
    band = bank.project_band(v, k, k + 2)
    hh = -leq(w.outer(w))
    hl = -(
        leq(band.outer(u)) - leq(band).outer(u) + leq(u.outer(band)) - u.outer(leq(band))
    )
    lu = leq(u)
    ll = -(leq(u.outer(u)) - u.outer(lu) - lu.outer(u) + u.outer(u))
    return StressTriple(hh, hl, ll)


def pressure_leq(v: Field, k: int, bank: LPBank | None = None) -> Field:
    """``p_(k) = −Δ^{−1}∂_j∂_l P_{≤k}(P_{≤k}v^j P_{≤k}v^l)``."""
    bank = _bank(v, bank)
    u = bank.project_leq(v, k)
    return solve_pressure(bank.project_leq(u.outer(u), k))


def pressure_increment(v: Field, k: int, bank: LPBank | None = None) -> Field:
    """``δp_(k) = p_(k+1) − p_(k)``."""
    bank = _bank(v, bank)
    return pressure_leq(v, k + 1, bank) - pressure_leq(v, k, bank)


class PressureParts(NamedTuple):
    """Low-low, high-low and high-high parts of a pressure quantity."""

    ll: Field
    hl: Field
    hh: Field

    def total(self) -> Field:
        return self.ll + self.hl + self.hh


def pressure_increment_parts(
    v: Field, k: int, bank: LPBank | None = None
) -> PressureParts:
    """
    Split ``δp_(k)`` by interacting frequencies.

    With ``w = P_{k+1}v``, ``a = P_{≤k−4}v`` and ``b = P_{[k−4,k]}v``::

        LL = −Δ^{−1}∂∂ P_{k+1}(P_{≤k+1}v ⊗ P_{≤k+1}v)
        HL = −Δ^{−1}∂∂ P_{[k−3,k]}(a⊗w + w⊗a)
        HH = −Δ^{−1}∂∂ P_{≤k}(w⊗w + b⊗w + w⊗b)

    ``P_{[k−3,k]}`` agrees with ``P_{≤k}`` on ``a⊗w`` by frequency support.
    """
    bank = _bank(v, bank)
    # P_{≤j} is the mean projection for every j below the bank
    low, mid = (max(j, bank.levels.start) for j in (k - 4, k - 3))
    up = bank.project_leq(v, k + 1)
    w = bank.project_shell(v, k + 1)
    a = bank.project_leq(v, low)
    b = bank.project_band(v, low, k)
    ll = solve_pressure(bank.project_shell(up.outer(up), k + 1))
    hl = solve_pressure(bank.project_band(a.outer(w) + w.outer(a), mid, k))
    hh = solve_pressure(bank.project_leq(w.outer(w) + b.outer(w) + w.outer(b), k))
    return PressureParts(ll, hl, hh)


def pressure_increment_telescope(
    v: Field, k_lo: int, k_hi: int, bank: LPBank | None = None
) -> tuple[Field, Field]:
    """
    Return ``(Σ_{k=k_lo}^{k_hi−1} δp_(k) + p_(k_lo), p_(k_hi))``.

    The two fields agree up to rounding.
    """
    bank = _bank(v, bank)
    acc = pressure_leq(v, k_lo, bank)
    for k in range(k_lo, k_hi):
        acc = acc + pressure_increment(v, k, bank)
    return acc, pressure_leq(v, k_hi, bank)


def lp_pressure_parts(v: Field, k: int, bank: LPBank | None = None) -> PressureParts:
    """
    Split ``P_k p`` by the frequencies of the velocity factors.

    With ``u = P_{≤k}v`` and ``w = v − u``::

        HH = −Δ^{−1}∂_j∂_l P_k(w^j w^l)
        HL = −2Δ^{−1}∂_l P_k(w^j ∂_j u^l)
        LL = −Δ^{−1}P_k(∂_l u^j ∂_j u^l)

    Raises
    ------
    LevelRangeError
        If ``k > kmax + 1``, where products would alias into the shell.
    """
    bank = _bank(v, bank)
    if k > bank.kmax + 1:
        raise LevelRangeError(f"Pressure pieces are resolved up to level {bank.kmax + 1}.")
    grid = v.grid
    shell = bank.multiplier_shell(k)
    inv_lap = -1.0 / grid.k_squared_safe
    inv_lap[0, 0] = 0.0
    u = bank.project_leq(v, k)
    w = v - u
    hh = solve_pressure(bank.project_shell(w.outer(w), k))
    hl = -2.0 * u.advect(w).div().apply_multiplier(inv_lap * shell)
    grad_u = u.grad()
    quad = sum(grad_u[l, j] * grad_u[j, l] for j in range(2) for l in range(2))
    ll = -quad.apply_multiplier(inv_lap * shell)
    return PressureParts(ll, hl, hh)


def lp_pressure_piece(
    v: Field, k: int, derivatives: int = 0, bank: LPBank | None = None
) -> Field:
    """
    ``∇^D P_k p`` assembled from its high-high, high-low and low-low parts.

    Parameters
    ----------
    v : Field
        Divergence-free velocity.
    k : int
        Level of the shell.
    derivatives : int, optional
        Number ``D ≤ 2`` of spatial derivatives.
    """
    if not 0 <= derivatives <= 2:
        raise ValueError(f"Derivative order must lie in [0, 2], got {derivatives}.")
    return derivative_tensor(lp_pressure_parts(v, k, bank).total(), derivatives)


def truncated_energy(v: Field, k: int, bank: LPBank | None = None) -> float:
    """``e_{≤k} = ½∫|P_{≤k}v|²``."""
    u = _bank(v, bank).project_leq(v, k)
    return 0.5 * float(u.magnitude_squared().integrate())


def energy_increment(v: Field, k: int, bank: LPBank | None = None) -> float:
    """``δe_(k) = e_{≤k+1} − e_{≤k}``."""
    bank = _bank(v, bank)
    return truncated_energy(v, k + 1, bank) - truncated_energy(v, k, bank)


def energy_flux(v: Field, k: int, bank: LPBank | None = None) -> float:
    """
    ``−∫∂_j(P_{≤k}v)_l R^{jl}_{≤k} dx``.

    For Euler flows this equals the time derivative of ``e_{≤k}``.
    """
    bank = _bank(v, bank)
    grad_u = bank.project_leq(v, k).grad()
    stress = reynolds_stress(v, k, bank)
    return -float((grad_u * stress).values.sum(axis=(0, 1)).mean() * v.grid.area)


def energy_flux_increment(v: Field, k: int, bank: LPBank | None = None) -> float:
    """Time derivative of ``δe_(k)``, as ``flux(k+1) − flux(k)``."""
    bank = _bank(v, bank)
    return energy_flux(v, k + 1, bank) - energy_flux(v, k, bank)


class EulerSnapshot:
    """
    Velocity of an Euler flow at one time, with derived quantities.

    Parameters
    ----------
    velocity : Field
        Divergence-free velocity inside the two-thirds band.
    time : float, optional
        Time of the snapshot.
    jet_order : int, optional
        Order of the time jet computed on demand (default: 2).
    jet : TimeJet, optional
        Explicit jet, for instance of a frozen (transport-only) field.

    Raises
    ------
    DivergenceError
        If the velocity is not divergence-free.
    """

    def __init__(
        self,
        velocity: Field,
        time: float = 0.0,
        jet_order: int = 2,
        jet: TimeJet | None = None,
    ) -> None:
        check_divergence(velocity)
        self.velocity = velocity
        self.time = float(time)
        self.jet_order = jet.order if jet is not None else int(jet_order)
        if jet is not None:
            self.__dict__["jet"] = jet

    @classmethod
    def frozen(cls, velocity: Field, time: float = 0.0, order: int = 2) -> EulerSnapshot:
        """Snapshot of a velocity that does not change in time."""
        zero = Field.zeros(velocity.grid, velocity.shape)
        return cls(velocity, time, jet=TimeJet([velocity] + [zero] * order))

    def __repr__(self) -> str:
        return f"<EulerSnapshot t={self.time:g} on {self.grid!r}>"

    @property
    def grid(self):
        return self.velocity.grid

    @cached_property
    def bank(self) -> LPBank:
        return build_bank(self.grid)

    @cached_property
    def jet(self) -> TimeJet:
        """Time jet of the velocity, supplied by the equation."""
        return velocity_time_jet(self.velocity, self.jet_order)

    @cached_property
    def pressure(self) -> Field:
        return pressure(self.velocity)

    @cached_property
    def pressure_jet(self) -> TimeJet:
        mask = self.grid.dealias_mask
        return self.jet.outer(self.jet).map(lambda t: solve_pressure(t, mask))

    @memoize
    def stress(self, k: int) -> Field:
        """Cached ``R_{≤k}``."""
        return reynolds_stress(self.velocity, k, self.bank)

    def velocity_jet_leq(self, k: int) -> TimeJet:
        """Jet of ``P_{≤k}v``."""
        return self.jet.map(lambda f: self.bank.project_leq(f, k))

    def pressure_leq_jet(self, k: int) -> TimeJet:
        """Jet of ``p_(k)``."""
        uj = self.velocity_jet_leq(k)
        return uj.outer(uj).map(lambda t: solve_pressure(self.bank.project_leq(t, k)))


def _target_jet(snapshot: EulerSnapshot, k: int, target: str) -> TimeJet:
    bank = snapshot.bank
    if target == "Pk1_v":
        return snapshot.jet.map(lambda f: bank.project_shell(f, k + 1))
    if target == "Pleqk_v":
        return snapshot.velocity_jet_leq(k)
    if target == "grad_Pleqk_v":
        return snapshot.velocity_jet_leq(k).map(Field.grad)
    if target == "Pk_p":
        return snapshot.pressure_jet.map(lambda f: bank.project_shell(f, k))
    if target == "dp_k":
        return snapshot.pressure_leq_jet(k + 1) - snapshot.pressure_leq_jet(k)
    if target == "grad_p_k":
        return snapshot.pressure_leq_jet(k).map(Field.grad)
    raise UnsupportedTargetError(f"Unsupported advective-derivative target '{target}'.")


def shell_velocity_rate(snapshot: EulerSnapshot, k: int) -> Field:
    """
    ``D_{≤k}P_{k+1}v`` from the equation for the shell velocity.

    ``−P_{k+1}v·∇P_{≤k+1}v − ∇P_{k+1}p + ∂_j(R_{≤k+1} − R_{≤k})``.
    """
    bank = snapshot.bank
    v = snapshot.velocity
    w = bank.project_shell(v, k + 1)
    up = bank.project_leq(v, k + 1)
    grad_p = bank.project_shell(snapshot.pressure, k + 1).grad()
    stress = snapshot.stress(k + 1) - snapshot.stress(k)
    return -up.advect(w) - grad_p + stress.div()


def advective_derivative(
    snapshot: EulerSnapshot,
    k: int,
    target: str = "Pk1_v",
    r: int = 1,
    method: str = "auto",
) -> Field:
    """
    ``D^r_{≤k}/∂t^r`` of a Littlewood-Paley quantity.

    Parameters
    ----------
    snapshot : EulerSnapshot
        Snapshot whose jet supplies the time derivatives.
    k : int
        Level of the coarse advecting field ``P_{≤k}v``; at most ``kmax``.
    target : str, optional
        One of `TARGETS`.
    r : int, optional
        Order 1 or 2.
    method : {"auto", "identity", "jet"}, optional
        ``"identity"`` evaluates the shell-velocity equation (only for
        ``Pk1_v`` with ``r = 1``); ``"jet"`` advects the target jet ``r``
        times. ``"auto"`` picks the identity where it applies.

    Raises
    ------
    JetOrderError
        If the snapshot jet is shorter than ``r``.
    UnsupportedTargetError
        For unknown targets, orders or methods.
    """
    if r not in (1, 2):
        raise UnsupportedTargetError(f"Advective derivatives of order {r} not supported.")
    if target not in TARGETS:
        raise UnsupportedTargetError(f"Unsupported advective-derivative target '{target}'.")
    if method not in ("auto", "identity", "jet"):
        raise UnsupportedTargetError(f"Unknown method '{method}'.")
    bank = snapshot.bank
    if k > bank.kmax:
        raise LevelRangeError(f"Advecting level {k} exceeds kmax = {bank.kmax}.")
    use_identity = target == "Pk1_v" and r == 1 and method != "jet"
    if method == "identity" and not use_identity:
        raise UnsupportedTargetError("The identity route covers D P_{k+1}v only.")
    if snapshot.jet_order < r:
        raise JetOrderError(
            f"Snapshot jet of order {snapshot.jet_order} cannot supply order {r}."
        )
    if use_identity:
        return shell_velocity_rate(snapshot, k)
    u_jet = snapshot.velocity_jet_leq(k)
    jet = _target_jet(snapshot, k, target)
    for _ in range(r):
        jet = jet.advect(u_jet)
    return jet.value


def euler_identity_residual(snapshot: EulerSnapshot) -> float:
    """
    ``‖∂_t v + v·∇v + ∇p‖_{C⁰}`` on the two-thirds band.

    Raises
    ------
    JetOrderError
        If the snapshot carries no time derivative.
    """
    if snapshot.jet_order < 1:
        raise JetOrderError("The Euler residual needs a jet of order >= 1.")
    v = snapshot.velocity
    residual = snapshot.jet[1] + v.advect(v).dealias() + snapshot.pressure.grad()
    return sup_norm(residual)


def energy_flux_from_jet(snapshot: EulerSnapshot, k: int) -> float:
    """``d/dt e_{≤k} = ∫P_{≤k}v·P_{≤k}∂_t v``, from the time jet."""
    uj = snapshot.velocity_jet_leq(k)
    uj.require(1)
    return float((uj[0] * uj[1]).values.sum(axis=0).mean() * snapshot.grid.area)


def _level_rows(snapshot: EulerSnapshot, k: int) -> list[dict]:
    bank = snapshot.bank
    v = snapshot.velocity
    rows = [
        dict(k=k, quantity="Pk_v", D=0, r=0, value=sup_norm(bank.project_shell(v, k))),
        dict(k=k, quantity="de_k", D=0, r=0, value=energy_increment(v, k, bank)),
        dict(k=k, quantity="flux", D=0, r=0, value=energy_flux(v, k, bank)),
        dict(k=k, quantity="dp_k", D=0, r=0, value=sup_norm(pressure_increment(v, k, bank))),
    ]
    stress = snapshot.stress(k)
    piece = lp_pressure_parts(v, k, bank).total()
    for d in range(3):
        rows.append(
            dict(k=k, quantity="R_leqk", D=d, r=0, value=sup_norm(derivative_tensor(stress, d)))
        )
        rows.append(
            dict(k=k, quantity="Pk_p", D=d, r=0, value=sup_norm(derivative_tensor(piece, d)))
        )
    for r in range(1, min(snapshot.jet_order, 2) + 1):
        value = sup_norm(advective_derivative(snapshot, k, "Pk1_v", r))
        rows.append(dict(k=k, quantity="Dk_Pk1_v", D=0, r=r, value=value))
    return rows


def analysis_table(snapshot: EulerSnapshot, ks: Iterable[int] | None = None) -> pd.DataFrame:
    """
    Per-level diagnostics of a snapshot.

    Returns
    -------
    `pandas.DataFrame`
        Columns ``k, quantity, D, r, value``.
    """
    bank = snapshot.bank
    ks = range(bank.k0, bank.kmax + 1) if ks is None else ks
    rows = [row for chunk in ordered_map(lambda k: _level_rows(snapshot, k), ks) for row in chunk]
    return pd.DataFrame(rows, columns=["k", "quantity", "D", "r", "value"])


def save_analysis(
    table: pd.DataFrame, target: os.PathLike[str] | str, meta: dict | None = None
) -> None:
    """
    Write an analysis table as CSV plus a JSON summary.

    The summary records, per quantity, the largest value over levels.
    """
    target = Path(target)
    table.to_csv(target.with_suffix(".csv"), index=False)
    summary = {
        f"{q}:D{d}:r{r}": float(group["value"].abs().max())
        for (q, d, r), group in table.groupby(["quantity", "D", "r"])
    }
    payload = dict(meta or {}, maxima=summary)
    target.with_suffix(".json").write_text(json.dumps(payload, indent=2, sort_keys=True))

