"""Commutators of coarse advective derivatives with convolution operators."""

from __future__ import annotations

from functools import cached_property
from typing import NamedTuple, Sequence, Union

import numpy as np
import pandas as pd
from toolz import memoize

import lptorus as lpt

from ._util import LPTorusError, ordered_map
from .bank import SYMBOLS, LPBank, UnsupportedSymbolError
from .config import make_rng
from .euler import EulerSnapshot
from .field import (
    Field,
    TimeJet,
    check_divergence,
    derivative,
    seminorm_holder,
    sup_norm,
)
from .scan import MIN_SCAN_LEVELS, EmptyRangeError, ScanReport, default_fit_range

#: Stream key of probe fields, keeping them apart from synthetic shells.
PROBE_STREAM = 7919

#: Largest total order ``m + A`` of the kernel moment table.
MAX_MOMENT_ORDER = 5

JetLike = Union[Field, TimeJet]


class ConvOp:
    """
    Convolution ``T f = K ∗ f`` with a Littlewood-Paley kernel.

    ``T`` multiplies by the symbol of ``name`` at level ``k``. For a symbol
    with derivative indices, ``index`` picks one component; without it the
    whole tensor is applied and prepended to the components of ``f``.

    Parameters
    ----------
    bank : LPBank
        Bank providing the symbol.
    k : int
        Level.
    name : str
        One of `lptorus.bank.SYMBOLS`.
    index : sequence of int, optional
        Derivative component.
    """

    def __init__(
        self,
        bank: LPBank,
        k: int,
        name: str,
        index: Sequence[int] | None = None,
    ) -> None:
        if name not in SYMBOLS:
            raise UnsupportedSymbolError(f"Unsupported kernel symbol '{name}'.")
        rank = SYMBOLS[name][1]
        if index is not None and len(index) != rank:
            raise UnsupportedSymbolError(
                f"Symbol '{name}' takes {rank} indices, got {len(index)}."
            )
        bank.check_level(k)
        self.bank = bank
        self.k = k
        self.name = name
        self.index = None if index is None else tuple(index)

    def __repr__(self) -> str:
        idx = "" if self.index is None else f"{list(self.index)}"
        return f"<ConvOp {self.name}{idx} at level {self.k}>"

    @property
    def homogeneity(self) -> int:
        return SYMBOLS[self.name][0]

    @property
    def rank(self) -> int:
        """Number of tensor indices added to the operand."""
        return 0 if self.index is not None else SYMBOLS[self.name][1]

    @cached_property
    def multiplier(self) -> np.ndarray:
        mult = self.bank.symbol(self.k, self.name)
        return mult if self.index is None else mult[self.index]

    def __call__(self, f: Field) -> Field:
        return self.bank.kernel_op(f, self.k, self.name, self.index)

    apply = __call__

    def shifted(self, g: Field, alpha: Sequence[int]) -> Field:
        """
        ``∫ g(x + h) ∂^α K(h) dh``, that is ``(−1)^{|α|} ∂^α T g``.

        Parameters
        ----------
        g : Field
            Field evaluated at ``x + h``.
        alpha : sequence of two int
            Multi-index of the kernel derivative.
        """
        sign = (-1) ** (alpha[0] + alpha[1])
        return sign * derivative(self(g), alpha)

    @cached_property
    def kernel(self) -> Field:
        """Physical kernel on the oversampled grid."""
        fine = self.bank.grid.oversampled()
        mult = self.bank.symbol(self.k, self.name, grid=fine)
        if self.index is not None:
            mult = mult[self.index]
        return Field.from_spectral(fine, mult / fine.area)

    @memoize
    def moment(self, m: int, derivatives: int) -> float:
        """``‖|h|^m ∇^D K‖_{L¹}`` with ``|h|`` the periodic distance to 0."""
        kern = self.kernel
        for _ in range(derivatives):
            kern = kern.grad()
        grid = kern.grid
        half = grid.period / 2
        h1, h2 = ((x + half) % grid.period - half for x in grid.coordinates)
        weight = np.hypot(h1, h2) ** m
        magnitude = np.sqrt(kern.magnitude_squared().values)
        return float(np.mean(weight * magnitude) * grid.area)

    def moment_table(self, max_order: int = MAX_MOMENT_ORDER) -> pd.DataFrame:
        """
        Kernel moments ``‖|h|^m ∇^{m+A} K‖_{L¹}`` for ``m + A ≤ max_order``.

        Returns
        -------
        `pandas.DataFrame`
            Columns ``m, A, value, scaled``; ``scaled`` divides by
            ``2^{(h + A)k}`` for a symbol of homogeneity ``h``, so it stays
            bounded in ``k``.
        """
        rows = []
        for m in range(max_order + 1):
            for a in range(max_order + 1 - m):
                value = self.moment(m, m + a)
                scaled = value / 2.0 ** ((self.homogeneity + a) * self.k)
                rows.append(dict(m=m, A=a, value=value, scaled=scaled))
        return pd.DataFrame(rows, columns=["m", "A", "value", "scaled"])


def _as_jet(f: JetLike, order: int) -> TimeJet:
    if isinstance(f, TimeJet):
        return f
    zero = Field.zeros(f.grid, f.shape)
    return TimeJet([f] + [zero] * order)


def commutator_direct(u: JetLike, op: ConvOp, f: JetLike) -> Field:
    """
    ``[D/∂t, T] f = D(T f) − T(D f)`` with ``D = ∂_t + u·∇``.

    Time derivatives come from the jets; a bare field counts as constant in
    time.

    Parameters
    ----------
    u : Field or TimeJet
        Advecting field ``P_{≤k}v`` (or its jet).
    op : ConvOp
        Time-independent convolution.
    f : Field or TimeJet
        Operand; a jet needs order at least 1.

    Raises
    ------
    JetOrderError
        If the jet of ``f`` carries no time derivative.
    """
    u_jet = _as_jet(u, 0)
    f_jet = _as_jet(f, 1)
    f_jet.require(1)
    return f_jet.map(op).advect(u_jet).value - op(f_jet.advect(u_jet).value)


def commutator_kernel(u: Field, op: ConvOp, f: Field) -> Field:
    """
    ``∫ (u^i(x + h) − u^i(x)) f(x + h) ∂_i K(h) dh``.

    Evaluated spectrally as ``u^i ∂_i(T f) − ∂_i T(u^i f)``.

    Raises
    ------
    DivergenceError
        If ``u`` is not divergence-free; the kernel form then misses a term.
    """
    check_divergence(u)
    tf = op(f)
    out = tf.advect(u)
    for i in range(2):
        out = out + op.shifted(u[i] * f, (int(i == 0), int(i == 1)))
    return out


class SecondCommutator(NamedTuple):
    """Pieces of ``[D/∂t,]² T f = T_I − T_II + T_III1 + T_III2``."""

    t_i: Field
    t_ii: Field
    t_iii1: Field
    t_iii2: Field

    def total(self) -> Field:
        return self.t_i - self.t_ii + self.t_iii1 + self.t_iii2


def _difference_term(op: ConvOp, a: Field, g: Field, alpha: Sequence[int]) -> Field:
    # ∫ (a(x+h) − a(x)) g(x+h) ∂^α K(h) dh
    return op.shifted(a * g, alpha) - a * op.shifted(g, alpha)


def _double_difference(
    op: ConvOp, a: Field, b: Field, g: Field, alpha: Sequence[int]
) -> Field:
    # ∫ (a(x+h) − a(x)) (b(x+h) − b(x)) g(x+h) ∂^α K(h) dh
    return (
        op.shifted(a * b * g, alpha)
        - a * op.shifted(b * g, alpha)
        - b * op.shifted(a * g, alpha)
        + a * b * op.shifted(g, alpha)
    )


def commutator_second(
    snapshot: EulerSnapshot, level: int, op: ConvOp, f: Field
) -> SecondCommutator:
    """
    Expand the second commutator of ``D_{≤I}/∂t`` with ``T``.

    With ``u = P_{≤I}v``, ``Du = ∂_t u + u·∇u`` and difference operators in the
    kernel variable ``h``::

        T_I    = ∫ δ_h(Du)^i f(x+h) ∂_iK(h) dh
        T_II   = ∫ δ_h u^j ∂_j u^i(x+h) f(x+h) ∂_iK(h) dh
        T_III  = ∫ δ_h u^i δ_h u^j ∂_j f(x+h) ∂_iK(h) dh
        T_III2 = ∫ δ_h u^i δ_h u^j f(x+h) ∂_i∂_jK(h) dh

    and ``T_III1 = −T_III − T_III2`` by parts in ``h``. For divergence-free
    ``u``, ``T_III1`` equals ``T_II``.
    ``f`` is treated as constant in time.

    Parameters
    ----------
    snapshot : EulerSnapshot
        Snapshot providing ``v`` and ``∂_t v``.
    level : int
        Level ``I`` of the advecting field.
    op : ConvOp
        Convolution.
    f : Field
        Operand.

    Raises
    ------
    JetOrderError
        If the snapshot jet has order 0.
    """
    u_jet = snapshot.velocity_jet_leq(level)
    u_jet.require(1)
    u = u_jet.value
    du = u_jet[1] + u.advect(u)
    grad_u = u.grad()

    def axis(i: int) -> tuple[int, int]:
        return (int(i == 0), int(i == 1))

    pairs = [(i, j) for i in range(2) for j in range(2)]
    t_i = sum(_difference_term(op, du[i], f, axis(i)) for i in range(2))
    t_ii = sum(_difference_term(op, u[j], grad_u[j, i] * f, axis(i)) for i, j in pairs)
    t_iii = sum(
        _double_difference(op, u[i], u[j], derivative(f, axis(j)), axis(i))
        for i, j in pairs
    )
    t_iii2 = sum(
        _double_difference(op, u[i], u[j], f, np.add(axis(i), axis(j)))
        for i, j in pairs
    )
    return SecondCommutator(t_i, t_ii, -t_iii - t_iii2, t_iii2)


def commutator_second_oracle(
    snapshot: EulerSnapshot, level: int, op: ConvOp, f: Field
) -> Field:
    """``D(D(T f)) − 2 D(T(D f)) + T(D² f)`` from the snapshot jets."""
    u_jet = snapshot.velocity_jet_leq(level)
    u_jet.require(1)
    f_jet = _as_jet(f, 2)
    tf = f_jet.map(op)
    df = f_jet.advect(u_jet)
    first = tf.advect(u_jet).advect(u_jet).value
    middle = df.map(op).advect(u_jet).value
    last = op(df.advect(u_jet).value)
    return first - 2 * middle + last


def probe_fields(grid, k: int, count: int | None = None) -> list[Field]:
    """
    Seeded random probes concentrated near frequency ``2^k``.

    Each probe is white noise restricted to ``2^{k−2} ≤ |ξ| < 2^{k+1}`` and
    the two-thirds band, with unit C⁰ norm.
    """
    count = count or lpt.params["probe_count"]
    mask = (
        (grid.k_norm >= 2.0 ** (k - 2))
        & (grid.k_norm < 2.0 ** (k + 1))
        & grid.dealias_mask
    )
    probes = []
    for i in range(count):
        rng = make_rng(PROBE_STREAM, k - grid.k0 + 1, i)
        noise = Field(grid, rng.standard_normal((grid.n, grid.n))).apply_multiplier(mask)
        probes.append(noise / sup_norm(noise))
    return probes


def _l1_bound(snapshot: EulerSnapshot, op: ConvOp, r: int) -> float:
    u_jet = snapshot.velocity_jet_leq(op.k)
    u = u_jet.value
    grad_u = sup_norm(u.grad())
    if r == 1:
        return grad_u * op.moment(1, 1)
    du = u_jet[1] + u.advect(u)
    return sup_norm(du.grad()) * op.moment(1, 1) + grad_u**2 * op.moment(2, 2)


def commutator_norm_scan(
    snapshot: EulerSnapshot | Field,
    symbol: str,
    r: int = 1,
    k_range: tuple[int, int] | None = None,
    alpha: float = 1 / 3,
    probes: int | None = None,
) -> ScanReport:
    """
    Operator-norm surrogates of ``[D_{≤k}/∂t,]^r T_k`` over levels.

    The surrogate is the largest C⁰ norm of the commutator applied to the
    probes of `probe_fields`. The kernel-moment bound is reported beside it.
    The predicted slope is ``h + r(1 − α)`` for a symbol of homogeneity ``h``.

    Parameters
    ----------
    snapshot : EulerSnapshot or Field
        Flow; a bare field is treated as constant in time.
    symbol : str
        Kernel symbol of ``T_k``.
    r : int, optional
        Commutator order, 1 or 2.
    k_range : tuple of int, optional
        Inclusive levels (default: ``k0 + 1`` to ``kmax + 1``).
    alpha : float, optional
        Hölder exponent of the prediction.
    probes : int, optional
        Number of probes (default: ``params["probe_count"]``).

    Raises
    ------
    EmptyRangeError
        If the level range has fewer than `MIN_SCAN_LEVELS` levels.
    """
    if r not in (1, 2):
        raise ValueError(f"Commutator order must be 1 or 2, got {r}.")
    if symbol not in SYMBOLS:
        raise UnsupportedSymbolError(f"Unsupported kernel symbol '{symbol}'.")
    kind = "euler"
    if isinstance(snapshot, Field):
        snapshot, kind = EulerSnapshot.frozen(snapshot), "synthetic"
    bank = snapshot.bank
    lo, hi = k_range or (bank.k0 + 1, bank.kmax + 1)
    if hi - lo + 1 < MIN_SCAN_LEVELS:
        raise EmptyRangeError(
            f"Level range {lo}..{hi} has fewer than {MIN_SCAN_LEVELS} levels."
        )
    bank.check_level(lo, hi)
    count = probes or lpt.params["probe_count"]

    def at_level(k: int) -> dict:
        op = ConvOp(bank, k, symbol)
        u = snapshot.velocity_jet_leq(k).value
        best = 0.0
        for f in probe_fields(bank.grid, k, count):
            if r == 1:
                out = commutator_kernel(u, op, f)
            else:
                out = commutator_second(snapshot, k, op, f).total()
            best = max(best, sup_norm(out))
        return dict(
            k=k,
            r=r,
            homogeneity=SYMBOLS[symbol][0],
            value=best,
            surrogate_norm=best,
            l1_bound=_l1_bound(snapshot, op, r),
        )

    rows = pd.DataFrame(ordered_map(at_level, range(lo, hi + 1)))
    seminorm = seminorm_holder(snapshot.velocity, alpha).lp
    return ScanReport(
        f"commutator_r{r}_{symbol}",
        rows,
        SYMBOLS[symbol][0] + r * (1 - alpha),
        alpha,
        field_kind=kind,
        degree=r,
        seminorm=seminorm,
        k0=bank.k0,
        fit_range=default_fit_range(bank.grid),
        meta={"probes": count, "profile": bank.profile_name},
    )
