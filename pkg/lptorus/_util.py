"""Utilities."""

from __future__ import annotations

from typing import Any, Callable, Iterable, NamedTuple, Sequence

import numpy as np
from pandas import DataFrame, Index
from scipy import stats
from tqdm.auto import tqdm
from tqdm.contrib.concurrent import thread_map

import lptorus as lpt


class LPTorusError(Exception):
    """Base class of all errors raised by **lptorus**."""


class LiteFrame:
    """DataFrame wrapper for nicer subclassing."""

    def __init__(self, *args, **kwargs) -> None:
        self._df = DataFrame(*args, **kwargs)

    @property
    def columns(self) -> Index:
        return self._df.columns

    @property
    def empty(self) -> bool:
        return self._df.empty

    @property
    def index(self) -> Index:
        return self._df.index

    def to_frame(self) -> DataFrame:
        """Return a copy of the underlying data frame."""
        return self._df.copy()

    def to_numpy(self, *args, **kwargs) -> np.ndarray:
        return self._df.to_numpy(*args, **kwargs)

    def to_csv(self, *args, **kwargs):
        kwargs.setdefault("index", False)
        return self._df.to_csv(*args, **kwargs)

    def __getitem__(self, *args, **kwargs):
        return self._df.__getitem__(*args, **kwargs)

    def __len__(self) -> int:
        return len(self._df)

    def __array__(self, dtype=None) -> np.ndarray:
        return self._df.__array__(dtype=dtype)


class LogLogFit(NamedTuple):
    """Least-squares line through base-2 logarithms."""

    slope: float
    intercept: float
    r_squared: float
    points: int


def fit_log2(x: Sequence[float], y: Sequence[float]) -> LogLogFit:
    """
    Fit ``log2(y) = slope * x + intercept``.

    Parameters
    ----------
    x : sequence of float
        Abscissae (dyadic levels, or ``log2`` of lags).
    y : sequence of float
        Positive values.

    Returns
    -------
    LogLogFit
    """
    xs = np.asarray(x, dtype=float)
    ys = np.log2(np.asarray(y, dtype=float))
    if len(xs) < 2:
        raise ValueError("At least two points are needed for a fit.")
    res = stats.linregress(xs, ys)
    r_squared = float(res.rvalue**2) if np.isfinite(res.rvalue) else 0.0
    return LogLogFit(float(res.slope), float(res.intercept), r_squared, len(xs))


def tqdm_args(unit: str) -> dict[str, Any]:
    """Keyword arguments shared by all progress bars."""
    return dict(disable=not lpt.params["progress_bar"] or None, unit=unit)


def ordered_map(func: Callable, items: Iterable, unit: str = "levels") -> list:
    """
    Map ``func`` over ``items`` in worker threads.

    Results come back in input order, so reductions over them do not depend on
    the number of workers.
    """
    items = list(items)
    workers = max(int(lpt.params["workers"] or 1), 1)
    if workers > 1 and len(items) > 1:
        return thread_map(func, items, max_workers=workers, **tqdm_args(unit))
    return [func(item) for item in tqdm(items, **tqdm_args(unit))]
