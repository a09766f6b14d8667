"""Array validation helpers for the estimator wrappers."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import InputError, InsufficientDataError
from .ingest import BarSeries


def as_open_close(X) -> np.ndarray:
    """Coerce bars to a float array of shape ``(n_bars, 2)``: open, close.

    Accepts a :class:`BarSeries` or anything array-like. Prices must be
    finite and positive and there must be at least two bars.
    """
    if isinstance(X, BarSeries):
        X = np.column_stack([X.opens, X.closes])
    try:
        X = check_array(X, dtype=np.float64, ensure_min_samples=1)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if X.shape[1] != 2:
        raise InputError(f"expected 2 columns (open, close), got {X.shape[1]}")
    if X.shape[0] < 2:
        raise InsufficientDataError("insufficient data: need at least 2 bars")
    if not np.all(X > 0):
        raise InputError("open and close prices must be positive")
    return X


def as_return_table(X, n_columns: int) -> np.ndarray:
    """Float array of simple returns, every value above -1."""
    try:
        X = check_array(X, dtype=np.float64, ensure_min_samples=0)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if X.shape[1] != n_columns:
        raise InputError(f"expected {n_columns} columns, got {X.shape[1]}")
    return X
