"""scikit-learn style wrappers.

These expose the decomposition and the overnight cost deduction as
transformers so they drop into ``sklearn.pipeline.Pipeline`` and honour
``get_params``/``set_params``. They work on plain arrays; the dataclass API
in :mod:`overnight_intraday.decomposition` and
:mod:`overnight_intraday.robustness` carries dates and flags.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import InputError, ReturnDomainError
from .robustness import CostModel
from .validation import as_open_close, as_return_table


class ReturnDecomposer(TransformerMixin, BaseEstimator):
    """Turn ``(open, close)`` bars into ``(overnight, intraday)`` returns.

    Parameters
    ----------
    cumulative : bool, default=False
        Return compounded curves instead of daily returns.

    Attributes
    ----------
    n_features_in_ : int
        Always 2.
    n_bars_ : int
        Number of bars seen in :meth:`fit`.
    """

    def __init__(self, cumulative=False):
        self.cumulative = cumulative

    def fit(self, X, y=None):
        X = as_open_close(X)
        self.n_features_in_ = X.shape[1]
        self.n_bars_ = X.shape[0]
        return self

    def transform(self, X):
        """Array of shape ``(n_bars - 1, 2)``."""
        check_is_fitted(self, "n_bars_")
        X = as_open_close(X)
        opens, closes = X[:, 0], X[:, 1]
        out = np.column_stack([opens[1:] / closes[:-1] - 1.0, closes[1:] / opens[1:] - 1.0])
        if self.cumulative:
            out = np.cumprod(1.0 + out, axis=0) - 1.0
        return out

    def get_feature_names_out(self, input_features=None):
        return np.array(["overnight", "intraday"], dtype=object)


class OvernightCostAdjuster(TransformerMixin, BaseEstimator):
    """Deduct a financing charge from the overnight column.

    Input columns are ``overnight, intraday, nights``; the overnight column
    loses ``annual_rate * nights / day_count``.

    Parameters
    ----------
    annual_rate : float, default=0.05
    day_count : int, default=360
    """

    def __init__(self, annual_rate=0.05, day_count=360):
        self.annual_rate = annual_rate
        self.day_count = day_count

    def fit(self, X, y=None):
        self.cost_model_ = CostModel(self.annual_rate, self.day_count)
        X = as_return_table(X, 3)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "cost_model_")
        X = as_return_table(X, 3).copy()
        nights = X[:, 2]
        if np.any(nights < 1):
            raise InputError("nights must be >= 1")
        X[:, 0] = X[:, 0] - self.cost_model_.annual_rate * nights / self.cost_model_.day_count
        if np.any(X[:, 0] <= -1.0):
            raise ReturnDomainError("cost-adjusted overnight return at or below -100%")
        return X

    def get_feature_names_out(self, input_features=None):
        return np.array(["overnight", "intraday", "nights"], dtype=object)
