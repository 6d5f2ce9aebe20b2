"""scikit-learn compatible wrappers for the fit-shaped parts of the toolkit.

These let idle-baseline removal, loadline regression and the active-idle
offset fit sit inside ordinary ``Pipeline`` / ``GridSearchCV`` code. Each is
a thin layer over the functional API.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .estimation import EnergyEstimate, Scope, fit_offsets, nearest_rank
from .proxy import Loadline, LoadlineMeta, loadline_power

__all__ = ["IdleBaselineRemover", "LoadlineRegressor", "ActiveIdleOffsetRegressor"]


class IdleBaselineRemover(TransformerMixin, BaseEstimator):
    """Learn an idle baseline per power channel, subtract it.

    Each column of ``X`` is one power channel in watts; its baseline is the
    nearest-rank ``p``-quantile of the training samples.

    Parameters
    ----------
    p : float, default=0.02
        Quantile of the observed power used as the idle draw.
    clip : bool, default=False
        Floor marginal power at zero. Off by default so that baseline
        misestimation stays visible.
    """

    def __init__(self, p: float = 0.02, clip: bool = False):
        self.p = p
        self.clip = clip

    def fit(self, X, y=None):
        X = validate_data(self, X)
        if not 0 < self.p < 1:
            raise ValueError("p must lie in (0, 1)")
        n = X.shape[0]
        if n * self.p < 1 - 1e-9:
            raise ValueError(
                f"{n} sample{'s' if n != 1 else ''} cannot populate the {self.p:g}-quantile"
            )
        self.baseline_watts_ = np.array([nearest_rank(col, self.p) for col in X.T])
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, reset=False)
        out = X - self.baseline_watts_
        return np.maximum(out, 0.0) if self.clip else out

    def inverse_transform(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, reset=False)
        return X + self.baseline_watts_


class LoadlineRegressor(RegressorMixin, BaseEstimator):
    """Piecewise-linear loadline fitted from calibration measurements.

    ``X`` holds load levels (fractions of max throughput), ``y`` watts.
    Repeated load levels are averaged. Levels 0 and 1 must both be present.
    """

    def __init__(self, architecture: str = "unknown", tdp_watts: float | None = None,
                 base_clock_ghz: float = 0.0, workload_name: str = "unspecified"):
        self.architecture = architecture
        self.tdp_watts = tdp_watts
        self.base_clock_ghz = base_clock_ghz
        self.workload_name = workload_name

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True)
        if X.shape[1] != 1:
            raise ValueError(f"expected a single load-level column, got {X.shape[1]}")
        levels, inverse = np.unique(X[:, 0], return_inverse=True)
        watts = np.bincount(inverse, weights=y) / np.bincount(inverse)
        meta = LoadlineMeta(
            architecture=self.architecture,
            tdp_watts=float(self.tdp_watts if self.tdp_watts is not None else watts.max()),
            base_clock_ghz=self.base_clock_ghz,
            workload_name=self.workload_name,
        )
        self.loadline_ = Loadline(levels, watts, meta)
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, reset=False)
        return np.atleast_1d(loadline_power(self.loadline_, X[:, 0]))


class ActiveIdleOffsetRegressor(RegressorMixin, BaseEstimator):
    """Per-node-class constant power offsets from repeated runs.

    ``X`` has two columns, node class label and duration in seconds; ``y`` is
    energy in joules. ``predict`` returns the modelled energy.
    """

    def __init__(self, reference: str | None = None):
        self.reference = reference

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=None, y_numeric=True)
        if X.shape[1] != 2:
            raise ValueError("X must have two columns: node class and duration")
        reps = []
        for (cls, dur), joules in zip(X, y):
            est = EnergyEstimate(
                joules=float(joules), start=0.0, end=float(dur),
                method="zero_order", scope=Scope("node", (str(cls),)),
            )
            reps.append((str(cls), est))
        self.fit_ = fit_offsets(reps, self.reference)
        self.offsets_ = dict(self.fit_.offsets)
        self.common_watts_ = self.fit_.common_watts
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, dtype=None, reset=False)
        unknown = {str(c) for c in X[:, 0]} - set(self.offsets_)
        if unknown:
            raise ValueError(f"unseen node classes: {sorted(unknown)}")
        off = np.array([self.offsets_[str(c)] for c in X[:, 0]])
        return (self.common_watts_ + off) * X[:, 1].astype(float)
