"""scikit-learn style wrapper around the configuration optimiser.

``fit`` runs the (t_s, p_sen) search for one scenario; ``predict`` maps
candidate configurations to their normalised throughput.  There is no
training data: ``X`` in ``fit`` is ignored and only kept so the object
drops into tools that expect the estimator protocol (``get_params``,
``set_params``, ``clone``, parameter grids over scenario knobs).
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .core import Scenario
from .optimizer import optimize_config
from .throughput import evaluate

__all__ = ["FDCMACConfigurator"]


class FDCMACConfigurator(BaseEstimator):
    """Find the throughput-maximising sensing time and sensing power.

    Parameters mirror :func:`fdcmac.optimizer.optimize_config`.

    Attributes set by ``fit``: ``t_s_``, ``p_sen_``, ``nt_``, ``boundary_``,
    ``result_`` (the full OptimizationResult).
    """

    def __init__(self, scenario: Scenario | None = None, step_db=0.25, min_db=-10.0,
                 refine=True, rel_tol=1e-3, workers=None):
        self.scenario = scenario
        self.step_db = step_db
        self.min_db = min_db
        self.refine = refine
        self.rel_tol = rel_tol
        self.workers = workers

    def _scenario(self) -> Scenario:
        return self.scenario if self.scenario is not None else Scenario()

    def fit(self, X=None, y=None):
        res = optimize_config(self._scenario(), step_db=self.step_db, min_db=self.min_db,
                              refine=self.refine, rel_tol=self.rel_tol, workers=self.workers)
        self.result_ = res
        self.t_s_ = res.t_s_star
        self.p_sen_ = res.p_sen_star
        self.nt_ = res.nt_star
        self.boundary_ = res.boundary_flag
        return self

    def predict(self, X):
        """Throughput for each row ``[t_s (s), p_sen (linear)]`` of ``X``."""
        check_is_fitted(self, "result_")
        X = check_array(X, dtype=float, ensure_min_features=2)
        if X.shape[1] != 2:
            raise ValueError(f"X must have two columns [t_s, p_sen], got {X.shape[1]}")
        sc = self._scenario()
        return np.array([evaluate(sc, t_s=t, p_sen=p).nt for t, p in X])

    def score(self, X, y=None):
        """Mean predicted throughput (higher is better)."""
        return float(np.mean(self.predict(X)))
