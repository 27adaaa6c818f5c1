"""Estimator-style wrappers (``fit`` returns ``self``, fitted attributes end in ``_``)."""

import inspect

import numpy as np

from .natural import (DEFAULT_SCHEDULE, Window, compare_measures, expected_quantum_time,
                      minkowski_content)


class _Params:
    def get_params(self, deep=True):
        names = [p for p in inspect.signature(type(self).__init__).parameters if p != "self"]
        return {n: getattr(self, n) for n in names}

    def set_params(self, **params):
        valid = self.get_params()
        for k, v in params.items():
            if k not in valid:
                raise ValueError(f"invalid parameter {k!r} for {type(self).__name__}")
            setattr(self, k, v)
        return self

    def _check_fitted(self, attr):
        if not hasattr(self, attr):
            raise RuntimeError(f"{type(self).__name__} is not fitted yet; call fit first")

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"


class DimensionEstimator(_Params):
    """Dimension from the log-log slope of neighbourhood areas of several traces.

    Parameters
    ----------
    d : float
        Dimension used for the per-segment contents (the slope does not depend on it).
    eps_schedule : sequence of float
    window : Window, optional
    max_gap : float, optional

    Attributes
    ----------
    log_areas_ : ndarray, shape (n_traces, n_scales)
    slope_ : float
        Slope of the mean log area against ``log eps``; estimates ``2 - d``.
    dimension_ : float
    """

    def __init__(self, d=1.25, eps_schedule=DEFAULT_SCHEDULE, window=None, max_gap=None):
        self.d = d
        self.eps_schedule = eps_schedule
        self.window = window
        self.max_gap = max_gap

    def transform(self, traces):
        """Log areas of every trace at every scale."""
        win = Window(1.0, 0.1) if self.window is None else self.window
        rows = [minkowski_content(tr, self.d, self.eps_schedule, window=win,
                                  max_gap=self.max_gap).areas for tr in traces]
        return np.log(np.asarray(rows))

    def fit(self, traces, y=None):
        self.log_areas_ = self.transform(traces)
        x = np.log(np.asarray(self.eps_schedule, float))
        self.slope_ = float(np.polyfit(x, self.log_areas_.mean(axis=0), 1)[0])
        self.dimension_ = 2.0 - self.slope_
        return self


class NaturalMeasureEstimator(_Params):
    """Boundary-chaos estimate of the curve measure on ``eta[0, t]``.

    ``fit(chain, t)`` stores ``measure_``; ``transform(edges)`` gives mean
    segment masses and ``score(content, edges)`` the proportionality CV
    against a Minkowski-content estimate (lower is better).
    """

    def __init__(self, gamma, replicates=10_000, seed=0, eps=2e-3, window=None, method="mc"):
        self.gamma = gamma
        self.replicates = replicates
        self.seed = seed
        self.eps = eps
        self.window = window
        self.method = method

    def fit(self, chain, t):
        self.measure_ = expected_quantum_time(None, chain, t, self.gamma, self.replicates,
                                              self.seed, eps=self.eps, window=self.window,
                                              method=self.method, keep_samples=True)
        self.t_ = float(t)
        return self

    def transform(self, edges):
        self._check_fitted("measure_")
        return self.measure_.segment_masses(np.asarray(edges, float))[0]

    def score(self, content, edges=None, min_atoms=1):
        self._check_fitted("measure_")
        edges = content.edges if edges is None else edges
        return compare_measures(self.measure_, content, edges, min_atoms=min_atoms).cv
