"""scikit-learn style wrappers.

Signals are rows: ``X`` has shape ``(n_signals, n_vertices)``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DimensionMismatch
from .filterbank import (bezout_synthesis_spline, check_assumptions, lift, spline_analysis)
from .pipelines import DenoiseConfig, Denoiser
from .synthesis_ls import ls_synthesis_implicit


class GraphFilterBank(BaseEstimator, TransformerMixin):
    """Spline analysis bank with Bezout or least-squares synthesis.

    ``transform`` returns ``[z0 | z1]`` (shape ``(n_signals, 2 N)``) and
    ``inverse_transform`` maps it back to signals.

    Parameters
    ----------
    graph : Graph
    order : int, default=1
    synthesis : {"lifted-bezout", "bezout", "least-squares"}
    """

    def __init__(self, graph=None, order=1, synthesis="lifted-bezout"):
        self.graph = graph
        self.order = order
        self.synthesis = synthesis

    def fit(self, X=None, y=None):
        if self.graph is None:
            raise ValueError("graph must be set")
        g = self.graph
        if X is not None:
            X = check_array(X)
            self._check_width(X, g.n_vertices)
        self.analysis_ = spline_analysis(g, self.order)
        self.report_ = check_assumptions(self.analysis_)
        if self.synthesis == "least-squares":
            self.synthesis_ = ls_synthesis_implicit(self.analysis_, self.report_)
        elif self.synthesis in ("bezout", "lifted-bezout"):
            bank = bezout_synthesis_spline(g, self.order)
            if self.synthesis == "lifted-bezout":
                bank = lift(bank, self.analysis_)
            self.synthesis_ = bank
        else:
            raise ValueError(f"unknown synthesis {self.synthesis!r}")
        self.n_features_in_ = g.n_vertices
        return self

    @staticmethod
    def _check_width(X, n):
        if X.shape[1] != n:
            raise DimensionMismatch(f"expected {n} columns, got {X.shape[1]}")

    def transform(self, X):
        check_is_fitted(self, "analysis_")
        X = check_array(X)
        self._check_width(X, self.n_features_in_)
        z0, z1 = self.analysis_.analyze(X.T)
        return np.hstack([np.asarray(z0).T, np.asarray(z1).T])

    def inverse_transform(self, Z):
        check_is_fitted(self, "synthesis_")
        Z = check_array(Z)
        n = self.n_features_in_
        if Z.shape[1] != 2 * n:
            raise DimensionMismatch(f"expected {2 * n} columns, got {Z.shape[1]}")
        z0, z1 = Z[:, :n].T, Z[:, n:].T
        return np.asarray(self.synthesis_.synthesize(z0, z1)).T


class GraphDenoiser(BaseEstimator, TransformerMixin):
    """Threshold-the-high-pass denoiser.

    ``tau`` defaults to ``3 * eta`` when only the noise level is given.
    """

    def __init__(self, graph=None, bank="B", order=1, tau=None, eta=None, radius=2,
                 solver="auto"):
        self.graph = graph
        self.bank = bank
        self.order = order
        self.tau = tau
        self.eta = eta
        self.radius = radius
        self.solver = solver

    def fit(self, X=None, y=None):
        if self.graph is None:
            raise ValueError("graph must be set")
        tau = self.tau
        if tau is None:
            if self.eta is None:
                raise ValueError("set tau or eta")
            tau = 3.0 * self.eta
        self.tau_ = float(tau)
        self.denoiser_ = Denoiser(self.graph, DenoiseConfig(self.bank, self.order, self.tau_,
                                                            self.radius, self.solver))
        self.n_features_in_ = self.graph.n_vertices
        return self

    def transform(self, X):
        check_is_fitted(self, "denoiser_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return np.asarray(self.denoiser_(X.T)).T
