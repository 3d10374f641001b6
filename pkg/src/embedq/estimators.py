"""scikit-learn style wrappers for the data-facing parts of the package.

Rows of ``X`` are spectra (one ensemble member per row). Simulation itself
stays functional in :mod:`embedq.ensemble` and :mod:`embedq.observables`;
only standardization and density fitting map naturally onto estimators.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, DensityMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .observables import survival_theory
from .qfunc import WeightSettings, weight_pdf

__all__ = ["SpectrumStandardizer", "QHermiteDensity"]


class SpectrumStandardizer(TransformerMixin, BaseEstimator):
    """Per-member standardization ``(E - mean) / std`` of each row.

    Every row is standardized with its own centroid and width, so ``fit``
    learns nothing beyond the expected row length.
    """

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_features=2)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, ensure_min_features=2)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} eigenvalues per row, expected {self.n_features_in_}")
        width = X.std(axis=1, keepdims=True)
        if np.any(width == 0):
            raise ValueError("a row has zero spectral width")
        return (X - X.mean(axis=1, keepdims=True)) / width


class QHermiteDensity(DensityMixin, BaseEstimator):
    """Spectral density model ``v((E - c)/s | q) / s``.

    Parameters
    ----------
    q : float or None
        Fixed shape parameter. ``None`` estimates it from the pooled
        standardized fourth moment as ``clip(mu4 - 2, 0, 1)``.
    quadrature_points : int
        Quadrature rule size used for the normalization and transforms.

    Attributes
    ----------
    centroid_, width_ : float
        Pooled mean and standard deviation of the fitted eigenvalues.
    q_ : float
        Shape parameter in use after ``fit``.
    """

    def __init__(self, q=None, quadrature_points=2048):
        self.q = q
        self.quadrature_points = quadrature_points

    def _settings(self):
        return WeightSettings(quadrature_points=self.quadrature_points)

    def fit(self, X, y=None):
        """Pool all entries of ``X`` (a 1-d spectrum or rows of spectra)."""
        E = np.ravel(check_array(X, ensure_2d=False, ensure_min_samples=2))
        self.centroid_ = float(E.mean())
        self.width_ = float(E.std())
        if not self.width_ > 0:
            raise ValueError("eigenvalues have zero spread")
        if self.q is None:
            z = (E - self.centroid_) / self.width_
            self.q_ = float(np.clip(np.mean(z**4) - 2.0, 0.0, 1.0))
        else:
            if not 0.0 <= self.q <= 1.0:
                raise ValueError(f"q must lie in [0, 1], got {self.q}")
            self.q_ = float(self.q)
        self._settings()  # validates quadrature_points early
        return self

    def pdf(self, E):
        check_is_fitted(self, "q_")
        z = (np.atleast_1d(np.asarray(E, dtype=float)) - self.centroid_) / self.width_
        return np.asarray(weight_pdf(z, self.q_, self._settings())) / self.width_

    def score_samples(self, X):
        """Log density of every entry of ``X``; ``-inf`` outside the support."""
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(np.ravel(X)))

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))

    def survival(self, times):
        """Survival probability in units of inverse standardized energy."""
        check_is_fitted(self, "q_")
        return survival_theory(self.q_, times, self._settings()).y
