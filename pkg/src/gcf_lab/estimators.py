"""scikit-learn style wrappers where the fit/transform shape is natural.

SpectralDecomposition learns the eigenbasis of L from a shrinker profile and
maps functions on S^1 to their coefficients in that basis. RadialTranslator
solves for f_M once and then evaluates it at requested heights.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .constants import FlowParams, derive_constants
from .exceptions import ValidationError
from .radial import fit_asymptotics, solve_radial
from .shrinker import ShrinkerProfile, solve_shrinker_curve
from .spectrum import eig_L

__all__ = ["SpectralDecomposition", "RadialTranslator"]


class SpectralDecomposition(TransformerMixin, BaseEstimator):
    """Coefficients <f, phi_j>_h of sampled functions in the eigenbasis of L.

    ``fit`` takes the shrinker samples h as a single row (shape (1, N)); when
    X is None the curve is solved for (alpha, k, N). ``transform`` maps rows
    of samples at the same N angles to ``n_components`` coefficients.
    """

    def __init__(self, alpha=0.1, k=0, N=128, n_components=None):
        self.alpha = alpha
        self.k = k
        self.N = N
        self.n_components = n_components

    def fit(self, X=None, y=None):
        FlowParams(2, self.alpha)
        if X is None:
            prof = solve_shrinker_curve(self.alpha, self.k, self.N)
        else:
            X = check_array(X, ensure_min_features=32)
            if X.shape[0] != 1:
                raise ValidationError("fit expects one row of shrinker samples")
            prof = ShrinkerProfile.from_json({"alpha": self.alpha, "k": self.k, "n": 2, "samples": X[0].tolist()})
        spec = eig_L(prof)
        self.profile_ = prof
        self.spectrum_ = spec
        self.lambdas_ = spec.lambdas_all
        self.K_ = spec.K
        self.n_features_in_ = prof.N
        return self

    def _take(self):
        nc = self.n_components
        return self.n_features_in_ if nc is None else int(nc)

    def transform(self, X):
        check_is_fitted(self, "spectrum_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(f"expected {self.n_features_in_} samples per row, got {X.shape[1]}")
        return self.spectrum_.project(X)[:, : self._take()]

    def inverse_transform(self, C):
        check_is_fitted(self, "spectrum_")
        C = check_array(C)
        nc = C.shape[1]
        return C @ self.spectrum_.phis_all[:, :nc].T


class RadialTranslator(BaseEstimator):
    """The radial profile f_M as a fitted function of height.

    ``fit`` ignores its data and solves the ODE; ``predict`` returns f at the
    heights in X (one column). ``asymptotics_`` holds the far-field fit when
    l_max reaches 1e4.
    """

    def __init__(self, M=1.0, alpha=0.1, n=2, l_max=1e6):
        self.M = M
        self.alpha = alpha
        self.n = n
        self.l_max = l_max

    def fit(self, X=None, y=None):
        prof = solve_radial(self.M, self.alpha, self.n, self.l_max)
        self.profile_ = prof
        self.constants_ = derive_constants(FlowParams(self.n, self.alpha))
        self.asymptotics_ = fit_asymptotics(prof, self.constants_) if self.l_max >= 1e4 else None
        return self

    def predict(self, X):
        check_is_fitted(self, "profile_")
        X = check_array(X, ensure_2d=False)
        l = np.ravel(X)
        f, _ = self.profile_(l)
        return np.asarray(f)

    def slope(self, X):
        check_is_fitted(self, "profile_")
        l = np.ravel(check_array(X, ensure_2d=False))
        return np.asarray(self.profile_(l)[1])
