"""scikit-learn style front end for the spectral decomposition.

``fit`` takes a generator (matrix, model or descriptor) instead of a data
matrix; ``transform`` maps probe vectors, one per row, to ``P_t mu``.
"""

from types import SimpleNamespace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_positive
from .models import build_model, evolve
from .spectral import ContourSpec, decompose


class SpectralDecomposer(TransformerMixin, BaseEstimator):
    """Split ``T_t`` into the pole contributions and the remainder ``P_t``.

    Parameters
    ----------
    lam : float
        Strip width; eigenvalues with ``Re > -lam`` are poles.
    ell : float
        Position ``Re z = -ell`` of the shifted line, in ``(0, lam)``.
    beta : float
        Frequency threshold. For the curved contour only poles with
        ``|Im| <= beta`` are kept.
    t : float
        Time at which ``transform`` evaluates ``P_t``.
    contour : {"shifted-line", "curved-rapid"}
    epsilon, C12 : float, optional
        Curved contour offset and exponent.
    nodes : int
        Trapezoid nodes per Riesz projector circle.

    Attributes
    ----------
    model_ : GeneratorModel
    decomposition_ : SpectralDecomposition
    poles_ : ndarray of complex
    pole_orders_ : ndarray of int
    n_features_in_ : int
    """

    def __init__(self, lam=1.0, ell=0.5, beta=2.0, t=1.0, contour="shifted-line",
                 epsilon=None, C12=None, nodes=64):
        self.lam = lam
        self.ell = ell
        self.beta = beta
        self.t = t
        self.contour = contour
        self.epsilon = epsilon
        self.C12 = C12
        self.nodes = nodes

    def _contour(self):
        if self.contour == "shifted-line":
            return ContourSpec("shifted-line", ell=self.ell, nodes=self.nodes)
        eps = self.epsilon if self.epsilon is not None else 0.5 * self.ell
        return ContourSpec("curved-rapid", ell=self.ell, epsilon=eps, C12=self.C12, nodes=self.nodes)

    def fit(self, X, y=None):
        """Locate poles and build their projectors.

        Parameters
        ----------
        X : array-like of shape (n, n), GeneratorModel or dict
            The generator.
        y : ignored

        Returns
        -------
        self : SpectralDecomposer
        """
        model = build_model(X)
        check_positive(self.lam, "lam")
        check_positive(self.beta, "beta")
        if not 0.0 < self.ell < self.lam:
            raise ValueError(f"ell must lie in (0, lam) = (0, {self.lam}), got {self.ell}")
        params = SimpleNamespace(lam=self.lam, beta=self.beta, ell=self.ell)
        self.model_ = model
        self.decomposition_ = decompose(model, params, self._contour(), nodes=self.nodes)
        self.poles_ = np.array(self.decomposition_.poles, dtype=complex)
        self.pole_orders_ = np.array(self.decomposition_.pole_orders, dtype=int)
        self.n_features_in_ = model.dimension
        return self

    def _check_X(self, X):
        X = np.asarray(X, dtype=complex)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError(f"X must have shape (n_samples, {self.n_features_in_}), got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite entries")
        return X

    def transform(self, X):
        """Return ``P_t mu`` for every row ``mu`` of ``X`` at ``t = self.t``."""
        check_is_fitted(self, "decomposition_")
        X = self._check_X(X)
        t = check_positive(self.t, "t", strict=False)
        out = np.array([self.decomposition_.apply_remainder(t, mu) for mu in X])
        return out.real if self.model_.is_real and not np.any(X.imag) else out

    def pole_contribution(self, X):
        """``sum_j e^{t z_j}(Pi_j + ...) mu`` for every row, the complement of ``transform``."""
        check_is_fitted(self, "decomposition_")
        X = self._check_X(X)
        S = self.decomposition_.pole_sum(self.t)
        return X @ S.T

    def remainder(self, t=None):
        """The operator ``P_t``."""
        check_is_fitted(self, "decomposition_")
        return self.decomposition_.remainder(self.t if t is None else t)

    def semigroup(self, t=None):
        check_is_fitted(self, "model_")
        return evolve(self.model_, self.t if t is None else t)
