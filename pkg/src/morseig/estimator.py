"""scikit-learn style facade over scan and classify_point."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .classify import TAU_DEF, TAU_HESS_REL, ClassifyOptions, classify_point
from .families import MatrixFamily, resolve_family
from .pipeline import ScanOptions, scan
from .polyalg import IntPoly
from .spectral import DEFAULT_CLUSTER_TOL


class MorseAnalyzer(BaseEstimator):
    """Critical-point analysis of one ordered eigenvalue of a matrix family.

    ``fit`` takes the family (a ``MatrixFamily``, a builtin name or a JSON
    spec path) and, for torus families, runs a full scan.  ``predict``
    classifies parameter points and ``transform`` maps them to the sorted
    spectrum.
    """

    def __init__(self, k: int = 1, grid: int = 32, tau_def: float = TAU_DEF,
                 tau_hess_rel: float = TAU_HESS_REL, cluster_tol: float = DEFAULT_CLUSTER_TOL,
                 seed: int = 0, manifold_poincare=None):
        self.k = k
        self.grid = grid
        self.tau_def = tau_def
        self.tau_hess_rel = tau_hess_rel
        self.cluster_tol = cluster_tol
        self.seed = seed
        self.manifold_poincare = manifold_poincare

    def _options(self) -> ClassifyOptions:
        return ClassifyOptions(cluster_tol=self.cluster_tol, tau_def=self.tau_def,
                               tau_hess_rel=self.tau_hess_rel, seed=self.seed)

    def fit(self, X, y=None):
        fam = X if isinstance(X, MatrixFamily) else resolve_family(str(X))
        if not 1 <= self.k <= fam.n:
            raise ValueError(f"k={self.k} outside 1..{fam.n}")
        self.family_ = fam
        self.n_features_in_ = fam.d
        self.report_ = None
        self.morse_polynomial_ = None
        if fam.is_torus:
            pm = self.manifold_poincare
            if pm is not None and not isinstance(pm, IntPoly):
                pm = IntPoly(tuple(int(c) for c in pm))
            opts = ScanOptions(classify=self._options(), manifold_poincare=pm)
            self.report_ = scan(fam, self.k, self.grid, opts)
            self.morse_polynomial_ = self.report_.p_morse
        return self

    def _points(self, X) -> np.ndarray:
        check_is_fitted(self, "family_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} coordinates, got {X.shape[1]}")
        return X

    def predict(self, X) -> np.ndarray:
        """Verdict label per parameter point."""
        X = self._points(X)
        opts = self._options()
        return np.array([classify_point(self.family_, x, self.k, opts).verdict for x in X], dtype=object)

    def transform(self, X) -> np.ndarray:
        """Sorted eigenvalues, shape (n_points, n)."""
        X = self._points(X)
        return np.linalg.eigvalsh(self.family_.evaluate(X))

    def score(self, X=None, y=None) -> float:
        """1.0 when the Morse inequalities hold for the fitted scan, else 0.0."""
        check_is_fitted(self, "family_")
        if self.report_ is None:
            raise ValueError("score needs a torus family")
        return float(self.report_.division.satisfied)
