"""scikit-learn style wrappers around the rank-1 factorizations.

``Rank1STTApproximation`` is fitted on a single STT and transforms
perturbation rows into their rank-1 higher-order contribution.
``DirectionalPropagator`` is fitted on an :class:`~dstt_kit.stt_engine.SttHistory`
and maps initial deviations (or a Gaussian) to one epoch.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_covariance, check_perturbations, check_stt
from .moments import GaussianState, propagate_moments_r1, propagate_moments_stt
from .rank1_factor import (
    EigenSettings,
    build_r1dstt,
    build_r1odstt,
    build_r1odstt_at,
    approximation_error,
    dominant_right_singular_vector,
)
from .stt_engine import SttHistory, propagate_perturbation_r1, propagate_perturbation_stt
from .tensor_core import contract_full, frobenius_norm, rank1_outer


class Rank1STTApproximation(TransformerMixin, BaseEstimator):
    """Rank-1 approximation ``u (x) v^m`` of a (1,m)-tensor.

    Parameters
    ----------
    method : {"odstt", "dstt"}
        ``"odstt"`` picks the Frobenius-optimal input direction;
        ``"dstt"`` uses the dominant right singular vector of ``stm``.
    stm : array of shape (n, n), optional
        Required for ``"dstt"``; for ``"odstt"`` its dominant direction is
        added to the solver's starting points.
    shift_mode, restarts, tol, max_iter, random_state
        SS-HOPM settings.

    Attributes
    ----------
    u_, v_ : ndarray of shape (n,)
    order_ : int
    eigenvalue_ : float
        ``||u_||^2``.
    frobenius_error_ : float
        ``||X - u_ (x) v_^m||_F``.
    """

    def __init__(self, method="odstt", stm=None, shift_mode="reduced", restarts=20, tol=1e-12, max_iter=5000, random_state=0):
        self.method = method
        self.stm = stm
        self.shift_mode = shift_mode
        self.restarts = restarts
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def _settings(self) -> EigenSettings:
        return EigenSettings(
            shift_mode=self.shift_mode,
            restarts=self.restarts,
            tol=self.tol,
            max_iter=self.max_iter,
            rng_seed=int(self.random_state or 0),
        )

    def fit(self, X, y=None):
        X = check_stt(X)
        if self.method == "dstt":
            if self.stm is None:
                raise ValueError("method='dstt' needs the state transition matrix in `stm`")
            v = dominant_right_singular_vector(self.stm)
            u = contract_full(X, v)
        elif self.method == "odstt":
            starts = None if self.stm is None else dominant_right_singular_vector(self.stm)[None, :]
            f = build_r1odstt(X, self._settings(), starts=starts)
            u, v = f.u, f.v
        else:
            raise ValueError(f"unknown method {self.method!r}")
        self.u_, self.v_ = u, v
        self.order_ = X.ndim - 1
        self.n_features_in_ = X.shape[0]
        self.eigenvalue_ = float(u @ u)
        self.frobenius_error_ = float(frobenius_norm(X - rank1_outer(u, v, self.order_).entries))
        self.normalized_error_ = self.frobenius_error_ / max(frobenius_norm(X), 1e-300)
        return self

    def transform(self, X):
        """Rank-1 contraction ``u (v . x)^m`` of each row of ``X``."""
        check_is_fitted(self, "u_")
        X = check_perturbations(X, self.n_features_in_)
        return np.outer((X @ self.v_) ** self.order_, self.u_)


class DirectionalPropagator(TransformerMixin, BaseEstimator):
    """Map initial deviations to epoch ``epoch`` with the full STM plus rank-1 terms.

    Parameters
    ----------
    method : {"odstt", "dstt"}
    order : {2, 3}
        Highest expansion order kept.
    epoch : int
        Index into the fitted history's time grid (negative counts from the end).
    """

    def __init__(self, method="odstt", order=2, epoch=-1, shift_mode="reduced", restarts=20, random_state=0):
        self.method = method
        self.order = order
        self.epoch = epoch
        self.shift_mode = shift_mode
        self.restarts = restarts
        self.random_state = random_state

    def fit(self, X: SttHistory, y=None):
        if not isinstance(X, SttHistory):
            raise TypeError("DirectionalPropagator.fit expects an SttHistory")
        if self.order not in (2, 3) or self.order > X.order:
            raise ValueError(f"order {self.order} not available in a history of order {X.order}")
        k = self.epoch % len(X)
        settings = EigenSettings(shift_mode=self.shift_mode, restarts=self.restarts, rng_seed=int(self.random_state or 0))
        self.factors_ = []
        for m in range(2, self.order + 1):
            if self.method == "dstt":
                self.factors_.append(build_r1dstt(X, k, m))
            elif self.method == "odstt":
                self.factors_.append(build_r1odstt_at(X, k, m, settings))
            else:
                raise ValueError(f"unknown method {self.method!r}")
        self.history_ = X
        self.epoch_index_ = k
        self.n_features_in_ = X.n
        self.frobenius_errors_ = [approximation_error(X.stt(k, f.m), f) for f in self.factors_]
        return self

    def transform(self, X):
        """Deviation at the fitted epoch for each initial deviation row."""
        check_is_fitted(self, "factors_")
        X = check_perturbations(X, self.n_features_in_)
        f2 = self.factors_[0]
        f3 = self.factors_[1] if len(self.factors_) > 1 else None
        return np.array([propagate_perturbation_r1(self.history_, self.epoch_index_, x, f2, f3) for x in X])

    def propagate_gaussian(self, P0) -> GaussianState:
        """Mean/covariance at the fitted epoch for ``N(0, P0)`` initial deviations."""
        check_is_fitted(self, "factors_")
        P0 = check_covariance(P0, self.n_features_in_)
        g0 = GaussianState(np.zeros(self.n_features_in_), P0)
        f3 = self.factors_[1] if len(self.factors_) > 1 else None
        return propagate_moments_r1(self.history_, self.epoch_index_, g0, self.factors_[0], f3)

    def reference_gaussian(self, P0) -> GaussianState:
        """Full-STT mean/covariance at the same order, for comparison."""
        check_is_fitted(self, "factors_")
        P0 = check_covariance(P0, self.n_features_in_)
        g0 = GaussianState(np.zeros(self.n_features_in_), P0)
        return propagate_moments_stt(self.history_, self.epoch_index_, g0, self.order)

    def score(self, X, y=None):
        """Negative mean norm of the gap to the full STT series on rows of ``X``."""
        X = check_perturbations(X, self.n_features_in_)
        approx = self.transform(X)
        ref = np.array([propagate_perturbation_stt(self.history_, self.epoch_index_, x, self.order) for x in X])
        return -float(np.mean(np.linalg.norm(approx - ref, axis=1)))
