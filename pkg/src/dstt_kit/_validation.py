"""Input checks shared by the estimator wrappers."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .tensor_core import MAX_INPUT_ORDER, symmetry_defect


def check_stt(X, *, sym_tol: float = 1e-8) -> np.ndarray:
    """Validate a dense (1,m)-tensor given as an ``(n,) * (m + 1)`` array."""
    X = np.asarray(X, dtype=float)
    if X.ndim < 2 or X.ndim - 1 > MAX_INPUT_ORDER:
        raise ValueError(f"expected a tensor with 1..{MAX_INPUT_ORDER} input indices, got ndim={X.ndim}")
    if len(set(X.shape)) != 1:
        raise ValueError(f"all tensor dimensions must match, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("tensor contains NaN or infinity")
    scale = max(float(np.max(np.abs(X), initial=0.0)), 1.0)
    if symmetry_defect(X) > sym_tol * scale:
        raise ValueError("tensor is not symmetric in its input indices")
    return X


def check_perturbations(X, n_features: int) -> np.ndarray:
    """2-D array of perturbation rows with ``n_features`` columns."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != n_features:
        raise ValueError(f"X has {X.shape[1]} features, but the estimator expects {n_features}")
    return X


def check_covariance(P, n: int) -> np.ndarray:
    P = check_array(P, dtype=np.float64)
    if P.shape != (n, n):
        raise ValueError(f"covariance must be {n}x{n}, got {P.shape}")
    if not np.allclose(P, P.T, rtol=0.0, atol=1e-14 * max(np.trace(np.abs(P)), 1e-300)):
        raise ValueError("covariance must be symmetric")
    return P
