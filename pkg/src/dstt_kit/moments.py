"""Gaussian mean/covariance propagation through full STTs and rank-1 factors."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

_LETTERS = "abcdefghijkl"


@dataclass(frozen=True)
class GaussianState:
    """Mean deviation ``dmean`` and covariance ``cov`` of a state perturbation."""

    dmean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (len(self.dmean), len(self.dmean)):
            raise ValueError("covariance shape does not match the mean")
        scale = max(float(np.trace(np.abs(cov))), 1e-300)
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-14 * scale:
            raise ValueError("covariance must be symmetric")

    @property
    def min_eigenvalue(self) -> float:
        """Smallest covariance eigenvalue; negative values flag a lost definiteness."""
        return float(np.linalg.eigvalsh(self.cov)[0])


@lru_cache(maxsize=None)
def pairings(order: int) -> tuple:
    """All perfect matchings of ``range(order)`` (``(order - 1)!!`` of them)."""
    if order == 0:
        return ((),)
    out = []
    first = 0
    for partner in range(1, order):
        rest = [k for k in range(1, order) if k != partner]
        for sub in pairings(len(rest)):
            out.append(((first, partner),) + tuple((rest[a], rest[b]) for a, b in sub))
    return tuple(out)


def gaussian_moment_tensors(P, order: int) -> np.ndarray:
    """``E[x_a x_b ...]`` for ``x ~ N(0, P)`` via Isserlis pairings.

    Odd orders return the zero tensor.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    if order % 2:
        return np.zeros((n,) * order)
    if order == 0:
        return np.array(1.0)
    if order > len(_LETTERS):
        raise ValueError(f"order {order} too large")
    out = np.zeros((n,) * order)
    target = _LETTERS[:order]
    for pairing in pairings(order):
        inputs = ",".join(target[a] + target[b] for a, b in pairing)
        out += np.einsum(f"{inputs}->{target}", *([P] * len(pairing)))
    return out


def _check_zero_mean(g0: GaussianState) -> None:
    if np.any(np.asarray(g0.dmean) != 0.0):
        raise ValueError("moment propagation is only defined for a zero initial mean")


def _contract_inputs(phi: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Contract all input slots of ``phi`` with the leading slots of ``T``."""
    p = phi.ndim - 1
    return np.tensordot(phi, T, axes=(list(range(1, p + 1)), list(range(p))))


def propagate_moments_stt(h, k: int, g0: GaussianState, order: int) -> GaussianState:
    """Mean and covariance at epoch ``k`` from the STT series truncated at ``order``."""
    _check_zero_mean(g0)
    if order > h.order:
        raise ValueError(f"order {order} exceeds stored order {h.order}")
    return propagate_moments_tensors([h.stt(k, p) for p in range(1, order + 1)], g0.cov)


def propagate_moments_tensors(stts, P0) -> GaussianState:
    """Same as :func:`propagate_moments_stt` for an explicit list ``[Phi1, Phi2, ...]``."""
    P0 = np.asarray(P0, dtype=float)
    M = len(stts)
    n = P0.shape[0]
    moments = {q: gaussian_moment_tensors(P0, q) for q in range(2, 2 * M + 1, 2)}

    mean = np.zeros(n)
    for p in range(2, M + 1, 2):
        mean += _contract_inputs(stts[p - 1], moments[p]) / math.factorial(p)

    second = np.zeros((n, n))
    for p in range(1, M + 1):
        for q in range(1, M + 1):
            if (p + q) % 2:
                continue
            T = _contract_inputs(stts[p - 1], moments[p + q])  # (i, kappa_1..kappa_q)
            T = _contract_inputs(stts[q - 1], np.moveaxis(T, 0, -1))  # (j, i)
            second += T.T / (math.factorial(p) * math.factorial(q))
    cov = second - np.outer(mean, mean)
    return GaussianState(mean, 0.5 * (cov + cov.T))


def sigma_projection(P, v) -> float:
    """Standard deviation of ``v . x`` for ``x`` with covariance ``P``."""
    v = np.asarray(v, dtype=float)
    return math.sqrt(max(float(v @ np.asarray(P, dtype=float) @ v), 0.0))


def propagate_moments_r1(h, k: int, g0: GaussianState, f2, f3=None) -> GaussianState:
    """Mean and covariance with the full STM plus rank-1 second/third-order terms.

    Leaving out ``f3`` gives the second-order variant.
    """
    _check_zero_mean(g0)
    for f in (f2, f3):
        if f is not None and f.epoch is not None and f.epoch != k:
            raise ValueError(f"factors built at epoch {f.epoch}, requested epoch {k}")
    return propagate_moments_r1_factors(h.stm[k], g0.cov, f2.u, f2.v, *((f3.u, f3.v) if f3 is not None else (None, None)))


def propagate_moments_r1_factors(stm, P0, u2, v2, u3=None, v3=None) -> GaussianState:
    stm = np.asarray(stm, dtype=float)
    P0 = np.asarray(P0, dtype=float)
    s2 = sigma_projection(P0, v2)
    mean = 0.5 * u2 * s2**2
    cov = stm @ P0 @ stm.T + 0.5 * np.outer(u2, u2) * s2**4
    if u3 is not None:
        s3 = sigma_projection(P0, v3)
        w = stm @ (P0 @ v3)
        cov += 0.5 * (np.outer(w, u3) + np.outer(u3, w)) * s3**2
        cov += (5.0 / 12.0) * np.outer(u3, u3) * s3**6
    return GaussianState(mean, 0.5 * (cov + cov.T))


def covariance_error_metric(P_stt, P_r1) -> float:
    """``||P_stt - P_r1||_F / ||P_stt||_F``."""
    P_stt = np.asarray(P_stt, dtype=float)
    denom = np.linalg.norm(P_stt)
    if denom == 0.0:
        raise ZeroDivisionError("reference covariance has zero Frobenius norm")
    return float(np.linalg.norm(P_stt - np.asarray(P_r1, dtype=float)) / denom)
