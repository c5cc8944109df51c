"""Rank-1 directional approximations of state transition tensors.

Two constructions are provided:

* ``dstt`` -- the input direction is the dominant right singular vector of the
  STM and the output direction is the STT contracted with it.
* ``odstt`` -- the input direction maximizes ``||Phi v^m||`` over the unit
  sphere, which makes ``u (x) v^m`` the best partially symmetric rank-1
  approximation in the Frobenius norm. The maximizer is the dominant
  z-eigenvector of the symmetrized square of ``Phi``, found here with a
  shifted symmetric higher-order power method (SS-HOPM) run from several
  starting points at once.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .tensor_core import contract_full, frobenius_norm, rank1_outer


class ConvergenceWarning(UserWarning):
    """SS-HOPM hit its iteration cap before meeting the convergence test."""


@dataclass(frozen=True)
class EigenSettings:
    shift_mode: str = "reduced"
    restarts: int = 20
    tol: float = 1e-12
    angle_tol: float = 1e-10
    max_iter: int = 5000
    rng_seed: int = 0
    record_history: bool = False
    # Newton refinement of the winning eigenpair; off gives the raw SS-HOPM fixed point
    polish: bool = True
    # starts whose steps fall below this while trailing the leader are dropped
    prune_step: float = 1e-6

    def __post_init__(self):
        if self.shift_mode not in ("conservative", "reduced"):
            raise ValueError(f"unknown shift_mode {self.shift_mode!r}")
        if self.restarts < 0 or self.max_iter < 1:
            raise ValueError("restarts must be >= 0 and max_iter >= 1")


@dataclass(frozen=True)
class EigenResult:
    lam: float
    vector: np.ndarray
    iterations: int
    converged: bool
    restarts_used: int
    residual: float
    shift: float
    history: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class Rank1Factors:
    """``u (x) v (x) ... (x) v`` surrogate of an order-``m`` STT at one epoch."""

    m: int
    u: np.ndarray
    v: np.ndarray
    method: str
    epoch: int | None = None
    eigen: EigenResult | None = field(default=None, repr=False, compare=False)

    def tensor(self):
        return rank1_outer(self.u, self.v, self.m)

    def apply(self, dx) -> np.ndarray:
        """Rank-1 contraction ``u (v . dx)^m`` (no factorial)."""
        return self.u * float(self.v @ np.asarray(dx, dtype=float)) ** self.m


def canonical_sign(v: np.ndarray) -> float:
    """+1 or -1 such that the largest-magnitude entry of ``sign * v`` is positive."""
    return 1.0 if v[int(np.argmax(np.abs(v)))] >= 0 else -1.0


def _lex_key(v: np.ndarray, decimals: int = 12) -> tuple:
    return tuple(np.round(v, decimals))


def _power_rows(X: np.ndarray, p: int) -> np.ndarray:
    """Row-wise Kronecker power: ``(S, n) -> (S, n**p)`` (``p = 0`` gives ones)."""
    out = np.ones((X.shape[0], 1))
    for _ in range(p):
        out = (out[:, :, None] * X[:, None, :]).reshape(X.shape[0], -1)
    return out


def _objective_and_gradient(phi: np.ndarray, X: np.ndarray):
    """Batched ``c = Phi x^m``, ``lam = |c|^2`` and ``G = (Phi x^{m-1})^T c``.

    ``G(x)`` equals the symmetrized square of ``Phi`` contracted with
    ``2m - 1`` copies of ``x``, since both are ``grad |Phi x^m|^2 / (2m)``.
    """
    n = phi.shape[0]
    m = phi.ndim - 1
    low = _power_rows(X, m - 1)
    # M[s, i, j] = Phi[i; j, x, ..., x]
    M = np.einsum("ijk,sk->sij", phi.reshape(n, n, -1), low)
    c = np.einsum("sij,sj->si", M, X)
    G = np.einsum("sij,si->sj", M, c)
    lam = np.einsum("si,si->s", c, c)
    return c, lam, G


def g_operator(phi, x) -> np.ndarray:
    """``(Phi x^{m-1})^T (Phi x^m)`` for a single vector ``x``."""
    phi = np.asarray(getattr(phi, "entries", phi), dtype=float)
    return _objective_and_gradient(phi, np.asarray(x, dtype=float)[None, :])[2][0]


def conservative_shift(phi: np.ndarray) -> float:
    m = phi.ndim - 1
    return (2 * m - 1) * float(np.sum(phi * phi))


def _normalize_rows(Y: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(Y, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return Y / norms


def random_unit_vectors(count: int, n: int, seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(seed))
    return _normalize_rows(rng.standard_normal((count, n)))


def sshopm_squared(phi, settings: EigenSettings | None = None, starts=None) -> EigenResult:
    """Dominant z-eigenpair of the symmetrized square of a (1,m)-tensor.

    Iterates ``x <- normalize(G(x) + alpha x)`` from ``settings.restarts``
    random unit vectors plus any rows of ``starts`` and returns the pair with
    the largest eigenvalue ``lam = ||Phi x^m||^2``. Ties (within 1e-12
    relative) are broken by the lexicographically largest sign-canonical
    vector.
    """
    settings = settings or EigenSettings()
    phi = np.asarray(getattr(phi, "entries", phi), dtype=float)
    n, m = phi.shape[0], phi.ndim - 1
    if m < 1:
        raise ValueError("tensor needs at least one input index")

    X = random_unit_vectors(settings.restarts, n, settings.rng_seed)
    if starts is not None:
        X = np.vstack([np.atleast_2d(np.asarray(starts, dtype=float)), X])
    X = _normalize_rows(X)
    if len(X) == 0:
        raise ValueError("no starting vectors")
    S = len(X)

    alpha_max = conservative_shift(phi)
    alpha = np.full(S, alpha_max)
    # per-start floor on the reduced shift, raised whenever the iterate starts to oscillate
    alpha_floor = np.full(S, alpha_max * 2.0**-60)
    last_step = np.zeros_like(X)
    _, lam, G = _objective_and_gradient(phi, X)
    active = np.ones(S, dtype=bool)
    iters = np.zeros(S, dtype=int)
    history = [lam.copy()] if settings.record_history else None

    if alpha_max == 0.0:
        active[:] = False

    it = 0
    while active.any() and it < settings.max_iter:
        it += 1
        idx = np.flatnonzero(active)
        Xa, lam_a, G_a = X[idx], lam[idx], G[idx]
        if settings.shift_mode == "reduced":
            # floored so that doubling on a rejected step always climbs back
            a_try = np.maximum(alpha[idx] / 2.0, alpha_floor[idx])
            pending = np.ones(len(idx), dtype=bool)
            Xn = np.empty_like(Xa)
            lam_n = np.empty_like(lam_a)
            G_n = np.empty_like(G_a)
            while pending.any():
                p = np.flatnonzero(pending)
                cand = _normalize_rows(G_a[p] + a_try[p, None] * Xa[p])
                _, lc, gc = _objective_and_gradient(phi, cand)
                ok = (lc >= lam_a[p] * (1.0 - 1e-15)) | (a_try[p] >= alpha_max)
                done = p[ok]
                Xn[done], lam_n[done], G_n[done] = cand[ok], lc[ok], gc[ok]
                pending[done] = False
                retry = p[~ok]
                a_try[retry] = np.minimum(2.0 * a_try[retry], alpha_max)
            alpha[idx] = a_try
        else:
            Xn = _normalize_rows(G_a + alpha[idx, None] * Xa)
            _, lam_n, G_n = _objective_and_gradient(phi, Xn)

        dlam = np.abs(lam_n - lam_a)
        d = Xn - Xa
        step = np.linalg.norm(d, axis=1)
        if settings.shift_mode == "reduced":
            # a step reversing the previous one means the shift is too small to damp a 2-cycle
            back = np.einsum("ij,ij->i", d, last_step[idx]) < -0.5 * step * np.linalg.norm(last_step[idx], axis=1)
            alpha_floor[idx[back]] = np.minimum(2.0 * alpha[idx[back]], alpha_max)
            last_step[idx] = d
        conv = (dlam < settings.tol * np.maximum(1.0, lam_a)) & (step < settings.angle_tol)
        X[idx], lam[idx], G[idx] = Xn, lam_n, G_n
        iters[idx] = it
        active[idx[conv]] = False
        if settings.polish and it % 10 == 0:
            # slow linear tails (near-repeated eigenvalues): hand settled starts to Newton
            for i in idx[(step < 1e-3) & active[idx]]:
                x_p, ok = newton_polish(phi, X[i], max_move=0.1)
                if not ok:
                    continue
                _, lp, gp = _objective_and_gradient(phi, x_p[None, :])
                if lp[0] >= lam[i] * (1.0 - 1e-14):
                    X[i], lam[i], G[i] = x_p, lp[0], gp[0]
                    active[i] = False
            # starts that have merged (up to sign) only duplicate work
            live = np.flatnonzero(active)
            for a, i in enumerate(live):
                for j in live[:a]:
                    if active[j] and min(np.linalg.norm(X[i] - X[j]), np.linalg.norm(X[i] + X[j])) < 1e-8:
                        active[i] = False
                        break
        if settings.prune_step > 0:
            lead = lam.max()
            stuck = (step < settings.prune_step) & (lam_n < lead * (1.0 - 1e-6))
            active[idx[stuck]] = False
        if history is not None:
            history.append(lam.copy())

    best = _pick_best(X, lam)
    converged = bool(not active[best])
    if settings.polish and lam[best] > 0.0:
        x_p, ok = newton_polish(phi, X[best])
        if ok:
            _, lam_p, G_p = _objective_and_gradient(phi, x_p[None, :])
            if lam_p[0] >= lam[best] * (1.0 - 1e-9):
                X[best], lam[best], G[best] = x_p, lam_p[0], G_p[0]
                converged = True
    if not converged:
        warnings.warn(
            f"SS-HOPM did not converge in {settings.max_iter} iterations", ConvergenceWarning, stacklevel=2
        )
    sign = canonical_sign(X[best])
    v = sign * X[best]
    g_v = sign * G[best]  # G is odd in x
    lam_hat = float(v @ g_v)
    residual = float(np.linalg.norm(g_v - lam_hat * v))
    return EigenResult(
        lam=float(lam[best]),
        vector=v,
        iterations=int(iters[best]),
        converged=converged,
        restarts_used=S,
        residual=residual,
        shift=float(alpha[best]),
        history=None if history is None else np.array(history),
    )


def g_jacobian(phi: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Jacobian of ``G`` at ``x``: ``m M^T M + (m - 1) sum_i c_i Phi[i; :, :, x, ...]``."""
    n, m = phi.shape[0], phi.ndim - 1
    low = _power_rows(x[None, :], m - 1)[0]
    M = phi.reshape(n, n, -1) @ low
    c = M @ x
    J = m * M.T @ M
    if m >= 2:
        low2 = _power_rows(x[None, :], m - 2)[0]
        B = phi.reshape(n, n, n, -1) @ low2
        J += (m - 1) * np.tensordot(c, B, axes=1)
    return J


def newton_polish(phi: np.ndarray, x0: np.ndarray, max_iter: int = 20, max_move: float = 1e-4):
    """Newton iteration on ``G(x) = lam x, |x| = 1`` from a nearby SS-HOPM iterate.

    Returns ``(x, ok)``; ``ok`` is False if the iteration wandered more than
    ``max_move`` away from ``x0`` or failed to reduce the residual to
    rounding level.
    """
    n = phi.shape[0]
    x = np.array(x0, dtype=float)
    x /= np.linalg.norm(x)
    scale = max(float(np.sum(phi * phi)), 1e-300)
    for _ in range(max_iter):
        g = g_operator(phi, x)
        lam = float(x @ g)
        F = np.concatenate([g - lam * x, [0.5 * (1.0 - x @ x)]])
        if np.linalg.norm(F) <= 1e-15 * scale:
            break
        K = np.zeros((n + 1, n + 1))
        K[:n, :n] = g_jacobian(phi, x) - lam * np.eye(n)
        K[:n, n] = -x
        K[n, :n] = -x
        try:
            step = np.linalg.solve(K, -F)
        except np.linalg.LinAlgError:
            return np.asarray(x0), False
        x = x + step[:n]
        if not np.all(np.isfinite(x)):
            return np.asarray(x0), False
    x /= np.linalg.norm(x)
    moved = min(np.linalg.norm(x - x0), np.linalg.norm(x + x0))
    g = g_operator(phi, x)
    res = np.linalg.norm(g - (x @ g) * x)
    res0 = np.linalg.norm(g_operator(phi, x0) - (x0 @ g_operator(phi, x0)) * x0)
    return x, bool(moved <= max_move and res <= max(res0, 1e-13 * scale))


def _pick_best(X: np.ndarray, lam: np.ndarray) -> int:
    top = lam.max()
    ties = np.flatnonzero(lam >= top - 1e-12 * max(abs(top), 1e-300))
    if len(ties) == 1:
        return int(ties[0])
    keys = [_lex_key(X[i] * canonical_sign(X[i])) for i in ties]
    return int(ties[max(range(len(ties)), key=lambda j: keys[j])])


def dominant_right_singular_vector(stm) -> np.ndarray:
    """Dominant right singular vector, sign-canonical; ties broken lexicographically."""
    _, s, vt = np.linalg.svd(np.asarray(stm, dtype=float))
    tied = np.flatnonzero(s >= s[0] * (1.0 - 1e-12))
    cands = [vt[i] * canonical_sign(vt[i]) for i in tied]
    return max(cands, key=_lex_key)


def _finish(phi: np.ndarray, v: np.ndarray, method: str, epoch, eigen=None) -> Rank1Factors:
    m = phi.ndim - 1
    v = v / np.linalg.norm(v)
    v = v * canonical_sign(v)
    u = contract_full(phi, v)
    return Rank1Factors(m, u, v, method, epoch, eigen)


def build_r1dstt(h, k: int, m: int) -> Rank1Factors:
    """Rank-1 DSTT at epoch ``k``: STM dominant input direction, same for every order."""
    if h.order < m:
        raise ValueError(f"history stores order {h.order}, need {m}")
    v = dominant_right_singular_vector(h.stm[k])
    return _finish(h.stt(k, m), v, "dstt", k)


def build_r1odstt(phi, settings: EigenSettings | None = None, starts=None, epoch: int | None = None) -> Rank1Factors:
    """Frobenius-optimal rank-1 factors ``u (x) v^m`` of a (1,m)-tensor."""
    phi = np.asarray(getattr(phi, "entries", phi), dtype=float)
    eig = sshopm_squared(phi, settings, starts)
    return _finish(phi, eig.vector, "odstt", epoch, eig)


def build_r1odstt_at(h, k: int, m: int, settings: EigenSettings | None = None) -> Rank1Factors:
    """ODSTT factors at epoch ``k`` of a history, seeded with the STM's dominant direction."""
    start = dominant_right_singular_vector(h.stm[k])
    return build_r1odstt(h.stt(k, m), settings, starts=start[None, :], epoch=k)


def induced_2norm(phi, settings: EigenSettings | None = None) -> float:
    """``max_{|x| = 1} ||Phi x^m||_2``."""
    phi = np.asarray(getattr(phi, "entries", phi), dtype=float)
    if phi.ndim == 2:
        return float(np.linalg.norm(phi, 2))
    return math.sqrt(max(sshopm_squared(phi, settings).lam, 0.0))


def approximation_error(phi, factors: Rank1Factors) -> float:
    """``||Phi - u (x) v^m||_F`` by direct materialization."""
    phi = np.asarray(getattr(phi, "entries", phi), dtype=float)
    return frobenius_norm(phi - factors.tensor().entries)


def normalized_error(phi, factors: Rank1Factors) -> float:
    return approximation_error(phi, factors) / frobenius_norm(phi)


def angle_between(v1, v2) -> float:
    """Angle in degrees between two unit directions, folded into [0, 90]."""
    a = np.asarray(v1, dtype=float)
    b = np.asarray(v2, dtype=float)
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    if a @ b < 0:
        b = -b
    # half-angle form keeps full relative accuracy for nearly parallel inputs
    return math.degrees(2.0 * math.atan2(np.linalg.norm(a - b), np.linalg.norm(a + b)))
