"""Reference trajectory + state transition tensor integration and perturbation mapping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from . import jets
from .dynamics import DomainError, Model
from .tensor_core import (
    DimensionError,
    contract_full,
    read_tensor_csv,
    symmetrize_inputs,
    write_tensor_csv,
)


class IntegrationError(RuntimeError):
    """Integration failed (step-size underflow or the state left the model's domain)."""


@dataclass(frozen=True)
class IntegratorSettings:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-12
    max_step: float = math.inf
    method: str = "DOP853"

    def __post_init__(self):
        for tol in (self.rel_tol, self.abs_tol):
            if not 0.0 < tol <= 1e-3:
                raise ValueError(f"tolerances must lie in (0, 1e-3], got {tol}")


@dataclass(frozen=True)
class SttHistory:
    """Reference states and STTs sampled on a time grid (all maps from ``times[0]``)."""

    times: np.ndarray
    states: np.ndarray
    stm: np.ndarray
    stt2: np.ndarray | None = None
    stt3: np.ndarray | None = None
    order: int = 1
    model_name: str = field(default="", compare=False)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def n(self) -> int:
        return self.states.shape[1]

    def stt(self, k: int, p: int) -> np.ndarray:
        """Order-``p`` tensor (``p = 1`` is the STM) at epoch index ``k``."""
        if p > self.order:
            raise ValueError(f"order {p} requested but only {self.order} stored")
        return (self.stm, self.stt2, self.stt3)[p - 1][k]

    def write_csv(self, directory) -> None:
        """One CSV per tensor per epoch plus ``times.csv``."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "times.csv", "w") as fh:
            fh.write("k,time," + ",".join(f"x{i + 1}" for i in range(self.n)) + "\n")
            for k, (t, x) in enumerate(zip(self.times, self.states)):
                fh.write(f"{k},{t:.17g}," + ",".join(f"{v:.17g}" for v in x) + "\n")
        for k in range(len(self)):
            for p, name in ((1, "stm"), (2, "stt2"), (3, "stt3")):
                if p <= self.order:
                    write_tensor_csv(self.stt(k, p), d / f"{name}_{k}.csv")

    @classmethod
    def read_csv(cls, directory) -> "SttHistory":
        d = Path(directory)
        raw = np.loadtxt(d / "times.csv", delimiter=",", skiprows=1, ndmin=2)
        times, states = raw[:, 1], raw[:, 2:]
        order = max(p for p, name in ((1, "stm"), (2, "stt2"), (3, "stt3")) if (d / f"{name}_0.csv").exists())
        tensors = [
            np.stack([read_tensor_csv(d / f"{name}_{k}.csv") for k in range(len(times))])
            for name in ("stm", "stt2", "stt3")[:order]
        ]
        tensors += [None] * (3 - order)
        return cls(times, states, tensors[0], tensors[1], tensors[2], order)


def _layout(n: int, order: int):
    sizes = [n] + [n ** (p + 1) for p in range(1, order + 1)]
    return np.cumsum([0] + sizes)


def _variational_rhs(model: Model, order: int):
    n = model.n
    offs = _layout(n, order)

    def rhs(t, y):
        x = y[:n]
        try:
            out = model.rhs(jets.seed(x, order))
        except (DomainError, ZeroDivisionError, jets.JetDomainError) as exc:
            raise IntegrationError(f"t={t:.6g}: {exc}") from exc
        A1, A2, A3 = jets.extract_partials(out, order)
        dy = np.empty_like(y)
        dy[:n] = [j.value for j in out]

        phi1 = y[offs[1]:offs[2]].reshape(n, n)
        dy[offs[1]:offs[2]] = (A1 @ phi1).ravel()
        if order >= 2:
            phi2 = y[offs[2]:offs[3]].reshape(n, n, n)
            # W[i, a, b] = A2[i; alpha, b] phi1[alpha, a]
            W = np.einsum("ixb,xa->iab", A2, phi1)
            d2 = np.tensordot(A1, phi2, axes=1) + W @ phi1
            dy[offs[2]:offs[3]] = d2.ravel()
        if order >= 3:
            phi3 = y[offs[3]:offs[4]].reshape(n, n, n, n)
            S = np.tensordot(W, phi2, axes=([2], [0]))
            d3 = np.tensordot(A1, phi3, axes=1)
            d3 += S + S.transpose(0, 2, 1, 3) + S.transpose(0, 2, 3, 1)
            T = np.tensordot(A3, phi1, axes=([3], [0]))  # i, x, y, c
            T = np.tensordot(T, phi1, axes=([2], [0]))  # i, x, c, b
            T = np.tensordot(T, phi1, axes=([1], [0]))  # i, c, b, a
            d3 += T.transpose(0, 3, 2, 1)
            dy[offs[3]:offs[4]] = d3.ravel()
        return dy

    return rhs


def integrate_stts(model: Model, x0, grid, order: int = 2, settings: IntegratorSettings | None = None) -> SttHistory:
    """Integrate the state jointly with its first ``order`` state transition tensors.

    ``x0`` is nondimensional; ``grid`` is an increasing array of nondimensional
    sample times whose first entry is the initial epoch.
    """
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    settings = settings or IntegratorSettings()
    grid = np.asarray(grid, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    n = model.n
    if x0.shape != (n,):
        raise DimensionError(f"initial state must have length {n}")
    offs = _layout(n, order)
    y0 = np.zeros(offs[-1])
    y0[:n] = x0
    y0[offs[1]:offs[2]] = np.eye(n).ravel()

    if len(grid) == 1:
        ys = y0[:, None]
    else:
        sol = solve_ivp(
            _variational_rhs(model, order),
            (grid[0], grid[-1]),
            y0,
            method=settings.method,
            t_eval=grid,
            rtol=settings.rel_tol,
            atol=settings.abs_tol,
            max_step=settings.max_step,
        )
        if sol.status != 0:
            raise IntegrationError(sol.message)
        ys = sol.y

    K = len(grid)
    states = ys[:n].T.copy()
    stm = ys[offs[1]:offs[2]].T.reshape(K, n, n).copy()
    stt2 = stt3 = None
    if order >= 2:
        stt2 = np.stack([symmetrize_inputs(t) for t in ys[offs[2]:offs[3]].T.reshape(K, n, n, n)])
    if order >= 3:
        stt3 = np.stack([symmetrize_inputs(t) for t in ys[offs[3]:offs[4]].T.reshape(K, n, n, n, n)])
    return SttHistory(grid.copy(), states, stm, stt2, stt3, order, model.name)


def propagate_state(model: Model, x0, grid, settings: IntegratorSettings | None = None) -> np.ndarray:
    """Plain nonlinear propagation of ``x0``; returns states on ``grid`` (shape ``K x n``)."""
    settings = settings or IntegratorSettings()
    grid = np.asarray(grid, dtype=float)

    def rhs(t, x):
        try:
            return model(t, x)
        except DomainError as exc:
            raise IntegrationError(f"t={t:.6g}: {exc}") from exc

    sol = solve_ivp(
        rhs,
        (grid[0], grid[-1]),
        np.asarray(x0, dtype=float),
        method=settings.method,
        t_eval=grid,
        rtol=settings.rel_tol,
        atol=settings.abs_tol,
        max_step=settings.max_step,
    )
    if sol.status != 0:
        raise IntegrationError(sol.message)
    return sol.y.T


def propagate_perturbation_stt(h: SttHistory, k: int, dx0, order: int) -> np.ndarray:
    """Taylor-series map of an initial deviation through the stored STTs."""
    if order > h.order:
        raise ValueError(f"order {order} exceeds stored order {h.order}")
    dx0 = np.asarray(dx0, dtype=float)
    out = np.zeros(h.n)
    for p in range(1, order + 1):
        out += contract_full(h.stt(k, p), dx0) / math.factorial(p)
    return out


def propagate_perturbation_r1(h: SttHistory, k: int, dx0, factors2, factors3=None) -> np.ndarray:
    """Full STM plus rank-1 higher-order terms ``u (v . dx0)^p / p!``."""
    dx0 = np.asarray(dx0, dtype=float)
    out = h.stm[k] @ dx0
    for f in (factors2, factors3):
        if f is None:
            continue
        if f.epoch is not None and f.epoch != k:
            raise ValueError(f"factors built at epoch {f.epoch}, requested epoch {k}")
        out = out + f.u * (f.v @ dx0) ** f.m / math.factorial(f.m)
    return out
