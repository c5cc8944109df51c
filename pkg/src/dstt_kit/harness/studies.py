"""Experiment pipelines: integrate, factor per epoch, and tabulate study metrics."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..moments import (
    GaussianState,
    covariance_error_metric,
    propagate_moments_r1,
    propagate_moments_stt,
)
from ..rank1_factor import (
    Rank1Factors,
    build_r1dstt,
    build_r1odstt,
    build_r1odstt_at,
    angle_between,
    normalized_error,
    random_unit_vectors,
    sshopm_squared,
)
from ..stt_engine import SttHistory, integrate_stts
from ..tensor_core import frobenius_norm
from .config import ScenarioConfig

log = logging.getLogger(__name__)


def thread_count() -> int:
    env = os.environ.get("DSTT_KIT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def epoch_map(fn, epochs):
    """Ordered map over epochs, fanned out to at most ``DSTT_KIT_THREADS`` workers."""
    workers = thread_count()
    if workers == 1:
        return [fn(k) for k in epochs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, epochs))


@dataclass
class ExperimentResult:
    """Per-epoch table bound for CSV: ``columns`` are ``(name, unit)`` pairs."""

    name: str
    columns: list
    rows: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        idx = [c[0] for c in self.columns].index(name)
        return np.array([r[idx] for r in self.rows], dtype=float)

    def to_csv(self) -> str:
        lines = [",".join(f"{n} [{u}]" for n, u in self.columns)]
        for row in self.rows:
            lines.append(",".join(_fmt(v) for v in row))
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_csv())


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and np.isnan(v)):
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


class Scenario:
    """Lazily integrated scenario with cached per-epoch rank-1 factors."""

    def __init__(self, cfg: ScenarioConfig, order: int | None = None):
        self.cfg = cfg
        self.model = cfg.model()
        self.order = order or cfg.stt_order
        self.eigen = cfg.eigen()
        self._history: SttHistory | None = None
        self._factors: dict = {}

    @property
    def history(self) -> SttHistory:
        if self._history is None:
            log.info("integrating %s to order %d", self.cfg.name, self.order)
            self._history = integrate_stts(
                self.model,
                self.cfg.initial_state(),
                self.cfg.time_grid(),
                self.order,
                self.cfg.integrator(),
            )
        return self._history

    @property
    def epochs(self) -> list:
        """Sample epochs after the initial one (the STTs vanish at ``t0``)."""
        return list(range(1, len(self.history)))

    def factors(self, method: str, m: int) -> list:
        """Rank-1 factors for every epoch (index 0 is ``None``)."""
        key = (method, m)
        if key not in self._factors:
            h = self.history
            if method == "dstt":
                fn = lambda k: build_r1dstt(h, k, m)  # noqa: E731
            else:
                fn = lambda k: build_r1odstt_at(h, k, m, self.eigen)  # noqa: E731
            self._factors[key] = [None] + epoch_map(fn, self.epochs)
        return self._factors[key]

    def times(self, k: int) -> tuple:
        t = float(self.history.times[k])
        return t, t * self.model.time_unit


_TIME_COLUMNS = [("t_nd", "nondimensional"), ("t", "s")]


def run_frobenius_study(scn: Scenario) -> ExperimentResult:
    """Normalized Frobenius error of DSTT and ODSTT at each epoch, plus input-direction angle."""
    h = scn.history
    orders = [m for m in (2, 3) if m <= scn.order]
    cols = list(_TIME_COLUMNS)
    for m in orders:
        cols += [
            (f"dstt_err{m}", "-"),
            (f"odstt_err{m}", "-"),
            (f"angle{m}", "deg"),
        ]
    res = ExperimentResult("frobenius", cols)
    facs = {(meth, m): scn.factors(meth, m) for m in orders for meth in ("dstt", "odstt")}
    for k in scn.epochs:
        row = list(scn.times(k))
        for m in orders:
            phi = h.stt(k, m)
            d, o = facs[("dstt", m)][k], facs[("odstt", m)][k]
            row += [normalized_error(phi, d), normalized_error(phi, o), angle_between(d.v, o.v)]
        res.rows.append(row)
    return res


def run_covariance_study(scn: Scenario) -> ExperimentResult:
    """Covariance error of rank-1 propagation relative to the full STT series."""
    h = scn.history
    P0 = scn.cfg.initial_covariance()
    g0 = GaussianState(np.zeros(h.n), P0)
    orders = [m for m in (2, 3) if m <= scn.order]
    cols = list(_TIME_COLUMNS)
    for m in orders:
        cols += [(f"dstt_cov{m}", "-"), (f"odstt_cov{m}", "-")]
    res = ExperimentResult("covariance", cols)
    facs = {(meth, m): scn.factors(meth, m) for m in orders for meth in ("dstt", "odstt")}

    def metric(P_ref, P_apx):
        if np.linalg.norm(P_ref) == 0.0:
            return 0.0 if np.linalg.norm(P_apx) == 0.0 else float("inf")
        return covariance_error_metric(P_ref, P_apx)

    def one(k):
        row = list(scn.times(k))
        for m in orders:
            ref = propagate_moments_stt(h, k, g0, m).cov
            for meth in ("dstt", "odstt"):
                f2 = facs[(meth, 2)][k]
                f3 = facs[(meth, 3)][k] if m == 3 else None
                row.append(metric(ref, propagate_moments_r1(h, k, g0, f2, f3).cov))
        return row

    res.rows = epoch_map(one, scn.epochs)
    return res


def bound_samples(n: int, nsamples: int, seed: int) -> np.ndarray:
    """Standard normal draws normalized onto the unit sphere."""
    return random_unit_vectors(nsamples, n, seed) if nsamples else np.zeros((0, n))


def run_bound_validation(scn: Scenario, nsamples: int | None = None, plant_maximizer: bool | None = None) -> ExperimentResult:
    """Worst sampled second-order ODSTT error against the induced 2-norm and Frobenius bounds."""
    h = scn.history
    bound = scn.cfg.bound
    nsamples = bound["nsamples"] if nsamples is None else nsamples
    plant = bound["plant_maximizer"] if plant_maximizer is None else plant_maximizer
    X = bound_samples(h.n, nsamples, scn.cfg.rng_seed)
    odstt = scn.factors("odstt", 2)
    cols = list(_TIME_COLUMNS) + [
        ("max_sample_error", "nondimensional"),
        ("induced_2norm", "nondimensional"),
        ("frobenius_norm", "nondimensional"),
        ("chain_ok", "bool"),
    ]
    res = ExperimentResult("bound", cols)

    def one(k):
        f = odstt[k]
        err = h.stt(k, 2) - f.tensor().entries
        eig = sshopm_squared(err, scn.eigen)
        induced = float(np.sqrt(max(eig.lam, 0.0)))
        fro = frobenius_norm(err)
        samples = np.vstack([X, eig.vector[None, :]]) if plant else X
        if len(samples):
            # ||E x x|| for every sample row
            Ex = np.einsum("iab,sa,sb->si", err, samples, samples)
            worst = float(np.max(np.linalg.norm(Ex, axis=1)))
        else:
            worst = float("nan")
        slack = 1e-12 * max(fro, 1e-300)
        ok = (np.isnan(worst) or worst <= induced + slack) and induced <= fro + slack
        return list(scn.times(k)) + [worst, induced, fro, int(ok)]

    res.rows = epoch_map(one, scn.epochs)
    return res


STUDIES = {
    "frobenius": run_frobenius_study,
    "covariance": run_covariance_study,
    "bound": run_bound_validation,
}
