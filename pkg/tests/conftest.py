import numpy as np
import pytest

from dstt_kit.harness.config import ScenarioConfig
from dstt_kit.harness.studies import Scenario
from dstt_kit.stt_engine import integrate_stts, propagate_perturbation_stt, propagate_state
from dstt_kit.tensor_core import symmetrize_inputs

_SCENARIOS: dict = {}


def bundled_scenario(name: str) -> Scenario:
    """Session-wide cache so every test reuses one integration per bundled config."""
    if name not in _SCENARIOS:
        _SCENARIOS[name] = Scenario(ScenarioConfig.bundled(name))
    return _SCENARIOS[name]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_stt(rng, n: int, m: int) -> np.ndarray:
    return symmetrize_inputs(rng.standard_normal((n,) * (m + 1)))


@pytest.fixture(scope="session")
def aero():
    return bundled_scenario("uranus_aerocapture")


@pytest.fixture(scope="session")
def leo():
    return bundled_scenario("leo")


@pytest.fixture(scope="session")
def nrho():
    return bundled_scenario("nrho")


def fibonacci_sphere(count: int) -> np.ndarray:
    """Near-uniform points on the unit 2-sphere (golden-angle spiral)."""
    k = np.arange(count) + 0.5
    z = 1.0 - 2.0 * k / count
    rho = np.sqrt(1.0 - z * z)
    ang = np.pi * (3.0 - np.sqrt(5.0)) * k
    return np.column_stack([rho * np.cos(ang), rho * np.sin(ang), z])


def grid_max_objective(phi: np.ndarray, points: np.ndarray, chunk: int = 100_000) -> float:
    """max over rows x of ``|phi x^m|^2`` by brute force."""
    m = phi.ndim - 1
    best = 0.0
    for s in range(0, len(points), chunk):
        X = points[s:s + chunk]
        out = phi
        if m == 3:
            out = np.einsum("iabc,sa,sb,sc->si", phi, X, X, X)
        elif m == 2:
            out = np.einsum("iab,sa,sb->si", phi, X, X)
        else:
            out = X @ phi.T
        best = max(best, float(np.max(np.einsum("si,si->s", out, out))))
    return best


def truncation_ratios(model, x0, t, order, directions, scale):
    """Truncation error at ``scale`` over the error at ``scale / 2``, per direction."""
    h = integrate_stts(model, x0, [0.0, t], order=order)
    ref = h.states[-1]
    out = []
    for d in directions:
        errs = []
        for s in (scale, scale / 2):
            dx = s * d
            truth = propagate_state(model, x0 + dx, [0.0, t])[-1] - ref
            errs.append(np.linalg.norm(truth - propagate_perturbation_stt(h, 1, dx, order)))
        out.append(errs[0] / errs[1])
    return np.array(out)
