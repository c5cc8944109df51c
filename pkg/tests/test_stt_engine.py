import math

import numpy as np
import pytest

from conftest import truncation_ratios
from dstt_kit.dynamics import aerocapture_model, custom_model, two_body_model
from dstt_kit.rank1_factor import EigenSettings, Rank1Factors, build_r1dstt, build_r1odstt
from dstt_kit.stt_engine import (
    IntegrationError,
    IntegratorSettings,
    SttHistory,
    integrate_stts,
    propagate_perturbation_r1,
    propagate_perturbation_stt,
    propagate_state,
)
from dstt_kit.tensor_core import contract_full, frobenius_norm, rank1_outer, symmetry_defect


def leo_x0():
    model = two_body_model()
    return model, model.nondimensionalize([6678.137, 0, 0, 0, 7.725760232077136, 0])


def test_linear_system():
    a, b = -0.3, 0.5
    model = custom_model(lambda x: [a * x[0], b * x[1]], 2)
    h = integrate_stts(model, [1.0, 2.0], np.linspace(0, 2, 5), order=3)
    for t, stm in zip(h.times, h.stm):
        np.testing.assert_allclose(stm, np.diag([math.exp(a * t), math.exp(b * t)]), rtol=1e-11)
    assert not h.stt2.any() and not h.stt3.any()


def test_scalar_quadratic_flow():
    model = custom_model(lambda x: [x[0] * x[0]], 1)
    h = integrate_stts(model, [0.1], [0.0, 1.0], order=3)
    x0, t = 0.1, 1.0
    assert h.states[-1, 0] == pytest.approx(x0 / (1 - t * x0), rel=1e-11)
    assert h.stm[-1, 0, 0] == pytest.approx(1 / (1 - t * x0) ** 2, rel=1e-10)
    assert h.stt2[-1, 0, 0, 0] == pytest.approx(2 * t / (1 - t * x0) ** 3, rel=1e-10)
    assert h.stt3[-1, 0, 0, 0, 0] == pytest.approx(6 * t**2 / (1 - t * x0) ** 4, rel=1e-10)
    assert round(h.stm[-1, 0, 0], 6) == 1.234568
    assert round(h.stt2[-1, 0, 0, 0], 6) == 2.743484
    assert h.stt3[-1, 0, 0, 0, 0] == pytest.approx(9.144948, abs=1e-6)


def test_initial_values_and_symmetry():
    model, x0 = leo_x0()
    h = integrate_stts(model, x0, np.linspace(0, 2.0, 6), order=3)
    np.testing.assert_array_equal(h.stm[0], np.eye(6))
    assert not h.stt2[0].any() and not h.stt3[0].any()
    for k in range(len(h)):
        assert symmetry_defect(h.stt2[k]) < 1e-12 * max(1.0, np.abs(h.stt2[k]).max())
        assert symmetry_defect(h.stt3[k]) < 1e-12 * max(1.0, np.abs(h.stt3[k]).max())


def test_two_body_symplectic():
    model, x0 = leo_x0()
    r0 = np.linalg.norm(x0[:3])
    T = 2 * math.pi * r0**1.5
    h = integrate_stts(model, x0, np.linspace(0, 3 * T, 31), order=1)
    Jm = np.block([[np.zeros((3, 3)), np.eye(3)], [-np.eye(3), np.zeros((3, 3))]])
    worst = max(np.linalg.norm(P.T @ Jm @ P - Jm) for P in h.stm)
    assert worst < 1e-8


def test_stm_matches_finite_differences():
    model, x0 = leo_x0()
    grid = [0.0, 2.5]
    h = integrate_stts(model, x0, grid, order=1)
    eps = 1e-6
    fd = np.empty((6, 6))
    for j in range(6):
        e = np.zeros(6)
        e[j] = eps
        fd[:, j] = (propagate_state(model, x0 + e, grid)[-1] - propagate_state(model, x0 - e, grid)[-1]) / (2 * eps)
    np.testing.assert_allclose(h.stm[-1], fd, rtol=1e-7, atol=1e-7 * np.abs(fd).max())


def test_stm_chain_rule():
    model, x0 = leo_x0()
    h = integrate_stts(model, x0, [0.0, 1.3, 3.1], order=2)
    h2 = integrate_stts(model, h.states[1], [1.3, 3.1], order=2)
    composed = h2.stm[-1] @ h.stm[1]
    np.testing.assert_allclose(composed, h.stm[2], rtol=1e-9, atol=1e-9 * np.abs(h.stm[2]).max())
    # second order: Phi2(t2,t0) = Phi1(t2,t1) Phi2(t1,t0) + Phi2(t2,t1)[Phi1(t1,t0), Phi1(t1,t0)]
    a, b = h.stm[1], h.stt2[1]
    c, d = h2.stm[-1], h2.stt2[-1]
    comp2 = np.tensordot(c, b, axes=1) + np.einsum("ixy,xa,yb->iab", d, a, a)
    np.testing.assert_allclose(comp2, h.stt2[2], rtol=1e-8, atol=1e-8 * np.abs(comp2).max())


def test_tolerance_convergence():
    model, x0 = leo_x0()
    grid = [0.0, 6.0]
    loose = integrate_stts(model, x0, grid, 1, IntegratorSettings(rel_tol=1e-9, abs_tol=1e-9)).stm[-1]
    tight = integrate_stts(model, x0, grid, 1, IntegratorSettings(rel_tol=1e-10, abs_tol=1e-10)).stm[-1]
    assert np.abs(loose - tight).max() < 10 * 1e-9 * max(1.0, np.abs(tight).max())


def test_settings_validation():
    with pytest.raises(ValueError):
        IntegratorSettings(rel_tol=0.0)
    with pytest.raises(ValueError):
        IntegratorSettings(abs_tol=1e-2)
    model, x0 = leo_x0()
    with pytest.raises(ValueError):
        integrate_stts(model, x0, [0, 1], order=4)


def test_domain_exit_raises():
    model = aerocapture_model()
    x0 = np.array([1.01, 0.0, 0.0, 0.5, -0.5, 0.0, -700.0])
    with pytest.raises(IntegrationError):
        integrate_stts(model, x0, [0.0, 5.0], order=1)


@pytest.fixture(scope="module")
def leo_history():
    model, x0 = leo_x0()
    return integrate_stts(model, x0, np.linspace(0, 4.0, 5), order=3)


def test_perturbation_trivial(leo_history, rng):
    h = leo_history
    assert not propagate_perturbation_stt(h, 3, np.zeros(6), 3).any()
    dx = rng.standard_normal(6)
    np.testing.assert_array_equal(propagate_perturbation_stt(h, 3, dx, 1), h.stm[3] @ dx)
    with pytest.raises(ValueError):
        propagate_perturbation_stt(integrate_stts(*leo_x0(), [0, 1], order=2), 1, dx, 3)


def test_perturbation_r1_exact_rank1(leo_history, rng):
    h = leo_history
    n = h.n
    u2, u3 = rng.standard_normal((2, n))
    v2, v3 = (w / np.linalg.norm(w) for w in rng.standard_normal((2, n)))
    fake = SttHistory(h.times, h.states, h.stm, np.stack([rank1_outer(u2, v2, 2).entries] * len(h)), np.stack([rank1_outer(u3, v3, 3).entries] * len(h)), 3)
    f2 = Rank1Factors(2, u2, v2, "odstt", 2)
    f3 = Rank1Factors(3, u3, v3, "odstt", 2)
    dx = 1e-2 * rng.standard_normal(n)
    np.testing.assert_allclose(propagate_perturbation_r1(fake, 2, dx, f2, f3), propagate_perturbation_stt(fake, 2, dx, 3), rtol=1e-13)


def test_perturbation_r1_orthogonal(leo_history, rng):
    h = leo_history
    f2 = build_r1dstt(h, 2, 2)
    dx = rng.standard_normal(6)
    dx -= (dx @ f2.v) * f2.v
    np.testing.assert_allclose(propagate_perturbation_r1(h, 2, dx, f2), h.stm[2] @ dx, rtol=1e-13, atol=1e-15)


def test_perturbation_r1_epoch_mismatch(leo_history):
    f2 = build_r1dstt(leo_history, 2, 2)
    with pytest.raises(ValueError):
        propagate_perturbation_r1(leo_history, 3, np.ones(6), f2)


def test_perturbation_r1_bound(leo_history, rng):
    h = leo_history
    for k in range(1, len(h)):
        f2 = build_r1odstt(h.stt2[k], EigenSettings(), epoch=k)
        bound = frobenius_norm(h.stt2[k] - f2.tensor().entries) / 2
        for _ in range(20):
            dx = rng.standard_normal(6)
            dx /= np.linalg.norm(dx)
            gap = np.linalg.norm(propagate_perturbation_r1(h, k, dx, f2) - propagate_perturbation_stt(h, k, dx, 2))
            assert gap <= bound * (1 + 1e-12)


@pytest.mark.parametrize("order,lo,hi", [(2, 6, 10), (3, 12, 20)])
def test_order_of_accuracy_two_body(order, lo, hi):
    model, x0 = leo_x0()
    dirs = np.random.default_rng(7).standard_normal((5, 6))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    ratios = truncation_ratios(model, x0, 2.0, order, dirs, 1e-2)
    assert np.all((ratios >= lo) & (ratios <= hi)), ratios


def test_history_csv_round_trip(tmp_path, leo_history):
    leo_history.write_csv(tmp_path)
    assert (tmp_path / "stt3_4.csv").exists()
    back = SttHistory.read_csv(tmp_path)
    np.testing.assert_array_equal(back.stt3, leo_history.stt3)
    np.testing.assert_array_equal(back.times, leo_history.times)
    assert back.order == 3


def test_single_point_grid():
    model, x0 = leo_x0()
    h = integrate_stts(model, x0, [0.0], order=2)
    assert len(h) == 1 and np.array_equal(h.stm[0], np.eye(6))


def test_contract_consistency(leo_history, rng):
    h = leo_history
    dx = rng.standard_normal(6) * 1e-3
    manual = h.stm[4] @ dx + contract_full(h.stt2[4], dx) / 2 + contract_full(h.stt3[4], dx) / 6
    np.testing.assert_allclose(propagate_perturbation_stt(h, 4, dx, 3), manual, rtol=1e-14)
