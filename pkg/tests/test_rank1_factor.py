import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from conftest import fibonacci_sphere, grid_max_objective, random_stt
from dstt_kit.rank1_factor import (
    ConvergenceWarning,
    EigenSettings,
    Rank1Factors,
    angle_between,
    approximation_error,
    build_r1dstt,
    build_r1odstt,
    build_r1odstt_at,
    canonical_sign,
    dominant_right_singular_vector,
    g_operator,
    induced_2norm,
    sshopm_squared,
)
from dstt_kit.stt_engine import SttHistory
from dstt_kit.tensor_core import (
    contract_full,
    frobenius_norm,
    rank1_outer,
    symmetric_contract,
    symmetrized_square,
)


def unit(rng, n):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def history_of(stm, stt2=None, stt3=None):
    n = stm.shape[0]
    zero = np.zeros((n,) * 3)
    order = 1 + (stt2 is not None) + (stt3 is not None)
    return SttHistory(
        np.array([0.0, 1.0]),
        np.zeros((2, n)),
        np.stack([np.eye(n), stm]),
        None if stt2 is None else np.stack([zero, stt2]),
        None if stt3 is None else np.stack([np.zeros((n,) * 4), stt3]),
        order,
    )


def test_dstt_dominant_axis(rng):
    h = history_of(np.diag([3.0, 1.0]), random_stt(rng, 2, 2))
    f = build_r1dstt(h, 1, 2)
    np.testing.assert_allclose(f.v, [1.0, 0.0], atol=1e-15)
    assert f.method == "dstt" and f.epoch == 1
    np.testing.assert_allclose(f.u, h.stt2[1][:, 0, 0], rtol=1e-14)


def test_dstt_identity_tie_break(rng):
    h = history_of(np.eye(3), random_stt(rng, 3, 2))
    vs = {tuple(build_r1dstt(h, 1, 2).v) for _ in range(3)}
    assert vs == {(1.0, 0.0, 0.0)}


def test_dstt_same_direction_for_both_orders(rng):
    stm = rng.standard_normal((4, 4))
    h = history_of(stm, random_stt(rng, 4, 2), random_stt(rng, 4, 3))
    np.testing.assert_array_equal(build_r1dstt(h, 1, 2).v, build_r1dstt(h, 1, 3).v)


def test_dstt_matches_loop_on_leo(leo):
    h = leo.history
    k = 50
    f = build_r1dstt(h, k, 2)
    phi, v = h.stt2[k], f.v
    ref = np.zeros(6)
    for i, a, b in itertools.product(range(6), repeat=3):
        ref[i] += phi[i, a, b] * v[a] * v[b]
    np.testing.assert_allclose(f.u, ref, rtol=1e-12, atol=1e-14 * np.abs(ref).max())


@pytest.mark.parametrize("m", [2, 3])
def test_sshopm_exact_rank1(rng, m):
    u, v = rng.standard_normal(4), unit(rng, 4)
    res = sshopm_squared(rank1_outer(u, v, m).entries)
    assert res.converged
    assert res.lam == pytest.approx(u @ u, rel=1e-12)
    assert angle_between(res.vector, v) < 1e-8


def test_g_matches_materialized_square(rng):
    for n, m in ((3, 2), (2, 3), (3, 3)):
        A = random_stt(rng, n, m)
        S = symmetrized_square(A)
        for _ in range(3):
            x = unit(rng, n)
            np.testing.assert_allclose(g_operator(A, x), symmetric_contract(S, x, 2 * m - 1), rtol=1e-12, atol=1e-12)


def test_sshopm_lift_structure_grid():
    rng = np.random.default_rng(3)
    M = rng.standard_normal((3, 3))
    phi = np.einsum("ia,ab->iab", M, np.eye(3))  # Phi[i; a, b] = M[i, a] delta[a, b]
    res = sshopm_squared(phi)
    best = grid_max_objective(phi, fibonacci_sphere(1_000_000))
    assert res.lam >= best * (1 - 1e-12)
    assert res.lam == pytest.approx(best, rel=1e-4)


def test_sshopm_random_grid():
    rng = np.random.default_rng(4)
    phi = random_stt(rng, 3, 2)
    res = sshopm_squared(phi)
    best = grid_max_objective(phi, fibonacci_sphere(1_000_000))
    assert res.lam == pytest.approx(best, rel=1e-4)
    assert induced_2norm(phi) == pytest.approx(np.sqrt(best), rel=1e-4)


@pytest.mark.filterwarnings("ignore::dstt_kit.rank1_factor.ConvergenceWarning")
def test_conservative_monotone_history(rng):
    for m in (2, 3):
        phi = random_stt(rng, 4, m)
        res = sshopm_squared(phi, EigenSettings(shift_mode="conservative", record_history=True, polish=False, max_iter=400))
        H = res.history
        assert np.all(np.diff(H, axis=0) >= -1e-13 * np.abs(H[1:]))


def test_reduced_monotone_history(rng):
    phi = random_stt(rng, 4, 3)
    res = sshopm_squared(phi, EigenSettings(record_history=True, polish=False))
    H = res.history
    assert np.all(np.diff(H, axis=0) >= -1e-13 * np.abs(H[1:]))


def test_odstt_one_dimensional_scan():
    rng = np.random.default_rng(5)
    phi = random_stt(rng, 2, 2)

    def neg(t):
        return -float(np.sum(contract_full(phi, [np.cos(t), np.sin(t)]) ** 2))

    ts = np.linspace(0, np.pi, 20001)
    t0 = ts[np.argmin([neg(t) for t in ts])]
    opt = minimize_scalar(neg, bounds=(t0 - 1e-3, t0 + 1e-3), method="bounded", options={"xatol": 1e-12})
    v_ref = np.array([np.cos(opt.x), np.sin(opt.x)])
    f = build_r1odstt(phi)
    assert angle_between(f.v, v_ref) < np.degrees(1e-6)


@pytest.mark.parametrize("m", [2, 3])
def test_odstt_beats_dstt(rng, m):
    for _ in range(10):
        phi = random_stt(rng, 5, m)
        h = history_of(rng.standard_normal((5, 5)), *((phi, None) if m == 2 else (random_stt(rng, 5, 2), phi)))
        d = build_r1dstt(h, 1, m)
        o = build_r1odstt_at(h, 1, m)
        assert approximation_error(phi, o) <= approximation_error(phi, d) + 1e-10 * frobenius_norm(phi)


@pytest.mark.parametrize("m", [2, 3])
def test_frobenius_error_identity(rng, m):
    phi = random_stt(rng, 6, m)
    f = build_r1odstt(phi)
    lhs = approximation_error(phi, f) ** 2
    assert lhs == pytest.approx(frobenius_norm(phi) ** 2 - f.u @ f.u, rel=1e-10)


def test_odstt_exact_rank1_zero_error(rng):
    u, v = rng.standard_normal(4), unit(rng, 4)
    phi = rank1_outer(u, v, 3).entries
    assert approximation_error(phi, build_r1odstt(phi)) <= 1e-12 * frobenius_norm(phi)


def test_factor_invariants(rng):
    for m in (2, 3):
        f = build_r1odstt(random_stt(rng, 5, m))
        assert abs(np.linalg.norm(f.v) - 1) < 1e-12
        assert canonical_sign(f.v) == 1.0
        assert f.method == "odstt"
        assert f.eigen.lam >= 0


def test_eigen_residual(rng):
    for m in (2, 3):
        phi = random_stt(rng, 4, m)
        res = sshopm_squared(phi)
        v = res.vector
        assert np.linalg.norm(g_operator(phi, v) - res.lam * v) < 1e-9 * max(1.0, res.lam)
        assert res.converged and res.residual < 1e-9 * max(1.0, res.lam)
        assert res.lam >= 0


def test_induced_norm_cases(rng):
    M = rng.standard_normal((4, 4))
    assert induced_2norm(M) == pytest.approx(np.linalg.svd(M, compute_uv=False)[0], rel=1e-14)
    u, v = rng.standard_normal(4), unit(rng, 4)
    assert induced_2norm(rank1_outer(u, v, 2)) == pytest.approx(np.linalg.norm(u), rel=1e-12)
    phi = random_stt(rng, 4, 3)
    assert induced_2norm(phi) <= frobenius_norm(phi)


def test_angle_between():
    e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert angle_between(e1, e1) == 0.0
    assert angle_between(e1, e2) == pytest.approx(90.0)
    assert angle_between(e1, -e1) == 0.0


def test_sign_invariance(rng):
    u, v, x = rng.standard_normal((3, 4))
    np.testing.assert_allclose(contract_full(rank1_outer(u, -v, 2), x), contract_full(rank1_outer(u, v, 2), x), rtol=1e-14)
    np.testing.assert_allclose(contract_full(rank1_outer(-u, -v, 3), x), contract_full(rank1_outer(u, v, 3), x), rtol=1e-14)


def test_apply_matches_tensor(rng):
    f = Rank1Factors(3, rng.standard_normal(4), unit(rng, 4), "odstt")
    x = rng.standard_normal(4)
    np.testing.assert_allclose(f.apply(x), contract_full(f.tensor(), x), rtol=1e-13)


def test_deterministic(rng):
    phi = random_stt(rng, 5, 3)
    a, b = sshopm_squared(phi), sshopm_squared(phi)
    np.testing.assert_array_equal(a.vector, b.vector)
    assert a.lam == b.lam


def test_nonconvergence_warns(rng):
    phi = random_stt(rng, 5, 3)
    with pytest.warns(ConvergenceWarning):
        res = sshopm_squared(phi, EigenSettings(max_iter=2, polish=False, restarts=3))
    assert not res.converged


def test_settings_validation():
    with pytest.raises(ValueError):
        EigenSettings(shift_mode="aggressive")
    with pytest.raises(ValueError):
        EigenSettings(restarts=-1)


def test_zero_tensor():
    res = sshopm_squared(np.zeros((3, 3, 3)))
    assert res.lam == 0.0
    assert abs(np.linalg.norm(res.vector) - 1) < 1e-15


def test_dominant_singular_vector_sign(rng):
    v = dominant_right_singular_vector(rng.standard_normal((5, 5)))
    assert canonical_sign(v) == 1.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from([2, 3]), st.integers(2, 4))
def test_bound_chain_property(seed, m, n):
    rng = np.random.default_rng(seed)
    phi = random_stt(rng, n, m)
    f = build_r1odstt(phi)
    err = phi - f.tensor().entries
    ind = induced_2norm(err)
    fro = frobenius_norm(err)
    assert ind <= fro * (1 + 1e-12) + 1e-300
    with warnings.catch_warnings():
        warnings.simplefilter("error", ConvergenceWarning)
        res = sshopm_squared(phi)
    assert res.residual < 1e-9 * max(1.0, res.lam)
