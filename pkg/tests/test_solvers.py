import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dualenkf import (
    GammaPair,
    SystemModel,
    etkf_transform,
    gamma_rhs,
    inverse_sqrt_from_anomalies,
    kalman_gain,
    rhs_consistency,
    riccati_step,
    solve_denkf,
    solve_eakf_svd,
    solve_ensrf_scalar,
    solve_sqrt_general,
    solve_stochastic,
)
from dualenkf.exceptions import DegenerateEnsemble, IndefiniteGamma, NotScalarObservation, ValidationError
from dualenkf.solvers import ensrf_alpha, solve_ensrf_serial

from .conftest import random_model, random_psd

ONE = np.eye(1)
GRID = [GammaPair(a, b) for a in np.linspace(0, 1, 5) for b in np.linspace(0, 1, 5)]


def _fro(M):
    return np.linalg.norm(M, "fro")


class TestGammaPair:
    @pytest.mark.parametrize("bad", [-0.1, 1.5, float("nan"), float("inf")])
    def test_rejects_out_of_range(self, bad):
        with pytest.raises(ValidationError):
            GammaPair(bad, 0.5)

    def test_accepts_ints(self):
        assert GammaPair(1, 0) == GammaPair(1.0, 0.0)


class TestGammaRhs:
    def test_scalar_stochastic(self, scalar):
        # (1 - 1 * 0.5)^2 * 1 = 0.25
        assert gamma_rhs(ONE, 0.5 * ONE, scalar, GammaPair(1, 1))[0, 0] == pytest.approx(0.25, abs=1e-15)

    def test_scalar_no_perturbation(self, scalar):
        # 0.75^2 - 0.25 * 0.25 = 0.5
        assert gamma_rhs(ONE, 0.5 * ONE, scalar, GammaPair(1, 0))[0, 0] == pytest.approx(0.5, abs=1e-15)

    def test_scalar_deterministic_equals_riccati(self, scalar):
        assert gamma_rhs(ONE, 0.5 * ONE, scalar, GammaPair(0, 0))[0, 0] == pytest.approx(0.5, abs=1e-15)

    def test_no_observation(self, rng):
        model = random_model(rng, 3, 2)
        model = SystemModel(A=model.A, H=np.zeros((2, 3)), Q=model.Q, R=model.R, m0=model.m0, Sigma0=model.Sigma0)
        S = random_psd(rng, 3)
        K = kalman_gain(S, model)
        np.testing.assert_allclose(gamma_rhs(S, K, model, GammaPair(1, 0.3)), model.A @ S @ model.A.T, atol=1e-14)

    def test_symmetric(self, small_model, rng):
        S = random_psd(rng, small_model.n)
        K = kalman_gain(S, small_model)
        G = gamma_rhs(S, K, small_model, GammaPair(0.3, 0.7))
        np.testing.assert_array_equal(G, G.T)

    def test_printed_coefficient_breaks_decomposition(self, small_model, rng):
        """With ((1 - g2)/2)^2 the Riccati decomposition fails off the corners."""
        S = random_psd(rng, small_model.n)
        K = kalman_gain(S, small_model)
        A, H, Q, R = small_model.at(0)
        g2 = 0.5
        G = A @ K @ H
        B = A - 0.5 * (1 + g2**2) * G
        literal = B @ S @ B.T - ((1 - g2) / 2) ** 2 * G @ S @ G.T
        total = literal + Q + g2**2 * A @ K @ R @ K.T @ A.T
        assert _fro(total - riccati_step(S, small_model)) > 1e-6 * _fro(riccati_step(S, small_model))


class TestRhsConsistency:
    def test_scalar_cases(self, scalar):
        assert rhs_consistency(ONE, 0.5 * ONE, scalar, GammaPair(1, 1)) < 1e-15
        assert rhs_consistency(ONE, 0.5 * ONE, scalar, GammaPair(0, 0)) < 1e-15

    @settings(max_examples=20, deadline=None)
    @given(n=st.integers(1, 6), m=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
    def test_grid(self, n, m, seed):
        rng = np.random.default_rng(seed)
        model = random_model(rng, n, m)
        S = random_psd(rng, n)
        K = kalman_gain(S, model)
        ref = _fro(riccati_step(S, model))
        for g in GRID:
            assert rhs_consistency(S, K, model, g) <= 1e-12 * ref


class TestStochastic:
    def test_scalar(self, scalar):
        sol = solve_stochastic(ONE, 0.5 * ONE, scalar)
        assert sol.C[0, 0] == pytest.approx(0.5)
        assert sol.residual < 1e-15
        assert sol.method == "stochastic"

    def test_identity_system(self):
        model = SystemModel(A=np.eye(3), H=np.eye(3), Q=np.zeros((3, 3)), R=np.eye(3), m0=np.zeros(3), Sigma0=np.eye(3))
        K = kalman_gain(np.eye(3), model)
        np.testing.assert_allclose(solve_stochastic(np.eye(3), K, model).C, 0.5 * np.eye(3))

    def test_exact(self, small_model, rng):
        S = random_psd(rng, small_model.n)
        K = kalman_gain(S, small_model)
        sol = solve_stochastic(S, K, small_model)
        assert sol.residual <= 1e-12 * _fro(gamma_rhs(S, K, small_model, GammaPair(1, 1)))


class TestDenkf:
    def test_scalar(self, scalar):
        sol = solve_denkf(ONE, 0.5 * ONE, scalar)
        assert sol.C[0, 0] == pytest.approx(0.75)
        # 0.5625 - 0.5 = 0.0625 = K^2 H Sigma H / 4
        assert sol.residual == pytest.approx(0.0625, abs=1e-15)

    def test_zero_gain(self, scalar):
        sol = solve_denkf(ONE, 0 * ONE, scalar)
        assert sol.C[0, 0] == 1.0 and sol.residual == 0.0

    def test_residual_is_dropped_term(self, small_model, rng):
        S = random_psd(rng, small_model.n)
        K = kalman_gain(S, small_model)
        A, H = small_model.A, small_model.H
        G = A @ K @ H
        sol = solve_denkf(S, K, small_model)
        dropped = 0.25 * G @ S @ G.T
        assert abs(sol.residual - _fro(dropped)) <= 1e-12 * max(_fro(dropped), 1.0)
        diff = sol.C.T @ S @ sol.C - gamma_rhs(S, K, small_model, GammaPair(1, 0))
        assert np.linalg.eigvalsh(0.5 * (diff + diff.T)).min() >= -1e-12 * _fro(diff)


class TestEnsrf:
    def test_alpha_matches_polynomial_root(self):
        for s in np.linspace(0.01, 1.0, 25):
            roots = np.roots([s, -2.0, 1.0]).real
            assert ensrf_alpha(s) == pytest.approx(roots.min(), abs=1e-12)

    def test_alpha_limits(self):
        assert ensrf_alpha(0.0) == 0.5
        assert ensrf_alpha(1.0) == 1.0
        assert ensrf_alpha(1e-9) == pytest.approx(0.5, abs=1e-9)

    def test_scalar(self, scalar):
        alpha, sol = solve_ensrf_scalar(ONE, 0.5 * ONE, scalar)
        assert alpha == pytest.approx(1 / (1 + np.sqrt(0.5)), abs=1e-12)
        assert alpha == pytest.approx(0.585786, abs=1e-6)
        assert sol.C[0, 0] == pytest.approx(0.707107, abs=1e-6)
        assert (sol.C.T @ sol.C)[0, 0] == pytest.approx(0.5, abs=1e-14)
        assert sol.residual <= 1e-12 * 0.5

    def test_needs_scalar_observation(self, rng):
        model = random_model(rng, 3, 2)
        with pytest.raises(NotScalarObservation):
            solve_ensrf_scalar(np.eye(3), kalman_gain(np.eye(3), model), model)

    def test_exact_for_m1(self, rng):
        model = random_model(rng, 4, 1)
        S = random_psd(rng, 4)
        K = kalman_gain(S, model)
        _, sol = solve_ensrf_scalar(S, K, model)
        assert sol.residual <= 1e-12 * _fro(gamma_rhs(S, K, model, GammaPair(1, 0)))

    def test_serial_exact_for_diagonal_R(self, rng):
        model = random_model(rng, 4, 3, diag_R=True)
        S = random_psd(rng, 4)
        K = kalman_gain(S, model)
        sol = solve_ensrf_serial(S, K, model)
        assert sol.residual <= 1e-11 * _fro(gamma_rhs(S, K, model, GammaPair(1, 0)))

    def test_serial_rejects_full_R(self, rng):
        model = random_model(rng, 3, 2, diag_R=False)
        with pytest.raises(NotScalarObservation):
            solve_ensrf_serial(np.eye(3), kalman_gain(np.eye(3), model), model)

    def test_agrees_with_sqrt_general_in_1d(self, scalar, rng):
        for S in rng.uniform(0.1, 5.0, 10):
            Sig = np.array([[S]])
            K = kalman_gain(Sig, scalar)
            _, e = solve_ensrf_scalar(Sig, K, scalar)
            g = solve_sqrt_general(Sig, gamma_rhs(Sig, K, scalar, GammaPair(1, 0)))
            assert abs(e.C[0, 0] - g.C[0, 0]) <= 1e-10


class TestSqrtGeneral:
    def test_scalar(self, scalar):
        sol = solve_sqrt_general(ONE, 0.5 * ONE)
        assert sol.C[0, 0] == pytest.approx(np.sqrt(0.5), abs=1e-15)

    def test_matched_covariances_give_projector(self, rng):
        S = random_psd(rng, 4, rank=2)
        sol = solve_sqrt_general(S, S)
        U = np.linalg.svd(S)[0][:, :2]
        np.testing.assert_allclose(sol.C, U @ U.T, atol=1e-8)
        assert sol.residual <= 1e-10 * _fro(S)

    def test_zero_gamma(self, rng):
        sol = solve_sqrt_general(random_psd(rng, 3), np.zeros((3, 3)))
        assert np.all(sol.C == 0)

    def test_indefinite_gamma(self):
        with pytest.raises(IndefiniteGamma):
            solve_sqrt_general(np.eye(2), np.diag([1.0, -0.5]))

    def test_small_negative_eigenvalue_warns(self):
        with pytest.warns(RuntimeWarning):
            solve_sqrt_general(np.eye(2), np.diag([1.0, -1e-9]))

    def test_unitary_L(self, rng):
        S = random_psd(rng, 3)
        G = random_psd(rng, 3)
        L, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        sol = solve_sqrt_general(S, G, L)
        assert sol.residual <= 1e-10 * _fro(G)

    def test_exact_on_grid(self, small_model, rng):
        S = random_psd(rng, small_model.n)
        K = kalman_gain(S, small_model)
        for g in GRID:
            G = gamma_rhs(S, K, small_model, g)
            assert solve_sqrt_general(S, G).residual <= 1e-10 * _fro(G)

    def test_one_step_map_matches_riccati(self, small_model, rng):
        S = random_psd(rng, small_model.n)
        K = kalman_gain(S, small_model)
        A, _, Q, R = small_model.at(0)
        for g in GRID:
            sol = solve_sqrt_general(S, gamma_rhs(S, K, small_model, g))
            AK = A @ K
            step = sol.C.T @ S @ sol.C + g.gamma1**2 * Q + g.gamma2**2 * AK @ R @ AK.T
            assert _fro(step - riccati_step(S, small_model)) <= sol.residual + 1e-12 * _fro(S)


class TestAnomalySvd:
    def test_three_members(self):
        delta = np.array([[-1.0, 0.0, 1.0]])
        assert inverse_sqrt_from_anomalies(delta)[0, 0] == pytest.approx(1.0)

    def test_homogeneity(self, rng):
        delta = rng.standard_normal((3, 6))
        delta -= delta.mean(axis=1, keepdims=True)
        np.testing.assert_allclose(inverse_sqrt_from_anomalies(2 * delta), 0.5 * inverse_sqrt_from_anomalies(delta))

    def test_zero_is_degenerate(self):
        with pytest.raises(DegenerateEnsemble):
            inverse_sqrt_from_anomalies(np.zeros((2, 4)))

    def test_is_inverse_root_of_sample_covariance(self, rng):
        delta = rng.standard_normal((3, 8))
        delta -= delta.mean(axis=1, keepdims=True)
        S = delta @ delta.T / 7
        M = inverse_sqrt_from_anomalies(delta)
        np.testing.assert_allclose(M @ S @ M, np.eye(3), atol=1e-10)

    def test_eakf_matches_sqrt_general(self, rng):
        delta = rng.standard_normal((3, 8))
        delta -= delta.mean(axis=1, keepdims=True)
        S = delta @ delta.T / 7
        G = random_psd(rng, 3)
        a = solve_eakf_svd(delta, G)
        b = solve_sqrt_general(S, G)
        np.testing.assert_allclose(a.C, b.C, atol=1e-10)
        assert a.method == "eakf_svd"
        assert a.residual <= 1e-10 * _fro(G)


class TestEtkf:
    def test_scalar_relation(self):
        delta = np.array([[-1.0, 0.0, 1.0]])
        tr = etkf_transform(delta, np.array([[0.5]]))
        lhs = delta @ tr.W @ tr.W.T @ delta.T / 2
        assert lhs[0, 0] == pytest.approx(0.5, abs=1e-14)
        assert tr.subspace_residual <= 1e-12
        np.testing.assert_allclose(tr.W, tr.W.T)

    def test_matched_covariance_gives_row_space_projector(self, rng):
        delta = rng.standard_normal((2, 5))
        delta -= delta.mean(axis=1, keepdims=True)
        tr = etkf_transform(delta, delta @ delta.T / 4)
        Vt = np.linalg.svd(delta, full_matrices=False)[2]
        np.testing.assert_allclose(tr.W, Vt.T @ Vt, atol=1e-10)
        assert tr.subspace_residual <= 1e-12

    def test_zero_gamma(self, rng):
        delta = rng.standard_normal((2, 5))
        delta -= delta.mean(axis=1, keepdims=True)
        assert np.allclose(etkf_transform(delta, np.zeros((2, 2))).W, 0)

    def test_keeps_anomalies_centred(self, rng):
        delta = rng.standard_normal((3, 7))
        delta -= delta.mean(axis=1, keepdims=True)
        tr = etkf_transform(delta, random_psd(rng, 3))
        np.testing.assert_allclose(tr.W @ np.ones(7), 0, atol=1e-10)

    def test_out_of_range_mass_reported(self, rng):
        # 3 members in 3-D: anomalies span only 2 dimensions
        delta = rng.standard_normal((3, 3))
        delta -= delta.mean(axis=1, keepdims=True)
        tr = etkf_transform(delta, np.eye(3))
        assert tr.subspace_residual <= 1e-10
        assert tr.out_of_range > 0.1

    def test_degenerate(self):
        with pytest.raises(DegenerateEnsemble):
            etkf_transform(np.zeros((2, 3)), np.eye(2))
