import numpy as np
import pytest

from dualenkf import NoiseStreams, SystemModel, draw_copies, random_stable, simulate_truth, validate_model
from dualenkf.exceptions import AsymmetricMatrix, DimensionMismatch, NotPSD
from dualenkf.model import Substream


def scalar_with(**kw):
    base = dict(A=[[1.0]], H=[[1.0]], Q=[[0.0]], R=[[1.0]], m0=[0.0], Sigma0=[[1.0]])
    base.update(kw)
    return SystemModel(**base)


class TestValidateModel:
    def test_scalar_benchmark_accepted(self, scalar):
        assert validate_model(scalar) is scalar

    def test_zero_R_rejected(self):
        with pytest.raises(NotPSD) as err:
            validate_model(scalar_with(R=[[0.0]]))
        assert err.value.name == "R"

    def test_asymmetric_Q(self):
        model = SystemModel(
            A=np.eye(2), H=np.eye(2), Q=[[0.0, 1.0], [0.0, 0.0]], R=np.eye(2), m0=np.zeros(2), Sigma0=np.eye(2)
        )
        with pytest.raises(AsymmetricMatrix) as err:
            validate_model(model)
        assert err.value.name == "Q"

    def test_indefinite_sigma0(self):
        with pytest.raises(NotPSD):
            validate_model(scalar_with(Sigma0=[[-1.0]]))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            validate_model(scalar_with(H=[[1.0, 0.0]]))

    def test_rank_deficient_Q_is_fine(self):
        model = SystemModel(
            A=np.eye(2), H=[[1.0, 0.0]], Q=[[1.0, 1.0], [1.0, 1.0]], R=[[1.0]], m0=np.zeros(2), Sigma0=np.zeros((2, 2))
        )
        validate_model(model)

    def test_time_varying_broadcast(self):
        A = np.stack([np.eye(2) * (1 + 0.1 * t) for t in range(5)])
        model = SystemModel(A=A, H=[[1.0, 0.0]], Q=np.eye(2), R=[[1.0]], m0=np.zeros(2), Sigma0=np.eye(2))
        validate_model(model)
        assert model.time_varying and model.max_horizon == 5
        np.testing.assert_array_equal(model.at(3).A, A[3])
        np.testing.assert_array_equal(model.at(3).Q, np.eye(2))
        with pytest.raises(DimensionMismatch):
            model.at(5)


class TestSimulateTruth:
    def test_zero_dynamics(self):
        model = scalar_with(Sigma0=[[0.0]])
        streams = NoiseStreams(5)
        traj = simulate_truth(model, 10, streams)
        assert np.all(traj.states == 0.0)
        expected = np.array([streams.gaussian(Substream.TRUTH_MEASUREMENT, t, [[1.0]], 1)[0] for t in range(10)])
        np.testing.assert_array_equal(traj.observations, expected)

    def test_shapes(self, stable3):
        traj = simulate_truth(stable3, 7, NoiseStreams(0))
        assert traj.states.shape == (8, 3)
        assert traj.observations.shape == (7, 2)

    def test_same_seed_bit_identical(self, stable3):
        a = simulate_truth(stable3, 20, NoiseStreams(11))
        b = simulate_truth(stable3, 20, NoiseStreams(11))
        assert a.states.tobytes() == b.states.tobytes()
        assert a.observations.tobytes() == b.observations.tobytes()

    def test_distinct_seeds_differ(self, stable3):
        a = simulate_truth(stable3, 5, NoiseStreams(1))
        b = simulate_truth(stable3, 5, NoiseStreams(2))
        assert not np.allclose(a.states, b.states)

    def test_horizon_must_be_positive(self, scalar):
        with pytest.raises(ValueError):
            simulate_truth(scalar, 0, NoiseStreams(0))

    @pytest.mark.slow
    def test_variance_of_x1_over_seeds(self, scalar):
        # analytic Var(X_1) = A Sigma0 A^T + Q = 1
        n_seeds = 100_000
        x1 = np.array([simulate_truth(scalar, 1, NoiseStreams(s)).states[1, 0] for s in range(n_seeds)])
        band = 3 * np.sqrt(2.0 / (n_seeds - 1))  # std of a sample variance of N(0, 1)
        assert abs(x1.var(ddof=1) - 1.0) < band


class TestNoiseStreams:
    def test_zero_covariance_gives_exact_zero(self, scalar):
        xi, _ = draw_copies(NoiseStreams(3), scalar, 4, 2)
        assert np.all(xi == 0.0)

    def test_member_access_is_reproducible(self, stable3):
        s = NoiseStreams(9)
        a = draw_copies(s, stable3, 3, 7)
        b = draw_copies(s, stable3, 3, 7)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_member_rows_do_not_depend_on_block_size(self, stable3):
        s = NoiseStreams(9)
        small_xi, small_zeta = draw_copies(s, stable3, None, 4, rows=5)
        big_xi, big_zeta = draw_copies(s, stable3, None, 4, rows=500)
        np.testing.assert_array_equal(small_xi, big_xi[:5])
        np.testing.assert_array_equal(small_zeta, big_zeta[:5])
        one_xi, _ = draw_copies(s, stable3, 3, 4)
        np.testing.assert_array_equal(one_xi, big_xi[3])

    def test_substreams_differ(self):
        s = NoiseStreams(1)
        blocks = [s.standard_normal(sub, 0, 1, 4) for sub in Substream]
        for i in range(len(blocks)):
            for j in range(i):
                assert not np.allclose(blocks[i], blocks[j])

    @pytest.mark.slow
    def test_members_independent(self, scalar):
        model = SystemModel(A=[[1.0]], H=[[1.0]], Q=[[1.0]], R=[[1.0]], m0=[0.0], Sigma0=[[1.0]])
        steps = 100_000
        s = NoiseStreams(42)
        pairs = np.array([draw_copies(s, model, None, t, rows=2)[0][:, 0] for t in range(steps)])
        r = np.corrcoef(pairs[:, 0], pairs[:, 1])[0, 1]
        assert abs(r) < 3 / np.sqrt(steps)

    def test_truth_and_copy_streams_uncorrelated(self):
        s = NoiseStreams(8)
        n = 20_000
        truth = s.standard_normal(Substream.TRUTH_PROCESS, 0, n, 1)[:, 0]
        copy = s.standard_normal(Substream.COPY_PROCESS, 0, n, 1)[:, 0]
        assert abs(np.corrcoef(truth, copy)[0, 1]) < 3 / np.sqrt(n)

    def test_moment_match_rank_deficient(self, rng):
        L = rng.standard_normal((3, 2))
        Q = L @ L.T
        n = 100_000
        draws = NoiseStreams(4).gaussian(Substream.COPY_PROCESS, 0, Q, n)
        err = np.linalg.norm(np.cov(draws.T) - Q)
        assert err < 5 * np.linalg.norm(Q) / np.sqrt(n)


def test_random_stable_spectral_radius():
    model = random_stable(6, 3, rho=0.95, seed=1)
    assert max(abs(np.linalg.eigvals(model.A))) == pytest.approx(0.95)
    assert np.linalg.matrix_rank(model.H) == 3
    validate_model(model)
