import numpy as np
import pytest

from ml.scale_i import image_basis, soft_recover
from model.graph import Dag
from model.scm import EnvironmentSet, MechanismKind, MixingMap, random_scm, simulate_dataset
from scores.change_analysis import ChangeMatrix, EquivalenceConfig, as_equal, delta_x, l0, true_delta
from scores.oracle import ScoreOracle
from utils.errors import DomainError

from .conftest import make_problem


class TestEquivalenceConfig:
    @pytest.mark.parametrize("kwargs", [{"tol": -1.0}, {"quantile": 0.0}, {"quantile": 1.5},
                                        {"min_samples": 0}])
    def test_invalid(self, kwargs):
        with pytest.raises(DomainError):
            EquivalenceConfig(**kwargs)


class TestAsEqual:
    def test_zero_samples_are_equal(self):
        assert as_equal(np.zeros(2000), 1.0, EquivalenceConfig())

    def test_noise_is_not_equal(self, rng):
        assert not as_equal(rng.standard_normal(2000), 1.0, EquivalenceConfig())

    def test_rare_outliers_ignored_by_quantile(self):
        values = np.zeros(2000)
        values[:5] = 10.0
        assert as_equal(values, 1.0, EquivalenceConfig(quantile=0.99))
        assert not as_equal(values, 1.0, EquivalenceConfig(quantile=1.0))

    def test_scale_normalizes(self):
        values = np.full(2000, 1e-3)
        cfg = EquivalenceConfig(tol=1e-6)
        assert not as_equal(values, 1.0, cfg)
        assert as_equal(values, 1e4, cfg)

    def test_too_few_samples(self):
        with pytest.raises(DomainError):
            as_equal(np.zeros(10), 1.0, EquivalenceConfig(min_samples=100))
        with pytest.raises(DomainError):
            as_equal(np.array([]), 1.0, EquivalenceConfig(min_samples=1))

    def test_scale_must_be_positive(self):
        with pytest.raises(DomainError):
            as_equal(np.zeros(2000), 0.0, EquivalenceConfig())


class TestChangeMatrix:
    def test_rejects_non_binary(self):
        with pytest.raises(DomainError):
            ChangeMatrix(np.array([[0, 2]]))

    def test_rows_round_trip_and_permutations(self):
        delta = ChangeMatrix.from_rows(["110", "011", "001"])
        assert delta.to_rows() == ["110", "011", "001"]
        assert delta.permute_columns([2, 1, 0]).to_rows() == ["011", "110", "100"]
        assert delta.permute_rows([2, 1, 0]).to_rows() == ["001", "011", "110"]
        assert l0(delta) == 5


class TestTrueDelta:
    def test_chain(self, chain3):
        assert true_delta(chain3, EnvironmentSet.atomic(3)).to_rows() == ["110", "011", "001"]

    def test_empty_graph_is_identity(self):
        delta = true_delta(Dag.empty(3), EnvironmentSet.atomic(3))
        np.testing.assert_array_equal(delta.delta, np.eye(3))
        assert delta.l0() == 3

    def test_triangle(self, triangle):
        delta = true_delta(triangle, EnvironmentSet.atomic(3))
        assert delta.to_rows() == ["111", "011", "001"]
        assert delta.l0() == 6

    def test_follows_environment_layout(self, chain3):
        delta = true_delta(chain3, EnvironmentSet.atomic(3, order=[2, 0, 1]))
        assert delta.to_rows() == ["011", "101", "100"]


class TestDeltaX:
    def test_transpose_mixing_gives_true_delta(self, chain3):
        problem = make_problem(chain3, seed=4)
        A = problem.mixing.T.T
        delta = delta_x(A, problem.scores, EquivalenceConfig())
        assert delta == true_delta(chain3, problem.envs)

    def test_sink_environment_rows(self, chain3):
        problem = make_problem(chain3, seed=5)
        delta = delta_x(problem.mixing.T.T, problem.scores, EquivalenceConfig())
        assert set(np.flatnonzero(delta.delta[:, 1])) == {0, 1}
        assert set(np.flatnonzero(delta.delta[:, 0])) == {0}

    def test_zero_row_never_changes(self, chain3):
        problem = make_problem(chain3, seed=4)
        A = np.vstack([np.zeros(problem.mixing.d), problem.mixing.T[:, 0]])
        delta = delta_x(A, problem.scores, EquivalenceConfig())
        assert delta.delta[0].sum() == 0
        assert delta.shape == (2, 3)

    def test_generic_row_changes_everywhere(self, chain3, rng):
        problem = make_problem(chain3, seed=4)
        A = rng.standard_normal((1, problem.mixing.d))
        assert delta_x(A, problem.scores, EquivalenceConfig()).to_rows() == ["111"]

    def test_shape_mismatch(self, chain3):
        problem = make_problem(chain3, seed=4)
        with pytest.raises(DomainError):
            delta_x(np.ones((1, 2)), problem.scores, EquivalenceConfig())


def latent_scores(dag, kind, seed, k):
    scm = random_scm(dag, kind, seed=seed)
    envs = EnvironmentSet.atomic(dag.n)
    oracle = ScoreOracle(scm, MixingMap(np.eye(dag.n)), envs)
    Z = simulate_dataset(scm, MixingMap(np.eye(dag.n)), envs, k, seed=seed + 1).Z[0]
    return envs, [oracle.latent_score_batch(Z, m) for m in range(envs.count)]


@pytest.mark.slow
class TestLatentChangePattern:
    def test_identity_transform_reproduces_parent_pattern(self):
        rng = np.random.default_rng(0)
        for trial in range(50):
            n = int(rng.integers(3, 7))
            dag = Dag.random(n, 0.5, seed=trial)
            kind = (MechanismKind.QUADRATIC, MechanismKind.TWO_LAYER_NN)[trial % 2]
            envs, scores = latent_scores(dag, kind, seed=trial, k=20000)
            assert delta_x(np.eye(n), scores, EquivalenceConfig()) == true_delta(dag, envs), \
                (trial, dag, kind)

    def test_recovered_pattern_is_sparsest_over_random_transforms(self, chain3):
        problem = make_problem(chain3)
        recovered = soft_recover(problem.scores, image_basis(problem.data.X[0], 3)).delta
        truth = true_delta(chain3, problem.envs)
        assert recovered.l0() == 5

        envs, scores = latent_scores(chain3, MechanismKind.QUADRATIC, seed=6, k=3000)
        rng = np.random.default_rng(8)
        minimal = 0
        for _ in range(10000):
            if rng.random() < 0.5:
                A = rng.standard_normal((3, 3))
            else:
                magnitudes = rng.uniform(0.2, 2.0, (3, 3)) * rng.choice([-1.0, 1.0], (3, 3))
                mask = np.eye(3) + (rng.random((3, 3)) < 0.3)
                A = (magnitudes * (mask > 0))[rng.permutation(3)]
            if np.linalg.cond(A) > 100:
                continue
            delta = delta_x(A, scores, EquivalenceConfig())
            assert recovered.l0() <= delta.l0()
            if delta.l0() == recovered.l0():
                minimal += 1
                assert sorted(delta.to_rows()) == sorted(truth.to_rows())
        assert minimal > 0
