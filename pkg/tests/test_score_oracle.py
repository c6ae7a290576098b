import numpy as np
import pytest

from model.graph import Dag
from model.scm import (Coupling, EnvironmentSet, InterventionType, Mechanism, MechanismKind,
                       MixingMap, NoiseFamily, NoiseLaw, Scm, random_mixing, random_scm)
from scores.oracle import ScoreOracle, latent_score, observed_score, score_batch
from utils.errors import DomainError


def finite_difference_score(oracle: ScoreOracle, Z: np.ndarray, env: int, h: float = 1e-5) -> np.ndarray:
    grads = []
    for k in range(Z.shape[1]):
        step = np.zeros(Z.shape[1])
        step[k] = h
        grads.append((oracle.latent_log_density(Z + step, env)
                      - oracle.latent_log_density(Z - step, env)) / (2 * h))
    return np.column_stack(grads)


class TestLatentScore:
    def test_standard_gaussian_root(self):
        scm = random_scm(Dag.empty(1), MechanismKind.LINEAR, seed=0)
        oracle = ScoreOracle(scm, MixingMap(np.eye(1)))
        assert latent_score(oracle, np.array([0.7]), 0) == pytest.approx([-0.7])

    def test_linear_chain_by_hand(self):
        w = 0.8
        noise = NoiseLaw(NoiseFamily.GAUSSIAN, 1.0)
        scm = Scm(Dag.chain(2), (Mechanism.constant(0.0), Mechanism.linear([w])),
                  (Mechanism.constant(1.0), Mechanism.linear([-w])),
                  (noise, noise), (noise, noise))
        oracle = ScoreOracle(scm, MixingMap(np.eye(2)))
        z1, z2 = 0.3, -1.1
        expected = [-z1 + w * (z2 - w * z1), -(z2 - w * z1)]
        assert latent_score(oracle, np.array([z1, z2]), 0) == pytest.approx(expected)

    @pytest.mark.parametrize("kind,coupling,itype,family", [
        (MechanismKind.QUADRATIC, Coupling.ADDITIVE, InterventionType.SOFT, NoiseFamily.GAUSSIAN),
        (MechanismKind.TWO_LAYER_NN, Coupling.ADDITIVE, InterventionType.HARD, NoiseFamily.LOGISTIC),
        (MechanismKind.GENERALIZED_LINEAR, Coupling.ADDITIVE, InterventionType.SOFT, NoiseFamily.GAUSSIAN),
        (MechanismKind.LINEAR, Coupling.MULTIPLICATIVE, InterventionType.SOFT, NoiseFamily.GAUSSIAN),
        (MechanismKind.QUADRATIC, Coupling.MULTIPLICATIVE, InterventionType.HARD, NoiseFamily.LOGISTIC),
    ])
    def test_matches_finite_differences(self, diamond, rng, kind, coupling, itype, family):
        scm = random_scm(diamond, kind, coupling, itype, seed=3, noise_family=family)
        oracle = ScoreOracle(scm, MixingMap(np.eye(4)))
        Z = rng.standard_normal((50, 4))
        for env in range(5):
            np.testing.assert_allclose(oracle.latent_score_batch(Z, env),
                                       finite_difference_score(oracle, Z, env),
                                       rtol=1e-5, atol=1e-6)


class TestObservedScore:
    def test_identity_mixing_equals_latent(self, chain3, rng):
        scm = random_scm(chain3, MechanismKind.QUADRATIC, seed=1)
        oracle = ScoreOracle(scm, MixingMap(np.eye(3)))
        z = rng.standard_normal(3)
        np.testing.assert_allclose(observed_score(oracle, z, 2), latent_score(oracle, z, 2))

    def test_scaled_identity(self, chain3, rng):
        scm = random_scm(chain3, MechanismKind.QUADRATIC, seed=1)
        oracle = ScoreOracle(scm, MixingMap(2 * np.eye(3)))
        x = rng.standard_normal(3)
        np.testing.assert_allclose(observed_score(oracle, x, 1), 0.5 * latent_score(oracle, x / 2, 1))

    def test_transpose_mixing_recovers_latent_score(self, diamond, rng):
        scm = random_scm(diamond, MechanismKind.QUADRATIC, seed=2)
        mixing = random_mixing(4, 7, seed=3)
        oracle = ScoreOracle(scm, mixing)
        Z = rng.standard_normal((1000, 4))
        X = Z @ mixing.T.T
        for env in range(5):
            np.testing.assert_allclose(oracle.score_batch(X, env) @ mixing.T,
                                       oracle.latent_score_batch(Z, env), rtol=1e-8, atol=1e-8)

    def test_transformed_scores_follow_h(self, diamond, rng):
        scm = random_scm(diamond, MechanismKind.QUADRATIC, seed=2)
        mixing = random_mixing(4, 6, seed=4)
        oracle = ScoreOracle(scm, mixing)
        Z = rng.standard_normal((1000, 4))
        X = Z @ mixing.T.T
        for trial in range(20):
            U = mixing.T @ np.random.default_rng(trial).standard_normal((4, 4))
            H = (mixing.pinv @ U).T
            assert abs(np.linalg.det(H)) > 1e-12
            np.testing.assert_allclose(oracle.score_batch(X, 0) @ U,
                                       oracle.latent_score_batch(Z, 0) @ H.T, rtol=1e-8, atol=1e-8)

    def test_off_manifold_rejected(self, chain3):
        scm = random_scm(chain3, MechanismKind.QUADRATIC, seed=1)
        mixing = random_mixing(3, 5, seed=2)
        oracle = ScoreOracle(scm, mixing)
        x = mixing.T @ np.ones(3)
        x[0] += 1.0
        with pytest.raises(DomainError):
            observed_score(oracle, x, 0)


class TestScoreBatch:
    def test_empty_batch(self, chain3):
        scm = random_scm(chain3, MechanismKind.QUADRATIC, seed=1)
        oracle = ScoreOracle(scm, random_mixing(3, 4, seed=0))
        assert score_batch(oracle, np.zeros((0, 4)), 1).shape == (0, 4)

    def test_batch_equals_loop_and_repeats(self, chain3, rng):
        scm = random_scm(chain3, MechanismKind.QUADRATIC, seed=1)
        mixing = random_mixing(3, 4, seed=0)
        oracle = ScoreOracle(scm, mixing)
        Z = rng.standard_normal((5, 3))
        X = np.vstack([Z, Z[:1]]) @ mixing.T.T
        batch = score_batch(oracle, X, 3)
        loop = np.vstack([observed_score(oracle, x, 3) for x in X])
        np.testing.assert_allclose(batch, loop)
        np.testing.assert_allclose(batch[0], batch[-1])

    def test_environment_count_checked(self, chain3):
        scm = random_scm(chain3, MechanismKind.QUADRATIC, seed=1)
        with pytest.raises(DomainError):
            ScoreOracle(scm, MixingMap(np.eye(3)), EnvironmentSet.atomic(2))

    def test_all_scores_covers_every_environment(self, chain3, rng):
        scm = random_scm(chain3, MechanismKind.QUADRATIC, seed=1)
        oracle = ScoreOracle(scm, MixingMap(np.eye(3)))
        scores = oracle.all_scores(rng.standard_normal((10, 3)))
        assert len(scores) == 4
        assert not np.allclose(scores[0], scores[1])
