import numpy as np
import pytest

from model.graph import Dag
from model.scm import (HARD_NOISE_FACTOR, Coupling, EnvironmentSet, InterventionType, Mechanism,
                       MechanismKind, MixingMap, NoiseFamily, NoiseLaw, Scm, SoftVariant, mix,
                       random_mixing, random_scm, sample_latent, simulate_dataset)
from utils.errors import DomainError, StructuralError


def chain2_scm(obs: Mechanism, intervention: Mechanism = None,
               itype: InterventionType = InterventionType.SOFT) -> Scm:
    dag = Dag.chain(2)
    intervention = intervention or Mechanism.constant(1.0)
    noise = NoiseLaw(NoiseFamily.GAUSSIAN, 1.0)
    return Scm(dag, (Mechanism.constant(0.0), obs), (Mechanism.constant(1.0), intervention),
               (noise, noise), (noise.rescaled(2.0), noise.rescaled(2.0)),
               intervention_type=itype)


class TestMechanism:
    @pytest.mark.parametrize("mech", [
        Mechanism.linear([0.7, -1.2]),
        Mechanism.quadratic(np.array([[0.4, 0.1], [0.1, -0.3]])),
        Mechanism.two_layer_nn(np.array([[1.0, -0.5], [0.3, 0.8], [-1.1, 0.2]]), [1.5, -1.2, 1.1]),
        Mechanism.generalized_linear([0.9, -0.6], scale=1.5, bias=0.2),
    ])
    def test_gradient_matches_finite_differences(self, mech, rng):
        phi = rng.standard_normal((20, 2))
        h = 1e-6
        numeric = np.column_stack([
            (mech.evaluate(phi + h * e) - mech.evaluate(phi - h * e)) / (2 * h)
            for e in np.eye(2)
        ])
        np.testing.assert_allclose(mech.gradient(phi), numeric, rtol=1e-5, atol=1e-7)

    def test_quadratic_needs_symmetric_matrix(self):
        with pytest.raises(StructuralError):
            Mechanism.quadratic(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_missing_parameters(self):
        with pytest.raises(StructuralError):
            Mechanism(MechanismKind.LINEAR, {"bias": 0.0})

    def test_dict_round_trip(self):
        mech = Mechanism.two_layer_nn(np.ones((4, 2)), [1.0, 2.0, 3.0, 4.0])
        assert Mechanism.from_dict(mech.to_dict()).same_as(mech)


class TestNoiseLaw:
    @pytest.mark.parametrize("family", list(NoiseFamily))
    def test_score_is_log_density_derivative(self, family):
        law = NoiseLaw(family, 1.3)
        u = np.linspace(-3, 3, 13)
        h = 1e-6
        numeric = (law.log_density(u + h) - law.log_density(u - h)) / (2 * h)
        np.testing.assert_allclose(law.score(u), numeric, rtol=1e-5, atol=1e-8)

    def test_scale_must_be_positive(self):
        with pytest.raises(StructuralError):
            NoiseLaw(NoiseFamily.GAUSSIAN, 0.0)


class TestScm:
    def test_hard_interventions_need_constant_mechanisms(self):
        with pytest.raises(StructuralError, match="constant"):
            chain2_scm(Mechanism.linear([1.0]), Mechanism.linear([2.0]), InterventionType.HARD)

    def test_parent_count_checked(self):
        with pytest.raises(StructuralError):
            chain2_scm(Mechanism.linear([1.0, 2.0]))

    def test_null_intervention_rejected_unless_allowed(self):
        dag = Dag.empty(1)
        noise = NoiseLaw()
        args = (dag, (Mechanism.constant(0.0),), (Mechanism.constant(0.0),), (noise,), (noise,))
        with pytest.raises(StructuralError):
            Scm(*args)
        assert Scm(*args, allow_null_interventions=True).n == 1

    def test_dict_round_trip_preserves_digest(self, diamond):
        scm = random_scm(diamond, MechanismKind.TWO_LAYER_NN, seed=5)
        assert Scm.from_dict(scm.to_dict()).digest() == scm.digest()

    def test_multiplicative_scale_bounded_away_from_zero(self, rng):
        scm = random_scm(Dag.chain(2), MechanismKind.LINEAR, Coupling.MULTIPLICATIVE, seed=2)
        f, _ = scm.mechanism_output(1, rng.standard_normal((500, 2)) * 5, False)
        assert f.min() >= 0.1


class TestSampleLatent:
    def test_root_is_pure_noise(self):
        scm = random_scm(Dag.empty(1), MechanismKind.QUADRATIC, seed=0)
        Z = sample_latent(scm, 0, 200000, seed=1)
        assert abs(Z.mean()) < 0.01
        assert Z.var() == pytest.approx(1.0, abs=0.01)

    def test_quadratic_child_mean(self):
        scm = chain2_scm(Mechanism.quadratic(np.array([[1.0]])))
        Z = sample_latent(scm, 0, 400000, seed=3)
        # Var(Z2) = Var(Z1^2) + 1 = 3
        assert Z[:, 1].mean() == pytest.approx(1.0, abs=3 * np.sqrt(3.0 / 400000))

    def test_hard_intervention_cuts_dependence(self):
        scm = random_scm(Dag.chain(2), MechanismKind.LINEAR,
                         intervention_type=InterventionType.HARD, seed=4)
        Z = sample_latent(scm, 2, 100000, seed=5)
        assert abs(np.corrcoef(Z.T)[0, 1]) < 0.02

    def test_seeded(self, chain3):
        scm = random_scm(chain3, MechanismKind.QUADRATIC, seed=1)
        np.testing.assert_array_equal(sample_latent(scm, 1, 50, 9), sample_latent(scm, 1, 50, 9))

    def test_environment_layout_selects_target(self, chain3):
        scm = random_scm(chain3, MechanismKind.QUADRATIC, intervention_type=InterventionType.HARD,
                         seed=1)
        envs = EnvironmentSet.atomic(3, order=[2, 0, 1])
        Z = sample_latent(scm, 1, 20000, seed=2, envs=envs)
        # environment 1 intervenes node 3: its mean moves to the hard shift
        assert Z[:, 2].mean() == pytest.approx(1.0, abs=0.05)

    def test_hard_noise_factor_scales_interventional_noise(self, chain3):
        default = random_scm(chain3, MechanismKind.QUADRATIC,
                             intervention_type=InterventionType.HARD, seed=1)
        wide = random_scm(chain3, MechanismKind.QUADRATIC, intervention_type=InterventionType.HARD,
                          seed=1, hard_noise_factor=1.5)
        for i in range(3):
            expected = HARD_NOISE_FACTOR * default.obs_noise[i].scale
            assert default.int_noise[i].scale == pytest.approx(expected)
            assert wide.int_noise[i].scale == pytest.approx(1.5 * wide.obs_noise[i].scale)


class TestEnvironmentSet:
    def test_atomic(self):
        envs = EnvironmentSet.atomic(3)
        assert envs.count == 4
        assert envs.target(0) is None
        assert [envs.target(m) for m in (1, 2, 3)] == [0, 1, 2]
        assert envs.m_of == {0: 1, 1: 2, 2: 3}

    def test_shuffled_is_a_seeded_permutation(self):
        a = EnvironmentSet.shuffled(5, seed=3)
        assert a == EnvironmentSet.shuffled(5, seed=3)
        assert sorted(a.m_of) == list(range(5))

    def test_non_atomic_target_rejected(self):
        envs = EnvironmentSet.from_labels([[], [1, 2]])
        with pytest.raises(DomainError):
            envs.target(1)

    def test_labels_round_trip(self):
        envs = EnvironmentSet.atomic(3, order=[1, 2, 0])
        assert EnvironmentSet.from_labels(envs.to_labels()) == envs


class TestMixing:
    def test_mix_identity_and_scaling(self, rng):
        Z = rng.standard_normal((10, 3))
        np.testing.assert_allclose(mix(MixingMap(np.eye(3)), Z), Z)
        np.testing.assert_allclose(mix(MixingMap(2 * np.eye(3)), Z), 2 * Z)

    def test_pinv_recovers_latents(self, rng):
        mixing = random_mixing(3, 6, seed=1)
        Z = rng.standard_normal((10, 3))
        np.testing.assert_allclose(mix(mixing, Z) @ mixing.pinv.T, Z, atol=1e-10)

    def test_d_below_n_rejected(self):
        with pytest.raises(DomainError):
            random_mixing(3, 2, seed=0)
        with pytest.raises(DomainError):
            MixingMap(np.ones((2, 3)))

    def test_rank_and_condition(self):
        mixing = random_mixing(2, 4, seed=8, condition_cap=100.0)
        assert np.linalg.matrix_rank(mixing.T) == 2
        assert mixing.condition_number <= 100.0

    def test_seeded(self):
        np.testing.assert_array_equal(random_mixing(3, 5, seed=4).T, random_mixing(3, 5, seed=4).T)

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            mix(MixingMap(np.eye(3)), np.ones((4, 2)))


class TestRandomScm:
    def test_nn_first_layers_have_full_column_rank(self, diamond):
        scm = random_scm(diamond, MechanismKind.TWO_LAYER_NN, seed=6)
        for i in range(4):
            p = len(diamond.parents(i))
            for mech in (scm.obs_mech[i], scm.int_mech[i]):
                if p:
                    assert np.linalg.matrix_rank(mech.params["W"]) == p

    def test_roots_are_constant(self, diamond):
        scm = random_scm(diamond, MechanismKind.QUADRATIC, seed=6)
        assert scm.obs_mech[0].kind == MechanismKind.CONSTANT

    def test_seeded(self, diamond):
        assert random_scm(diamond, MechanismKind.LINEAR, seed=1).digest() == \
            random_scm(diamond, MechanismKind.LINEAR, seed=1).digest()

    def test_soft_variants(self, chain3):
        noise_only = random_scm(chain3, MechanismKind.QUADRATIC, seed=2,
                                soft_variant=SoftVariant.NOISE_ONLY)
        assert noise_only.int_mech[1].same_as(noise_only.obs_mech[1])
        assert noise_only.int_noise[1].scale > noise_only.obs_noise[1].scale
        mech_only = random_scm(chain3, MechanismKind.QUADRATIC, seed=2,
                               soft_variant=SoftVariant.MECHANISM_ONLY)
        assert mech_only.int_noise[1] == mech_only.obs_noise[1]
        assert not mech_only.int_mech[1].same_as(mech_only.obs_mech[1])


class TestSimulateDataset:
    def test_observations_are_mixed_latents(self, chain3):
        scm = random_scm(chain3, MechanismKind.QUADRATIC, seed=0)
        mixing = random_mixing(3, 5, seed=1)
        data = simulate_dataset(scm, mixing, EnvironmentSet.atomic(3), 100, seed=2)
        assert data.environments == 4
        for Z, X in zip(data.Z, data.X):
            np.testing.assert_allclose(X, Z @ mixing.T.T, atol=1e-12)
        assert data.digest == scm.digest()
