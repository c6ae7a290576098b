import numpy as np
import pytest

from ml.metrics import (MIN_CORRELATION, correlation_matrix, match_order, mixing_consistency,
                        scaling_consistency, shd)
from model.graph import Dag, surround_map
from utils.errors import DomainError


@pytest.fixture
def latents(rng):
    return rng.standard_normal((2000, 3))


class TestCorrelationMatrix:
    def test_indexed_by_true_node_then_estimate(self, latents):
        corr = correlation_matrix(latents, latents[:, [2, 0, 1]])
        assert corr[2, 0] == pytest.approx(1.0)
        assert corr[0, 1] == pytest.approx(1.0)
        assert corr[1, 2] == pytest.approx(1.0)
        assert np.all(corr >= 0) and np.all(corr <= 1)


class TestMatchOrder:
    def test_empty_graph_follows_permutation(self, latents):
        corr = correlation_matrix(latents, latents[:, [2, 0, 1]])
        assert match_order(corr, Dag.empty(3)).pi == (2, 0, 1)

    def test_chain_admits_only_identity(self, latents, chain3):
        corr = correlation_matrix(latents, latents[:, [2, 0, 1]])
        assert match_order(corr, chain3).pi == (0, 1, 2)

    def test_assignment_without_graph(self, latents):
        corr = correlation_matrix(latents, latents[:, [1, 2, 0]])
        assert match_order(corr).pi == (1, 2, 0)

    def test_large_graph_falls_back_to_assignment(self, rng):
        Z = rng.standard_normal((500, 11))
        perm = rng.permutation(11)
        corr = correlation_matrix(Z, Z[:, perm])
        assert match_order(corr, Dag.empty(11)).pi == tuple(perm)


class TestScalingConsistency:
    def test_exact_recovery(self, latents, chain3):
        score = scaling_consistency(latents, latents * [2.0, -1.0, 0.5], chain3, chain3)
        assert score.min_corr == pytest.approx(1.0)
        assert score.mixing_residual == pytest.approx(0.0, abs=1e-10)
        assert score.passed
        assert score.dag_exact and score.shd == 0

    def test_permuted_estimates_on_empty_graph(self, latents):
        score = scaling_consistency(latents, latents[:, [1, 2, 0]], Dag.empty(3))
        assert score.matched_order.pi == (1, 2, 0)
        assert score.passed
        np.testing.assert_allclose(score.mixing_map, np.eye(3), atol=1e-10)

    def test_mixing_counts_against_scaling(self, latents, chain3):
        Zhat = latents.copy()
        Zhat[:, 2] += 0.5 * latents[:, 1]
        score = scaling_consistency(latents, Zhat, chain3)
        assert score.mixing_residual == pytest.approx(0.5)
        assert score.per_node_corr[2] == pytest.approx(1 / np.sqrt(1.25), abs=0.02)
        assert not score.passed

    def test_wrong_graph(self, latents, chain3):
        score = scaling_consistency(latents, latents, chain3, Dag.empty(3))
        assert score.dag_exact is False
        assert score.shd == 2

    def test_to_dict(self, latents, chain3):
        data = scaling_consistency(latents, latents, chain3).to_dict()
        assert data["order"] == [1, 2, 3]
        assert data["dag_exact"] is None
        assert data["min_corr"] >= MIN_CORRELATION

    def test_input_checks(self, latents, chain3):
        with pytest.raises(DomainError):
            scaling_consistency(latents, latents[:, :2], chain3)
        with pytest.raises(DomainError):
            scaling_consistency(latents[:3], latents[:3], chain3)
        constant = latents.copy()
        constant[:, 1] = 4.0
        with pytest.raises(DomainError, match="constant"):
            scaling_consistency(latents, constant, chain3)
        with pytest.raises(DomainError):
            scaling_consistency(latents, latents, Dag.empty(2))


class TestMixingConsistency:
    def test_surrounding_parent_is_exempt(self, latents, chain3):
        Zhat = latents.copy()
        Zhat[:, 2] += 0.5 * latents[:, 1]
        score = mixing_consistency(latents, Zhat, chain3, surround_map(chain3))
        assert score.mixing_residual == pytest.approx(0.0, abs=1e-10)
        np.testing.assert_allclose(score.mixing_map[2], [0.0, 0.5, 1.0], atol=1e-10)

    def test_non_surrounding_mixing_counts(self, latents, chain3):
        Zhat = latents.copy()
        Zhat[:, 1] += 0.3 * latents[:, 0]
        score = mixing_consistency(latents, Zhat, chain3, surround_map(chain3))
        assert score.mixing_residual == pytest.approx(0.3)


def test_shd(chain3):
    assert shd(chain3, chain3) == 0
    assert shd(chain3, Dag.empty(3)) == 2
