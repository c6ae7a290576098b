"""
Score Oracle Module untuk SCALE-I
=================================
Modul ini berisi score function eksak, laten maupun observasi, untuk setiap
environment.

Distribusi observasi hidup di subspace image(T) berdimensi n; score-nya
direalisasikan sebagai (T⁺)ᵀ s_Z(T⁺x), yaitu representatif di image(T) yang
memenuhi Tᵀ s_X(x) = s_Z(z). Kode recovery hanya membaca score lewat
``score_batch``.
"""

import logging
from typing import List, Optional

import numpy as np

from model.scm import EnvironmentSet, MixingMap, Scm
from utils.errors import DomainError

logger = logging.getLogger(__name__)

# Residual proyeksi relatif; di atas nilai ini titik dianggap di luar image(T).
MANIFOLD_TOLERANCE = 1e-8


class ScoreOracle:
    """
    Class untuk score analitik SCM yang diobservasi lewat mixing linear.
    """

    def __init__(self, scm: Scm, mixing: MixingMap, environments: Optional[EnvironmentSet] = None):
        if mixing.n != scm.n:
            raise DomainError(f"Mixing has n={mixing.n}, model has n={scm.n}")
        self.scm = scm
        self.mixing = mixing
        self.environments = environments or EnvironmentSet.atomic(scm.n)
        if self.environments.count != scm.n + 1:
            raise DomainError(
                f"Expected {scm.n + 1} environments, got {self.environments.count}"
            )

    @property
    def n(self) -> int:
        return self.scm.n

    @property
    def d(self) -> int:
        return self.mixing.d

    def latent_score_batch(self, Z: np.ndarray, env: int) -> np.ndarray:
        """
        ∇_z log p^m(z) per baris.

        Args:
            Z: titik laten K×n
            env: indeks environment

        Returns:
            Matriks score K×n
        """
        Z = np.asarray(Z, dtype=float)
        if Z.ndim != 2 or Z.shape[1] != self.n:
            raise DomainError(f"Latent batch shape {Z.shape} does not match n={self.n}")
        target = self.environments.target(env)
        S = np.zeros_like(Z)
        for i in range(self.n):
            d_i, d_pa = self.scm.conditional_score(i, Z, i == target)
            S[:, i] += d_i
            parents = self.scm.parent_index(i)
            if parents:
                S[:, parents] += d_pa
        return S

    def latent_log_density(self, Z: np.ndarray, env: int) -> np.ndarray:
        return self.scm.log_density(np.atleast_2d(Z), self.environments.target(env))

    def check_on_manifold(self, X: np.ndarray) -> None:
        residual = self.mixing.projection_residual(X)
        if residual.size and residual.max() > MANIFOLD_TOLERANCE:
            row = int(np.argmax(residual))
            raise DomainError(
                f"Row {row} lies off image(T): relative residual {residual[row]:.2e}"
            )

    def score_batch(self, X: np.ndarray, env: int) -> np.ndarray:
        """
        Score observasi (T⁺)ᵀ s_Z^m(T⁺x) per baris.

        Args:
            X: observasi K×d di dalam image(T)
            env: indeks environment

        Returns:
            Matriks score K×d
        """
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.d:
            raise DomainError(f"Observation batch shape {X.shape} does not match d={self.d}")
        if X.shape[0] == 0:
            return np.zeros((0, self.d))
        self.check_on_manifold(X)
        Z = X @ self.mixing.pinv.T
        return self.latent_score_batch(Z, env) @ self.mixing.pinv

    def all_scores(self, X: np.ndarray) -> List[np.ndarray]:
        """Score semua environment pada baris observasional yang sama."""
        return [self.score_batch(X, m) for m in range(self.environments.count)]


def latent_score(oracle: ScoreOracle, z: np.ndarray, env: int) -> np.ndarray:
    return oracle.latent_score_batch(np.atleast_2d(z), env)[0]


def observed_score(oracle: ScoreOracle, x: np.ndarray, env: int) -> np.ndarray:
    return oracle.score_batch(np.atleast_2d(x), env)[0]


def score_batch(oracle: ScoreOracle, X: np.ndarray, env: int) -> np.ndarray:
    return oracle.score_batch(X, env)
