"""
Change Analysis Module untuk SCALE-I
====================================
Modul ini berisi tester almost-sure equivalence dan change matrix yang
mencatat koordinat score tertransformasi mana yang berubah antara environment
observasional dan tiap environment interventional.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from model.graph import Dag
from model.scm import EnvironmentSet
from utils.errors import DomainError


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EquivalenceConfig:
    tol: float = 1e-6
    quantile: float = 0.99
    min_samples: int = 1000

    def __post_init__(self):
        if self.tol < 0:
            raise DomainError(f"tol must be non-negative, got {self.tol}")
        if not 0 < self.quantile <= 1:
            raise DomainError(f"quantile must lie in (0, 1], got {self.quantile}")
        if self.min_samples < 1:
            raise DomainError(f"min_samples must be positive, got {self.min_samples}")


@dataclass(frozen=True, eq=False)
class ChangeMatrix:
    """
    Matriks biner; baris adalah koordinat score, kolom adalah environment
    interventional 1..n (disimpan 0-based).
    """
    delta: np.ndarray

    def __post_init__(self):
        delta = np.asarray(self.delta)
        if delta.ndim != 2:
            raise DomainError(f"Change matrix must be 2-D, got shape {delta.shape}")
        if not np.isin(delta, (0, 1)).all():
            raise DomainError("Change matrix entries must be 0 or 1")
        object.__setattr__(self, "delta", delta.astype(int))

    @property
    def shape(self):
        return self.delta.shape

    def l0(self) -> int:
        return int(self.delta.sum())

    def permute_columns(self, perm: Sequence[int]) -> "ChangeMatrix":
        return ChangeMatrix(self.delta[:, list(perm)])

    def permute_rows(self, perm: Sequence[int]) -> "ChangeMatrix":
        return ChangeMatrix(self.delta[list(perm), :])

    def to_rows(self) -> List[str]:
        return ["".join(str(v) for v in row) for row in self.delta]

    @classmethod
    def from_rows(cls, rows: Sequence[str]) -> "ChangeMatrix":
        return cls(np.array([[int(c) for c in row] for row in rows], dtype=int))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ChangeMatrix):
            return NotImplemented
        return self.delta.shape == other.delta.shape and np.array_equal(self.delta, other.delta)

    def __repr__(self) -> str:
        return "ChangeMatrix(" + " ".join(self.to_rows()) + ")"


def as_equal(values: np.ndarray, scale: float, cfg: EquivalenceConfig) -> bool:
    """
    Tentukan apakah besaran acak yang disampling bernilai nol almost surely.

    Args:
        values: sampel besaran tersebut
        scale: normalizer positif
        cfg: threshold tester

    Returns:
        True jika cfg.quantile dari |values| dibagi scale paling besar cfg.tol
    """
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise DomainError("Equivalence test needs at least one sample")
    if values.size < cfg.min_samples:
        raise DomainError(f"Equivalence test needs {cfg.min_samples} samples, got {values.size}")
    if not scale > 0:
        raise DomainError(f"Scale must be positive, got {scale}")
    return bool(np.quantile(np.abs(values), cfg.quantile) / scale <= cfg.tol)


def delta_x(A: np.ndarray, scores: Sequence[np.ndarray], cfg: EquivalenceConfig) -> ChangeMatrix:
    """
    Change matrix dari score tertransformasi A·s terhadap tiap environment.

    Args:
        A: transformasi r×d
        scores: n+1 matriks score (K×d), environment 0 lebih dulu, semuanya
            pada baris observasional yang sama
        cfg: threshold tester

    Returns:
        ChangeMatrix r×n
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    base = np.asarray(scores[0], dtype=float)
    if A.shape[1] != base.shape[1]:
        raise DomainError(f"Transform has {A.shape[1]} columns, scores have {base.shape[1]}")
    for m, S in enumerate(scores):
        if np.shape(S) != base.shape:
            raise DomainError(f"Score matrix of environment {m} has shape {np.shape(S)}, "
                              f"expected {base.shape}")

    row_norms = np.linalg.norm(A, axis=1)
    delta = np.zeros((A.shape[0], len(scores) - 1), dtype=int)
    for m in range(1, len(scores)):
        diff = base - np.asarray(scores[m], dtype=float)
        diff_norms = np.linalg.norm(diff, axis=1)
        typical = float(np.median(diff_norms)) or float(diff_norms.mean())
        values = diff @ A.T
        for i in range(A.shape[0]):
            scale = row_norms[i] * typical
            if scale == 0.0:
                continue
            delta[i, m - 1] = 0 if as_equal(values[:, i], scale, cfg) else 1
    return ChangeMatrix(delta)


def true_delta(dag: Dag, envs: EnvironmentSet) -> ChangeMatrix:
    """Entri (i, m) bernilai 1 jika dan hanya jika i ∈ pa̅(I^m)."""
    delta = np.zeros((dag.n, envs.count - 1), dtype=int)
    for m in range(1, envs.count):
        for target in envs.targets[m]:
            for i in dag.parents_bar(target):
                delta[i, m - 1] = 1
    return ChangeMatrix(delta)


def l0(delta: ChangeMatrix) -> int:
    return delta.l0()
