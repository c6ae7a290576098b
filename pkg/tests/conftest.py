"""
Fixture bersama: graph kecil dan problem simulasi yang di-seed.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import pytest

from model.graph import CausalOrder, Dag
from model.scm import (Dataset, EnvironmentSet, InterventionType, MechanismKind, MixingMap, Scm,
                       random_mixing, random_scm, simulate_dataset)
from ml.scale_i import DecoderEstimate
from scores.change_analysis import ChangeMatrix
from scores.oracle import ScoreOracle


@dataclass
class Problem:
    dag: Dag
    scm: Scm
    mixing: MixingMap
    envs: EnvironmentSet
    data: Dataset
    scores: List[np.ndarray]


def make_problem(dag: Dag, kind: MechanismKind = MechanismKind.QUADRATIC,
                 intervention_type: InterventionType = InterventionType.SOFT,
                 d: Optional[int] = None, k: int = 3000, seed: int = 0,
                 identity_mixing: bool = False, envs: Optional[EnvironmentSet] = None) -> Problem:
    scm = random_scm(dag, kind, intervention_type=intervention_type, seed=seed)
    if identity_mixing:
        mixing = MixingMap(np.eye(dag.n))
    else:
        mixing = random_mixing(dag.n, d or dag.n + 2, seed=seed + 100)
    envs = envs or EnvironmentSet.atomic(dag.n)
    data = simulate_dataset(scm, mixing, envs, k, seed=seed + 200)
    scores = ScoreOracle(scm, mixing, envs).all_scores(data.X[0])
    return Problem(dag, scm, mixing, envs, data, scores)


def decoder_from(U: np.ndarray) -> DecoderEstimate:
    """Decoder around a given U with an identity change pattern."""
    n = U.shape[1]
    eye = ChangeMatrix(np.eye(n, dtype=int))
    return DecoderEstimate(U=U, encoder=np.linalg.pinv(U), delta=eye, p2=tuple(range(n)), K=eye,
                           dag_hat=Dag.empty(n), order=CausalOrder.identity(n),
                           env_of_node=tuple(range(1, n + 1)), subspace_ranks=(1,) * n)


@pytest.fixture
def chain3() -> Dag:
    return Dag.chain(3)


@pytest.fixture
def diamond() -> Dag:
    return Dag.diamond()


@pytest.fixture
def triangle() -> Dag:
    return Dag.triangle()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
