"""
Assumption Audit Module untuk SCALE-I
=====================================
Modul ini berisi cek numerik untuk syarat-syarat yang dipakai recovery:

- coverage: setiap node diintervensi tepat di satu environment atomik;
- regularity: log density ratio tiap node bergantung pada setiap parent;
- V-matrix rank: gradien mekanisme yang ditumpuk menjamin perubahan score
  tidak bisa dibatalkan oleh mixing;
- NN rank: bobot hidden layer pada mekanisme two-layer network punya full
  column rank.

Semua cek dievaluasi di titik acak, jadi lulus berarti sertifikat sampai
toleransi numerik, sedangkan gagal adalah bukti kuat tapi bukan pembuktian.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from model.scm import Coupling, EnvironmentSet, MechanismKind, Scm
from utils.errors import DomainError

logger = logging.getLogger(__name__)

FD_STEP = 1e-5
DERIVATIVE_FLOOR = 1e-8
REGULARITY_PASS = 0.99
RANK_TOL = 1e-8


class Verdict(str, Enum):
    """Hasil satu cek audit untuk satu node."""

    PASS = "pass"
    FAIL = "fail"
    NOT_APPLICABLE = "not-applicable"


@dataclass(frozen=True)
class NodeAudit:
    """Class untuk menyimpan hasil semua cek audit pada satu node."""

    node: int
    n_parents: int
    regularity: Optional[float]
    vmatrix_rank: Optional[int]
    nn_rank: Optional[int]
    regularity_verdict: Verdict
    vmatrix_verdict: Verdict
    nn_verdict: Verdict
    witnesses: Tuple[str, ...] = ()

    @property
    def vmatrix_required(self) -> int:
        return self.n_parents + 1

    @property
    def verdicts(self) -> Tuple[Verdict, ...]:
        return (self.regularity_verdict, self.vmatrix_verdict, self.nn_verdict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "node": self.node + 1,
            "parents": self.n_parents,
            "regularity": self.regularity,
            "regularity_verdict": self.regularity_verdict.value,
            "vmatrix_rank": self.vmatrix_rank,
            "vmatrix_required": self.vmatrix_required,
            "vmatrix_verdict": self.vmatrix_verdict.value,
            "nn_rank": self.nn_rank,
            "nn_verdict": self.nn_verdict.value,
            "witnesses": list(self.witnesses),
        }


@dataclass(frozen=True)
class AuditReport:
    """Class untuk laporan audit lengkap: coverage plus hasil per node."""

    coverage_ok: bool
    nodes: Tuple[NodeAudit, ...] = field(default_factory=tuple)

    @property
    def regularity(self) -> List[Optional[float]]:
        return [a.regularity for a in self.nodes]

    @property
    def vmatrix_ranks(self) -> List[Optional[int]]:
        return [a.vmatrix_rank for a in self.nodes]

    @property
    def nn_ranks(self) -> List[Optional[int]]:
        return [a.nn_rank for a in self.nodes]

    @property
    def passed(self) -> bool:
        return self.coverage_ok and all(Verdict.FAIL not in a.verdicts for a in self.nodes)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "coverage_ok": self.coverage_ok,
            "passed": self.passed,
            "numerical_surrogate": True,
            "nodes": [a.to_dict() for a in self.nodes],
        }

    def to_frame(self) -> pd.DataFrame:
        """Tabel per node untuk output console."""
        rows = []
        for a in self.nodes:
            rows.append({
                "node": a.node + 1,
                "|Pa|": a.n_parents,
                "regularity": "-" if a.regularity is None else f"{a.regularity:.3f}",
                "regularity_verdict": a.regularity_verdict.value,
                "vmatrix": "-" if a.vmatrix_rank is None else f"{a.vmatrix_rank}/{a.vmatrix_required}",
                "vmatrix_verdict": a.vmatrix_verdict.value,
                "nn_rank": "-" if a.nn_rank is None else str(a.nn_rank),
                "nn_verdict": a.nn_verdict.value,
            })
        return pd.DataFrame(rows)


# OPERASI

def audit_coverage(envs: EnvironmentSet, n: int) -> bool:
    """True jika environment 0 observasional dan sisanya mengintervensi tiap node sekali."""
    if envs.count != n + 1 or envs.targets[0]:
        return False
    if any(len(t) != 1 for t in envs.targets[1:]):
        return False
    hit = [next(iter(t)) for t in envs.targets[1:]]
    return sorted(hit) == list(range(n))


def _log_ratio(scm: Scm, i: int, Z: np.ndarray) -> np.ndarray:
    return scm.log_conditional(i, Z, True) - scm.log_conditional(i, Z, False)


def audit_regularity(scm: Scm, i: int, points: int = 1000, seed: int = 0) -> Optional[float]:
    """
    Hitung fraksi titik acak di mana ∂/∂z_k log(q_i/p_i) tidak nol,
    diminimalkan atas parent k.

    Args:
        scm: model laten
        i: node
        points: jumlah titik standard-normal
        seed: seed generator

    Returns:
        Fraksi minimum atas parent, atau None untuk root
    """
    parents = scm.parent_index(i)
    if not parents:
        return None
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((points, scm.n))
    fractions = []
    for k in parents:
        step = np.zeros(scm.n)
        step[k] = FD_STEP
        derivative = (_log_ratio(scm, i, Z + step) - _log_ratio(scm, i, Z - step)) / (2 * FD_STEP)
        fractions.append(float(np.mean(np.abs(derivative) > DERIVATIVE_FLOOR)))
    return min(fractions)


def audit_vmatrix(scm: Scm, i: int, w: Optional[int] = None, seed: int = 0) -> Optional[int]:
    """
    Hitung rank numerik V dengan baris [∇f_p(φᵗ), −1] dan [∇f_q(φᵗ), −1].

    Returns:
        Rank, atau None jika coupling tidak additive
    """
    if scm.coupling != Coupling.ADDITIVE:
        return None
    p = len(scm.parent_index(i))
    w = w or 4 * (p + 1)
    if w < 1:
        raise DomainError(f"Number of sample points must be positive, got {w}")
    phi = np.random.default_rng(seed).standard_normal((w, p))
    ones = -np.ones((w, 1))
    V = np.vstack([
        np.hstack([scm.obs_mech[i].gradient(phi), ones]),
        np.hstack([scm.int_mech[i].gradient(phi), ones]),
    ])
    s = np.linalg.svd(V, compute_uv=False)
    return int(np.sum(s > RANK_TOL * s[0]))


def nn_rank(scm: Scm, i: int) -> Optional[int]:
    """max{rank(W^p), rank(W^q)} atas mekanisme two-layer network milik node."""
    ranks = []
    for mech in (scm.obs_mech[i], scm.int_mech[i]):
        if mech.kind == MechanismKind.TWO_LAYER_NN:
            W = mech.params["W"]
            s = np.linalg.svd(W, compute_uv=False)
            ranks.append(int(np.sum(s > RANK_TOL * s[0])) if s.size and s[0] > 0 else 0)
    return max(ranks) if ranks else None


def audit_nn_rank(scm: Scm, i: int) -> Verdict:
    p = len(scm.parent_index(i))
    rank = nn_rank(scm, i)
    if p == 0 or rank is None:
        return Verdict.NOT_APPLICABLE
    return Verdict.PASS if rank == p else Verdict.FAIL


def audit_node(scm: Scm, i: int, points: int = 1000, seed: int = 0) -> NodeAudit:
    """Jalankan semua cek pada satu node dan kumpulkan witness untuk yang gagal."""
    p = len(scm.parent_index(i))
    witnesses = []

    regularity = audit_regularity(scm, i, points, seed)
    if regularity is None:
        reg_verdict = Verdict.NOT_APPLICABLE
    elif regularity >= REGULARITY_PASS:
        reg_verdict = Verdict.PASS
    else:
        reg_verdict = Verdict.FAIL
        witnesses.append(f"regularity fraction {regularity:.3f} < {REGULARITY_PASS}")

    rank = audit_vmatrix(scm, i, seed=seed)
    if rank is None:
        v_verdict = Verdict.NOT_APPLICABLE
    elif rank == p + 1:
        v_verdict = Verdict.PASS
    else:
        v_verdict = Verdict.FAIL
        witnesses.append(f"V-matrix rank {rank} < {p + 1}")

    nn_verdict = audit_nn_rank(scm, i)
    rank_nn = nn_rank(scm, i)
    if nn_verdict == Verdict.FAIL:
        witnesses.append(f"hidden-layer rank {rank_nn} < {p}")

    return NodeAudit(i, p, regularity, rank, rank_nn, reg_verdict, v_verdict, nn_verdict,
                     tuple(witnesses))


def build_audit(scm: Scm, envs: EnvironmentSet, points: int = 1000, seed: int = 0) -> AuditReport:
    """Jalankan setiap audit pada setiap node."""
    coverage = audit_coverage(envs, scm.n)
    if not coverage:
        logger.warning("Environment layout %s does not cover each node once", envs.to_labels())
    nodes = tuple(audit_node(scm, i, points, seed) for i in range(scm.n))
    failed = [a.node + 1 for a in nodes if Verdict.FAIL in a.verdicts]
    if failed:
        logger.info("Audit failures at nodes %s", failed)
    return AuditReport(coverage, nodes)
