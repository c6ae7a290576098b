"""
SCALE-I Recovery Module
=======================
Modul ini berisi recovery berbasis score untuk DAG laten dan variabel laten
dari environment interventional:

1. selisih score per environment membentang subspace di dalam image(T);
2. sink peeling memilih arah encoder yang meminimalkan jumlah environment
   tempat tiap koordinat score tertransformasi berubah;
3. change matrix hasilnya dipermutasi ke bentuk upper-triangular, dan dari
   situ DAG laten dibaca;
4. untuk hard intervention, estimasi yang surrounded di-unmix sampai
   independen dari estimasi surrounding-nya di environment miliknya sendiri.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple

import dcor
import numpy as np
from scipy.optimize import linear_sum_assignment, minimize_scalar

from model.graph import (CausalOrder, Dag, SurroundMap, dag_equal_up_to_order,
                         sigma_mask)
from model.scm import MixingMap
from scores.change_analysis import ChangeMatrix, EquivalenceConfig, delta_x
from utils.errors import (ContractViolation, DomainError, IdentifiabilityError,
                          RefinementError)
from utils.seeding import STAGE_REFINE, make_rng

logger = logging.getLogger(__name__)

BETA_METHODS = ("golden", "decorrelate")

# Lebar relatif bracket awal golden-section search di sekitar estimasi least squares.
BRACKET_WIDTH = 0.1
FAST_DCOR = dcor.DistanceCovarianceMethod.AVL


@dataclass(frozen=True)
class RecoveryConfig:
    """
    Threshold untuk pipeline recovery.

    Args:
        equivalence: setting tester almost-sure equivalence
        rank_tol: cutoff singular value relatif untuk span dan null space
        peel_tol: jarak minimum dari arah yang sudah di-assign agar arah
            encoder baru dihitung
        independence_threshold: distance correlation maksimum setelah unmixing
        independence_samples: ukuran subsample untuk tes independensi
        beta_method: 'golden' (golden-section search atas distance
            correlation) atau 'decorrelate' (hanya least squares)
        beta_bound: β dibatasi di [-beta_bound, beta_bound]
        max_peel_nodes: budget pencarian backtracker peeling
        manifold_tol: residual rekonstruksi relatif yang masih diterima untuk input
        seed: seed subsampling refinement
    """
    equivalence: EquivalenceConfig = field(default_factory=EquivalenceConfig)
    rank_tol: float = 1e-6
    peel_tol: float = 1e-4
    independence_threshold: float = 0.05
    independence_samples: int = 2000
    beta_method: str = "golden"
    beta_bound: float = 10.0
    max_peel_nodes: int = 5000
    manifold_tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.beta_method not in BETA_METHODS:
            raise DomainError(f"beta_method must be one of {BETA_METHODS}, got '{self.beta_method}'")
        if not 0 < self.rank_tol < 1:
            raise DomainError(f"rank_tol must lie in (0, 1), got {self.rank_tol}")
        if self.independence_samples < 10:
            raise DomainError("independence_samples must be at least 10")


@dataclass(frozen=True, eq=False)
class DifferenceSubspace:
    env: int
    basis: np.ndarray
    flagged: bool = False

    @property
    def rank(self) -> int:
        return int(self.basis.shape[1])


@dataclass(frozen=True, eq=False)
class DecoderEstimate:
    """
    Kandidat transformasi U, encoder U⁺, dan struktur yang dibaca darinya.

    ``env_of_node[r]`` adalah environment (1-based) yang mengintervensi node
    estimasi r. Kolom U sudah mengikuti causal order hasil recovery (dag_hat
    upper-triangular), jadi ``order`` selalu permutasi identity.
    """
    U: np.ndarray
    encoder: np.ndarray
    delta: ChangeMatrix
    p2: Tuple[int, ...]
    K: ChangeMatrix
    dag_hat: Dag
    order: CausalOrder
    env_of_node: Tuple[int, ...]
    subspace_ranks: Tuple[int, ...]
    predicted_delta: Optional[ChangeMatrix] = None
    unmixing_coeffs: Dict[Tuple[int, int], float] = field(default_factory=dict)
    hard_refined: bool = False

    @property
    def n(self) -> int:
        return self.U.shape[1]

    @property
    def d(self) -> int:
        return self.U.shape[0]


@dataclass(frozen=True, eq=False)
class RecoveryReport:
    decoder: DecoderEstimate
    h_matrix: Optional[np.ndarray] = None
    p1: Optional[Tuple[int, ...]] = None
    h_bar: Optional[np.ndarray] = None
    c_diag: Optional[np.ndarray] = None
    b_matrix: Optional[np.ndarray] = None
    matched_order: Optional[CausalOrder] = None
    dag_recovered: Optional[bool] = None
    k_matches_truth: Optional[bool] = None
    mask_ok: Optional[bool] = None
    inverse_mask_ok: Optional[bool] = None
    b_disallowed: Optional[float] = None

    @property
    def subspace_ranks(self) -> Tuple[int, ...]:
        return self.decoder.subspace_ranks

    @property
    def hard_refined(self) -> bool:
        return self.decoder.hard_refined

    @property
    def unmixing_coeffs(self) -> Dict[Tuple[int, int], float]:
        return self.decoder.unmixing_coeffs

    def to_dict(self) -> Dict[str, Any]:
        dec = self.decoder
        data: Dict[str, Any] = {
            "delta": dec.delta.to_rows(),
            "K": dec.K.to_rows(),
            "p2": [c + 1 for c in dec.p2],
            "order": dec.order.labels(),
            "env_of_node": list(dec.env_of_node),
            "dag_hat": dec.dag_hat.to_text(),
            "dag_hat_edges": [[j + 1, i + 1] for j, i in dec.dag_hat.edges],
            "l0": dec.delta.l0(),
            "subspace_ranks": list(dec.subspace_ranks),
            "hard_refined": dec.hard_refined,
            "unmixing_coeffs": {f"{i + 1},{j + 1}": float(b)
                                for (i, j), b in sorted(dec.unmixing_coeffs.items())},
            "gauge": "encoder rows unit norm, first nonzero entry positive",
        }
        if dec.predicted_delta is not None:
            data["predicted_delta"] = dec.predicted_delta.to_rows()
        if self.h_matrix is not None:
            data.update({
                "H": self.h_matrix.tolist(),
                "p1": [s + 1 for s in self.p1],
                "H_bar": self.h_bar.tolist(),
                "C": self.c_diag.tolist(),
                "B": self.b_matrix.tolist(),
                "matched_order": self.matched_order.labels(),
                "dag_recovered": self.dag_recovered,
                "k_matches_truth": self.k_matches_truth,
                "mask_ok": self.mask_ok,
                "inverse_mask_ok": self.inverse_mask_ok,
                "b_disallowed": self.b_disallowed,
            })
        return data


# HELPER ALJABAR LINEAR

def _null_space(M: np.ndarray, rank_tol: float) -> np.ndarray:
    """Basis orthonormal dari {v : M v = 0}; cutoff tidak pernah di bawah rank_tol."""
    cols = M.shape[1]
    if M.shape[0] == 0 or cols == 0:
        return np.eye(cols)
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    cutoff = rank_tol * max(float(s[0]) if s.size else 0.0, 1.0)
    rank = int(np.sum(s > cutoff))
    return Vt[rank:].T


def _new_directions(F: np.ndarray, assigned: np.ndarray,
                    peel_tol: float) -> Tuple[int, Optional[np.ndarray]]:
    """
    Hitung arah span(F) di luar span(assigned) dan kembalikan vektor unit
    span(F) yang paling jauh dari span(assigned).
    """
    if F.shape[1] == 0:
        return 0, None
    residual = F - assigned @ (assigned.T @ F) if assigned.shape[1] else F
    _, s, Vt = np.linalg.svd(residual, full_matrices=False)
    count = int(np.sum(s > peel_tol))
    if count == 0:
        return 0, None
    direction = F @ Vt[0]
    return count, direction / np.linalg.norm(direction)


def _orthonormal(columns: List[np.ndarray], dim: int) -> np.ndarray:
    if not columns:
        return np.zeros((dim, 0))
    Q, _ = np.linalg.qr(np.column_stack(columns))
    return Q


def _gauge_factor(row: np.ndarray) -> float:
    norm = np.linalg.norm(row)
    lead = np.flatnonzero(np.abs(row) > 1e-12 * norm)[0]
    return float(norm * np.sign(row[lead]))


def _normalize_gauge(U: np.ndarray, encoder: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Baris encoder unit-norm dengan entri nonzero pertama positif; U ikut di-rescale."""
    U, encoder = U.copy(), encoder.copy()
    for i in range(encoder.shape[0]):
        s = _gauge_factor(encoder[i])
        encoder[i] /= s
        U[:, i] *= s
    return U, encoder


def image_basis(X: np.ndarray, n: int, rank_tol: float = 1e-6) -> np.ndarray:
    """
    Basis orthonormal d×n dari span sampel observasional.
    """
    X = np.asarray(X, dtype=float)
    _, s, Vt = np.linalg.svd(X, full_matrices=False)
    if s.size < n or s[n - 1] <= rank_tol * s[0]:
        raise DomainError(f"Observations span fewer than n={n} dimensions")
    if s.size > n and s[n] > rank_tol * s[0]:
        logger.warning("Observations have numerical rank above n=%d (s[n]/s[0]=%.2e)",
                       n, s[n] / s[0])
    return Vt[:n].T


# LANGKAH RECOVERY

def difference_subspaces(scores: Sequence[np.ndarray], rank_tol: float = 1e-6) -> List[DifferenceSubspace]:
    """
    Span selisih score antara environment 0 dan tiap environment m.

    Baris dinormalisasi sebelum SVD, jadi beberapa score besar tidak bisa
    menutupi arah yang dibawa sisa sampel.

    Args:
        scores: n+1 matriks score K×d pada baris observasional yang sama
        rank_tol: singular value di bawah rank_tol × terbesar dibuang

    Returns:
        Satu DifferenceSubspace per environment interventional, env 1-based
    """
    base = np.asarray(scores[0], dtype=float)
    magnitude = max(float(np.linalg.norm(np.asarray(S), axis=1).max(initial=0.0)) for S in scores)
    floor = rank_tol * max(magnitude, np.finfo(float).tiny)

    subspaces = []
    for m in range(1, len(scores)):
        diff = base - np.asarray(scores[m], dtype=float)
        norms = np.linalg.norm(diff, axis=1)
        keep = norms > floor
        if not keep.any():
            logger.warning("Environment %d: score differences vanish", m)
            subspaces.append(DifferenceSubspace(m, np.zeros((base.shape[1], 0)), flagged=True))
            continue
        rows = diff[keep] / norms[keep, None]
        _, s, Vt = np.linalg.svd(rows, full_matrices=False)
        rank = int(np.sum(s > rank_tol * s[0]))
        subspaces.append(DifferenceSubspace(m, Vt[:rank].T))
        logger.debug("Environment %d: difference subspace rank %d", m, rank)
    return subspaces


def minimize_variations(subspaces: Sequence[DifferenceSubspace], image: np.ndarray, n: int,
                        cfg: RecoveryConfig) -> Tuple[np.ndarray, ChangeMatrix, Tuple[int, ...]]:
    """
    Sink peeling dengan backtracking.

    Di tiap langkah sebuah environment lolos jika arah yang orthogonal ke
    subspace semua environment tersisa lainnya menambah tepat satu dimensi
    ke arah yang sudah di-assign. Di dalam ruang itu arahnya lalu dibuat
    orthogonal ke sebanyak mungkin environment yang sudah di-peel. Assignment
    lengkap hanya diterima jika tiap kolom change matrix-nya punya jumlah
    angka satu sebanyak rank subspace selisih environment tersebut.

    Args:
        subspaces: output difference_subspaces
        image: basis orthonormal d×n dari image(T)
        n: jumlah node laten
        cfg: threshold recovery

    Returns:
        (A, delta, own_env): arah encoder n×n dalam koordinat image sebagai
        kolom (urutan peel dibalik, jadi change matrix bisa
        di-triangularize); change matrix konstruktif; kolom environment
        (0-based) tempat tiap baris di-peel
    """
    if len(subspaces) != n:
        raise DomainError(f"Expected {n} subspaces, got {len(subspaces)}")
    flagged = [s.env for s in subspaces if s.flagged]
    if flagged:
        raise IdentifiabilityError("Interventions leave the score unchanged", flagged)

    bases = [image.T @ s.basis for s in subspaces]
    ranks = [s.rank for s in subspaces]
    budget = [cfg.max_peel_nodes]
    implicated: Set[int] = set()

    def complement(envs: Sequence[int]) -> np.ndarray:
        if not envs:
            return np.eye(n)
        G = np.hstack([bases[k] for k in envs])
        return _null_space(G.T, cfg.rank_tol)

    def accept(peeled: List[Tuple[int, np.ndarray, List[int]]]) -> Optional[Tuple]:
        delta = np.zeros((n, n), dtype=int)
        for r, (_, _, changes) in enumerate(reversed(peeled)):
            delta[r, changes] = 1
        mismatched = [k for k in range(n) if delta[:, k].sum() != ranks[k]]
        if mismatched:
            implicated.update(mismatched)
            logger.debug("Rejected peel order %s: columns %s disagree with subspace ranks",
                         [m + 1 for m, _, _ in peeled], [k + 1 for k in mismatched])
            return None
        A = np.column_stack([v for _, v, _ in reversed(peeled)])
        own = tuple(m for m, _, _ in reversed(peeled))
        return A, ChangeMatrix(delta), own

    def search(remaining: Tuple[int, ...], peeled: List[Tuple[int, np.ndarray, List[int]]]):
        if not remaining:
            return accept(peeled)
        assigned = _orthonormal([v for _, v, _ in peeled], n)
        progressed = False
        for m in remaining:
            budget[0] -= 1
            if budget[0] < 0:
                raise IdentifiabilityError("Peeling search budget exhausted",
                                           [k + 1 for k in remaining])
            W = complement([k for k in remaining if k != m])
            count, _ = _new_directions(W, assigned, cfg.peel_tol)
            if count != 1:
                continue
            progressed = True

            F, changes = W, [m]
            for k in sorted(e for e, _, _ in peeled):
                candidate = F @ _null_space(bases[k].T @ F, cfg.rank_tol)
                if _new_directions(candidate, assigned, cfg.peel_tol)[0] >= 1:
                    F = candidate
                else:
                    changes.append(k)
            _, direction = _new_directions(F, assigned, cfg.peel_tol)
            logger.debug("Peeled environment %d (changes in %s)", m + 1,
                         sorted(c + 1 for c in changes))
            result = search(tuple(k for k in remaining if k != m),
                            peeled + [(m, direction, sorted(changes))])
            if result is not None:
                return result
        if not progressed:
            implicated.update(remaining)
        return None

    result = search(tuple(range(n)), [])
    if result is None:
        raise IdentifiabilityError("No score-variation minimizer is consistent with the "
                                   "environment subspaces", [k + 1 for k in implicated])
    return result


def triangularize(delta: ChangeMatrix) -> Optional[Tuple[int, ...]]:
    """
    Permutasi kolom terkecil secara leksikografis yang menghasilkan matriks
    upper-triangular dengan diagonal nonzero, atau None.
    """
    D = delta.delta
    n = D.shape[0]
    if D.shape != (n, n):
        raise DomainError(f"Change matrix must be square, got {D.shape}")
    used = [False] * n
    perm: List[int] = []

    def place(j: int) -> bool:
        if j == n:
            return True
        for c in range(n):
            if used[c] or D[j, c] != 1 or D[j + 1:, c].any():
                continue
            used[c] = True
            perm.append(c)
            if place(j + 1):
                return True
            used[c] = False
            perm.pop()
        return False

    return tuple(perm) if place(0) else None


def build_dag(K: ChangeMatrix) -> Dag:
    """Pa(i) = {j : K[j, i] = 1, j ≠ i}."""
    M = K.delta
    n = M.shape[0]
    if M.shape != (n, n):
        raise ContractViolation(f"K must be square, got {M.shape}")
    zero_diag = [i + 1 for i in range(n) if M[i, i] != 1]
    if zero_diag:
        raise ContractViolation(f"Malformed K: zero diagonal at {zero_diag}")
    if np.tril(M, -1).any():
        raise ContractViolation("Malformed K: entries below the diagonal")
    return Dag(n, [set(np.flatnonzero(M[:i, i]).tolist()) for i in range(n)])


def soft_recover(scores: Sequence[np.ndarray], basis: np.ndarray,
                 cfg: Optional[RecoveryConfig] = None) -> DecoderEstimate:
    """
    Recover decoder dari score n+1 environment (langkah 1 sampai 4).

    Args:
        scores: n+1 matriks score K×d pada baris observasional
        basis: basis orthonormal d×n dari image(T)
        cfg: threshold recovery

    Returns:
        DecoderEstimate yang DAG-nya sama dengan DAG laten sampai causal
        order yang valid, selama kondisi identifiability terpenuhi
    """
    cfg = cfg or RecoveryConfig()
    n = basis.shape[1]
    if len(scores) != n + 1:
        raise DomainError(f"Expected {n + 1} score matrices, got {len(scores)}")

    subspaces = difference_subspaces(scores, cfg.rank_tol)
    A, predicted, _ = minimize_variations(subspaces, basis, n, cfg)

    U = basis @ A
    U, encoder = _normalize_gauge(U, np.linalg.pinv(U))
    delta = delta_x(U.T, scores, cfg.equivalence)
    if delta != predicted:
        logger.warning("Data-driven change matrix %s differs from constructed %s", delta, predicted)

    p2 = triangularize(delta)
    if p2 is None:
        raise IdentifiabilityError("Change matrix cannot be made upper triangular",
                                   range(1, n + 1))
    K = delta.permute_columns(p2)
    dag_hat = build_dag(K)
    logger.info("Recovered DAG %s with l0=%d", dag_hat, delta.l0())
    return DecoderEstimate(
        U=U, encoder=encoder, delta=delta, p2=p2, K=K, dag_hat=dag_hat,
        order=CausalOrder.identity(n), env_of_node=tuple(c + 1 for c in p2),
        subspace_ranks=tuple(s.rank for s in subspaces), predicted_delta=predicted,
    )


def dependence(x: np.ndarray, y: np.ndarray) -> float:
    """Distance correlation yang sudah bias-corrected, di-clip di nol."""
    x = np.ascontiguousarray(x, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    return float(np.sqrt(max(float(dcor.u_distance_correlation_sqr(x, y)), 0.0)))


def _decorrelate(target: np.ndarray, regressors: np.ndarray) -> np.ndarray:
    t = target - target.mean()
    R = regressors - regressors.mean(axis=0)
    betas, *_ = np.linalg.lstsq(R, t, rcond=None)
    return betas


def _golden_betas(target: np.ndarray, regressors: np.ndarray, start: np.ndarray,
                  bound: float, sweeps: int = 2) -> np.ndarray:
    """
    Golden-section search per koordinat atas jumlah distance correlation.

    Objective memakai semua sampel environment; distance correlation
    univariat berjalan dalam O(K log K).
    """
    betas = np.clip(start, -bound, bound)
    columns = [np.ascontiguousarray(regressors[:, k]) for k in range(regressors.shape[1])]

    def objective(value: float, j: int) -> float:
        trial = betas.copy()
        trial[j] = np.clip(value, -bound, bound)
        residual = np.ascontiguousarray(target - regressors @ trial)
        return sum(dcor.distance_correlation(residual, col, method=FAST_DCOR) for col in columns)

    for _ in range(sweeps):
        for j in range(len(columns)):
            width = BRACKET_WIDTH * max(1.0, abs(betas[j]))
            bracket = (max(betas[j] - width, -bound), min(betas[j] + width, bound))
            current = objective(betas[j], j)
            try:
                result = minimize_scalar(objective, bracket=bracket, args=(j,), method="golden",
                                         options={"xtol": 1e-6, "maxiter": 100})
            except (RuntimeError, ValueError) as exc:
                logger.debug("Golden search for coefficient %d kept %.4f: %s", j, betas[j], exc)
                continue
            if np.isfinite(result.x) and result.fun <= current:
                betas[j] = float(np.clip(result.x, -bound, bound))
    return betas


def hard_refine(decoder: DecoderEstimate, datasets: Sequence[np.ndarray], surround: SurroundMap,
                cfg: Optional[RecoveryConfig] = None) -> DecoderEstimate:
    """
    Unmix estimasi surrounded memakai environment hard intervention miliknya.

    Untuk tiap node estimasi i yang surrounded, dalam causal order terbalik,
    koefisien β_j (j ∈ sur(i)) dipilih supaya Ẑ_i − Σ β_j Ẑ_j independen
    dari setiap Ẑ_j di environment m_i. Baris encoder i menyerap koreksinya;
    kolom j dari U menyerap update kebalikannya, sehingga change matrix
    tidak berubah.

    Args:
        decoder: output soft_recover
        datasets: n+1 matriks observasi K×d, environment 0 lebih dulu
        surround: surround map dari decoder.dag_hat
        cfg: threshold recovery

    Returns:
        DecoderEstimate hasil refinement dengan unmixing_coeffs tercatat
    """
    cfg = cfg or RecoveryConfig()
    n = decoder.n
    if len(datasets) != n + 1:
        raise DomainError(f"Expected {n + 1} datasets, got {len(datasets)}")
    if len(surround.sur) != n:
        raise DomainError(f"Surround map has {len(surround.sur)} nodes, decoder has {n}")

    U, E = decoder.U.copy(), decoder.encoder.copy()
    coeffs = dict(decoder.unmixing_coeffs)
    rng = make_rng(cfg.seed, STAGE_REFINE)
    failures = []

    for i in reversed(range(n)):
        sur_i = sorted(surround.sur[i])
        if not sur_i:
            continue
        X_env = np.asarray(datasets[decoder.env_of_node[i]], dtype=float)
        Zhat = X_env @ E.T
        target, regressors = Zhat[:, i], Zhat[:, sur_i]

        betas = np.clip(_decorrelate(target, regressors), -cfg.beta_bound, cfg.beta_bound)
        if cfg.beta_method == "golden":
            betas = _golden_betas(target, regressors, betas, cfg.beta_bound)
        size = min(cfg.independence_samples, X_env.shape[0])
        sub = np.sort(rng.choice(X_env.shape[0], size=size, replace=False))

        for j, beta in zip(sur_i, betas):
            E[i] -= beta * E[j]
            U[:, j] += beta * U[:, i]
            coeffs[(i, j)] = float(beta)
        s = _gauge_factor(E[i])
        E[i] /= s
        U[:, i] *= s

        corrected = X_env[sub] @ E[i]
        for j in sur_i:
            value = dependence(corrected, Zhat[sub, j])
            logger.debug("Node %d vs %d: beta=%.4f dependence=%.4f", i + 1, j + 1,
                         coeffs[(i, j)], value)
            if value >= cfg.independence_threshold:
                failures.append((i + 1, j + 1, value))

    if failures:
        raise RefinementError("Surrounded estimates remain dependent", failures)
    logger.info("Hard refinement unmixed %d pairs", len(coeffs))
    return replace(decoder, U=U, encoder=E, unmixing_coeffs=coeffs, hard_refined=True)


def estimate_latents(decoder: DecoderEstimate, X: np.ndarray,
                     manifold_tol: float = 1e-8) -> np.ndarray:
    """Ẑ = X·(U⁺)ᵀ, menolak baris yang tidak bisa direkonstruksi U."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != decoder.d:
        raise DomainError(f"Observation shape {X.shape} does not match d={decoder.d}")
    if X.shape[0] == 0:
        return np.zeros((0, decoder.n))
    Zhat = X @ decoder.encoder.T
    residual = np.linalg.norm(X - Zhat @ decoder.U.T, axis=1)
    norms = np.linalg.norm(X, axis=1)
    bad = residual > manifold_tol * np.maximum(norms, np.finfo(float).tiny)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise DomainError(f"Row {row} lies outside the decoder image "
                          f"(residual {residual[row]:.2e})")
    return Zhat


def p1_permutation(A: np.ndarray) -> Tuple[int, ...]:
    """
    Permutasi σ dengan setiap [PA]_{i,i} = A[σ(i), i] nonzero, dari
    maximum-weight matching atas log|A|.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError(f"Matrix must be square, got {A.shape}")
    if abs(np.linalg.det(A)) <= 1e-12:
        raise DomainError("Matrix is singular; no nonzero-diagonal permutation is guaranteed")
    with np.errstate(divide="ignore"):
        cost = -np.log(np.abs(A))
    rows, cols = linear_sum_assignment(cost)
    sigma = [0] * A.shape[0]
    for r, c in zip(rows, cols):
        sigma[c] = int(r)
    return tuple(sigma)


def _support(M: np.ndarray, rel_tol: float) -> np.ndarray:
    scale = np.abs(M).max(axis=1, keepdims=True)
    return (np.abs(M) > rel_tol * scale).astype(int)


def analyze_against_truth(decoder: DecoderEstimate, mixing: MixingMap, dag: Dag,
                          rel_tol: float = 1e-6) -> RecoveryReport:
    """
    Bandingkan decoder dengan ground truth lewat H(U) = (T⁺U)ᵀ.

    Args:
        decoder: decoder hasil recovery
        mixing: mixing map sebenarnya
        dag: DAG laten sebenarnya
        rel_tol: threshold relatif per baris untuk entri nonzero

    Returns:
        RecoveryReport berisi H, P₁, H̄ = P₁H, C dan B dari H̄⁻ᵀ = C + B, serta cek mask
    """
    n = dag.n
    if decoder.n != n or mixing.n != n:
        raise DomainError(f"Size mismatch: decoder n={decoder.n}, mixing n={mixing.n}, dag n={n}")
    H = (mixing.pinv @ decoder.U).T
    if np.linalg.cond(H) > 1e12:
        raise ContractViolation("H(U) is singular; decoder lies outside the candidate set")

    rows = H / np.linalg.norm(H, axis=1, keepdims=True)
    sigma = p1_permutation(rows)
    H_bar = H[list(sigma)]
    G = np.linalg.inv(H_bar).T
    c_diag = np.diag(G).copy()
    b_matrix = G - np.diag(c_diag)

    sigma_m = sigma_mask(dag)
    eye = np.eye(n, dtype=int)
    support_h = _support(H_bar, rel_tol)
    support_g = _support(G, rel_tol)
    mask_ok = bool(np.all(np.diag(support_h) == 1) and np.all(support_h <= eye + sigma_m))
    inverse_mask_ok = bool(np.all(np.diag(support_g) == 1) and np.all(support_g <= eye + sigma_m.T))

    disallowed = (eye + sigma_m.T) == 0
    ratios = np.abs(b_matrix) / np.abs(c_diag)[:, None]
    b_disallowed = float(ratios[disallowed].max()) if disallowed.any() else 0.0

    pi = [0] * n
    for node, r in enumerate(sigma):
        pi[r] = node
    matched = CausalOrder(tuple(pi))
    expected_k = np.array([[int(pi[r] in dag.parents_bar(pi[c])) for c in range(n)]
                           for r in range(n)])

    return RecoveryReport(
        decoder=decoder, h_matrix=H, p1=sigma, h_bar=H_bar, c_diag=c_diag, b_matrix=b_matrix,
        matched_order=matched,
        dag_recovered=dag_equal_up_to_order(dag, decoder.dag_hat, matched),
        k_matches_truth=bool(np.array_equal(decoder.K.delta, expected_k)),
        mask_ok=mask_ok, inverse_mask_ok=inverse_mask_ok, b_disallowed=b_disallowed,
    )


def build_report(decoder: DecoderEstimate) -> RecoveryReport:
    return RecoveryReport(decoder=decoder)


def delta_preserved(decoder: DecoderEstimate, scores: Sequence[np.ndarray],
                    cfg: Optional[RecoveryConfig] = None) -> bool:
    """True jika Δ_X(Uᵀ) hitungan ulang dari score sama dengan change matrix tercatat."""
    cfg = cfg or RecoveryConfig()
    return delta_x(decoder.U.T, scores, cfg.equivalence) == decoder.delta


if __name__ == "__main__":
    from model.scm import EnvironmentSet, MechanismKind, random_mixing, random_scm, simulate_dataset
    from scores.oracle import ScoreOracle

    dag = Dag.diamond()
    scm = random_scm(dag, MechanismKind.QUADRATIC, seed=1)
    mixing = random_mixing(4, 6, seed=2)
    envs = EnvironmentSet.atomic(4)
    data = simulate_dataset(scm, mixing, envs, 5000, seed=3)
    oracle = ScoreOracle(scm, mixing, envs)
    decoder = soft_recover(oracle.all_scores(data.X[0]), image_basis(data.X[0], 4))
    report = analyze_against_truth(decoder, mixing, dag)
    print("recovered:", decoder.dag_hat, "matches truth:", report.dag_recovered)
