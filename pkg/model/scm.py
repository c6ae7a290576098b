"""
Structural Causal Model Module untuk SCALE-I
============================================
Modul ini berisi mekanisme observasional dan interventional per node beserta
noise law-nya, layout environment (satu environment observasional ditambah
satu intervensi atomic per node), observation map linear X = T·Z, dan
sampling dataset laten maupun observasi yang ter-seed.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from scipy.special import expit

from model.graph import Dag
from utils.errors import DomainError, StructuralError
from utils.seeding import derive_seed

logger = logging.getLogger(__name__)

# KONSTANTA MODEL

HARD_SHIFT = 1.0
# Skala noise hard intervention relatif terhadap noise observasional.
HARD_NOISE_FACTOR = 0.25
MULTIPLICATIVE_FLOOR = 0.1
PINV_TOLERANCE = 1e-10


class MechanismKind(str, Enum):
    LINEAR = "linear"
    QUADRATIC = "quadratic"
    TWO_LAYER_NN = "two_layer_nn"
    GENERALIZED_LINEAR = "generalized_linear"
    CONSTANT = "constant"


class NoiseFamily(str, Enum):
    GAUSSIAN = "gaussian"
    LOGISTIC = "logistic"


class Coupling(str, Enum):
    ADDITIVE = "additive"
    MULTIPLICATIVE = "multiplicative"


class InterventionType(str, Enum):
    SOFT = "soft"
    HARD = "hard"


class SoftVariant(str, Enum):
    BOTH = "both"
    MECHANISM_ONLY = "mechanism_only"
    NOISE_ONLY = "noise_only"


_REQUIRED_PARAMS = {
    MechanismKind.LINEAR: ("weights", "bias"),
    MechanismKind.QUADRATIC: ("matrix",),
    MechanismKind.TWO_LAYER_NN: ("W", "nu", "nu0"),
    MechanismKind.GENERALIZED_LINEAR: ("weights", "scale", "bias"),
    MechanismKind.CONSTANT: ("value",),
}


@dataclass(frozen=True, eq=False)
class Mechanism:
    """
    Class untuk mekanisme causal f(φ) satu node, lengkap dengan gradient eksaknya.

    Argumen ``phi`` berupa array K×p berisi nilai parent, urut naik menurut
    indeks parent.
    """
    kind: MechanismKind
    params: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        kind = MechanismKind(self.kind)
        object.__setattr__(self, "kind", kind)
        missing = [k for k in _REQUIRED_PARAMS[kind] if k not in self.params]
        if missing:
            raise StructuralError(f"{kind.value} mechanism missing parameters {missing}")
        params = {k: np.asarray(v, dtype=float) for k, v in self.params.items()}
        for name, value in params.items():
            if not np.all(np.isfinite(value)):
                raise StructuralError(f"Parameter '{name}' of {kind.value} mechanism is not finite")
        if kind == MechanismKind.QUADRATIC:
            A = params["matrix"]
            if A.ndim != 2 or A.shape[0] != A.shape[1] or not np.allclose(A, A.T):
                raise StructuralError("Quadratic mechanism needs a symmetric square matrix")
        if kind == MechanismKind.TWO_LAYER_NN:
            if params["W"].ndim != 2 or params["nu"].shape != (params["W"].shape[0],):
                raise StructuralError("Two-layer NN needs W (w×p) and nu (w,)")
        object.__setattr__(self, "params", params)

    # KONSTRUKTOR

    @classmethod
    def constant(cls, value: float) -> "Mechanism":
        return cls(MechanismKind.CONSTANT, {"value": value})

    @classmethod
    def linear(cls, weights: Sequence[float], bias: float = 0.0) -> "Mechanism":
        return cls(MechanismKind.LINEAR, {"weights": weights, "bias": bias})

    @classmethod
    def quadratic(cls, matrix: np.ndarray) -> "Mechanism":
        return cls(MechanismKind.QUADRATIC, {"matrix": matrix})

    @classmethod
    def two_layer_nn(cls, W: np.ndarray, nu: Sequence[float], nu0: float = 0.0) -> "Mechanism":
        return cls(MechanismKind.TWO_LAYER_NN, {"W": W, "nu": nu, "nu0": nu0})

    @classmethod
    def generalized_linear(cls, weights: Sequence[float], scale: float = 1.0,
                           bias: float = 0.0) -> "Mechanism":
        return cls(MechanismKind.GENERALIZED_LINEAR,
                   {"weights": weights, "scale": scale, "bias": bias})

    @property
    def n_parents(self) -> Optional[int]:
        """Jumlah parent sesuai bentuk parameter; None untuk konstanta."""
        if self.kind == MechanismKind.CONSTANT:
            return None
        if self.kind in (MechanismKind.LINEAR, MechanismKind.GENERALIZED_LINEAR):
            return int(self.params["weights"].shape[0])
        if self.kind == MechanismKind.QUADRATIC:
            return int(self.params["matrix"].shape[0])
        return int(self.params["W"].shape[1])

    # EVALUASI

    def evaluate(self, phi: np.ndarray) -> np.ndarray:
        phi = np.atleast_2d(np.asarray(phi, dtype=float))
        p = self.params
        if self.kind == MechanismKind.CONSTANT:
            return np.full(phi.shape[0], float(p["value"]))
        if self.kind == MechanismKind.LINEAR:
            return phi @ p["weights"] + p["bias"]
        if self.kind == MechanismKind.QUADRATIC:
            return np.einsum("kp,pq,kq->k", phi, p["matrix"], phi)
        if self.kind == MechanismKind.TWO_LAYER_NN:
            return expit(phi @ p["W"].T) @ p["nu"] + p["nu0"]
        return p["scale"] * np.tanh(phi @ p["weights"]) + p["bias"]

    def gradient(self, phi: np.ndarray) -> np.ndarray:
        """∇_φ f, shape K×p."""
        phi = np.atleast_2d(np.asarray(phi, dtype=float))
        p = self.params
        if self.kind == MechanismKind.CONSTANT:
            return np.zeros_like(phi)
        if self.kind == MechanismKind.LINEAR:
            return np.broadcast_to(p["weights"], phi.shape).copy()
        if self.kind == MechanismKind.QUADRATIC:
            return 2.0 * phi @ p["matrix"]
        if self.kind == MechanismKind.TWO_LAYER_NN:
            s = expit(phi @ p["W"].T)
            return (s * (1.0 - s) * p["nu"]) @ p["W"]
        t = np.tanh(phi @ p["weights"])
        return (p["scale"] * (1.0 - t ** 2))[:, None] * p["weights"][None, :]

    def same_as(self, other: "Mechanism") -> bool:
        if self.kind != other.kind or self.params.keys() != other.params.keys():
            return False
        return all(
            self.params[k].shape == other.params[k].shape
            and np.array_equal(self.params[k], other.params[k])
            for k in self.params
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value,
                "params": {k: v.tolist() for k, v in sorted(self.params.items())}}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Mechanism":
        return cls(MechanismKind(data["kind"]), dict(data["params"]))


@dataclass(frozen=True)
class NoiseLaw:
    """
    Noise berpusat di nol dengan density analitik yang selalu positif.
    """
    family: NoiseFamily = NoiseFamily.GAUSSIAN
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", NoiseFamily(self.family))
        object.__setattr__(self, "scale", float(self.scale))
        if not self.scale > 0:
            raise StructuralError(f"Noise scale must be positive, got {self.scale}")

    @property
    def distribution(self):
        if self.family == NoiseFamily.GAUSSIAN:
            return stats.norm(loc=0.0, scale=self.scale)
        return stats.logistic(loc=0.0, scale=self.scale)

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        return np.asarray(self.distribution.rvs(size=k, random_state=rng), dtype=float)

    def log_density(self, u: np.ndarray) -> np.ndarray:
        return self.distribution.logpdf(u)

    def score(self, u: np.ndarray) -> np.ndarray:
        """r(u) = d/du log h(u)."""
        u = np.asarray(u, dtype=float)
        if self.family == NoiseFamily.GAUSSIAN:
            return -u / self.scale ** 2
        return -np.tanh(u / (2.0 * self.scale)) / self.scale

    def rescaled(self, factor: float) -> "NoiseLaw":
        return NoiseLaw(self.family, self.scale * factor)

    def to_dict(self) -> Dict[str, Any]:
        return {"family": self.family.value, "scale": self.scale}


@dataclass(frozen=True, eq=False)
class Scm:
    """
    SCM laten dengan satu mekanisme observasional dan satu interventional per node.
    """
    dag: Dag
    obs_mech: Tuple[Mechanism, ...]
    int_mech: Tuple[Mechanism, ...]
    obs_noise: Tuple[NoiseLaw, ...]
    int_noise: Tuple[NoiseLaw, ...]
    coupling: Coupling = Coupling.ADDITIVE
    intervention_type: InterventionType = InterventionType.SOFT
    allow_null_interventions: bool = False

    def __post_init__(self):
        object.__setattr__(self, "coupling", Coupling(self.coupling))
        object.__setattr__(self, "intervention_type", InterventionType(self.intervention_type))
        for name in ("obs_mech", "int_mech", "obs_noise", "int_noise"):
            value = tuple(getattr(self, name))
            if len(value) != self.dag.n:
                raise StructuralError(f"{name} has {len(value)} entries for {self.dag.n} nodes")
            object.__setattr__(self, name, value)

        for i in range(self.dag.n):
            n_pa = len(self.dag.parents(i))
            for mech in (self.obs_mech[i], self.int_mech[i]):
                if mech.n_parents is not None and mech.n_parents != n_pa:
                    raise StructuralError(
                        f"Node {i + 1}: {mech.kind.value} mechanism shaped for "
                        f"{mech.n_parents} parents, node has {n_pa}"
                    )
            if (self.intervention_type == InterventionType.HARD
                    and self.int_mech[i].kind != MechanismKind.CONSTANT):
                raise StructuralError(f"Node {i + 1}: hard interventions need a constant mechanism")
            if (not self.allow_null_interventions
                    and self.obs_mech[i].same_as(self.int_mech[i])
                    and self.obs_noise[i] == self.int_noise[i]):
                raise StructuralError(f"Node {i + 1}: interventional mechanism equals observational")

    @property
    def n(self) -> int:
        return self.dag.n

    def parent_index(self, i: int) -> List[int]:
        return sorted(self.dag.parents(i))

    def mechanism(self, i: int, intervened: bool) -> Tuple[Mechanism, NoiseLaw]:
        if intervened:
            return self.int_mech[i], self.int_noise[i]
        return self.obs_mech[i], self.obs_noise[i]

    def mechanism_output(self, i: int, Z: np.ndarray,
                         intervened: bool) -> Tuple[np.ndarray, np.ndarray]:
        """
        Lokasi (additive) atau skala positif (multiplicative) dari node i.

        Args:
            i: node
            Z: nilai laten K×n; hanya kolom parent yang dibaca
            intervened: pakai mekanisme interventional

        Returns:
            (f, ∇f) dengan shape (K,) dan (K, |Pa(i)|)
        """
        mech, _ = self.mechanism(i, intervened)
        phi = Z[:, self.parent_index(i)]
        raw, grad = mech.evaluate(phi), mech.gradient(phi)
        if self.coupling == Coupling.ADDITIVE:
            return raw, grad
        f = np.logaddexp(0.0, raw) + MULTIPLICATIVE_FLOOR
        return f, expit(raw)[:, None] * grad

    def log_conditional(self, i: int, Z: np.ndarray, intervened: bool) -> np.ndarray:
        """log p(z_i | z_Pa(i)) per baris."""
        _, noise = self.mechanism(i, intervened)
        f, _ = self.mechanism_output(i, Z, intervened)
        if self.coupling == Coupling.ADDITIVE:
            return noise.log_density(Z[:, i] - f)
        return noise.log_density(Z[:, i] / f) - np.log(f)

    def conditional_score(self, i: int, Z: np.ndarray,
                          intervened: bool) -> Tuple[np.ndarray, np.ndarray]:
        """
        Gradient log p(z_i | z_Pa(i)) terhadap z_i dan z_Pa(i).

        Returns:
            (d_i, d_pa) dengan shape (K,) dan (K, |Pa(i)|)
        """
        _, noise = self.mechanism(i, intervened)
        f, grad = self.mechanism_output(i, Z, intervened)
        if self.coupling == Coupling.ADDITIVE:
            r = noise.score(Z[:, i] - f)
            return r, -grad * r[:, None]
        u = Z[:, i] / f
        r = noise.score(u)
        return r / f, -(grad / f[:, None]) * (1.0 + r * u)[:, None]

    def log_density(self, Z: np.ndarray, target: Optional[int] = None) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        return sum(self.log_conditional(i, Z, i == target) for i in range(self.n))

    # SERIALISASI

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dag": self.dag.to_text(),
            "coupling": self.coupling.value,
            "intervention_type": self.intervention_type.value,
            "obs_mech": [m.to_dict() for m in self.obs_mech],
            "int_mech": [m.to_dict() for m in self.int_mech],
            "obs_noise": [nl.to_dict() for nl in self.obs_noise],
            "int_noise": [nl.to_dict() for nl in self.int_noise],
            "allow_null_interventions": self.allow_null_interventions,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Scm":
        return cls(
            dag=Dag.from_text(data["dag"]),
            obs_mech=tuple(Mechanism.from_dict(m) for m in data["obs_mech"]),
            int_mech=tuple(Mechanism.from_dict(m) for m in data["int_mech"]),
            obs_noise=tuple(NoiseLaw(**nl) for nl in data["obs_noise"]),
            int_noise=tuple(NoiseLaw(**nl) for nl in data["int_noise"]),
            coupling=Coupling(data["coupling"]),
            intervention_type=InterventionType(data["intervention_type"]),
            allow_null_interventions=bool(data.get("allow_null_interventions", False)),
        )

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class EnvironmentSet:
    """
    Target intervensi per environment; ``targets[0]`` adalah observasional.
    """
    targets: Tuple[FrozenSet[int], ...]

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(frozenset(int(i) for i in t) for t in self.targets))

    @classmethod
    def atomic(cls, n: int, order: Optional[Sequence[int]] = None) -> "EnvironmentSet":
        """Environment m mengintervensi node ``order[m-1]`` (default identity)."""
        order = list(range(n)) if order is None else [int(i) for i in order]
        if sorted(order) != list(range(n)):
            raise StructuralError(f"Environment order must permute 0..{n - 1}, got {order}")
        return cls(tuple([frozenset()] + [frozenset({i}) for i in order]))

    @classmethod
    def shuffled(cls, n: int, seed: int) -> "EnvironmentSet":
        rng = np.random.default_rng(seed)
        return cls.atomic(n, rng.permutation(n).tolist())

    @property
    def count(self) -> int:
        return len(self.targets)

    def target(self, m: int) -> Optional[int]:
        if not 0 <= m < self.count:
            raise DomainError(f"Environment {m} out of range [0, {self.count - 1}]")
        t = self.targets[m]
        if len(t) > 1:
            raise DomainError(f"Environment {m} is not atomic: {sorted(i + 1 for i in t)}")
        return next(iter(t)) if t else None

    @property
    def m_of(self) -> Dict[int, int]:
        """Node → environment yang mengintervensinya (kemunculan pertama)."""
        mapping: Dict[int, int] = {}
        for m, t in enumerate(self.targets):
            for i in t:
                mapping.setdefault(i, m)
        return mapping

    def to_labels(self) -> List[List[int]]:
        return [sorted(i + 1 for i in t) for t in self.targets]

    @classmethod
    def from_labels(cls, labels: Iterable[Iterable[int]]) -> "EnvironmentSet":
        return cls(tuple(frozenset(i - 1 for i in t) for t in labels))


@dataclass(frozen=True, eq=False)
class MixingMap:
    """
    Observation map linear x = T z beserta pseudoinverse Moore–Penrose-nya.
    """
    T: np.ndarray
    pinv: np.ndarray = field(init=False)

    def __post_init__(self):
        T = np.atleast_2d(np.asarray(self.T, dtype=float))
        d, n = T.shape
        if d < n:
            raise DomainError(f"Mixing needs d >= n, got d={d}, n={n}")
        if np.linalg.matrix_rank(T) != n:
            raise DomainError(f"Mixing matrix does not have full column rank {n}")
        pinv = np.linalg.pinv(T)
        if np.max(np.abs(pinv @ T - np.eye(n))) > PINV_TOLERANCE:
            raise DomainError("Pseudoinverse of T is not a left inverse to tolerance")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "pinv", pinv)

    @property
    def n(self) -> int:
        return self.T.shape[1]

    @property
    def d(self) -> int:
        return self.T.shape[0]

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.T))

    def projection_residual(self, X: np.ndarray) -> np.ndarray:
        """‖x − T T⁺ x‖ / ‖x‖ per baris (0 untuk baris nol)."""
        X = np.atleast_2d(X)
        residual = np.linalg.norm(X - (X @ self.pinv.T) @ self.T.T, axis=1)
        norms = np.linalg.norm(X, axis=1)
        return np.divide(residual, norms, out=np.zeros_like(residual), where=norms > 0)


@dataclass(frozen=True, eq=False)
class Dataset:
    Z: Tuple[np.ndarray, ...]
    X: Tuple[np.ndarray, ...]
    seed: int
    k: int
    targets: Tuple[Tuple[int, ...], ...]
    digest: str

    @property
    def environments(self) -> int:
        return len(self.Z)


# OPERASI

def sample_latent(scm: Scm, env: int, k: int, seed: int,
                  envs: Optional[EnvironmentSet] = None) -> np.ndarray:
    """
    Ancestral sampling K vektor laten dalam satu environment.

    Args:
        scm: model laten
        env: indeks environment, 0 adalah observasional
        k: jumlah sampel
        seed: seed generator
        envs: layout environment; jika kosong, environment m mengintervensi node m-1

    Returns:
        Matriks K×n
    """
    if envs is None:
        if not 0 <= env <= scm.n:
            raise DomainError(f"Environment {env} out of range [0, {scm.n}]")
        target = None if env == 0 else env - 1
    else:
        target = envs.target(env)

    rng = np.random.default_rng(seed)
    Z = np.zeros((k, scm.n))
    for i in scm.dag.topological_order():
        intervened = i == target
        _, noise = scm.mechanism(i, intervened)
        f, _ = scm.mechanism_output(i, Z, intervened)
        n_i = noise.sample(rng, k)
        Z[:, i] = f + n_i if scm.coupling == Coupling.ADDITIVE else f * n_i
    return Z


def mix(x_map: MixingMap, Z: np.ndarray) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[1] != x_map.n:
        raise DomainError(f"Latent matrix shape {Z.shape} does not match n={x_map.n}")
    return Z @ x_map.T.T


def _draw_mechanism(kind: MechanismKind, p: int, rng: np.random.Generator) -> Mechanism:
    signs = rng.choice([-1.0, 1.0], size=p)
    if kind == MechanismKind.LINEAR:
        return Mechanism.linear(rng.uniform(0.5, 1.5, p) * signs)
    if kind == MechanismKind.QUADRATIC:
        Q, _ = np.linalg.qr(rng.standard_normal((p, p)))
        eigenvalues = rng.uniform(0.25, 0.5, p) * signs
        A = Q @ np.diag(eigenvalues) @ Q.T
        return Mechanism.quadratic((A + A.T) / 2.0)
    if kind == MechanismKind.TWO_LAYER_NN:
        width = max(4, 2 * p)
        W = rng.standard_normal((width, p))
        while np.linalg.matrix_rank(W) < p:
            W = rng.standard_normal((width, p))
        nu = rng.uniform(1.0, 2.0, width) * rng.choice([-1.0, 1.0], size=width)
        return Mechanism.two_layer_nn(W, nu, 0.0)
    if kind == MechanismKind.GENERALIZED_LINEAR:
        return Mechanism.generalized_linear(rng.uniform(0.5, 1.5, p) * signs,
                                            scale=rng.uniform(1.0, 2.0))
    return Mechanism.constant(0.0)


def random_scm(dag: Dag, kind: MechanismKind, coupling: Coupling = Coupling.ADDITIVE,
               intervention_type: InterventionType = InterventionType.SOFT, seed: int = 0,
               noise_family: NoiseFamily = NoiseFamily.GAUSSIAN, noise_scale: float = 1.0,
               soft_variant: SoftVariant = SoftVariant.BOTH,
               hard_noise_factor: float = HARD_NOISE_FACTOR) -> Scm:
    """
    Buat SCM acak di atas graph yang sudah ditentukan.

    Distribusi parameter:
        bobot linear / generalized-linear: magnitude U(0.5, 1.5), tanda acak;
        quadratic: simetris Q·diag(λ)·Qᵀ, |λ| ~ U(0.25, 0.5), tanda acak;
        two-layer NN: lebar max(4, 2p), W standard normal diulang sampai rank p,
        bobot output magnitude U(1, 2); root: konstanta 0.
        Soft intervention menggambar ulang mekanisme (root: shift konstan) dan
        mengalikan skala noise dengan U(1.5, 2.5); hard intervention memakai
        konstanta HARD_SHIFT dengan noise dikali hard_noise_factor.

    Args:
        dag: graph laten
        kind: keluarga mekanisme untuk node non-root
        coupling: noise additive atau multiplicative
        intervention_type: soft atau hard
        seed: seed generator
        noise_family: gaussian atau logistic
        noise_scale: skala noise observasional
        soft_variant: bagian mana yang diubah soft intervention
        hard_noise_factor: skala noise hard intervention relatif terhadap noise_scale

    Returns:
        Scm
    """
    kind = MechanismKind(kind)
    intervention_type = InterventionType(intervention_type)
    soft_variant = SoftVariant(soft_variant)
    rng = np.random.default_rng(seed)
    obs_mech, int_mech, obs_noise, int_noise = [], [], [], []

    for i in range(dag.n):
        p = len(dag.parents(i))
        base_noise = NoiseLaw(noise_family, noise_scale)
        mech = Mechanism.constant(0.0) if p == 0 else _draw_mechanism(kind, p, rng)
        obs_mech.append(mech)
        obs_noise.append(base_noise)

        if intervention_type == InterventionType.HARD:
            int_mech.append(Mechanism.constant(HARD_SHIFT))
            int_noise.append(base_noise.rescaled(hard_noise_factor))
            continue

        factor = rng.uniform(1.5, 2.5)
        if soft_variant == SoftVariant.NOISE_ONLY:
            int_mech.append(mech)
            int_noise.append(base_noise.rescaled(factor))
            continue
        if p == 0:
            new_mech = Mechanism.constant(HARD_SHIFT)
        else:
            new_mech = _draw_mechanism(kind, p, rng)
        int_mech.append(new_mech)
        int_noise.append(base_noise if soft_variant == SoftVariant.MECHANISM_ONLY
                         else base_noise.rescaled(factor))

    # kind=constant on a non-root node leaves mechanism_only interventions equal
    allow_null = kind == MechanismKind.CONSTANT and soft_variant == SoftVariant.MECHANISM_ONLY
    return Scm(dag, tuple(obs_mech), tuple(int_mech), tuple(obs_noise), tuple(int_noise),
               coupling=Coupling(coupling), intervention_type=intervention_type,
               allow_null_interventions=allow_null)


def random_mixing(n: int, d: int, seed: int, condition_cap: float = 100.0,
                  max_attempts: int = 1000) -> MixingMap:
    """
    Buat T dengan entri standard normal i.i.d. dan condition number ≤ cap.
    """
    if d < n:
        raise DomainError(f"Mixing needs d >= n, got d={d}, n={n}")
    rng = np.random.default_rng(seed)
    for attempt in range(max_attempts):
        T = rng.standard_normal((d, n))
        if np.linalg.cond(T) <= condition_cap:
            if attempt:
                logger.debug("Mixing accepted after %d redraws", attempt)
            return MixingMap(T)
    raise DomainError(f"No {d}x{n} mixing with condition number <= {condition_cap} "
                      f"in {max_attempts} draws")


def simulate_dataset(scm: Scm, mixing: MixingMap, envs: EnvironmentSet, k: int,
                     seed: int) -> Dataset:
    """Sampling semua environment; seed tiap environment dipecah dari ``seed``."""
    if mixing.n != scm.n:
        raise DomainError(f"Mixing has n={mixing.n}, model has n={scm.n}")
    Z, X = [], []
    for m in range(envs.count):
        Z_m = sample_latent(scm, m, k, derive_seed(seed, m), envs)
        Z.append(Z_m)
        X.append(mix(mixing, Z_m))
    logger.info("Simulated %d environments with K=%d", envs.count, k)
    return Dataset(Z=tuple(Z), X=tuple(X), seed=seed, k=k,
                   targets=tuple(tuple(t) for t in envs.to_labels()), digest=scm.digest())
