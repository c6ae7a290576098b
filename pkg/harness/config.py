"""
Experiment Configuration Module untuk SCALE-I
=============================================
Modul ini berisi setting eksperimen yang sudah divalidasi, dibaca dari file
INI dengan section ``[experiment]``, ``[graph]``, ``[model]`` dan
``[recovery]``, atau dari JSON yang setara (flat maupun per section).
"""

import configparser
import json
import logging
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Optional, Union

from model.graph import Dag
from model.scm import (HARD_NOISE_FACTOR, Coupling, InterventionType, MechanismKind, NoiseFamily,
                       SoftVariant)
from ml.scale_i import BETA_METHODS, RecoveryConfig
from scores.change_analysis import EquivalenceConfig
from utils.errors import ConfigError, ScaleIError
from utils.seeding import STAGE_GRAPH, derive_seed

logger = logging.getLogger(__name__)

GRAPH_KINDS = ("chain", "diamond", "triangle", "empty", "random")
THREADS_ENV = "SCALEI_THREADS"

# section -> {file key: field name}
SECTIONS: Dict[str, Dict[str, str]] = {
    "experiment": {
        "name": "name", "n": "n", "d": "d", "trials": "trials", "seed": "seed",
        "samples_per_env": "samples_per_env", "workers": "workers", "output_dir": "output_dir",
    },
    "graph": {"kind": "graph_kind", "edge_prob": "edge_prob", "seed": "graph_seed"},
    "model": {
        "mechanism": "mechanism", "coupling": "coupling",
        "intervention_type": "intervention_type", "soft_variant": "soft_variant",
        "noise_family": "noise_family", "noise_scale": "noise_scale",
        "condition_cap": "condition_cap", "shuffle_environments": "shuffle_environments",
        "hard_noise_factor": "hard_noise_factor",
    },
    "recovery": {
        "tol": "tol", "quantile": "quantile", "min_samples": "min_samples",
        "rank_tol": "rank_tol", "peel_tol": "peel_tol",
        "independence_threshold": "independence_threshold",
        "independence_samples": "independence_samples", "beta_method": "beta_method",
        "max_peel_nodes": "max_peel_nodes",
    },
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Class untuk menyimpan semua setting satu batch eksperimen."""

    name: str = "experiment"
    n: int = 3
    d: int = 3
    trials: int = 1
    seed: int = 0
    samples_per_env: int = 20000
    workers: int = 1
    output_dir: str = "results"

    graph_kind: str = "chain"
    edge_prob: float = 0.5
    graph_seed: int = -1

    mechanism: str = "quadratic"
    coupling: str = "additive"
    intervention_type: str = "soft"
    soft_variant: str = "both"
    noise_family: str = "gaussian"
    noise_scale: float = 1.0
    condition_cap: float = 100.0
    shuffle_environments: bool = False
    hard_noise_factor: float = HARD_NOISE_FACTOR

    tol: float = 1e-6
    quantile: float = 0.99
    min_samples: int = 1000
    rank_tol: float = 1e-6
    peel_tol: float = 1e-4
    independence_threshold: float = 0.05
    independence_samples: int = 2000
    beta_method: str = "golden"
    max_peel_nodes: int = 5000

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError(f"n must be positive, got {self.n}")
        if self.d < self.n:
            raise ConfigError(f"d must be at least n, got d={self.d}, n={self.n}")
        if self.trials < 1:
            raise ConfigError(f"trials must be at least 1, got {self.trials}")
        if self.samples_per_env < 1000:
            raise ConfigError(f"samples_per_env must be at least 1000, got {self.samples_per_env}")
        if self.samples_per_env < self.min_samples:
            raise ConfigError("samples_per_env must not be below recovery.min_samples")
        if self.workers < 0:
            raise ConfigError(f"workers must be non-negative, got {self.workers}")
        if self.graph_kind not in GRAPH_KINDS:
            raise ConfigError(f"graph.kind must be one of {GRAPH_KINDS}, got '{self.graph_kind}'")
        if self.graph_kind == "diamond" and self.n != 4:
            raise ConfigError("graph.kind 'diamond' needs n = 4")
        if self.graph_kind == "triangle" and self.n != 3:
            raise ConfigError("graph.kind 'triangle' needs n = 3")
        if not 0.0 <= self.edge_prob <= 1.0:
            raise ConfigError(f"graph.edge_prob must lie in [0, 1], got {self.edge_prob}")
        if self.beta_method not in BETA_METHODS:
            raise ConfigError(f"recovery.beta_method must be one of {BETA_METHODS}")
        for enum, value, key in ((MechanismKind, self.mechanism, "model.mechanism"),
                                 (Coupling, self.coupling, "model.coupling"),
                                 (InterventionType, self.intervention_type, "model.intervention_type"),
                                 (SoftVariant, self.soft_variant, "model.soft_variant"),
                                 (NoiseFamily, self.noise_family, "model.noise_family")):
            allowed = [e.value for e in enum]
            if value not in allowed:
                raise ConfigError(f"{key} must be one of {allowed}, got '{value}'")
        if not self.noise_scale > 0:
            raise ConfigError(f"model.noise_scale must be positive, got {self.noise_scale}")
        if not self.hard_noise_factor > 0:
            raise ConfigError(f"model.hard_noise_factor must be positive, got {self.hard_noise_factor}")
        try:
            self.equivalence_config()
        except ScaleIError as exc:
            raise ConfigError(f"Invalid recovery settings: {exc}") from exc

    @property
    def hard(self) -> bool:
        return self.intervention_type == InterventionType.HARD.value

    def equivalence_config(self) -> EquivalenceConfig:
        return EquivalenceConfig(tol=self.tol, quantile=self.quantile, min_samples=self.min_samples)

    def recovery_config(self, seed: int = 0) -> RecoveryConfig:
        return RecoveryConfig(
            equivalence=self.equivalence_config(),
            rank_tol=self.rank_tol,
            peel_tol=self.peel_tol,
            independence_threshold=self.independence_threshold,
            independence_samples=self.independence_samples,
            beta_method=self.beta_method,
            max_peel_nodes=self.max_peel_nodes,
            seed=seed,
        )

    def build_graph(self, trial: int = 0) -> Dag:
        if self.graph_kind == "chain":
            return Dag.chain(self.n)
        if self.graph_kind == "diamond":
            return Dag.diamond()
        if self.graph_kind == "triangle":
            return Dag.triangle()
        if self.graph_kind == "empty":
            return Dag.empty(self.n)
        seed = self.graph_seed if self.graph_seed >= 0 else derive_seed(self.seed, trial, STAGE_GRAPH)
        return Dag.random(self.n, self.edge_prob, seed)

    def resolve_workers(self) -> int:
        """Jumlah worker untuk joblib; SCALEI_THREADS menang, 0 berarti semua core (-1)."""
        raw = os.environ.get(THREADS_ENV)
        workers = self.workers
        if raw:
            try:
                workers = int(raw)
            except ValueError as exc:
                raise ConfigError(f"{THREADS_ENV} must be an integer, got '{raw}'") from exc
        return -1 if workers <= 0 else workers

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        flat = asdict(self)
        return {section: {key: flat[name] for key, name in keys.items()}
                for section, keys in SECTIONS.items()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """Terima data per section ({section: {key: value}}) atau flat ('section.key' atau nama field)."""
        values: Dict[str, Any] = {}
        for key, value in data.items():
            if isinstance(value, dict):
                if key not in SECTIONS:
                    raise ConfigError(f"Unknown config section '{key}'")
                for sub_key, sub_value in value.items():
                    values[_field_name(key, sub_key)] = sub_value
            elif "." in key:
                section, sub_key = key.split(".", 1)
                values[_field_name(section, sub_key)] = value
            else:
                values[_field_name(None, key)] = value
        try:
            return cls(**{name: _coerce(name, value) for name, value in values.items()})
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


_FIELD_TYPES = {f.name: type(f.default) for f in fields(ExperimentConfig)}


def _field_name(section: Optional[str], key: str) -> str:
    key = key.strip().lower()
    if section is None:
        if key in _FIELD_TYPES:
            return key
        if key in SECTIONS["experiment"]:
            return SECTIONS["experiment"][key]
        raise ConfigError(f"Unknown config key '{key}'")
    section = section.strip().lower()
    if section not in SECTIONS or key not in SECTIONS[section]:
        raise ConfigError(f"Unknown config key '{section}.{key}'")
    return SECTIONS[section][key]


def _coerce(name: str, value: Any) -> Any:
    target = _FIELD_TYPES[name]
    if target is bool:
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in _TRUE:
            return True
        if text in _FALSE:
            return False
        raise ConfigError(f"'{name}' expects a boolean, got '{value}'")
    try:
        if target is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(str(value).strip()) if isinstance(value, str) else int(value)
        if target is float:
            return float(value)
        return str(value).strip()
    except ValueError as exc:
        raise ConfigError(f"'{name}' expects {target.__name__}, got '{value}'") from exc


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Baca config eksperimen dari file .json atau INI.

    Args:
        path: file config

    Returns:
        ExperimentConfig

    Raises:
        ConfigError: file tidak terbaca, key tidak dikenal atau nilai tidak valid
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"Cannot read config {path}: {exc}") from exc

    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"Invalid JSON in {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top-level JSON value must be an object")
    else:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"Invalid config {path}: {exc}") from exc
        data = {section: dict(parser.items(section)) for section in parser.sections()}

    try:
        cfg = ExperimentConfig.from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    logger.info("Loaded config '%s' from %s", cfg.name, path)
    return cfg
