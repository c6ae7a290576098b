"""
Persistence Module untuk SCALE-I
================================
Modul ini berisi penyimpanan direktori dataset dan file hasil.

Direktori dataset berisi ``meta.json`` plus, per environment m,
``Z_<m>.csv``, ``X_<m>.csv`` dan ``S_<m>.csv`` (score observasi environment m
di baris-baris ``X_0.csv``). Matriks disimpan sebagai CSV tanpa header dengan
17 digit signifikan supaya hasil load ulang persis sama.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from model.graph import Dag
from model.scm import Dataset, EnvironmentSet, MixingMap, Scm
from utils.errors import DomainError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
META_FILE = "meta.json"


@dataclass(frozen=True, eq=False)
class StoredDataset:
    """Class untuk dataset yang dibaca dari disk beserta meta-nya."""

    meta: Dict[str, Any]
    Z: List[np.ndarray]
    X: List[np.ndarray]
    S: List[np.ndarray]

    @property
    def n(self) -> int:
        return int(self.meta["n"])

    @property
    def d(self) -> int:
        return int(self.meta["d"])

    @property
    def environments(self) -> EnvironmentSet:
        return EnvironmentSet.from_labels(self.meta["targets"])

    @property
    def hard(self) -> bool:
        return self.meta.get("intervention_type") == "hard"

    def scm(self) -> Optional[Scm]:
        return Scm.from_dict(self.meta["scm"]) if "scm" in self.meta else None

    def mixing(self) -> Optional[MixingMap]:
        return MixingMap(np.asarray(self.meta["T"])) if "T" in self.meta else None

    def dag(self) -> Dag:
        return Dag.from_text(self.meta["dag"])


def write_json(path: Union[str, Path], payload: Any) -> Path:
    path = Path(path)
    try:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"Cannot write {path}: {exc}") from exc
    logger.debug("Wrote %s", path)
    return path


def read_json(path: Union[str, Path]) -> Any:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise OSError(f"Cannot read {path}: {exc}") from exc


def write_matrix(path: Union[str, Path], M: np.ndarray) -> Path:
    path = Path(path)
    try:
        pd.DataFrame(np.asarray(M, dtype=float)).to_csv(path, header=False, index=False,
                                                        float_format=FLOAT_FORMAT)
    except OSError as exc:
        raise OSError(f"Cannot write {path}: {exc}") from exc
    return path


def read_matrix(path: Union[str, Path]) -> np.ndarray:
    """Baca matriks CSV tanpa header; parser round_trip menjaga setiap bit float."""
    path = Path(path)
    try:
        return pd.read_csv(path, header=None, dtype=float, float_precision="round_trip").to_numpy()
    except OSError as exc:
        raise OSError(f"Cannot read {path}: {exc}") from exc
    except pd.errors.EmptyDataError as exc:
        raise DomainError(f"Empty matrix file {path}") from exc


def write_dataset(directory: Union[str, Path], data: Dataset, scm: Scm, mixing: MixingMap,
                  envs: EnvironmentSet, scores: Sequence[np.ndarray],
                  extra: Optional[Dict[str, Any]] = None) -> Path:
    """
    Tulis satu dataset simulasi beserta ground truth untuk diagnostik.

    Args:
        directory: direktori tujuan, dibuat jika belum ada
        data: sampel laten dan observasi
        scm: model pembangkit
        mixing: mixing map
        envs: susunan environment
        scores: score per environment di baris observasional
        extra: entri meta tambahan

    Returns:
        Path direktori
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {
        "n": scm.n,
        "d": mixing.d,
        "k": data.k,
        "seed": data.seed,
        "targets": envs.to_labels(),
        "dag": scm.dag.to_text(),
        "intervention_type": scm.intervention_type.value,
        "coupling": scm.coupling.value,
        "scm": scm.to_dict(),
        "scm_digest": data.digest,
        "T": mixing.T.tolist(),
        "score_rows": "X_0",
    }
    meta.update(extra or {})
    write_json(directory / META_FILE, meta)
    for m in range(envs.count):
        write_matrix(directory / f"Z_{m}.csv", data.Z[m])
        write_matrix(directory / f"X_{m}.csv", data.X[m])
        write_matrix(directory / f"S_{m}.csv", scores[m])
    logger.info("Wrote dataset with %d environments to %s", envs.count, directory)
    return directory


def read_dataset(directory: Union[str, Path]) -> StoredDataset:
    directory = Path(directory)
    meta_path = directory / META_FILE
    if not meta_path.is_file():
        raise DomainError(f"No {META_FILE} in {directory}")
    meta = read_json(meta_path)
    count = len(meta["targets"])
    Z, X, S = [], [], []
    for m in range(count):
        Z_path = directory / f"Z_{m}.csv"
        Z.append(read_matrix(Z_path) if Z_path.is_file() else None)
        X.append(read_matrix(directory / f"X_{m}.csv"))
        S.append(read_matrix(directory / f"S_{m}.csv"))
    return StoredDataset(meta, Z, X, S)


def write_results_csv(path: Union[str, Path], rows: List[Dict[str, Any]]) -> Path:
    path = Path(path)
    try:
        pd.DataFrame(rows).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    except OSError as exc:
        raise OSError(f"Cannot write {path}: {exc}") from exc
    return path
