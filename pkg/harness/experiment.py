"""
Experiment Runner Module untuk SCALE-I
======================================
Modul ini berisi trial end-to-end yang di-seed (simulate, audit, recover,
score) dan batch trial di atas worker pool joblib.

Setiap random draw pada trial t diturunkan dari ``(cfg.seed, t, stage)``,
jadi JSON sebuah trial identik antar run. Timing tidak masuk ke JSON trial
dan ditulis ke ``timings.json``.
"""

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Union

import numpy as np
from joblib import Parallel, delayed

from audit.assumption_audit import AuditReport, build_audit
from harness.config import ExperimentConfig
from harness.persistence import write_json, write_results_csv
from ml.metrics import ConsistencyScore, mixing_consistency, scaling_consistency
from ml.scale_i import (RecoveryReport, analyze_against_truth, delta_preserved, estimate_latents,
                        hard_refine, image_basis, soft_recover)
from model.graph import Dag, surround_map
from model.scm import (Coupling, Dataset, EnvironmentSet, InterventionType, MechanismKind,
                       MixingMap, NoiseFamily, Scm, SoftVariant, random_mixing, random_scm,
                       simulate_dataset)
from scores.oracle import ScoreOracle
from utils.errors import IdentifiabilityError, RefinementError
from utils.seeding import (STAGE_AUDIT, STAGE_ENVIRONMENTS, STAGE_MIXING, STAGE_REFINE,
                           STAGE_SAMPLES, STAGE_SCM, derive_seed)

logger = logging.getLogger(__name__)

SUCCESS = "success"
IDENTIFIABILITY_FAILURE = "identifiability_failure"
REFINEMENT_FAILURE = "refinement_failure"
ERROR = "error"
STATUSES = (SUCCESS, IDENTIFIABILITY_FAILURE, REFINEMENT_FAILURE, ERROR)


@dataclass(frozen=True, eq=False)
class TrialModel:
    """Class untuk ground truth satu trial."""
    dag: Dag
    envs: EnvironmentSet
    scm: Scm
    mixing: MixingMap


@dataclass(eq=False)
class TrialResult:
    """Class untuk menyimpan status, audit, recovery dan skor satu trial."""

    trial: int
    status: str
    dag: Dag
    message: str = ""
    audit: Optional[AuditReport] = None
    recovery: Optional[RecoveryReport] = None
    score: Optional[ConsistencyScore] = None
    mixing_score: Optional[ConsistencyScore] = None
    delta_preserved: Optional[bool] = None
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def succeeded(self) -> bool:
        return self.status == SUCCESS

    def to_dict(self) -> Dict[str, Any]:
        return {
            "trial": self.trial,
            "status": self.status,
            "message": self.message,
            "dag": self.dag.to_text(),
            "audit": self.audit.to_dict() if self.audit else None,
            "recovery": self.recovery.to_dict() if self.recovery else None,
            "scaling": self.score.to_dict() if self.score else None,
            "mixing": self.mixing_score.to_dict() if self.mixing_score else None,
            "delta_preserved": self.delta_preserved,
        }

    def to_row(self) -> Dict[str, Any]:
        """Satu baris results.csv."""
        row: Dict[str, Any] = {
            "trial": self.trial,
            "status": self.status,
            "audit_passed": self.audit.passed if self.audit else None,
            "dag_exact": None, "shd": None, "min_corr": None, "mixing_residual": None,
            "soft_mixing_residual": None, "order": None, "l0": None, "b_disallowed": None,
            "delta_preserved": self.delta_preserved,
        }
        if self.score is not None:
            row.update({
                "dag_exact": self.score.dag_exact,
                "shd": self.score.shd,
                "min_corr": self.score.min_corr,
                "mixing_residual": self.score.mixing_residual,
                "order": " ".join(map(str, self.score.matched_order.labels())),
            })
        if self.mixing_score is not None:
            row["soft_mixing_residual"] = self.mixing_score.mixing_residual
        if self.recovery is not None:
            row["l0"] = self.recovery.decoder.delta.l0()
            row["b_disallowed"] = self.recovery.b_disallowed
        return row


@contextmanager
def _stage(timings: Dict[str, float], name: str) -> Iterator[None]:
    start = time.perf_counter()
    try:
        yield
    finally:
        timings[name] = round((time.perf_counter() - start) * 1000.0, 3)


def build_trial_model(cfg: ExperimentConfig, trial: int) -> TrialModel:
    """Bangun graph, environment, SCM dan mixing untuk trial ke-``trial``."""
    dag = cfg.build_graph(trial)
    if cfg.shuffle_environments:
        envs = EnvironmentSet.shuffled(cfg.n, derive_seed(cfg.seed, trial, STAGE_ENVIRONMENTS))
    else:
        envs = EnvironmentSet.atomic(cfg.n)
    scm = random_scm(dag, MechanismKind(cfg.mechanism), Coupling(cfg.coupling),
                     InterventionType(cfg.intervention_type),
                     seed=derive_seed(cfg.seed, trial, STAGE_SCM),
                     noise_family=NoiseFamily(cfg.noise_family), noise_scale=cfg.noise_scale,
                     soft_variant=SoftVariant(cfg.soft_variant),
                     hard_noise_factor=cfg.hard_noise_factor)
    mixing = random_mixing(cfg.n, cfg.d, derive_seed(cfg.seed, trial, STAGE_MIXING),
                           condition_cap=cfg.condition_cap)
    return TrialModel(dag, envs, scm, mixing)


def simulate_trial(cfg: ExperimentConfig, trial: int, model: Optional[TrialModel] = None) -> Dataset:
    model = model or build_trial_model(cfg, trial)
    return simulate_dataset(model.scm, model.mixing, model.envs, cfg.samples_per_env,
                            derive_seed(cfg.seed, trial, STAGE_SAMPLES))


def audit_trial(cfg: ExperimentConfig, trial: int, model: Optional[TrialModel] = None) -> AuditReport:
    model = model or build_trial_model(cfg, trial)
    return build_audit(model.scm, model.envs, seed=derive_seed(cfg.seed, trial, STAGE_AUDIT))


def run_trial(cfg: ExperimentConfig, trial: int) -> TrialResult:
    """
    Jalankan satu trial end to end.

    Kegagalan di sebuah stage dicatat di status; tidak ada exception dari
    dalam trial yang keluar, jadi satu trial tidak pernah menghentikan batch.

    Args:
        cfg: konfigurasi eksperimen
        trial: indeks trial

    Returns:
        TrialResult
    """
    timings: Dict[str, float] = {}
    model = None
    result = None
    try:
        with _stage(timings, "generate"):
            model = build_trial_model(cfg, trial)
        result = TrialResult(trial, SUCCESS, model.dag, timings=timings)
        with _stage(timings, "audit"):
            result.audit = audit_trial(cfg, trial, model)
        with _stage(timings, "sample"):
            data = simulate_trial(cfg, trial, model)
        with _stage(timings, "scores"):
            oracle = ScoreOracle(model.scm, model.mixing, model.envs)
            scores = oracle.all_scores(data.X[0])

        rcfg = cfg.recovery_config(seed=derive_seed(cfg.seed, trial, STAGE_REFINE))
        with _stage(timings, "recover"):
            decoder = soft_recover(scores, image_basis(data.X[0], cfg.n, rcfg.rank_tol), rcfg)
        if cfg.hard:
            with _stage(timings, "refine"):
                decoder = hard_refine(decoder, data.X, surround_map(decoder.dag_hat), rcfg)
                result.delta_preserved = delta_preserved(decoder, scores, rcfg)
            if not result.delta_preserved:
                logger.warning("Trial %d: refinement changed the change matrix", trial)

        with _stage(timings, "score"):
            Zhat = estimate_latents(decoder, data.X[0], rcfg.manifold_tol)
            result.recovery = analyze_against_truth(decoder, model.mixing, model.dag)
            result.score = scaling_consistency(data.Z[0], Zhat, model.dag, decoder.dag_hat)
            result.mixing_score = mixing_consistency(data.Z[0], Zhat, model.dag,
                                                     surround_map(model.dag), decoder.dag_hat)
        logger.info("Trial %d: dag_exact=%s min_corr=%.4f", trial, result.score.dag_exact,
                    result.score.min_corr)
    except IdentifiabilityError as exc:
        result = _failed(result, model, trial, IDENTIFIABILITY_FAILURE, str(exc), timings)
    except RefinementError as exc:
        logger.warning("Trial %d: %s", trial, exc)
        result = _failed(result, model, trial, REFINEMENT_FAILURE, str(exc), timings)
    except Exception as exc:  # noqa: BLE001
        logger.exception("Trial %d failed", trial)
        result = _failed(result, model, trial, ERROR, f"{type(exc).__name__}: {exc}", timings)
    return result


def _failed(result: Optional[TrialResult], model: Optional[TrialModel], trial: int, status: str,
            message: str, timings: Dict[str, float]) -> TrialResult:
    if result is None:
        dag = model.dag if model is not None else Dag.empty(0)
        result = TrialResult(trial, status, dag, timings=timings)
    logger.info("Trial %d: %s (%s)", trial, status, message)
    result.status = status
    result.message = message
    result.recovery = None
    result.score = None
    result.mixing_score = None
    return result


def summarize_results(cfg: ExperimentConfig, results: List[TrialResult]) -> Dict[str, Any]:
    """Hitung success rate dan skor rata-rata atas semua trial."""
    total = len(results)
    counts = {s: sum(r.status == s for r in results) for s in STATUSES}
    scored = [r for r in results if r.score is not None]

    def rate(values: List[bool]) -> float:
        return float(np.mean(values)) if values else 0.0

    def mean(values: List[float]) -> Optional[float]:
        return float(np.mean(values)) if values else None

    return {
        "name": cfg.name,
        "trials": total,
        "counts": counts,
        "success_rate": counts[SUCCESS] / total if total else 0.0,
        "dag_exact_rate": rate([bool(r.score.dag_exact) for r in scored] + [False] * (total - len(scored))),
        "scaling_pass_rate": rate([r.score.passed for r in scored] + [False] * (total - len(scored))),
        "mixing_pass_rate": rate([r.mixing_score.passed for r in scored] + [False] * (total - len(scored))),
        "audit_pass_rate": rate([bool(r.audit and r.audit.passed) for r in results]),
        "mean_min_corr": mean([r.score.min_corr for r in scored]),
        "mean_mixing_residual": mean([r.score.mixing_residual for r in scored]),
        "config": cfg.to_dict(),
    }


def run_batch(cfg: ExperimentConfig, output_dir: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """
    Jalankan cfg.trials trial lalu tulis JSON per trial, results.csv dan summary.json.

    Args:
        cfg: konfigurasi eksperimen
        output_dir: menimpa cfg.output_dir

    Returns:
        Dictionary ringkasan (juga ditulis ke summary.json)
    """
    out = Path(output_dir or cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"Cannot create output directory {out}: {exc}") from exc

    workers = cfg.resolve_workers()
    logger.info("Running %d trials of '%s' on %s workers", cfg.trials, cfg.name,
                "all" if workers < 0 else workers)
    results: List[TrialResult] = Parallel(n_jobs=workers)(
        delayed(run_trial)(cfg, t) for t in range(cfg.trials)
    )

    for r in results:
        write_json(out / f"trial_{r.trial}.json", r.to_dict())
    write_json(out / "timings.json", {str(r.trial): r.timings for r in results})
    write_results_csv(out / "results.csv", [r.to_row() for r in results])
    summary = summarize_results(cfg, results)
    write_json(out / "summary.json", summary)
    logger.info("Wrote %d trial results to %s", len(results), out)
    return summary
