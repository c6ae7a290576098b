"""
Command Line Interface Module untuk SCALE-I
===========================================
Modul ini berisi subcommand berikut:

    simulate    tulis dataset satu trial ke sebuah direktori
    audit       audit asumsi per node untuk model satu trial
    recover     jalankan recovery pada direktori dataset
    experiment  jalankan batch trial dari file config
    report      gabungkan file results.csv menjadi tabel ringkasan

Exit code: 0 jika sukses, 1 jika command gagal pada input-nya, 2 untuk error
config atau usage, 3 jika ``--strict`` diberikan dan trial (atau recovery) gagal.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd

from harness.config import ExperimentConfig, load_config
from harness.experiment import (SUCCESS, audit_trial, build_trial_model, run_batch,
                                simulate_trial)
from harness.persistence import read_dataset, write_dataset, write_json
from ml.metrics import mixing_consistency, scaling_consistency
from ml.scale_i import (analyze_against_truth, build_report, estimate_latents, hard_refine,
                        image_basis, soft_recover)
from model.graph import surround_map
from scores.oracle import ScoreOracle
from utils.errors import ConfigError, IdentifiabilityError, RefinementError, ScaleIError
from utils.log import setup_logging
from utils.seeding import STAGE_REFINE, derive_seed

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FAILED = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scalei",
                                     description="Latent causal recovery from interventional scores")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for progress, -vv for debug output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write one trial's dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="dataset directory")
    p.add_argument("--trial", type=int, default=0)

    p = sub.add_parser("audit", help="assumption audit of one trial's model")
    p.add_argument("--config", required=True)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--json", dest="json_out", help="also write the report as JSON")
    p.add_argument("--strict", action="store_true")

    p = sub.add_parser("recover", help="run recovery on a dataset directory")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--config", help="config supplying recovery thresholds")
    p.add_argument("--truth", action="store_true", help="add diagnostics against the stored truth")
    p.add_argument("--out", help="write the report JSON here instead of stdout")
    p.add_argument("--heatmap", help="save a change-matrix heatmap")
    p.add_argument("--strict", action="store_true")

    p = sub.add_parser("experiment", help="run a batch of trials")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (default: config output_dir)")
    p.add_argument("--strict", action="store_true")

    p = sub.add_parser("report", help="aggregate results.csv files")
    p.add_argument("results", nargs="+", help="experiment output directories")
    p.add_argument("--tsv", help="write the per-trial table as plot-ready TSV")
    p.add_argument("--plot", help="save outcome and correlation figures")
    return parser


# SUBCOMMAND

def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    model = build_trial_model(cfg, args.trial)
    data = simulate_trial(cfg, args.trial, model)
    scores = ScoreOracle(model.scm, model.mixing, model.envs).all_scores(data.X[0])
    write_dataset(args.out, data, model.scm, model.mixing, model.envs, scores,
                  extra={"config": cfg.to_dict(), "trial": args.trial})
    print(f"Wrote {model.envs.count} environments (K={data.k}) to {args.out}")
    return EXIT_OK


def cmd_audit(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    report = audit_trial(cfg, args.trial)
    print(f"coverage: {'ok' if report.coverage_ok else 'FAIL'}")
    print(report.to_frame().to_string(index=False))
    for node in report.nodes:
        for witness in node.witnesses:
            print(f"  node {node.node + 1}: {witness}")
    print("(numerical surrogate checks on random sample points)")
    if args.json_out:
        write_json(args.json_out, report.to_dict())
    return EXIT_FAILED if args.strict and not report.passed else EXIT_OK


def cmd_recover(args: argparse.Namespace) -> int:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    stored = read_dataset(args.data)
    if args.truth and stored.mixing() is None:
        raise ConfigError(f"{args.data} stores no mixing matrix; --truth is unavailable")
    rcfg = cfg.recovery_config(seed=derive_seed(int(stored.meta.get("seed", 0)), STAGE_REFINE))
    payload = {"data": str(args.data)}
    status = SUCCESS
    try:
        decoder = soft_recover(stored.S, image_basis(stored.X[0], stored.n, rcfg.rank_tol), rcfg)
        if stored.hard:
            decoder = hard_refine(decoder, stored.X, surround_map(decoder.dag_hat), rcfg)
        if args.truth:
            report = analyze_against_truth(decoder, stored.mixing(), stored.dag())
            if stored.Z[0] is not None:
                Zhat = estimate_latents(decoder, stored.X[0], rcfg.manifold_tol)
                dag = stored.dag()
                payload["scaling"] = scaling_consistency(stored.Z[0], Zhat, dag,
                                                         decoder.dag_hat).to_dict()
                payload["mixing"] = mixing_consistency(stored.Z[0], Zhat, dag, surround_map(dag),
                                                       decoder.dag_hat).to_dict()
        else:
            report = build_report(decoder)
        payload["recovery"] = report.to_dict()
        if args.heatmap:
            from visualization.charts import change_matrix_heatmap, save_figure
            save_figure(change_matrix_heatmap(decoder.delta, "Recovered change matrix"), args.heatmap)
    except (IdentifiabilityError, RefinementError) as exc:
        status = "identifiability_failure" if isinstance(exc, IdentifiabilityError) else "refinement_failure"
        payload["message"] = str(exc)
    payload["status"] = status

    if args.out:
        write_json(args.out, payload)
        print(f"{status}: report written to {args.out}")
    else:
        print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_FAILED if args.strict and status != SUCCESS else EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    out = Path(args.out or cfg.output_dir)
    summary = run_batch(cfg, out)
    timings = json.loads((out / "timings.json").read_text(encoding="utf-8"))
    total_ms = sum(sum(t.values()) for t in timings.values())
    print(f"{summary['name']}: {summary['trials']} trials, success rate {summary['success_rate']:.2f}, "
          f"dag_exact rate {summary['dag_exact_rate']:.2f}")
    for status, count in summary["counts"].items():
        if count:
            print(f"  {status}: {count}")
    print(f"  total stage time: {total_ms / 1000.0:.1f} s")
    print(f"Results in {out}")
    failed = summary["counts"][SUCCESS] < summary["trials"]
    return EXIT_FAILED if args.strict and failed else EXIT_OK


def load_results(directories: List[str]) -> pd.DataFrame:
    """Gabungkan results.csv dari beberapa direktori, diberi label nama eksperimen."""
    frames = []
    for directory in directories:
        path = Path(directory) / "results.csv"
        if not path.is_file():
            raise ConfigError(f"No results.csv in {directory}")
        frame = pd.read_csv(path)
        summary_path = Path(directory) / "summary.json"
        name = Path(directory).name
        if summary_path.is_file():
            name = json.loads(summary_path.read_text(encoding="utf-8")).get("name", name)
        frames.append(frame.assign(experiment=name))
    return pd.concat(frames, ignore_index=True)


def summary_table(frame: pd.DataFrame) -> pd.DataFrame:
    """Ringkasan per eksperimen; verdict dag_exact yang kosong dihitung sebagai tidak exact."""
    exact = frame["dag_exact"].eq(True)
    grouped = frame.assign(success=frame["status"] == SUCCESS, dag_exact=exact).groupby("experiment")
    return pd.DataFrame({
        "trials": grouped.size(),
        "success_rate": grouped["success"].mean(),
        "dag_exact_rate": grouped["dag_exact"].mean(),
        "mean_min_corr": grouped["min_corr"].mean(),
        "mean_mixing_residual": grouped["mixing_residual"].mean(),
    })


def cmd_report(args: argparse.Namespace) -> int:
    frame = load_results(args.results)
    print(summary_table(frame).to_string(float_format=lambda v: f"{v:.4f}"))
    if args.tsv:
        frame.to_csv(args.tsv, sep="\t", index=False, float_format="%.17g")
        print(f"Wrote {args.tsv}")
    if args.plot:
        from visualization.charts import ExperimentVisualizer, save_figure
        save_figure(ExperimentVisualizer(frame).report_figure(), args.plot)
        print(f"Wrote {args.plot}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "audit": cmd_audit,
    "recover": cmd_recover,
    "experiment": cmd_experiment,
    "report": cmd_report,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    setup_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"Config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ScaleIError, OSError) as exc:
        logger.error("%s failed: %s", args.command, exc)
        return EXIT_FAILED if getattr(args, "strict", False) else 1
