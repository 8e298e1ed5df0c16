"""Command-line experiment harness.

Workspace layout under --out: ``data/`` (cohort files), ``models/``
(versioned binaries), ``reports/`` (assignment tables and metric
reports). All commands re-derive the train/test split from the top-level
seed, so trainers and evaluators agree without extra bookkeeping.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import churn_model as cm
from . import fl_model as flm
from . import fusion
from . import metrics
from . import pipeline
from . import ser_model as serm
from . import synth
from .errors import ChurnFusionError, MissingModality


def _load_cfg(args) -> pipeline.RunConfig:
    cfg = pipeline.load_config(args.config, args.seed)
    updates = {}
    if getattr(args, "threshold_fl", None) is not None:
        updates["fl_threshold"] = args.threshold_fl
    if getattr(args, "threshold_churn", None) is not None:
        updates["churn_threshold"] = args.threshold_churn
    if updates:
        cfg = dataclasses.replace(
            cfg, translation=dataclasses.replace(cfg.translation, **updates)
        )
    return cfg


def _workspace(args) -> tuple[Path, Path, Path]:
    out = Path(args.out)
    return out / "data", out / "models", out / "reports"


def _read_cohort(data_dir: Path) -> synth.SyntheticCohort:
    if not (data_dir / "table.csv").exists():
        raise MissingModality(f"no cohort at {data_dir}; run 'gen' first")
    return synth.read_cohort(data_dir)


def cmd_gen(args) -> int:
    cfg = _load_cfg(args)
    data_dir, _, _ = _workspace(args)
    cohort = synth.generate_cohort(cfg.synth)
    synth.write_cohort(cohort, data_dir)
    print(f"cohort={len(cohort.table)}")
    print(f"data_dir={data_dir}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    data_dir, model_dir, _ = _workspace(args)
    cohort = _read_cohort(data_dir)
    train_tbl, _ = pipeline.split_table(cohort.table, cfg.test_fraction, cfg.seed)
    model_dir.mkdir(parents=True, exist_ok=True)

    if args.modality == "fl":
        model = pipeline.train_fl(train_tbl, cfg)
        blob = flm.save_fl_model(model)
        path = model_dir / "fl.bin"
        labeled = [(np.array(r.features), r.fl_label) for r in train_tbl.rows if r.fl_label is not None]
        if labeled:
            X = np.array([f for f, _ in labeled])
            y = np.array([t for _, t in labeled])
            rmse = float(np.sqrt(np.mean((flm.predict_fl_batch(model, X) - y) ** 2)))
            print(f"train_rmse={rmse!r}")
        print(f"pseudo_labels={len(model.transcript)}")
    elif args.modality == "ser":
        if not (data_dir / "manifest.csv").exists():
            raise MissingModality(f"no audio manifest at {data_dir}")
        model = pipeline.train_ser(cfg)
        blob = serm.save_emotion_model(model)
        path = model_dir / "ser.bin"
        print(f"final_loss={model.final_loss!r}")
    elif args.modality == "churn":
        model = pipeline.train_churn_baseline(train_tbl, cfg)
        blob = cm.save_churn_model(model)
        path = model_dir / "churn.bin"
        print(f"final_loss={model.final_loss!r}")
        print(f"train_accuracy={model.train_accuracy!r}")
    else:
        raise ChurnFusionError(f"unknown modality {args.modality!r}")
    path.write_bytes(blob)
    print(f"model_path={path}")
    return 0


def _risk_histogram(assignments) -> dict[str, int]:
    counts = {"low": 0, "mid": 0, "high": 0}
    for a in assignments:
        counts[a.decision.risk] += 1
    return counts


def cmd_evaluate(args) -> int:
    cfg = _load_cfg(args)
    data_dir, model_dir, report_dir = _workspace(args)
    cohort = _read_cohort(data_dir)
    train_tbl, test_tbl = pipeline.split_table(cohort.table, cfg.test_fraction, cfg.seed)
    strategy = args.strategy

    churn_path = model_dir / "churn.bin"
    if strategy in ("none", "late") and not churn_path.exists():
        raise MissingModality(f"missing churn model at {churn_path}; run 'train churn'")
    if strategy == "none":
        churn = cm.load_churn_model(churn_path.read_bytes())
        assignments = fusion.run_none_fusion(test_tbl, churn, cfg.translation)
    else:
        fl_path, ser_path = model_dir / "fl.bin", model_dir / "ser.bin"
        for path, name in ((fl_path, "fl"), (ser_path, "ser")):
            if not path.exists():
                raise MissingModality(f"missing {name} model at {path}; run 'train {name}'")
        fl = flm.load_fl_model(fl_path.read_bytes())
        ser = serm.load_emotion_model(ser_path.read_bytes())
        if strategy == "late":
            churn = cm.load_churn_model(churn_path.read_bytes())
            assignments = fusion.run_late_fusion(
                test_tbl, cohort.audio_clips, fl, ser, churn, cfg.translation, cfg.features
            )
        else:  # hybrid retrains the churn stage on augmented inputs
            hybrid = fusion.train_hybrid_churn(
                train_tbl, cohort.audio_clips, fl, ser,
                min(cfg.rfe_k + 2, cohort.table.schema.width + 2),
                cfg.smote, cfg.churn_train, cfg.features,
            )
            model_dir.mkdir(parents=True, exist_ok=True)
            (model_dir / "churn_hybrid.bin").write_bytes(cm.save_churn_model(hybrid))
            assignments = fusion.run_hybrid_fusion(
                test_tbl, cohort.audio_clips, fl, ser, hybrid, cfg.translation, cfg.features
            )

    outcomes = {r.id: r.churn_outcome for r in cohort.table.rows}
    report = metrics.evaluate_assignments(assignments, cohort.ground_truth, outcomes)
    report_dir.mkdir(parents=True, exist_ok=True)
    (report_dir / f"assignments_{strategy}.csv").write_bytes(
        fusion.serialize_assignments(assignments)
    )
    text = metrics.serialize_report(report)
    for level, count in _risk_histogram(assignments).items():
        text += f"risk_{level}={count}\n"
    (report_dir / f"report_{strategy}.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def cmd_compare(args) -> int:
    cfg = _load_cfg(args)
    if args.seeds:
        cfg = dataclasses.replace(cfg, seeds=tuple(int(s) for s in args.seeds.split(",")))
    _, _, report_dir = _workspace(args)
    rows = pipeline.compare_over_seeds(cfg)
    table = pipeline.format_comparison(rows)
    report_dir.mkdir(parents=True, exist_ok=True)
    (report_dir / "compare.csv").write_text(table, encoding="utf-8")
    print(table, end="")
    return 0


def cmd_report(args) -> int:
    _, _, report_dir = _workspace(args)
    found = False
    for path in sorted(report_dir.glob("report_*.txt")) + [report_dir / "compare.csv"]:
        if path.exists():
            found = True
            print(f"# {path.name}")
            print(path.read_text(encoding="utf-8"), end="")
    if not found:
        raise MissingModality(f"no reports under {report_dir}; run 'evaluate' or 'compare'")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="churnfusion", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="flat key=value config file")
        p.add_argument("--seed", type=int, default=None, help="top-level seed override")
        p.add_argument("--out", default="workspace", help="workspace directory")
        p.add_argument("--threshold-fl", type=float, default=None, dest="threshold_fl")
        p.add_argument("--threshold-churn", type=float, default=None, dest="threshold_churn")

    p = sub.add_parser("gen", help="generate a synthetic cohort")
    common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train one unimodal model")
    p.add_argument("modality", choices=("fl", "ser", "churn"))
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="run one fusion strategy on the held-out split")
    p.add_argument("strategy", choices=pipeline.STRATEGIES)
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="compare all strategies over a seed ensemble")
    common(p)
    p.add_argument("--seeds", default=None, help="comma-separated seed list")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="print stored reports")
    common(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ChurnFusionError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
