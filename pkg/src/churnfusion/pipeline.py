"""Experiment orchestration shared by the CLI and the comparison harness.

One top-level seed drives everything: cohort generation, resampling,
both network trainers, and the train/test split all derive their own
streams from it, so a rerun with the same seed reproduces every artifact
byte for byte.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import churn_model as cm
from . import fl_model as flm
from . import fusion
from . import metrics
from . import ser_model as serm
from . import synth
from .audio_features import FeatureParams, build_feature_map
from .data_model import CustomerTable
from .errors import InvalidConfig, MissingModality
from .mlp import TrainConfig

STRATEGIES = ("none", "late", "hybrid")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    test_fraction: float = 0.3
    rfe_k: int = 8
    ser_corpus_per_class: int = 40
    synth: synth.SynthConfig = field(default_factory=synth.SynthConfig)
    smogn: flm.SmognConfig = field(default_factory=flm.SmognConfig)
    coreg: flm.CoregConfig = field(default_factory=flm.CoregConfig)
    smote: cm.SmoteParams = field(default_factory=cm.SmoteParams)
    churn_train: TrainConfig = field(default_factory=TrainConfig)
    ser_train: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=120))
    translation: fusion.TranslationConfig = field(default_factory=fusion.TranslationConfig)
    features: FeatureParams = field(default_factory=FeatureParams)

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise InvalidConfig("test_fraction must lie in (0, 1)")
        if not self.seeds:
            raise InvalidConfig("seeds must be non-empty")


def with_seed(cfg: RunConfig, seed: int) -> RunConfig:
    """Re-derive every nested seed from one top-level seed."""
    return replace(
        cfg,
        seed=seed,
        synth=replace(cfg.synth, seed=seed),
        smogn=replace(cfg.smogn, seed=seed + 1),
        coreg=replace(cfg.coreg, seed=seed + 2),
        churn_train=replace(cfg.churn_train, seed=seed + 3),
        ser_train=replace(cfg.ser_train, seed=seed + 4),
    )


_BOOL = {"true": True, "false": False, "1": True, "0": False}


def _coerce(value: str, kind):
    if kind is bool:
        return _BOOL[value.strip().lower()]
    if kind in (int, float, str):
        return kind(value)
    raise InvalidConfig(f"unsupported config value type {kind}")


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    """Flat key=value config; dotted keys address nested sections.

    Example: ``synth.n_customers=2000`` or ``rfe_k=6``. ``seeds`` takes a
    comma-separated list. Unknown keys are rejected.
    """
    cfg = base or RunConfig()
    nested_updates: dict[str, dict] = {}
    top_updates: dict = {}
    top_fields = {f.name: f for f in dataclasses.fields(RunConfig)}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "seeds":
            top_updates["seeds"] = tuple(int(v) for v in value.split(",") if v.strip())
        elif "." in key:
            section, name = key.split(".", 1)
            if section not in top_fields:
                raise InvalidConfig(f"line {lineno}: unknown section {section!r}")
            target = getattr(cfg, section)
            section_fields = {f.name: f for f in dataclasses.fields(target)}
            if name not in section_fields:
                raise InvalidConfig(f"line {lineno}: unknown key {key!r}")
            current = getattr(target, name)
            nested_updates.setdefault(section, {})[name] = _coerce(value, type(current))
        elif key in top_fields:
            top_updates[key] = _coerce(value, type(getattr(cfg, key)))
        else:
            raise InvalidConfig(f"line {lineno}: unknown key {key!r}")
    for section, updates in nested_updates.items():
        top_updates[section] = replace(getattr(cfg, section), **updates)
    return replace(cfg, **top_updates)


def load_config(path: str | Path | None, seed: int | None = None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        cfg = parse_config_text(Path(path).read_text(encoding="utf-8"), cfg)
    return with_seed(cfg, seed if seed is not None else cfg.seed)


def split_table(table: CustomerTable, test_fraction: float, seed: int):
    """Deterministic shuffle split; returns (train_table, test_table)."""
    n = len(table.rows)
    order = np.random.default_rng(seed + 6).permutation(n)
    n_test = max(1, int(round(test_fraction * n)))
    test_idx = set(int(i) for i in order[:n_test])
    train_rows = tuple(r for i, r in enumerate(table.rows) if i not in test_idx)
    test_rows = tuple(r for i, r in enumerate(table.rows) if i in test_idx)
    return (
        CustomerTable(schema=table.schema, rows=train_rows),
        CustomerTable(schema=table.schema, rows=test_rows),
    )


def train_fl(train_table: CustomerTable, cfg: RunConfig) -> flm.FLModel:
    labeled = [
        (np.array(r.features), r.fl_label) for r in train_table.rows if r.fl_label is not None
    ]
    unlabeled = [np.array(r.features) for r in train_table.rows if r.fl_label is None]
    return flm.coreg_train(labeled, unlabeled, cfg.smogn, cfg.coreg)


def train_ser(cfg: RunConfig) -> serm.EmotionModel:
    clips, labels = synth.generate_ser_corpus(
        cfg.ser_corpus_per_class, cfg.synth.clip_duration_s, cfg.seed + 5
    )
    maps = [build_feature_map(c, cfg.features) for c in clips]
    return serm.train_emotion(maps, labels, cfg.ser_train)


def train_churn_baseline(train_table: CustomerTable, cfg: RunConfig) -> cm.ChurnModel:
    X = train_table.feature_matrix()
    y = np.array([r.churn_outcome for r in train_table.rows])
    if any(v is None for v in y):
        raise MissingModality("churn training needs outcomes for every row")
    rfe_k = min(cfg.rfe_k, X.shape[1])
    return cm.train_churn(X, y.astype(int), rfe_k, cfg.smote, cfg.churn_train)


def compute_emotions(table, clips, ser, cfg: RunConfig):
    return [
        serm.predict_emotion(ser, build_feature_map(clips[r.audio_ref], cfg.features))
        for r in table.rows
    ]


@dataclass
class ExperimentResult:
    assignments: dict[str, list[fusion.RiskAssignment]]
    reports: dict[str, metrics.MetricReport]
    baseline_auc: float | None
    hybrid_auc: float | None


def run_experiment(cfg: RunConfig, strategies=STRATEGIES) -> ExperimentResult:
    """Generate, train, and evaluate the requested strategies on one seed."""
    cohort = synth.generate_cohort(cfg.synth)
    train_tbl, test_tbl = split_table(cohort.table, cfg.test_fraction, cfg.seed)
    truth = cohort.ground_truth
    outcomes = {r.id: r.churn_outcome for r in cohort.table.rows}

    churn = train_churn_baseline(train_tbl, cfg)
    need_multimodal = "late" in strategies or "hybrid" in strategies
    fl = ser = None
    train_emotions = test_emotions = None
    if need_multimodal:
        fl = train_fl(train_tbl, cfg)
        ser = train_ser(cfg)
        test_emotions = compute_emotions(test_tbl, cohort.audio_clips, ser, cfg)

    assignments: dict[str, list[fusion.RiskAssignment]] = {}
    reports: dict[str, metrics.MetricReport] = {}
    hybrid_auc = None
    for strategy in strategies:
        if strategy == "none":
            asg = fusion.run_none_fusion(test_tbl, churn, cfg.translation)
        elif strategy == "late":
            asg = fusion.run_late_fusion(
                test_tbl, cohort.audio_clips, fl, ser, churn, cfg.translation,
                cfg.features, emotions=test_emotions,
            )
        elif strategy == "hybrid":
            if train_emotions is None:
                train_emotions = compute_emotions(train_tbl, cohort.audio_clips, ser, cfg)
            hybrid_churn = fusion.train_hybrid_churn(
                train_tbl, cohort.audio_clips, fl, ser,
                min(cfg.rfe_k + 2, cohort.table.schema.width + 2),
                cfg.smote, cfg.churn_train, cfg.features, emotions=train_emotions,
            )
            asg = fusion.run_hybrid_fusion(
                test_tbl, cohort.audio_clips, fl, ser, hybrid_churn, cfg.translation,
                cfg.features, emotions=test_emotions,
            )
        else:
            raise InvalidConfig(f"unknown strategy {strategy!r}")
        assignments[strategy] = asg
        reports[strategy] = metrics.evaluate_assignments(asg, truth, outcomes)

    baseline_auc = reports["none"].auc if "none" in reports else None
    if "hybrid" in reports:
        hybrid_auc = reports["hybrid"].auc
    return ExperimentResult(assignments, reports, baseline_auc, hybrid_auc)


def compare_over_seeds(cfg: RunConfig, strategies=STRATEGIES):
    """Per-strategy mean and std of MAP / macro-F1 / accuracy / AUC over seeds."""
    collected = {s: {"map": [], "macro_f1": [], "accuracy": [], "auc": []} for s in strategies}
    for seed in cfg.seeds:
        result = run_experiment(with_seed(cfg, seed), strategies)
        for s in strategies:
            rep = result.reports[s]
            collected[s]["map"].append(rep.map)
            collected[s]["macro_f1"].append(rep.macro_f1)
            collected[s]["accuracy"].append(rep.accuracy)
            if rep.auc is not None:
                collected[s]["auc"].append(rep.auc)
    rows = {}
    for s in strategies:
        rows[s] = {
            name: (float(np.mean(vals)), float(np.std(vals)) if len(vals) > 1 else 0.0)
            for name, vals in collected[s].items()
            if vals
        }
    return rows


def format_comparison(rows: dict) -> str:
    """Comparison table: one metric row, one column per fusion strategy."""
    strategies = list(rows)
    header = "metric," + ",".join(strategies)
    lines = [header]
    for metric_name in ("map", "macro_f1", "accuracy", "auc"):
        cells = []
        for s in strategies:
            if metric_name in rows[s]:
                mean, std = rows[s][metric_name]
                cells.append(f"{100 * mean:.1f} +/- {100 * std:.1f}")
            else:
                cells.append("")
        lines.append(f"{metric_name}," + ",".join(cells))
    return "\n".join(lines) + "\n"
