"""Ranking and classification metrics for the risk-level output.

Mean average precision treats each risk level as a retrieval query over
the whole cohort; macro F1 weighs the three classes equally; AUC is the
rank statistic over churn propensities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data_model import RISK_LABELS
from .errors import (
    DegenerateColumn,
    EmptyQuerySet,
    LengthMismatch,
    NoRelevant,
    SingleClass,
)
from .fusion import RiskAssignment

MID_RANK_CENTER = 2.0  # D value of the mid-risk triples


@dataclass(frozen=True)
class RiskQuery:
    level: str
    ranked_ids: tuple[str, ...]
    relevant_ids: frozenset[str]


@dataclass(frozen=True)
class MetricReport:
    map: float
    macro_f1: float
    accuracy: float
    auc: float | None
    per_class_f1: dict[str, float]
    correlations: dict[str, float] = field(default_factory=dict)


def average_precision(ranked_relevance, m: int) -> float:
    """Mean of precision-at-k over the relevant positions."""
    rel = np.asarray(ranked_relevance, dtype=np.float64)
    if m < 1:
        raise NoRelevant("average precision undefined with no relevant items")
    if not np.all((rel == 0) | (rel == 1)) or rel.sum() > m:
        raise ValueError("relevance must be binary with at most m ones")
    hits = np.cumsum(rel)
    precision_at_k = hits / np.arange(1, rel.size + 1)
    return float(np.sum(precision_at_k * rel) / m)


def mean_average_precision(queries: list[RiskQuery]) -> float:
    """Unweighted mean AP over the risk-level queries."""
    if not queries:
        raise EmptyQuerySet("at least one query required")
    aps = []
    for q in queries:
        if not q.relevant_ids:
            raise NoRelevant(f"query {q.level!r} has no relevant ids")
        rel = [1 if cid in q.relevant_ids else 0 for cid in q.ranked_ids]
        aps.append(average_precision(rel, len(q.relevant_ids)))
    return float(np.mean(aps))


def macro_f1(predicted, truth, classes=RISK_LABELS) -> float:
    """Unweighted mean of per-class F1; empty denominators count as 0."""
    return float(np.mean(list(per_class_f1(predicted, truth, classes).values())))


def per_class_f1(predicted, truth, classes=RISK_LABELS) -> dict[str, float]:
    predicted, truth = list(predicted), list(truth)
    if len(predicted) != len(truth) or not truth:
        raise LengthMismatch("predicted and truth must be equal-length and non-empty")
    scores = {}
    for cls in classes:
        tp = sum(1 for p, t in zip(predicted, truth) if p == cls and t == cls)
        fp = sum(1 for p, t in zip(predicted, truth) if p == cls and t != cls)
        fn = sum(1 for p, t in zip(predicted, truth) if p != cls and t == cls)
        scores[cls] = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) > 0 else 0.0
    return scores


def accuracy(predicted, truth) -> float:
    predicted, truth = list(predicted), list(truth)
    if len(predicted) != len(truth) or not truth:
        raise LengthMismatch("predicted and truth must be equal-length and non-empty")
    return sum(1 for p, t in zip(predicted, truth) if p == t) / len(truth)


def roc_auc(scores, labels) -> float:
    """P(random positive outranks random negative), ties at 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(int).ravel()
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if pos.size == 0 or neg.size == 0:
        raise SingleClass("both classes must be present")
    greater = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return float((greater + 0.5 * ties) / (pos.size * neg.size))


def build_risk_queries(
    assignments: list[RiskAssignment], truth: dict[str, str]
) -> list[RiskQuery]:
    """One retrieval query per risk level over the full cohort.

    The rank score orders each query by affinity to its level: descending
    for high, ascending for low, and by closeness to the mid-band center
    for mid. Levels absent from the ground truth are skipped.
    """
    ids = [a.id for a in assignments]
    ranks = np.array([a.decision.rank_score for a in assignments])
    affinities = {
        "low": -ranks,
        "mid": -np.abs(ranks - MID_RANK_CENTER),
        "high": ranks,
    }
    queries = []
    for level in RISK_LABELS:
        relevant = frozenset(cid for cid in ids if truth.get(cid) == level)
        if not relevant:
            continue
        order = np.argsort(-affinities[level], kind="stable")
        queries.append(
            RiskQuery(level=level, ranked_ids=tuple(ids[i] for i in order), relevant_ids=relevant)
        )
    return queries


def correlation_report(assignments: list[RiskAssignment]) -> dict[str, float]:
    """Pairwise Pearson among fl_score, churn_propensity, emotion_binary, D."""
    if len(assignments) < 3:
        raise DegenerateColumn("need at least 3 customers")
    if any(a.scores is None for a in assignments):
        raise DegenerateColumn("assignments lack unimodal scores")
    columns = {
        "fl_score": np.array([a.scores.fl_score for a in assignments]),
        "churn_propensity": np.array([a.scores.churn_propensity for a in assignments]),
        "emotion_binary": np.array([float(a.scores.emotion.binary) for a in assignments]),
        "D": np.array([float(a.decision.D) for a in assignments]),
    }
    for name, col in columns.items():
        if np.std(col) == 0:
            raise DegenerateColumn(f"column {name!r} is constant")
    names = list(columns)
    out = {}
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            out[f"{a}~{b}"] = float(np.corrcoef(columns[a], columns[b])[0, 1])
    return out


def evaluate_assignments(
    assignments: list[RiskAssignment],
    truth: dict[str, str],
    churn_outcomes: dict[str, int] | None = None,
) -> MetricReport:
    """Full metric report for one strategy's assignments."""
    predicted = [a.decision.risk for a in assignments]
    true_labels = [truth[a.id] for a in assignments]
    queries = build_risk_queries(assignments, truth)
    auc = None
    if churn_outcomes is not None:
        props = [
            a.scores.churn_propensity if a.scores is not None else a.decision.rank_score / 4.0
            for a in assignments
        ]
        outcomes = [churn_outcomes[a.id] for a in assignments]
        if len(set(outcomes)) == 2:
            auc = roc_auc(props, outcomes)
    correlations = {}
    if all(a.scores is not None for a in assignments):
        try:
            correlations = correlation_report(assignments)
        except DegenerateColumn:
            correlations = {}
    return MetricReport(
        map=mean_average_precision(queries),
        macro_f1=macro_f1(predicted, true_labels),
        accuracy=accuracy(predicted, true_labels),
        auc=auc,
        per_class_f1=per_class_f1(predicted, true_labels),
        correlations=correlations,
    )


def serialize_report(report: MetricReport) -> str:
    """Flat key=value text, one metric per line."""
    lines = [
        f"map={report.map!r}",
        f"macro_f1={report.macro_f1!r}",
        f"accuracy={report.accuracy!r}",
        f"auc={'' if report.auc is None else repr(report.auc)}",
    ]
    for cls, score in report.per_class_f1.items():
        lines.append(f"f1_{cls}={score!r}")
    for pair, value in report.correlations.items():
        lines.append(f"corr_{pair}={value!r}")
    return "\n".join(lines) + "\n"
