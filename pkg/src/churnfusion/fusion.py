"""Indicator translation and decision-level fusion.

Unimodal outputs become a nominal indicator triple (C, F, V) via three
threshold propositions, the triple's weighted sum D ranks churn risk, and
condition blocks assign exactly one of low/mid/high per customer. Three
strategies are orchestrated here: churn-only banding ("none"), pure
decision fusion over independent unimodals ("late"), and model-level
augmentation of the churn inputs followed by decision fusion ("hybrid").
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import churn_model as cm
from . import fl_model as fl
from . import ser_model as ser
from .audio_features import AudioClip, FeatureParams, build_feature_map
from .data_model import CustomerTable, ModalityScores
from .errors import InvalidTriple, MissingModality, SchemaMismatch
from .mlp import TrainConfig


@dataclass(frozen=True)
class TranslationConfig:
    """Thresholds for the score propositions plus constant indicator weights."""

    fl_threshold: float = 0.5
    churn_threshold: float = 0.5
    weights: tuple[int, int, int] = (2, 1, 1)  # (w_C, w_F, w_V)

    def __post_init__(self):
        if not 0.0 < self.fl_threshold < 1.0 or not 0.0 < self.churn_threshold < 1.0:
            raise ValueError("thresholds must lie in (0, 1)")
        w_c, w_f, w_v = self.weights
        if not (w_c >= w_f == w_v >= 0):
            raise ValueError("weights must satisfy w_C >= w_F = w_V >= 0")


@dataclass(frozen=True)
class IndicatorTriple:
    C: int
    F: int
    V: int

    @property
    def D(self) -> int:
        return self.C + self.F + self.V


@dataclass(frozen=True)
class FusionDecision:
    D: int
    risk: str
    triple: IndicatorTriple
    rank_score: float


@dataclass(frozen=True)
class RiskAssignment:
    id: str
    scores: ModalityScores | None
    triple: IndicatorTriple
    decision: FusionDecision


def translate(scores: ModalityScores, cfg: TranslationConfig = TranslationConfig()) -> IndicatorTriple:
    """Apply the three propositions.

    F fires on a low literacy score (strict '<'), C fires on churn
    propensity strictly above its threshold ('<=' keeps C at 0), and V
    fires on a negative emotion.
    """
    w_c, w_f, w_v = cfg.weights
    f = w_f if scores.fl_score < cfg.fl_threshold else 0
    c = 0 if scores.churn_propensity <= cfg.churn_threshold else w_c
    v = w_v if scores.emotion.binary == 1 else 0
    return IndicatorTriple(C=c, F=f, V=v)


def decision_fuse(
    triple: IndicatorTriple,
    churn_propensity: float = 0.0,
    cfg: TranslationConfig = TranslationConfig(),
) -> FusionDecision:
    """Assign the unique risk class for an indicator triple.

    Low: no indicator fires, or a single non-churn indicator fires.
    Mid: only the churn indicator, or both non-churn indicators.
    High: the churn indicator plus at least one other.
    The rank score D + propensity/10 keeps class order while breaking ties
    continuously.
    """
    w_c, w_f, w_v = cfg.weights
    if triple.C not in (0, w_c) or triple.F not in (0, w_f) or triple.V not in (0, w_v):
        raise InvalidTriple(f"indicator values {triple} outside weight domains {cfg.weights}")
    c_on, f_on, v_on = triple.C > 0, triple.F > 0, triple.V > 0
    if not c_on and not (f_on and v_on):
        risk = "low"
    elif (c_on and not f_on and not v_on) or (not c_on and f_on and v_on):
        risk = "mid"
    else:
        risk = "high"
    return FusionDecision(
        D=triple.D, risk=risk, triple=triple, rank_score=triple.D + churn_propensity / 10.0
    )


def _emotion_predictions(
    table: CustomerTable,
    clips: dict[str, AudioClip],
    ser_model: ser.EmotionModel,
    params: FeatureParams,
    precomputed=None,
):
    if precomputed is not None:
        if len(precomputed) != len(table.rows):
            raise MissingModality("one precomputed emotion prediction per row required")
        return list(precomputed)
    preds = []
    for row in table.rows:
        if row.audio_ref is None or row.audio_ref not in clips:
            raise MissingModality(f"customer {row.id!r} has no audio clip")
        preds.append(ser.predict_emotion(ser_model, build_feature_map(clips[row.audio_ref], params)))
    return preds


def run_late_fusion(
    table: CustomerTable,
    clips: dict[str, AudioClip],
    fl_model: fl.FLModel,
    ser_model: ser.EmotionModel,
    churn: cm.ChurnModel,
    cfg: TranslationConfig = TranslationConfig(),
    params: FeatureParams = FeatureParams(),
    emotions=None,
) -> list[RiskAssignment]:
    """Each modality scores its own raw source; fusion happens at decision level only."""
    X = table.feature_matrix()
    fl_scores = fl.predict_fl_batch(fl_model, X)
    propensities = cm.predict_churn_batch(churn, X)
    emotions = _emotion_predictions(table, clips, ser_model, params, emotions)
    out = []
    for row, f_score, p, emo in zip(table.rows, fl_scores, propensities, emotions):
        scores = ModalityScores(fl_score=float(f_score), churn_propensity=float(p), emotion=emo)
        triple = translate(scores, cfg)
        out.append(RiskAssignment(row.id, scores, triple, decision_fuse(triple, float(p), cfg)))
    return out


def augment_features(X: np.ndarray, fl_scores: np.ndarray, emotion_binary: np.ndarray) -> np.ndarray:
    """Append the FL score and emotion flag as two extra churn-model inputs."""
    return np.column_stack([X, np.asarray(fl_scores, float), np.asarray(emotion_binary, float)])


def train_hybrid_churn(
    table: CustomerTable,
    clips: dict[str, AudioClip],
    fl_model: fl.FLModel,
    ser_model: ser.EmotionModel,
    rfe_k: int,
    smote: cm.SmoteParams = cm.SmoteParams(),
    hyper: TrainConfig = TrainConfig(),
    params: FeatureParams = FeatureParams(),
    hidden_dims: tuple[int, ...] = (32, 32),
    emotions=None,
) -> cm.ChurnModel:
    """Stage-1 hybrid fusion: retrain the churn model on augmented inputs."""
    X = table.feature_matrix()
    y = np.array([row.churn_outcome for row in table.rows])
    if any(v is None for v in y):
        raise MissingModality("hybrid training needs churn outcomes for every row")
    fl_scores = fl.predict_fl_batch(fl_model, X)
    emo = np.array(
        [e.binary for e in _emotion_predictions(table, clips, ser_model, params, emotions)]
    )
    X_aug = augment_features(X, fl_scores, emo)
    return cm.train_churn(X_aug, y.astype(int), rfe_k, smote, hyper, hidden_dims)


def run_hybrid_fusion(
    table: CustomerTable,
    clips: dict[str, AudioClip],
    fl_model: fl.FLModel,
    ser_model: ser.EmotionModel,
    hybrid_churn: cm.ChurnModel,
    cfg: TranslationConfig = TranslationConfig(),
    params: FeatureParams = FeatureParams(),
    emotions=None,
) -> list[RiskAssignment]:
    """Stage-2 hybrid fusion: score with the augmented churn model, then fuse."""
    X = table.feature_matrix()
    expected = X.shape[1] + 2
    if max(hybrid_churn.selected_features) >= expected:
        raise SchemaMismatch("churn model expects wider input than the augmented table")
    fl_scores = fl.predict_fl_batch(fl_model, X)
    emotions = _emotion_predictions(table, clips, ser_model, params, emotions)
    emo = np.array([e.binary for e in emotions])
    propensities = cm.predict_churn_batch(hybrid_churn, augment_features(X, fl_scores, emo))
    out = []
    for row, f_score, p, e in zip(table.rows, fl_scores, propensities, emotions):
        scores = ModalityScores(fl_score=float(f_score), churn_propensity=float(p), emotion=e)
        triple = translate(scores, cfg)
        out.append(RiskAssignment(row.id, scores, triple, decision_fuse(triple, float(p), cfg)))
    return out


def run_none_fusion(
    table: CustomerTable,
    churn: cm.ChurnModel,
    cfg: TranslationConfig = TranslationConfig(),
) -> list[RiskAssignment]:
    """Unimodal baseline: churn propensity banded into three risk levels.

    Bands sit at the churn threshold and halfway between it and 1, the
    cut-points a propensity-only triple can express; the rank score maps
    propensity onto the same 0..4 scale as the fused D.
    """
    X = table.feature_matrix()
    propensities = cm.predict_churn_batch(churn, X)
    w_c = cfg.weights[0]
    high_cut = (1.0 + cfg.churn_threshold) / 2.0
    out = []
    for row, p in zip(table.rows, propensities):
        p = float(p)
        c = 0 if p <= cfg.churn_threshold else w_c
        triple = IndicatorTriple(C=c, F=0, V=0)
        risk = "low" if p <= cfg.churn_threshold else ("mid" if p <= high_cut else "high")
        decision = FusionDecision(D=triple.D, risk=risk, triple=triple, rank_score=4.0 * p)
        out.append(RiskAssignment(row.id, None, triple, decision))
    return out


ASSIGNMENT_HEADER = (
    "id",
    "fl_score",
    "churn_propensity",
    "emotion_binary",
    "C",
    "F",
    "V",
    "D",
    "risk",
    "rank_score",
)


def serialize_assignments(assignments: list[RiskAssignment]) -> bytes:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(ASSIGNMENT_HEADER)
    for a in assignments:
        s = a.scores
        writer.writerow(
            [
                a.id,
                "" if s is None else repr(s.fl_score),
                "" if s is None else repr(s.churn_propensity),
                "" if s is None else s.emotion.binary,
                a.triple.C,
                a.triple.F,
                a.triple.V,
                a.decision.D,
                a.decision.risk,
                repr(a.decision.rank_score),
            ]
        )
    return out.getvalue().encode("utf-8")
