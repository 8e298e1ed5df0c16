"""Synthetic multimodal cohorts with a known latent risk tier.

One three-level latent tier drives everything: true financial literacy
(low tier skews high-FL), the emotion of the generated call clip (high
tier skews Sadness/Anger), and the churn probability. Tabular features
are noisy projections of the latent plus independent noise, so each
modality is an imperfect, partly independent view of the same tier.
"""

from __future__ import annotations

import io
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio_features import AudioClip
from .data_model import (
    NEGATIVE_LABELS,
    POSITIVE_LABELS,
    RISK_LABELS,
    CustomerRecord,
    CustomerTable,
    TableSchema,
    serialize_customer_table,
    parse_customer_table,
)
from .errors import InvalidConfig, InvalidDuration

SAMPLE_RATE = 16000

TIER_PROBS = (0.5, 0.3, 0.2)
_TIER_MEAN = sum(p * t for t, p in enumerate(TIER_PROBS))


@dataclass(frozen=True)
class SynthConfig:
    n_customers: int = 500
    n_features: int = 12
    labeled_fl_fraction: float = 0.2
    churn_base_rate: float = 0.25
    coupling: float = 0.9
    seed: int = 0
    clip_duration_s: float = 1.0

    def __post_init__(self):
        if self.n_customers < 1 or self.n_features < 1:
            raise InvalidConfig("n_customers and n_features must be positive")
        if not 0.0 < self.labeled_fl_fraction <= 1.0:
            raise InvalidConfig("labeled_fl_fraction must lie in (0, 1]")
        if not 0.0 < self.churn_base_rate < 1.0:
            raise InvalidConfig("churn_base_rate must lie in (0, 1)")
        if not 0.0 <= self.coupling <= 1.0:
            raise InvalidConfig("coupling must lie in [0, 1]")
        if not 0.5 <= self.clip_duration_s <= 10.0:
            raise InvalidConfig("clip_duration_s must lie in [0.5, 10]")


@dataclass(frozen=True)
class SyntheticCohort:
    table: CustomerTable
    audio_clips: dict[str, AudioClip]
    ground_truth: dict[str, str]  # id -> low/mid/high
    true_fl: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for row in self.table.rows:
            if row.audio_ref is not None and row.audio_ref not in self.audio_clips:
                raise ValueError(f"unresolved audio_ref {row.audio_ref!r}")


def synth_audio(emotion: str, duration_s: float, seed) -> AudioClip:
    """Parametric clip whose HPSS character separates emotion polarity.

    Positive labels produce sustained harmonic tone stacks; negative
    labels produce click trains of short noise bursts. Deterministic per
    seed.
    """
    if not 0.5 <= duration_s <= 10.0:
        raise InvalidDuration(f"duration {duration_s} outside [0.5, 10] s")
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * SAMPLE_RATE))
    t = np.arange(n) / SAMPLE_RATE
    if emotion in POSITIVE_LABELS:
        f0 = rng.uniform(180.0, 280.0)
        n_harm = 6 if emotion == "Happiness" else 4
        x = np.zeros(n)
        for h in range(1, n_harm + 1):
            phase = rng.uniform(0.0, 2 * np.pi)
            x += np.sin(2 * np.pi * f0 * h * t + phase) / h
        # slow tremolo keeps the clip non-stationary without adding transients
        x *= 1.0 + 0.1 * np.sin(2 * np.pi * rng.uniform(2.0, 5.0) * t)
    elif emotion in NEGATIVE_LABELS:
        period = rng.uniform(0.06, 0.11) if emotion == "Anger" else rng.uniform(0.10, 0.16)
        burst_len = int(0.004 * SAMPLE_RATE)
        decay = np.exp(-np.arange(burst_len) / (0.001 * SAMPLE_RATE))
        x = np.zeros(n)
        pos = int(rng.uniform(0, period * SAMPLE_RATE))
        while pos + burst_len < n:
            x[pos : pos + burst_len] += rng.normal(0.0, 1.0, burst_len) * decay
            pos += int(period * SAMPLE_RATE * rng.uniform(0.9, 1.1))
        # faint low-frequency rumble so negative clips are not pure silence
        x += 0.01 * rng.normal(0.0, 1.0, n)
    else:
        raise InvalidConfig(f"unsupported emotion label: {emotion!r}")
    peak = np.max(np.abs(x))
    if peak > 0:
        x = 0.8 * x / peak
    return AudioClip(samples=x, sample_rate=SAMPLE_RATE)


def generate_cohort(config: SynthConfig) -> SyntheticCohort:
    """Build a seeded cohort; equal configs give identical cohorts."""
    rng = np.random.default_rng(config.seed)
    n, nf = config.n_customers, config.n_features
    k = config.coupling

    tier = rng.choice(3, size=n, p=TIER_PROBS)
    true_fl = np.clip(rng.normal(0.75 - 0.30 * k * tier, 0.15), 0.0, 1.0)
    p_neg = np.clip(0.25 + 0.28 * k * tier, 0.0, 1.0)
    negative = rng.random(n) < p_neg
    # churn reacts to the latent tier plus the *realized* emotional state and
    # literacy, so the voice and literacy modalities carry churn signal that
    # the tabular features only partially expose
    p_churn = np.clip(
        config.churn_base_rate
        + k
        * (
            0.12 * (tier - _TIER_MEAN)
            + 0.28 * (negative - float(np.mean(negative)))
            + 0.30 * (float(np.mean(true_fl)) - true_fl)
        ),
        0.02,
        0.98,
    )
    churn = (rng.random(n) < p_churn).astype(int)
    labeled = rng.random(n) < config.labeled_fl_fraction

    # feature blocks: latent-tier projections, FL projections, pure noise
    n_tier = max(1, int(round(nf * 0.4)))
    n_fl = max(1, min(nf - n_tier, int(round(nf * 0.3))))
    proj_tier = rng.normal(0.0, 1.0, n_tier)
    proj_fl = rng.normal(0.0, 1.0, n_fl)

    tier_norm = (tier - _TIER_MEAN) / np.sqrt(
        sum(p * (t - _TIER_MEAN) ** 2 for t, p in enumerate(TIER_PROBS))
    )
    tier_signal = tier_norm + rng.normal(0.0, 0.6, n)
    fl_signal = (true_fl - 0.5) * 2.0 + rng.normal(0.0, 0.3, n)

    X = rng.normal(0.0, 1.0, (n, nf))
    X[:, :n_tier] = np.outer(tier_signal, proj_tier) + rng.normal(0.0, 0.5, (n, n_tier))
    X[:, n_tier : n_tier + n_fl] = np.outer(fl_signal, proj_fl) + rng.normal(
        0.0, 0.5, (n, n_fl)
    )

    # true risk tier: churn probability banded at the 50%/80% population
    # quantiles, so the label reflects the full multimodal churn state
    risk_label = np.empty(n, dtype=object)
    order = np.argsort(p_churn, kind="stable")
    cuts = (int(round(0.5 * n)), int(round(0.8 * n)))
    risk_label[order[: cuts[0]]] = RISK_LABELS[0]
    risk_label[order[cuts[0] : cuts[1]]] = RISK_LABELS[1]
    risk_label[order[cuts[1] :]] = RISK_LABELS[2]

    rows, clips, truth, fl_map = [], {}, {}, {}
    for i in range(n):
        cid = f"c{i:05d}"
        clip_rng = np.random.default_rng([config.seed, i])
        if negative[i]:
            label = NEGATIVE_LABELS[int(clip_rng.integers(len(NEGATIVE_LABELS)))]
        else:
            label = POSITIVE_LABELS[int(clip_rng.integers(len(POSITIVE_LABELS)))]
        ref = f"{cid}.wav"
        clips[ref] = synth_audio(label, config.clip_duration_s, [config.seed, i, 1])
        rows.append(
            CustomerRecord(
                id=cid,
                features=tuple(X[i]),
                fl_label=float(true_fl[i]) if labeled[i] else None,
                audio_ref=ref,
                churn_outcome=int(churn[i]),
            )
        )
        truth[cid] = str(risk_label[i])
        fl_map[cid] = float(true_fl[i])

    table = CustomerTable(schema=TableSchema.with_width(nf), rows=tuple(rows))
    return SyntheticCohort(table=table, audio_clips=clips, ground_truth=truth, true_fl=fl_map)


def generate_ser_corpus(
    n_per_class: int = 40, duration_s: float = 1.0, seed: int = 0
) -> tuple[list[AudioClip], list[int]]:
    """Labeled emotion clips for training the speech classifier.

    Stands in for an external labeled emotion corpus; the cohort's own
    clips stay unlabeled from the model's point of view.
    """
    if n_per_class < 1:
        raise InvalidConfig("n_per_class must be positive")
    clips, labels = [], []
    all_labels = POSITIVE_LABELS + NEGATIVE_LABELS
    for rep in range(n_per_class):
        for li, label in enumerate(all_labels):
            clips.append(synth_audio(label, duration_s, [seed, 7919, rep, li]))
            labels.append(0 if label in POSITIVE_LABELS else 1)
    return clips, labels


def clip_to_wav_bytes(clip: AudioClip) -> bytes:
    """PCM 16-bit mono RIFF encoding."""
    pcm = np.clip(np.round(clip.samples * 32767.0), -32768, 32767).astype("<i2")
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(clip.sample_rate)
        wav.writeframes(pcm.tobytes())
    return buf.getvalue()


def wav_bytes_to_clip(blob: bytes) -> AudioClip:
    with wave.open(io.BytesIO(blob), "rb") as wav:
        if wav.getnchannels() != 1 or wav.getsampwidth() != 2:
            raise ValueError("expected 16-bit mono PCM")
        sr = wav.getframerate()
        pcm = np.frombuffer(wav.readframes(wav.getnframes()), dtype="<i2")
    return AudioClip(samples=pcm.astype(np.float64) / 32767.0, sample_rate=sr)


def write_cohort(cohort: SyntheticCohort, out_dir: str | Path) -> None:
    """table.csv + audio/*.wav + manifest.csv + ground_truth.csv."""
    out = Path(out_dir)
    (out / "audio").mkdir(parents=True, exist_ok=True)
    (out / "table.csv").write_bytes(serialize_customer_table(cohort.table))
    manifest = ["id,audio_path"]
    for row in cohort.table.rows:
        if row.audio_ref is not None:
            (out / "audio" / row.audio_ref).write_bytes(
                clip_to_wav_bytes(cohort.audio_clips[row.audio_ref])
            )
            manifest.append(f"{row.id},audio/{row.audio_ref}")
    (out / "manifest.csv").write_text("\n".join(manifest) + "\n", encoding="utf-8")
    truth_lines = ["id,risk_tier,true_fl"]
    for row in cohort.table.rows:
        truth_lines.append(
            f"{row.id},{cohort.ground_truth[row.id]},{cohort.true_fl.get(row.id, '')!s}"
        )
    (out / "ground_truth.csv").write_text("\n".join(truth_lines) + "\n", encoding="utf-8")


def read_cohort(in_dir: str | Path, n_features: int | None = None) -> SyntheticCohort:
    """Load a cohort previously written by write_cohort."""
    src = Path(in_dir)
    raw = (src / "table.csv").read_bytes()
    if n_features is None:
        header = raw.split(b"\n", 1)[0].decode("utf-8").split(",")
        n_features = len(header) - 4
    table = parse_customer_table(raw, TableSchema.with_width(n_features))
    clips = {}
    for line in (src / "manifest.csv").read_text(encoding="utf-8").splitlines()[1:]:
        cid, path = line.split(",", 1)
        clips[Path(path).name] = wav_bytes_to_clip((src / path).read_bytes())
    truth, fl_map = {}, {}
    for line in (src / "ground_truth.csv").read_text(encoding="utf-8").splitlines()[1:]:
        cid, tier, fl = line.split(",")
        truth[cid] = tier
        if fl:
            fl_map[cid] = float(fl)
    return SyntheticCohort(table=table, audio_clips=clips, ground_truth=truth, true_fl=fl_map)
