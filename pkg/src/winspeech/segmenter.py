"""Voice activity detection, speaker-turn clustering, and segment extraction.

Diarization is approximated by energy-based VAD followed by agglomerative
clustering of per-interval mean-MFCC embeddings (cosine distance, average
linkage). The interviewee is taken to be the cluster with the longest total
speech duration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage

from .audio import AudioBuffer, FrameSequence, frame_signal
from .dsp import frame_energy_db, mfcc

AUTO_DISTANCE_THRESHOLD = 0.15
NOISE_FLOOR_PERCENTILE = 10.0
ENERGY_FLOOR_DB = -120.0


@dataclass(frozen=True)
class Interval:
    start: float
    end: float

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise ValueError(f"bad interval [{self.start}, {self.end}]")

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class Turn:
    interval: Interval
    speaker: int


@dataclass(frozen=True)
class VadConfig:
    margin_db: float = 6.0
    min_speech: float = 0.25
    min_gap: float = 0.20

    def __post_init__(self):
        if self.margin_db <= 0 or self.min_speech <= 0 or self.min_gap <= 0:
            raise ValueError("VadConfig fields must be positive")


def noise_floor_db(frames: FrameSequence) -> float:
    """Robust noise floor: 10th percentile of per-frame energies in dB."""
    if frames.n_frames == 0:
        return ENERGY_FLOOR_DB
    return float(np.percentile(frame_energy_db(frames), NOISE_FLOOR_PERCENTILE))


def detect_voice_activity(buf: AudioBuffer,
                          cfg: VadConfig = VadConfig()) -> list[Interval]:
    """Energy-threshold VAD on the 25 ms / 10 ms frame grid."""
    frames = frame_signal(buf)
    if frames.n_frames == 0:
        return []
    energy = frame_energy_db(frames)
    threshold = np.percentile(energy, NOISE_FLOOR_PERCENTILE) + cfg.margin_db
    active = energy > threshold

    hop_s = frames.hop_seconds
    win_s = frames.frame_len / frames.sample_rate
    raw: list[list[float]] = []
    for i, flag in enumerate(active):
        if not flag:
            continue
        start = i * hop_s
        end = start + win_s
        if raw and start - raw[-1][1] < 1e-9:
            raw[-1][1] = end
        else:
            raw.append([start, end])

    merged: list[list[float]] = []
    for start, end in raw:
        if merged and start - merged[-1][1] < cfg.min_gap:
            merged[-1][1] = end
        else:
            merged.append([start, end])

    return [Interval(s, min(e, buf.duration))
            for s, e in merged if e - s >= cfg.min_speech]


def _interval_embedding(buf: AudioBuffer, iv: Interval) -> np.ndarray:
    lo = int(round(iv.start * buf.sample_rate))
    hi = int(round(iv.end * buf.sample_rate))
    chunk = AudioBuffer(samples=buf.samples[lo:hi], sample_rate=buf.sample_rate)
    frames = frame_signal(chunk)
    if frames.n_frames == 0:
        return np.zeros(13)
    return mfcc(frames, n_coeffs=13).mean(axis=0)


def cluster_speakers(buf: AudioBuffer, speech: list[Interval],
                     n_speakers: int | None = None) -> list[Turn]:
    """Assign each speech interval to a speaker cluster.

    n_speakers=None cuts the average-linkage dendrogram at cosine distance
    0.15. Cluster ids are renumbered by order of first appearance in time.
    """
    if not speech:
        return []
    speech = sorted(speech, key=lambda iv: iv.start)
    if len(speech) == 1:
        return [Turn(interval=speech[0], speaker=0)]

    emb = np.stack([_interval_embedding(buf, iv) for iv in speech])
    # guard zero rows: cosine distance is undefined on them
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    emb = np.where(norms > 0, emb / np.maximum(norms, 1e-12), emb)
    link = linkage(emb, method="average", metric="cosine")
    if n_speakers is None:
        labels = fcluster(link, t=AUTO_DISTANCE_THRESHOLD, criterion="distance")
    else:
        labels = fcluster(link, t=n_speakers, criterion="maxclust")

    remap: dict[int, int] = {}
    turns = []
    for iv, lab in zip(speech, labels):
        if lab not in remap:
            remap[lab] = len(remap)
        turns.append(Turn(interval=iv, speaker=remap[lab]))
    return turns


def select_athlete(turns: list[Turn]) -> int:
    """Cluster with the longest total speech duration; ties go to the lowest id."""
    if not turns:
        raise ValueError("cannot select a speaker from an empty turn list")
    totals: dict[int, float] = {}
    for turn in turns:
        totals[turn.speaker] = totals.get(turn.speaker, 0.0) + turn.interval.duration
    return min(totals, key=lambda spk: (-totals[spk], spk))


def extract_segments(buf: AudioBuffer, turns: list[Turn],
                     speaker: int) -> list[AudioBuffer]:
    """Sample-exact slices of the given speaker's turns, in temporal order."""
    selected = sorted((t for t in turns if t.speaker == speaker),
                      key=lambda t: t.interval.start)
    out = []
    for turn in selected:
        lo = int(round(turn.interval.start * buf.sample_rate))
        hi = int(round(turn.interval.end * buf.sample_rate))
        hi = min(hi, buf.samples.size)
        out.append(AudioBuffer(samples=buf.samples[lo:hi].copy(),
                               sample_rate=buf.sample_rate))
    return out
