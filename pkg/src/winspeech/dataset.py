"""Manifests, speaker-disjoint splits, and SMOTE class balancing."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

LABELS = ("lose", "win")  # index = numeric class
SPLITS = ("train", "validation", "test")
DEFAULT_RATIOS = (0.7, 0.2, 0.1)


@dataclass(frozen=True)
class ManifestRecord:
    recording_id: str
    audio_path: str
    label: str
    speaker_id: str
    turns: list | None = None  # optional [(start, end, speaker), ...]
    embedding_paths: list[str] | None = None


@dataclass
class Manifest:
    records: list[ManifestRecord] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for rec in self.records:
            if rec.recording_id in seen:
                raise DataError(f"duplicate recording_id {rec.recording_id!r}")
            seen.add(rec.recording_id)
            if rec.label not in LABELS:
                raise DataError(
                    f"label must be one of {LABELS}, got {rec.label!r} "
                    f"({rec.recording_id})")

    def __len__(self):
        return len(self.records)


def load_manifest(path) -> Manifest:
    records = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from None
        try:
            records.append(ManifestRecord(
                recording_id=obj["recording_id"],
                audio_path=obj.get("audio_path", ""),
                label=obj["label"],
                speaker_id=obj["speaker_id"],
                turns=obj.get("turns"),
                embedding_paths=obj.get("embedding_paths"),
            ))
        except KeyError as exc:
            raise DataError(f"{path}:{lineno}: missing field {exc}") from None
    return Manifest(records=records)


@dataclass(frozen=True)
class LabeledMatrix:
    rows: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int, 0=lose 1=win

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=np.float64))
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)
        if rows.shape[0] != labels.shape[0]:
            raise DataError("row / label count mismatch")
        if rows.size and not np.all(np.isfinite(rows)):
            raise DataError("non-finite feature values")


def split_speakers(manifest: Manifest,
                   ratios: tuple[float, float, float] = DEFAULT_RATIOS,
                   seed: int = 0) -> dict[str, str]:
    """Greedy speaker-disjoint assignment of recordings to train/val/test.

    Speakers are shuffled with a seeded PRNG, then each speaker (with all
    of their recordings) goes to the split whose current recording-count
    fraction is furthest below its target.
    """
    if any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError(f"ratios must be positive and sum to 1, got {ratios}")
    by_speaker: dict[str, list[str]] = {}
    for rec in manifest.records:
        by_speaker.setdefault(rec.speaker_id, []).append(rec.recording_id)
    if len(by_speaker) < 3:
        raise DataError(f"need at least 3 speakers, got {len(by_speaker)}")

    speakers = sorted(by_speaker)
    random.Random(seed).shuffle(speakers)
    total = len(manifest)
    counts = [0, 0, 0]
    assignment: dict[str, str] = {}
    for speaker in speakers:
        deficits = [ratios[i] - counts[i] / total for i in range(3)]
        target = max(range(3), key=lambda i: (deficits[i], -i))
        for rid in by_speaker[speaker]:
            assignment[rid] = SPLITS[target]
        counts[target] += len(by_speaker[speaker])
    return assignment


def save_split(path, assignment: dict[str, str]) -> None:
    with open(path, "w") as fh:
        for rid in sorted(assignment):
            fh.write(json.dumps({"recording_id": rid,
                                 "split": assignment[rid]}) + "\n")


def load_split(path) -> dict[str, str]:
    assignment = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            obj = json.loads(line)
            assignment[obj["recording_id"]] = obj["split"]
    return assignment


def smote_balance(data: LabeledMatrix, k: int = 5, seed: int = 0) -> LabeledMatrix:
    """Equalize class counts by interpolated minority oversampling.

    Synthetic points are x + u*(nn - x) with u ~ U(0,1) and nn one of x's
    k nearest minority neighbors (Euclidean in z-normalized space).
    Original rows are returned unchanged, in their original order.
    """
    counts = np.bincount(data.labels, minlength=2)
    if counts[0] == 0 or counts[1] == 0:
        raise DataError("SMOTE requires both classes to be present")
    if counts[0] == counts[1]:
        return data
    minority = int(np.argmin(counts))
    if counts[minority] < 2:
        raise DataError("SMOTE requires at least 2 minority samples")

    minority_rows = data.rows[data.labels == minority]
    n_needed = int(counts.max() - counts.min())
    k = min(k, minority_rows.shape[0] - 1)

    # neighbor search in z-space so no dimension dominates the metric
    mu = data.rows.mean(axis=0)
    sigma = data.rows.std(axis=0)
    sigma[sigma == 0] = 1.0
    z = (minority_rows - mu) / sigma
    dists = np.linalg.norm(z[:, None, :] - z[None, :, :], axis=2)
    np.fill_diagonal(dists, np.inf)
    neighbor_idx = np.argsort(dists, axis=1)[:, :k]

    rng = np.random.default_rng(seed)
    synthetic = np.empty((n_needed, data.rows.shape[1]))
    for i in range(n_needed):
        base = int(rng.integers(minority_rows.shape[0]))
        nn = int(neighbor_idx[base, rng.integers(k)])
        u = rng.uniform()
        synthetic[i] = minority_rows[base] + u * (minority_rows[nn]
                                                 - minority_rows[base])

    rows = np.vstack([data.rows, synthetic])
    labels = np.concatenate([data.labels,
                             np.full(n_needed, minority, dtype=np.int64)])
    return LabeledMatrix(rows=rows, labels=labels)
