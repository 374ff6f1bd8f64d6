"""Ingestion and pooling of precomputed frame-level speech representations.

The binary format is raw little-endian float32, row-major, with a JSON
sidecar describing the shape: {"dim": int, "count": int, "dtype": "f32le",
"source_tag": str}. Model inference itself happens outside this package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class EmbeddingSequence:
    matrix: np.ndarray  # (n_frames, dim) float32
    source_tag: str

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def n_frames(self) -> int:
        return self.matrix.shape[0]


def sidecar_path(data_path) -> Path:
    return Path(str(data_path) + ".json")


def load_embedding_file(data_path, header_path=None) -> EmbeddingSequence:
    data_path = Path(data_path)
    header_path = Path(header_path) if header_path else sidecar_path(data_path)
    if not header_path.is_file():
        raise DataError(f"missing embedding sidecar: {header_path}")
    header = json.loads(header_path.read_text())
    for key in ("dim", "count", "dtype"):
        if key not in header:
            raise DataError(f"sidecar missing field {key!r}: {header_path}")
    if header["dtype"] != "f32le":
        raise DataError(f"unsupported embedding dtype {header['dtype']!r}")
    dim, count = int(header["dim"]), int(header["count"])
    if dim < 1 or count < 1:
        raise DataError(f"invalid embedding shape {count}x{dim}")

    raw = data_path.read_bytes()
    expected = 4 * count * dim
    if len(raw) != expected:
        raise DataError(
            f"embedding size mismatch: {len(raw)} bytes, expected {expected} "
            f"({count}x{dim} f32): {data_path}")
    matrix = np.frombuffer(raw, dtype="<f4").reshape(count, dim)
    if not np.all(np.isfinite(matrix)):
        raise DataError(f"non-finite embedding values: {data_path}")
    return EmbeddingSequence(matrix=matrix, source_tag=header.get("source_tag", ""))


def save_embedding_file(data_path, matrix: np.ndarray, source_tag: str = "") -> None:
    matrix = np.ascontiguousarray(np.atleast_2d(matrix), dtype="<f4")
    data_path = Path(data_path)
    data_path.write_bytes(matrix.tobytes())
    sidecar_path(data_path).write_text(json.dumps({
        "dim": matrix.shape[1], "count": matrix.shape[0],
        "dtype": "f32le", "source_tag": source_tag,
    }))


def pool_mean(seq: EmbeddingSequence) -> np.ndarray:
    """Element-wise mean over frames (one vector per segment)."""
    if seq.n_frames < 1:
        raise DataError("cannot pool an empty embedding sequence")
    return seq.matrix.astype(np.float64).mean(axis=0)


def aggregate_recording(segments: list[np.ndarray]) -> np.ndarray:
    """Unweighted mean over segment vectors (one vector per recording)."""
    if not segments:
        raise DataError("cannot aggregate zero segments")
    dims = {np.asarray(s).shape for s in segments}
    if len(dims) != 1:
        raise DataError(f"segment embedding dims differ: {sorted(dims)}")
    stacked = np.stack([np.asarray(s, dtype=np.float64) for s in segments])
    if np.all(stacked == stacked[0]):
        # identical segments: keep the mean exact instead of k*v/k rounding
        return stacked[0].copy()
    return stacked.mean(axis=0)
