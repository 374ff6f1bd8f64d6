"""Audio ingestion, resampling, and frame decomposition.

Everything downstream operates on the canonical format: mono, 16 kHz,
full-scale float (|sample| <= 1.0). WAV reading/writing is done with a
small RIFF parser so that missing files, malformed headers, and
unsupported codecs are reported as distinct errors.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AudioFormatError

CANONICAL_RATE = 16000
FRAME_LEN = 400  # 25 ms at 16 kHz
FRAME_HOP = 160  # 10 ms at 16 kHz


@dataclass(frozen=True)
class AudioBuffer:
    """Mono signal with its sample rate. Samples are float64 in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1:
            raise ValueError("AudioBuffer requires a 1-D sample array")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if samples.size and not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class FrameSequence:
    """Overlapping analysis frames cut from an AudioBuffer."""

    frames: np.ndarray  # (n_frames, frame_len)
    frame_len: int
    hop: int
    sample_rate: int

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def hop_seconds(self) -> float:
        return self.hop / self.sample_rate


def load_wav(path) -> AudioBuffer:
    """Read a PCM16 or float32 RIFF/WAVE file as a mono AudioBuffer.

    Stereo is downmixed by channel mean; integer PCM is scaled by 1/32768.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such audio file: {path}")
    raw = path.read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise AudioFormatError(f"not a RIFF/WAVE file: {path}")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos:pos + 4]
        (chunk_size,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8:pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise AudioFormatError(f"truncated fmt chunk: {path}")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            data = body
        pos += 8 + chunk_size + (chunk_size & 1)
    if fmt is None or data is None:
        raise AudioFormatError(f"missing fmt/data chunk: {path}")

    audio_format, n_channels, sample_rate, _, _, bits = fmt
    if n_channels not in (1, 2):
        raise AudioFormatError(f"unsupported channel count {n_channels}: {path}")
    if audio_format == 1 and bits == 16:
        samples = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    elif audio_format == 3 and bits == 32:
        samples = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise AudioFormatError(
            f"unsupported codec (format {audio_format}, {bits}-bit): {path}"
        )
    if n_channels == 2:
        if samples.size % 2:
            raise AudioFormatError(f"odd sample count for stereo data: {path}")
        samples = samples.reshape(-1, 2).mean(axis=1)
    np.clip(samples, -1.0, 1.0, out=samples)
    return AudioBuffer(samples=samples, sample_rate=int(sample_rate))


def save_wav(path, buf: AudioBuffer) -> None:
    """Write a mono 16-bit PCM WAV file."""
    pcm = np.clip(np.round(buf.samples * 32767.0), -32768, 32767).astype("<i2")
    data = pcm.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(data), b"WAVE",
        b"fmt ", 16, 1, 1, buf.sample_rate,
        buf.sample_rate * 2, 2, 16,
        b"data", len(data),
    )
    Path(path).write_bytes(header + data)


def _sinc_kernel(offsets: np.ndarray, cutoff: float, beta: float = 8.6) -> np.ndarray:
    # offsets are measured in input samples relative to the kernel center
    taps = cutoff * np.sinc(cutoff * offsets)
    arg = 1.0 - (offsets / 32.0) ** 2
    win = np.i0(beta * np.sqrt(np.clip(arg, 0.0, None))) / np.i0(beta)
    win[arg < 0] = 0.0
    return taps * win


def resample(buf: AudioBuffer, target_rate: int) -> AudioBuffer:
    """Band-limited windowed-sinc resampling (Kaiser window, 64 taps)."""
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if target_rate == buf.sample_rate:
        return buf
    n_in = buf.samples.size
    if n_in == 0:
        return AudioBuffer(samples=np.zeros(0), sample_rate=target_rate)

    ratio = buf.sample_rate / target_rate
    n_out = int(round(n_in * target_rate / buf.sample_rate))
    centers = np.arange(n_out) * ratio
    base = np.floor(centers).astype(np.int64)
    frac = centers - base

    cutoff = min(1.0, target_rate / buf.sample_rate)
    half = 32
    padded = np.concatenate([np.zeros(half), buf.samples, np.zeros(half)])
    tap_idx = np.arange(-half + 1, half + 1)
    # (n_out, 64) gather of input samples around each output position
    gather = base[:, None] + tap_idx[None, :] + half
    offsets = tap_idx[None, :] - frac[:, None]
    kernel = _sinc_kernel(offsets, cutoff)
    out = np.einsum("ij,ij->i", padded[gather], kernel)
    np.clip(out, -1.0, 1.0, out=out)
    return AudioBuffer(samples=out, sample_rate=int(target_rate))


def frame_signal(buf: AudioBuffer, frame_len: int = FRAME_LEN,
                 hop: int = FRAME_HOP) -> FrameSequence:
    """Cut the signal into frames; a trailing partial frame is dropped."""
    if frame_len < 1 or hop < 1:
        raise ValueError("frame_len and hop must be >= 1")
    n = buf.samples.size
    if n < frame_len:
        frames = np.zeros((0, frame_len))
    else:
        n_frames = (n - frame_len) // hop + 1
        idx = np.arange(frame_len)[None, :] + hop * np.arange(n_frames)[:, None]
        frames = buf.samples[idx]
    return FrameSequence(frames=frames, frame_len=frame_len, hop=hop,
                         sample_rate=buf.sample_rate)


def to_canonical(buf: AudioBuffer) -> AudioBuffer:
    """Resample to the canonical 16 kHz analysis rate."""
    return resample(buf, CANONICAL_RATE)
