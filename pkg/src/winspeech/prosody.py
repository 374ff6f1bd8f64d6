"""Acoustic-prosodic feature extraction.

Produces an 88-dimensional feature vector per speech segment from
frame-level descriptors (pitch, energy, spectral shape, MFCCs) and a fixed
set of functionals. The schema is artifact-defined but contains the pitch
slope statistics and the equivalent sound level that the downstream
analysis depends on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import AudioBuffer, FrameSequence, frame_signal
from .dsp import (ENERGY_FLOOR_DB, _hamming_spectrum, alpha_ratio_db,
                  autocorrelation, band_slope, frame_energy_db, mfcc,
                  spectral_centroid)
from .errors import DataError, NumericError
from .segmenter import noise_floor_db

F0_MIN = 55.0
F0_MAX = 550.0
F0_REFERENCE = 27.5  # semitone origin
CLARITY_THRESHOLD = 0.45
MIN_SEGMENT_SECONDS = 0.1


@dataclass(frozen=True)
class PitchContour:
    """Per-frame F0 track; 0 Hz marks an unvoiced frame."""

    f0_hz: np.ndarray
    f0_semitones: np.ndarray  # 0 where unvoiced
    hop: float

    @property
    def voiced(self) -> np.ndarray:
        return self.f0_hz > 0


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    schema: tuple[str, ...]

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.schema.index(name)])


def hz_to_semitones(f0_hz: np.ndarray) -> np.ndarray:
    return 12.0 * np.log2(np.maximum(f0_hz, 1e-9) / F0_REFERENCE)


def _median3(values: np.ndarray) -> np.ndarray:
    out = values.copy()
    for i in range(1, values.size - 1):
        out[i] = np.median(values[i - 1:i + 2])
    return out


def estimate_f0(frames: FrameSequence) -> PitchContour:
    """Pitch by normalized autocorrelation with parabolic refinement.

    Frames with a peak clarity below 0.45 or energy at/below the noise
    floor are marked unvoiced; a width-3 median filter smooths each voiced
    run.
    """
    hop = frames.hop_seconds
    n = frames.n_frames
    if n == 0:
        z = np.zeros(0)
        return PitchContour(f0_hz=z, f0_semitones=z.copy(), hop=hop)

    sr = frames.sample_rate
    width = frames.frame_len
    tau_min = int(np.floor(sr / F0_MAX))
    tau_max = int(np.ceil(sr / F0_MIN))
    if tau_max + 1 >= width:
        raise DataError("frame too short for the pitch search range")

    x = frames.frames - frames.frames.mean(axis=1, keepdims=True)
    acf = autocorrelation(x, tau_max + 1)
    csum = np.cumsum(x ** 2, axis=1)
    total = csum[:, -1]

    taus = np.arange(tau_min - 1, tau_max + 2)
    e_head = csum[:, width - taus - 1]
    e_tail = total[:, None] - csum[:, taus - 1]
    denom = np.sqrt(np.maximum(e_head * e_tail, 1e-30))
    ncc = acf[:, taus] / denom  # (n, len(taus)); column j is lag taus[j]

    energy = frame_energy_db(frames)
    floor = max(noise_floor_db(frames), ENERGY_FLOOR_DB)

    f0 = np.zeros(n)
    # lags eligible as peaks exclude the interpolation margin columns
    lo, hi = 1, len(taus) - 1
    for i in range(n):
        row = ncc[i]
        seg = row[lo:hi]
        clarity = float(seg.max())
        if clarity < CLARITY_THRESHOLD or energy[i] < floor - 1e-9:
            continue
        # local maxima; prefer the shortest lag within 0.01 of the best peak
        is_peak = (seg >= row[lo - 1:hi - 1]) & (seg >= row[lo + 1:hi + 1])
        candidates = np.nonzero(is_peak & (seg >= clarity - 0.01))[0]
        j = (candidates[0] if candidates.size else int(seg.argmax())) + lo
        y0, y1, y2 = row[j - 1], row[j], row[j + 1]
        curvature = y0 - 2 * y1 + y2
        shift = 0.0 if curvature >= 0 else 0.5 * (y0 - y2) / curvature
        tau = taus[j] + float(np.clip(shift, -1.0, 1.0))
        f0[i] = float(np.clip(sr / tau, F0_MIN, F0_MAX))

    # median smoothing within each voiced run
    voiced = f0 > 0
    edges = np.flatnonzero(np.diff(np.concatenate([[0], voiced.view(np.int8), [0]])))
    for start, end in zip(edges[::2], edges[1::2]):
        f0[start:end] = _median3(f0[start:end])

    semitones = np.where(f0 > 0, hz_to_semitones(f0), 0.0)
    return PitchContour(f0_hz=f0, f0_semitones=semitones, hop=hop)


def _monotone_subruns(values: np.ndarray, rising: bool) -> list[tuple[int, int]]:
    """Maximal strictly monotone sub-runs as (start, end) index spans."""
    runs = []
    start = None
    for i in range(values.size - 1):
        step_ok = values[i + 1] > values[i] if rising else values[i + 1] < values[i]
        if step_ok:
            if start is None:
                start = i
        elif start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, values.size - 1))
    return runs


def slope_functionals(contour: PitchContour) -> tuple[float, float, float, float]:
    """Mean and population stddev of rising / falling pitch slopes (st/s)."""
    voiced = contour.voiced
    edges = np.flatnonzero(np.diff(np.concatenate([[0], voiced.view(np.int8), [0]])))
    rising_slopes: list[float] = []
    falling_slopes: list[float] = []
    for start, end in zip(edges[::2], edges[1::2]):
        run = contour.f0_semitones[start:end]
        for target, is_rising in ((rising_slopes, True), (falling_slopes, False)):
            for a, b in _monotone_subruns(run, is_rising):
                duration = (b - a) * contour.hop
                target.append((run[b] - run[a]) / duration)

    def stats(slopes: list[float]) -> tuple[float, float]:
        if not slopes:
            return 0.0, 0.0
        arr = np.asarray(slopes)
        return float(arr.mean()), float(arr.std())

    rise_mean, rise_std = stats(rising_slopes)
    fall_mean, fall_std = stats(falling_slopes)
    return rise_mean, rise_std, fall_mean, fall_std


def equivalent_sound_level(buf: AudioBuffer) -> float:
    """10*log10 of the mean squared amplitude, floored at -120 dB."""
    if buf.samples.size == 0:
        raise DataError("cannot compute a sound level on an empty buffer")
    power = float(np.mean(buf.samples ** 2))
    return max(10.0 * np.log10(max(power, 1e-30)), ENERGY_FLOOR_DB)


def compute_lld(frames: FrameSequence) -> dict[str, np.ndarray]:
    """Per-frame low-level descriptors for the functional layer."""
    spec, freqs = _hamming_spectrum(frames)
    return {
        "energy_dB": frame_energy_db(frames),
        "spectralSlope0_500": band_slope(spec, freqs, 0.0, 500.0),
        "spectralSlope500_1500": band_slope(spec, freqs, 500.0, 1500.0),
        "alphaRatio": alpha_ratio_db(spec, freqs),
        "spectralCentroid": spectral_centroid(spec, freqs),
        "mfcc": mfcc(frames, n_coeffs=4),
    }


_FUNCTIONAL_SUFFIXES = ("mean", "stddev", "pctl20", "pctl50", "pctl80",
                        "pctlRange20_80")

_LLD_NAMES = ("F0", "energy_dB", "spectralSlope0_500", "spectralSlope500_1500",
              "alphaRatio", "spectralCentroid", "mfcc1", "mfcc2", "mfcc3",
              "mfcc4")


def _build_schema() -> tuple[str, ...]:
    names = []
    for lld in _LLD_NAMES:
        names += [f"{lld}_{suffix}" for suffix in _FUNCTIONAL_SUFFIXES]
        names += [f"{lld}_deltaMean", f"{lld}_deltaStddev"]
    names += ["F0_meanRisingSlope", "F0_stddevRisingSlope",
              "F0_meanFallingSlope", "F0_stddevFallingSlope",
              "voicedFraction", "equivalentLevel_dBp",
              "voicedRunLengthMean_sec", "voicedRunLengthStddev_sec"]
    return tuple(names)


FEATURE_SCHEMA: tuple[str, ...] = _build_schema()
assert len(FEATURE_SCHEMA) == 88


def _functionals(values: np.ndarray) -> list[float]:
    if values.size == 0:
        return [0.0] * len(_FUNCTIONAL_SUFFIXES)
    p20, p50, p80 = np.percentile(values, [20, 50, 80])
    return [float(values.mean()), float(values.std()),
            float(p20), float(p50), float(p80), float(p80 - p20)]


def _delta_stats(deltas: np.ndarray) -> list[float]:
    if deltas.size == 0:
        return [0.0, 0.0]
    return [float(deltas.mean()), float(deltas.std())]


def extract_feature_vector(segment: AudioBuffer) -> FeatureVector:
    """Summarize one speech segment into the 88-value feature vector."""
    if segment.duration < MIN_SEGMENT_SECONDS:
        raise DataError(
            f"segment too short ({segment.duration:.3f} s < "
            f"{MIN_SEGMENT_SECONDS} s)")
    frames = frame_signal(segment)
    contour = estimate_f0(frames)
    lld = compute_lld(frames)
    voiced = contour.voiced

    values: list[float] = []
    for name in _LLD_NAMES:
        if name == "F0":
            track = contour.f0_semitones[voiced]
            # deltas only across adjacent voiced frames
            pair = voiced[:-1] & voiced[1:]
            deltas = (contour.f0_semitones[1:] - contour.f0_semitones[:-1])[pair]
        elif name.startswith("mfcc"):
            track = lld["mfcc"][:, int(name[4:]) - 1]
            deltas = np.diff(track)
        else:
            track = lld[name]
            deltas = np.diff(track)
        values += _functionals(track)
        values += _delta_stats(deltas)

    values += list(slope_functionals(contour))
    values.append(float(voiced.mean()) if voiced.size else 0.0)
    values.append(equivalent_sound_level(segment))

    run_lengths = []
    edges = np.flatnonzero(np.diff(np.concatenate([[0], voiced.view(np.int8), [0]])))
    for start, end in zip(edges[::2], edges[1::2]):
        run_lengths.append((end - start) * contour.hop)
    values += _delta_stats(np.asarray(run_lengths))

    out = np.asarray(values)
    if out.size != len(FEATURE_SCHEMA):
        raise AssertionError("schema/value length mismatch")
    if not np.all(np.isfinite(out)):
        bad = [FEATURE_SCHEMA[i] for i in np.nonzero(~np.isfinite(out))[0]]
        raise NumericError(f"non-finite feature values: {bad}")
    return FeatureVector(values=out, schema=FEATURE_SCHEMA)
