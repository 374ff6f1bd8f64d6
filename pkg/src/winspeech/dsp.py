"""Frame-level DSP shared by the VAD, clustering, and feature extraction."""

from __future__ import annotations

import numpy as np
from scipy.fft import dct, irfft, rfft, rfftfreq

ENERGY_FLOOR_DB = -120.0
LOG_EPS = 1e-10

MEL_N_FILTERS = 26
MEL_FMIN = 50.0
MEL_FMAX = 8000.0


def frame_energy_db(frames) -> np.ndarray:
    """Per-frame RMS energy in dB relative to full scale, floored at -120 dB."""
    power = np.mean(frames.frames ** 2, axis=1)
    return 10.0 * np.log10(np.maximum(power, 10.0 ** (ENERGY_FLOOR_DB / 10.0)))


def _hamming_spectrum(frames) -> tuple[np.ndarray, np.ndarray]:
    """Magnitude spectra of Hamming-windowed frames and their bin frequencies."""
    window = np.hamming(frames.frame_len)
    spec = np.abs(rfft(frames.frames * window, axis=1))
    freqs = rfftfreq(frames.frame_len, d=1.0 / frames.sample_rate)
    return spec, freqs


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(n_bins: int, sample_rate: int,
                   n_filters: int = MEL_N_FILTERS,
                   fmin: float = MEL_FMIN, fmax: float = MEL_FMAX) -> np.ndarray:
    """Triangular mel filterbank matrix (n_filters, n_bins)."""
    fmax = min(fmax, sample_rate / 2.0)
    mel_points = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_filters + 2)
    hz_points = mel_to_hz(mel_points)
    freqs = np.linspace(0.0, sample_rate / 2.0, n_bins)
    fb = np.zeros((n_filters, n_bins))
    for i in range(n_filters):
        left, center, right = hz_points[i:i + 3]
        rising = (freqs - left) / max(center - left, 1e-9)
        falling = (right - freqs) / max(right - center, 1e-9)
        fb[i] = np.clip(np.minimum(rising, falling), 0.0, None)
    return fb


def mfcc(frames, n_coeffs: int = 4) -> np.ndarray:
    """MFCC 1..n_coeffs per frame (26 mel filters, Hamming window).

    The 0th (overall energy) coefficient is dropped. An all-zero spectrum
    maps every returned coefficient to exactly 0.
    """
    spec, _ = _hamming_spectrum(frames)
    fb = mel_filterbank(spec.shape[1], frames.sample_rate)
    mel_energy = spec ** 2 @ fb.T
    log_mel = np.log(np.maximum(mel_energy, LOG_EPS))
    coeffs = dct(log_mel, type=2, norm="ortho", axis=1)
    return coeffs[:, 1:1 + n_coeffs]


def band_slope(spec: np.ndarray, freqs: np.ndarray,
               lo: float, hi: float) -> np.ndarray:
    """Linear-regression slope of log magnitude over [lo, hi] Hz, per frame."""
    mask = (freqs >= lo) & (freqs <= hi)
    x = freqs[mask]
    y = np.log10(np.maximum(spec[:, mask], LOG_EPS))
    x_c = x - x.mean()
    denom = np.sum(x_c ** 2)
    return (y @ x_c) / denom


def alpha_ratio_db(spec: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    """Energy ratio (1-5 kHz) / (50 Hz-1 kHz) in dB, per frame."""
    low = (freqs >= 50.0) & (freqs <= 1000.0)
    high = (freqs > 1000.0) & (freqs <= 5000.0)
    e_low = np.sum(spec[:, low] ** 2, axis=1)
    e_high = np.sum(spec[:, high] ** 2, axis=1)
    return 10.0 * np.log10(np.maximum(e_high, LOG_EPS)
                           / np.maximum(e_low, LOG_EPS))


def spectral_centroid(spec: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    """Magnitude-weighted mean frequency per frame (0 for silent frames)."""
    total = np.sum(spec, axis=1)
    weighted = spec @ freqs
    return np.where(total > 0, weighted / np.maximum(total, 1e-30), 0.0)


def autocorrelation(frames_matrix: np.ndarray, max_lag: int) -> np.ndarray:
    """Linear autocorrelation r[tau] = sum_t x[t] x[t+tau] via FFT, per frame."""
    n = frames_matrix.shape[1]
    fft_len = 1
    while fft_len < 2 * n:
        fft_len *= 2
    spec = rfft(frames_matrix, n=fft_len, axis=1)
    acf = irfft(spec * np.conj(spec), n=fft_len, axis=1)
    return acf[:, :max_lag + 1]
