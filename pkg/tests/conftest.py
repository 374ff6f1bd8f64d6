import numpy as np
import pytest

from winspeech.audio import AudioBuffer

SR = 16000


def sine(freq, duration=1.0, amplitude=0.5, sr=SR):
    t = np.arange(int(round(duration * sr))) / sr
    return AudioBuffer(samples=amplitude * np.sin(2 * np.pi * freq * t),
                       sample_rate=sr)


def pitched_voice(f0_hz_contour, amplitude=0.4, n_harmonics=4, sr=SR):
    """Harmonic signal following a per-sample F0 contour."""
    phase = 2 * np.pi * np.cumsum(f0_hz_contour) / sr
    sig = np.zeros_like(phase)
    for h in range(1, n_harmonics + 1):
        sig += (0.6 ** (h - 1)) * np.sin(h * phase)
    sig *= amplitude / np.max(np.abs(sig))
    return AudioBuffer(samples=sig, sample_rate=sr)


def semitone_ramp_contour(slopes_st_per_s, episode_s=0.25, start_hz=180.0,
                          sr=SR):
    """Per-sample F0 (Hz) alternating rise/fall episodes with given slopes.

    slopes are applied as +slope, -slope, +slope, ... in semitones/second.
    """
    st = 12 * np.log2(start_hz / 27.5)
    pieces = []
    sign = 1.0
    for slope in slopes_st_per_s:
        n = int(episode_s * sr)
        seg = st + sign * slope * np.arange(n) / sr
        st = seg[-1]
        # keep the pitch inside a sensible band
        if st > 12 * np.log2(400 / 27.5) or st < 12 * np.log2(80 / 27.5):
            sign = -sign
        pieces.append(seg)
        sign = -sign
    st_contour = np.concatenate(pieces)
    return 27.5 * 2 ** (st_contour / 12)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# features deliberately manipulated between the two classes of the
# synthetic corpus: pitch rising-slope dynamics and overall level
PLANTED_FEATURES = ("F0_meanRisingSlope", "F0_stddevRisingSlope",
                    "F0_meanFallingSlope", "F0_stddevFallingSlope",
                    "equivalentLevel_dBp")


def synth_recording(rng, win: bool, sr=SR):
    """One synthetic 'interview': bursts of a pitched voice with class-
    dependent pitch slope variability and amplitude, padded with silence."""
    if win:
        amplitude = rng.uniform(0.45, 0.6)
        slopes = rng.uniform(5.0, 22.0, size=6)
    else:
        amplitude = rng.uniform(0.10, 0.16)
        slopes = rng.uniform(0.4, 1.6, size=6)
    silence = rng.normal(0, 1e-5, int(0.35 * sr))
    parts = [silence]
    for _ in range(2):
        contour = semitone_ramp_contour(
            slopes + rng.normal(0, 0.1, slopes.size),
            episode_s=rng.uniform(0.18, 0.25),
            start_hz=rng.uniform(140, 220))
        parts.append(pitched_voice(contour, amplitude=amplitude).samples)
        parts.append(rng.normal(0, 1e-5, int(0.45 * sr)))
    return AudioBuffer(samples=np.clip(np.concatenate(parts), -1, 1),
                       sample_rate=sr)


def build_corpus(out_dir, n_recordings, seed=0, n_speakers=None,
                 win_fraction=0.8):
    """Write WAVs and a JSONL manifest; returns the manifest path."""
    import json

    from winspeech.audio import save_wav

    rng = np.random.default_rng(seed)
    n_speakers = n_speakers or max(3, n_recordings // 3)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "manifest.jsonl"
    with open(manifest_path, "w") as fh:
        for i in range(n_recordings):
            win = rng.random() < win_fraction
            buf = synth_recording(rng, win)
            wav_path = out_dir / f"rec{i:03d}.wav"
            save_wav(wav_path, buf)
            fh.write(json.dumps({
                "recording_id": f"rec{i:03d}",
                "audio_path": str(wav_path),
                "label": "win" if win else "lose",
                "speaker_id": f"spk{i % n_speakers:03d}",
            }) + "\n")
    return manifest_path
