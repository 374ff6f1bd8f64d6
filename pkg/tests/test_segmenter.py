import numpy as np
import pytest

from winspeech.audio import AudioBuffer
from winspeech.segmenter import (Interval, Turn, VadConfig, cluster_speakers,
                                 detect_voice_activity, extract_segments,
                                 select_athlete)

from conftest import SR, pitched_voice


def _noise_burst_buffer(rng):
    floor = rng.normal(0, 3e-5, SR)
    burst = np.clip(rng.normal(0, 0.3, SR), -1, 1)
    sig = np.concatenate([floor, burst, rng.normal(0, 3e-5, SR)])
    return AudioBuffer(samples=np.clip(sig, -1, 1), sample_rate=SR)


def _vowel(f0, duration, rng):
    t = np.arange(int(duration * SR)) / SR
    contour = np.full(t.size, float(f0))
    return pitched_voice(contour).samples


class TestVad:
    def test_silence_is_empty(self):
        buf = AudioBuffer(samples=np.zeros(SR), sample_rate=SR)
        assert detect_voice_activity(buf) == []

    def test_too_short_is_empty(self):
        buf = AudioBuffer(samples=np.zeros(100), sample_rate=SR)
        assert detect_voice_activity(buf) == []

    def test_single_burst_boundaries(self, rng):
        intervals = detect_voice_activity(_noise_burst_buffer(rng))
        assert len(intervals) == 1
        assert abs(intervals[0].start - 1.0) <= 0.05
        assert abs(intervals[0].end - 2.0) <= 0.05

    def test_gap_merge(self, rng):
        burst = np.clip(rng.normal(0, 0.3, SR // 2), -1, 1)
        gap = rng.normal(0, 3e-5, int(0.1 * SR))
        pad = rng.normal(0, 3e-5, SR)
        sig = np.concatenate([pad, burst, gap, burst, pad])
        buf = AudioBuffer(samples=np.clip(sig, -1, 1), sample_rate=SR)
        intervals = detect_voice_activity(buf, VadConfig(min_gap=0.2))
        assert len(intervals) == 1

    def test_min_speech_and_no_overlap(self, rng):
        buf = _noise_burst_buffer(rng)
        cfg = VadConfig()
        intervals = detect_voice_activity(buf, cfg)
        for iv in intervals:
            assert iv.duration >= cfg.min_speech
        for a, b in zip(intervals, intervals[1:]):
            assert a.end <= b.start

    def test_config_validation(self):
        with pytest.raises(ValueError):
            VadConfig(margin_db=-1)


class TestClusterSpeakers:
    def test_singleton(self, rng):
        buf = _noise_burst_buffer(rng)
        turns = cluster_speakers(buf, [Interval(1.0, 2.0)])
        assert turns == [Turn(interval=Interval(1.0, 2.0), speaker=0)]

    def test_empty(self, rng):
        assert cluster_speakers(_noise_burst_buffer(rng), []) == []

    def test_planted_two_sources(self, rng):
        gap = np.zeros(int(0.4 * SR))
        parts, speech, truth = [], [], []
        t = 0.0
        for i in range(6):
            v = _vowel(120 if i % 2 == 0 else 220, 0.8, rng)
            parts += [v, gap]
            speech.append(Interval(t, t + 0.8))
            truth.append(i % 2)
            t += 0.8 + 0.4
        buf = AudioBuffer(samples=np.concatenate(parts), sample_rate=SR)
        turns = cluster_speakers(buf, speech, n_speakers=2)
        labels = [turn.speaker for turn in turns]
        assert labels == truth  # first appearance renumbering makes them match

    def test_identical_intervals_one_cluster(self, rng):
        v = _vowel(150, 1.0, rng)
        sig = np.concatenate([v, np.zeros(SR), v])
        buf = AudioBuffer(samples=sig, sample_rate=SR)
        turns = cluster_speakers(buf, [Interval(0.0, 1.0), Interval(2.0, 3.0)])
        assert {turn.speaker for turn in turns} == {0}


class TestSelectAthlete:
    def test_longest_total_duration(self):
        turns = [Turn(Interval(0, 60), 0), Turn(Interval(100, 400), 1)]
        assert select_athlete(turns) == 1

    def test_single_cluster(self):
        assert select_athlete([Turn(Interval(0, 5), 3)]) == 3

    def test_tie_break_lowest_id(self):
        turns = [Turn(Interval(0, 10), 5), Turn(Interval(20, 30), 2)]
        assert select_athlete(turns) == 2

    def test_permutation_invariant(self, rng):
        turns = [Turn(Interval(i, i + rng.uniform(0.5, 3)), int(rng.integers(3)))
                 for i in range(0, 40, 4)]
        expected = select_athlete(turns)
        for _ in range(10):
            shuffled = list(turns)
            rng.shuffle(shuffled)
            assert select_athlete(shuffled) == expected

    def test_empty_is_error(self):
        with pytest.raises(ValueError):
            select_athlete([])


class TestExtractSegments:
    def test_slice_arithmetic(self):
        buf = AudioBuffer(samples=np.arange(3 * SR) / (3 * SR), sample_rate=SR)
        segs = extract_segments(buf, [Turn(Interval(1.0, 2.0), 0)], 0)
        assert len(segs) == 1
        assert segs[0].samples.size == SR
        assert np.array_equal(segs[0].samples, buf.samples[SR:2 * SR])

    def test_absent_speaker(self):
        buf = AudioBuffer(samples=np.zeros(SR), sample_rate=SR)
        assert extract_segments(buf, [Turn(Interval(0, 0.5), 0)], 7) == []

    def test_temporal_order_and_exact_duration(self):
        buf = AudioBuffer(samples=np.arange(5 * SR, dtype=float), sample_rate=SR)
        turns = [Turn(Interval(3.0, 3.5), 1), Turn(Interval(0.5, 1.0), 1),
                 Turn(Interval(2.0, 2.25), 1), Turn(Interval(1.2, 1.9), 0)]
        segs = extract_segments(buf, turns, 1)
        assert [s.samples[0] for s in segs] == [0.5 * SR, 2.0 * SR, 3.0 * SR]
        total = sum(s.samples.size for s in segs)
        expected = sum(int(round(t.interval.duration * SR))
                       for t in turns if t.speaker == 1)
        assert total == expected
