"""Acceptance gate: one test per release criterion.

Each test prints a single `[ACCEPTANCE] criterion NN PASS|FAIL - ...` line
(run pytest with `-s` to see them inline; they also appear in captured
output). Tolerances are pinned here and must not be loosened.
"""

import io
import contextlib
import json
import time
import types

import numpy as np
import pytest

from winspeech.audio import frame_signal
from winspeech.cli import main
from winspeech.dataset import (LabeledMatrix, Manifest, ManifestRecord,
                               smote_balance, split_speakers)
from winspeech.embeddings import load_embedding_file, save_embedding_file
from winspeech.explain import shap_exact, shap_kernel, win_probability_fn
from winspeech.model import (AdamState, TrainConfig, forward, init_model,
                             load_checkpoint, loss_and_grads, lr_at_epoch,
                             save_checkpoint, train)
from winspeech.prosody import (compute_lld, equivalent_sound_level,
                               estimate_f0, slope_functionals)
from winspeech.textgrid import parse_textgrid, serialize_textgrid

from conftest import PLANTED_FEATURES, build_corpus, sine
from test_model import _metrics_from_predictions, tiny_data
from test_prosody import HOP_S, brute_force_slopes, contour_from_semitones
from test_textgrid import assert_tiersets_equal, random_tierset


def _check(criterion: int, description: str, ok: bool) -> None:
    status = "PASS" if ok else "FAIL"
    print(f"[ACCEPTANCE] criterion {criterion:2d} {status} - {description}")
    assert ok, f"criterion {criterion} failed: {description}"


def test_criterion_01_dsp_oracles():
    start = time.perf_counter()
    c220 = estimate_f0(frame_signal(sine(220, 1.0, 0.5)))
    f0_ok = (c220.voiced.any()
             and np.abs(c220.f0_hz[c220.voiced] - 220).max() <= 1.0)

    c55 = estimate_f0(frame_signal(sine(55, 1.0, 0.5)))
    st_ok = (c55.voiced.any()
             and np.abs(c55.f0_semitones[c55.voiced] - 12).max() <= 0.1)

    level = equivalent_sound_level(sine(100, 1.0, 0.5))
    level_ok = abs(level - 10 * np.log10(0.125)) <= 0.01

    lld = compute_lld(frame_signal(sine(1000, 0.5, 0.5)))
    centroid_ok = np.abs(lld["spectralCentroid"] - 1000).max() <= 20

    elapsed = time.perf_counter() - start
    _check(1, "DSP oracles (F0, semitones, Leq, centroid) in < 5 s",
           f0_ok and st_ok and level_ok and centroid_ok and elapsed < 5)


def test_criterion_02_slope_functionals():
    up1 = 30 + 0.10 * np.arange(11)            # 10 st/s over 0.1 s
    down = up1[-1] - 0.30 * np.arange(1, 8)
    up2 = down[-1] + 0.20 * np.arange(1, 11)   # 20 st/s
    st = np.concatenate([up1, down, up2])
    contour = contour_from_semitones(st, [True] * st.size, HOP_S)
    rise_mean, rise_std, _, _ = slope_functionals(contour)
    oracle_ok = abs(rise_mean - 15.0) <= 1e-6 and abs(rise_std - 5.0) <= 1e-6

    rng = np.random.default_rng(7)
    brute_ok = True
    for _ in range(1000):
        n = int(rng.integers(1, 60))
        voiced = rng.random(n) < 0.7
        vals = rng.normal(30, 4, n)
        got = slope_functionals(contour_from_semitones(vals, voiced))
        want = brute_force_slopes(np.where(voiced, vals, 0.0), voiced, HOP_S)
        if not np.allclose(got, want, atol=1e-9):
            brute_ok = False
            break
    _check(2, "slope functionals: constructed oracle + 1000 brute-force "
              "contours", oracle_ok and brute_ok)


def test_criterion_03_gradient_check():
    start = time.perf_counter()
    rng = np.random.default_rng(42)
    d = 7
    params = init_model(d, seed=4)
    params.dropout = 0.0
    x = rng.normal(size=(12, d))
    y = rng.integers(0, 2, 12)
    _, grads = loss_and_grads(params, x, y, dropout_rng=None,
                              update_running=False)
    groups = {"weights": params.weights, "biases": params.biases,
              "bn_gamma": params.bn_gamma, "bn_beta": params.bn_beta}
    eps = 1e-6
    ok = True
    for _ in range(10):
        group = list(groups)[int(rng.integers(4))]
        tensors = groups[group]
        i = int(rng.integers(len(tensors)))
        idx = tuple(int(rng.integers(s)) for s in tensors[i].shape)
        orig = tensors[i][idx]
        tensors[i][idx] = orig + eps
        lp, _ = loss_and_grads(params, x, y, dropout_rng=None,
                               update_running=False)
        tensors[i][idx] = orig - eps
        lm, _ = loss_and_grads(params, x, y, dropout_rng=None,
                               update_running=False)
        tensors[i][idx] = orig
        numeric = (lp - lm) / (2 * eps)
        analytic = grads[group][i][idx]
        # the 1e-6 floor guards coordinates whose true gradient is exactly
        # zero (hidden biases are cancelled by batch-norm centering)
        rel = abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-6)
        if rel >= 1e-4:
            ok = False
            break
    elapsed = time.perf_counter() - start
    _check(3, "MLP analytic vs central-difference gradients, rel err < 1e-4 "
              "in < 30 s", ok and elapsed < 30)


def test_criterion_04_optimizer_and_scheduler():
    cfg = TrainConfig()
    schedule_ok = all(lr_at_epoch(cfg, e) == 1e-3 * 0.5 ** (e // 5)
                      for e in range(50))

    params = init_model(4, seed=5)
    before = [w.copy() for w in params.weights]
    adam = AdamState(cfg)
    zero = {"weights": [np.zeros_like(w) for w in params.weights],
            "biases": [np.zeros_like(b) for b in params.biases],
            "bn_gamma": [np.zeros_like(g) for g in params.bn_gamma],
            "bn_beta": [np.zeros_like(b) for b in params.bn_beta]}
    for _ in range(3):
        adam.update(params, zero, lr=1e-3)
    fixed_point_ok = all(np.array_equal(w0, w1)
                         for w0, w1 in zip(before, params.weights))

    fake = types.SimpleNamespace(weights=[np.array([[0.0]])], biases=[],
                                 bn_gamma=[], bn_beta=[])
    adam = AdamState(cfg)
    for _ in range(8000):
        g = 2 * (fake.weights[0] - 3.0)
        adam.update(fake, {"weights": [g], "biases": [],
                           "bn_gamma": [], "bn_beta": []}, lr=1e-3)
    quadratic_ok = abs(fake.weights[0][0, 0] - 3.0) < 1e-2
    _check(4, "lr schedule exact on [0,50), Adam zero-gradient fixed point, "
              "quadratic -> 3 +/- 0.01",
           schedule_ok and fixed_point_ok and quadratic_ok)


def test_criterion_05_smote():
    rng = np.random.default_rng(3)
    rows = rng.normal(size=(100, 6))
    labels = np.array([1] * 80 + [0] * 20)
    data = LabeledMatrix(rows=rows, labels=labels)
    out = smote_balance(data, seed=9)

    counts = np.bincount(out.labels, minlength=2)
    size_ok = out.rows.shape[0] == 160 and counts[0] == counts[1] == 80
    originals_ok = (np.array_equal(out.rows[:100], rows)
                    and np.array_equal(out.labels[:100], labels))

    minority = rows[labels == 0]
    colinear_ok = True
    for s in out.rows[100:]:
        found = False
        for a in minority:
            for b in minority:
                ab = b - a
                denom = ab @ ab
                if denom == 0:
                    continue
                u = (s - a) @ ab / denom
                if -1e-9 <= u <= 1 + 1e-9 and \
                        np.linalg.norm(s - a - u * ab) < 1e-9:
                    found = True
                    break
            if found:
                break
        if not found:
            colinear_ok = False
            break
    _check(5, "SMOTE 80/20 -> 160 balanced, synthetic points colinear "
              "within 1e-9, originals untouched",
           size_ok and originals_ok and colinear_ok)


def test_criterion_06_speaker_disjoint_split():
    rng = np.random.default_rng(11)
    records = []
    speaker_of = {}
    for i in range(359):
        spk = f"spk{int(rng.integers(72)):03d}"
        rid = f"rec{i:04d}"
        speaker_of[rid] = spk
        records.append(ManifestRecord(recording_id=rid, audio_path="",
                                      label="win" if rng.random() < 0.8
                                      else "lose", speaker_id=spk))
    assignment = split_speakers(Manifest(records=records), seed=1)

    splits_of_speaker = {}
    for rid, split in assignment.items():
        splits_of_speaker.setdefault(speaker_of[rid], set()).add(split)
    disjoint_ok = all(len(s) == 1 for s in splits_of_speaker.values())

    fractions = {s: sum(1 for v in assignment.values() if v == s) / 359
                 for s in ("train", "validation", "test")}
    frac_ok = (abs(fractions["train"] - 0.70) <= 0.05
               and abs(fractions["validation"] - 0.20) <= 0.05
               and abs(fractions["test"] - 0.10) <= 0.05)
    _check(6, "72-speaker/359-recording split: zero overlap, fractions "
              "within 5 points of 70/20/10", disjoint_ok and frac_ok)


def test_criterion_07_shap():
    rng = np.random.default_rng(21)

    # kernel vs exact on a trained d=8 network, probability scale
    d = 8
    w_true = rng.normal(size=d)
    x_tr = rng.normal(size=(200, d))
    y_tr = (x_tr @ w_true > 0).astype(np.int64)
    cfg = TrainConfig(epochs=5, seed=13)
    params, _ = train(LabeledMatrix(rows=x_tr, labels=y_tr),
                      LabeledMatrix(rows=x_tr[:40], labels=y_tr[:40]), cfg)
    fn = win_probability_fn(params)
    x = rng.normal(size=d)
    bg = rng.normal(size=(30, d))
    exact = shap_exact(fn, x, bg)
    kernel = shap_kernel(fn, x, bg, n_samples=2048, seed=1)
    mlp_ok = np.abs(kernel.attributions - exact.attributions).max() < 0.01

    w = np.array([1.0, -2.0, 0.5, 3.0, 0.25])
    lin = lambda rows: rows @ w + 0.3
    xl = rng.normal(size=5)
    bgl = rng.normal(size=(25, 5))
    res = shap_kernel(lin, xl, bgl, n_samples=512, seed=2)
    closed = w * (xl - bgl.mean(axis=0))
    linear_ok = np.abs(res.attributions[0] - closed).max() < 1e-6
    additivity_ok = abs(res.base_value + res.attributions.sum()
                        - lin(xl[None, :])[0]) < 1e-6

    sym_fn = lambda rows: np.sin(rows[:, 0]) + np.sin(rows[:, 1]) + rows[:, 2]
    xs = np.array([0.8, 0.8, -0.3])
    bgs = rng.normal(size=(12, 3))
    bgs[:, 1] = bgs[:, 0]
    sym = shap_exact(sym_fn, xs, bgs)
    symmetry_ok = abs(sym.attributions[0, 0] - sym.attributions[0, 1]) < 1e-9

    dummy_fn = lambda rows: rows[:, 0] ** 2
    dummy = shap_exact(dummy_fn, rng.normal(size=2), rng.normal(size=(15, 2)))
    dummy_ok = abs(dummy.attributions[0, 1]) < 1e-9

    _check(7, "kernel vs exact SHAP < 0.01, linear closed form 1e-6, "
              "additivity 1e-6, symmetry/dummy 1e-9",
           mlp_ok and linear_ok and additivity_ok and symmetry_ok and dummy_ok)


def test_criterion_08_metrics_oracle():
    m = _metrics_from_predictions(np.array([1, 1, 0, 0]),
                                  np.array([1, 0, 0, 0]))
    pct = m.as_percentages()
    ok = (abs(pct["ACC"] - 75.0) <= 0.01 and abs(pct["PRC"] - 83.33) <= 0.01
          and abs(pct["RCL"] - 75.0) <= 0.01
          and abs(pct["F1"] - 73.33) <= 0.01)
    _check(8, "metrics oracle ACC 75.0 / PRC 83.33 / RCL 75.0 / F1 73.33",
           ok)


def test_criterion_09_end_to_end(tmp_path):
    start = time.perf_counter()
    manifest = build_corpus(tmp_path / "audio", 200, seed=7, n_speakers=72)

    seg = tmp_path / "segments"
    feat = tmp_path / "features.jsonl"
    split = tmp_path / "split.jsonl"
    model = tmp_path / "model.json"
    shap_dir = tmp_path / "shap"
    assert main(["extract", "--manifest", str(manifest),
                 "--out", str(seg)]) == 0
    assert main(["features", "--manifest", str(manifest),
                 "--segments", str(seg), "--out", str(feat)]) == 0
    assert main(["split", "--manifest", str(manifest),
                 "--out", str(split)]) == 0
    assert main(["train", "--features", str(feat), "--split", str(split),
                 "--out", str(model)]) == 0

    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        assert main(["eval", "--features", str(feat), "--split", str(split),
                     "--model", str(model), "--on", "test"]) == 0
    accuracy = float(buf.getvalue().split()[1])

    assert main(["explain", "--features", str(feat), "--split", str(split),
                 "--model", str(model), "--out-dir", str(shap_dir),
                 "--topk", "5"]) == 0
    top5 = [line.split(",")[1] for line in
            (shap_dir / "shap_summary.csv").read_text().splitlines()[1:]]
    planted_in_top5 = sum(1 for name in top5 if name in PLANTED_FEATURES)
    elapsed = time.perf_counter() - start
    _check(9, f"end-to-end 200 recordings: test ACC {accuracy:.1f} >= 90, "
              f"{planted_in_top5} planted features in SHAP top 5, "
              f"{elapsed:.0f} s < 600 s",
           accuracy >= 90.0 and planted_in_top5 >= 2 and elapsed < 600)


def test_criterion_10_formats(tmp_path):
    rng = np.random.default_rng(77)
    textgrid_ok = True
    for _ in range(100):
        ts = random_tierset(rng)
        text = serialize_textgrid(ts)
        back = parse_textgrid(text)
        try:
            assert_tiersets_equal(ts, back, tol=1e-6)
        except AssertionError:
            textgrid_ok = False
            break
        # serialized form is a fixed point, so the round trip is lossless
        if serialize_textgrid(back) != text:
            textgrid_ok = False
            break

    matrix = rng.normal(size=(40, 32)).astype("<f4")
    emb_path = tmp_path / "emb.f32"
    save_embedding_file(emb_path, matrix, source_tag="t")
    loaded = load_embedding_file(emb_path)
    embedding_ok = loaded.matrix.tobytes() == matrix.tobytes()

    params = init_model(12, seed=6)
    params.norm_mean = rng.normal(size=12)
    params.norm_std = np.abs(rng.normal(size=12)) + 0.1
    ckpt = tmp_path / "model.json"
    save_checkpoint(params, ckpt)
    restored = load_checkpoint(ckpt)
    ref = init_model(12, seed=6)
    for group in ("weights", "biases", "bn_gamma", "bn_beta",
                  "bn_mean", "bn_var"):
        setattr(ref, group, [t.astype(np.float32).astype(np.float64)
                             for t in getattr(params, group)])
    x = rng.normal(size=(6, 12))
    checkpoint_ok = np.array_equal(forward(restored, x), forward(ref, x))

    _check(10, "TextGrid round trip x100, embedding binary bit-exact, "
               "checkpoint forward bit-exact at 32-bit",
           textgrid_ok and embedding_ok and checkpoint_ok)
