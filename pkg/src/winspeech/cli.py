"""Command-line surface wiring the pipeline end to end.

Subcommands: extract, features, pool, split, train, eval, explain.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import audio, dataset, embeddings, explain, model, prosody, report
from . import segmenter as seg
from . import textgrid as tg
from .config import PipelineConfig, load_config
from .errors import NumericError, WinspeechError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(self.prog + ": error: " + message) from None


def _build_parser() -> _Parser:
    parser = _Parser(prog="winspeech")
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="VAD + clustering + segment extraction")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("features", help="prosodic feature vectors per segment")
    p.add_argument("--schema", action="store_true",
                   help="print the 88 feature names and exit")
    p.add_argument("--manifest")
    p.add_argument("--segments", help="directory produced by extract")
    p.add_argument("--out")

    p = sub.add_parser("pool", help="pool precomputed frame embeddings")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output JSON-lines file")

    p = sub.add_parser("split", help="speaker-disjoint train/val/test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train the win/lose classifier")
    p.add_argument("--features", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--out", required=True, help="checkpoint JSON path")
    p.add_argument("--history", help="history CSV path (default: next to --out)")

    p = sub.add_parser("eval", help="metrics on one split")
    p.add_argument("--features", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--on", default="test", choices=dataset.SPLITS)

    p = sub.add_parser("explain", help="kernel SHAP feature attributions")
    p.add_argument("--features", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--topk", type=int)
    return parser


def _load_feature_rows(path):
    """Read feature JSONL rows into (recording_id, segment_index, label, values)."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        obj = json.loads(line)
        rows.append((obj["recording_id"], obj["segment_index"], obj["label"],
                     np.asarray(obj["values"], dtype=np.float64)))
    if not rows:
        raise WinspeechError(f"no feature rows in {path}")
    dims = {r[3].size for r in rows}
    if len(dims) != 1:
        raise WinspeechError(f"inconsistent feature dims in {path}: {sorted(dims)}")
    return rows


def _split_matrices(rows, assignment):
    out = {}
    for name in dataset.SPLITS:
        sel = [r for r in rows if assignment.get(r[0]) == name]
        if not sel:
            raise WinspeechError(f"split {name!r} has no feature rows")
        out[name] = dataset.LabeledMatrix(
            rows=np.stack([r[3] for r in sel]),
            labels=np.array([dataset.LABELS.index(r[2]) for r in sel]))
    return out


def _normalize(matrix, mean, std):
    return dataset.LabeledMatrix(rows=(matrix.rows - mean) / std,
                                 labels=matrix.labels)


def cmd_extract(args, cfg: PipelineConfig) -> int:
    manifest = dataset.load_manifest(args.manifest)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    vad_cfg = seg.VadConfig(margin_db=cfg.vad_margin_db,
                            min_speech=cfg.vad_min_speech,
                            min_gap=cfg.vad_min_gap)
    report_rows = []
    failures = 0
    for rec in manifest.records:
        try:
            report_rows.append(
                _extract_one(rec, out_dir, vad_cfg, cfg.n_speakers))
        except (WinspeechError, FileNotFoundError, ValueError) as exc:
            print(f"extract: {rec.recording_id}: {exc}", file=sys.stderr)
            report_rows.append({"recording_id": rec.recording_id,
                                "status": "error", "error": str(exc)})
            failures += 1
    with open(out_dir / "extract_report.jsonl", "w") as fh:
        for row in report_rows:
            fh.write(json.dumps(row) + "\n")
    return 2 if failures == len(manifest.records) else 0


def _extract_one(rec, out_dir, vad_cfg, n_speakers):
    buf = audio.to_canonical(audio.load_wav(rec.audio_path))
    if rec.turns:
        turns = [seg.Turn(interval=seg.Interval(float(t[0]), float(t[1])),
                          speaker=int(t[2])) for t in rec.turns]
        speech = [t.interval for t in turns]
    else:
        speech = seg.detect_voice_activity(buf, vad_cfg)
        turns = seg.cluster_speakers(buf, speech, n_speakers)
    if not turns:
        return {"recording_id": rec.recording_id, "status": "no speech"}

    athlete = seg.select_athlete(turns)
    segments = seg.extract_segments(buf, turns, athlete)
    for i, segment in enumerate(segments):
        audio.save_wav(out_dir / f"{rec.recording_id}_seg{i}.wav", segment)

    tiers = tg.TierSet(xmin=0.0, xmax=buf.duration, tiers=[
        tg.Tier("speakers", [tg.Interval(t.interval.start, t.interval.end,
                                         f"speaker{t.speaker}")
                             for t in turns]),
        tg.Tier("vad", [tg.Interval(iv.start, iv.end, "speech")
                        for iv in speech]),
        tg.Tier("overlap", []),
        tg.Tier("transcript", []),
    ])
    (out_dir / f"{rec.recording_id}.TextGrid").write_text(
        tg.serialize_textgrid(tiers))

    durations = {}
    for t in turns:
        durations[t.speaker] = durations.get(t.speaker, 0.0) + t.interval.duration
    return {
        "recording_id": rec.recording_id, "status": "ok",
        "athlete_cluster": athlete, "n_turns": len(turns),
        "n_segments": len(segments),
        "total_durations": {str(k): round(v, 6)
                            for k, v in sorted(durations.items())},
    }


def cmd_features(args, cfg: PipelineConfig) -> int:
    if args.schema:
        for name in prosody.FEATURE_SCHEMA:
            print(name)
        return 0
    if not (args.manifest and args.segments and args.out):
        raise SystemExit("winspeech features: error: --manifest, --segments "
                         "and --out are required (or use --schema)")
    manifest = dataset.load_manifest(args.manifest)
    seg_dir = Path(args.segments)
    rows = []
    for rec in manifest.records:
        for i, path in enumerate(sorted(
                seg_dir.glob(f"{rec.recording_id}_seg*.wav"),
                key=lambda p: int(p.stem.rsplit("seg", 1)[1]))):
            fv = prosody.extract_feature_vector(audio.load_wav(path))
            rows.append({"recording_id": rec.recording_id, "segment_index": i,
                         "label": rec.label, "values": fv.values.tolist()})
    with open(args.out, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return 0


def cmd_pool(args, cfg: PipelineConfig) -> int:
    manifest = dataset.load_manifest(args.manifest)
    out_path = Path(args.out)
    binary_dir = out_path.parent / "pooled"
    binary_dir.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w") as fh:
        for rec in manifest.records:
            if not rec.embedding_paths:
                raise WinspeechError(
                    f"{rec.recording_id}: manifest has no embedding_paths")
            pooled = [embeddings.pool_mean(embeddings.load_embedding_file(p))
                      for p in rec.embedding_paths]
            vec = embeddings.aggregate_recording(pooled)
            embeddings.save_embedding_file(
                binary_dir / f"{rec.recording_id}.f32", vec[None, :],
                source_tag="pooled")
            fh.write(json.dumps({
                "recording_id": rec.recording_id, "segment_index": 0,
                "label": rec.label, "values": vec.tolist()}) + "\n")
    return 0


def cmd_split(args, cfg: PipelineConfig) -> int:
    manifest = dataset.load_manifest(args.manifest)
    assignment = dataset.split_speakers(manifest, cfg.split_ratios,
                                        seed=cfg.stage_seed("split"))
    dataset.save_split(args.out, assignment)
    return 0


def cmd_train(args, cfg: PipelineConfig) -> int:
    rows = _load_feature_rows(args.features)
    matrices = _split_matrices(rows, dataset.load_split(args.split))

    mean = matrices["train"].rows.mean(axis=0)
    std = matrices["train"].rows.std(axis=0)
    std[std == 0] = 1.0
    train_m = _normalize(matrices["train"], mean, std)
    val_m = _normalize(matrices["validation"], mean, std)
    train_m = dataset.smote_balance(train_m, k=cfg.smote_k,
                                    seed=cfg.stage_seed("smote"))

    train_cfg = model.TrainConfig(
        epochs=cfg.epochs, batch_size=cfg.batch_size, lr=cfg.lr,
        lr_step=cfg.lr_step, lr_gamma=cfg.lr_gamma, dropout=cfg.dropout,
        leaky_slope=cfg.leaky_slope, seed=cfg.stage_seed("train"))
    params, history = model.train(train_m, val_m, train_cfg)
    params.norm_mean = mean
    params.norm_std = std
    model.save_checkpoint(params, args.out)

    history_path = args.history or str(Path(args.out).with_suffix("")) + "_history.csv"
    with open(history_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "lr", "train_loss", "val_loss", "val_acc"])
        for h in history:
            writer.writerow([h["epoch"], f"{h['lr']:.10g}",
                             f"{h['train_loss']:.6f}", f"{h['val_loss']:.6f}",
                             f"{h['val_acc']:.6f}"])
    if cfg.figures:
        report.render_training_curves(
            history, str(Path(history_path).with_suffix("")) + ".png")
    return 0


def _normalized_split(args):
    rows = _load_feature_rows(args.features)
    matrices = _split_matrices(rows, dataset.load_split(args.split))
    params = model.load_checkpoint(args.model)
    if params.norm_mean is None or params.norm_std is None:
        raise WinspeechError("checkpoint lacks normalization statistics")
    if matrices["train"].rows.shape[1] != params.input_dim:
        raise WinspeechError(
            f"feature dim {matrices['train'].rows.shape[1]} does not match "
            f"model input dim {params.input_dim}")
    return ({name: _normalize(m, params.norm_mean, params.norm_std)
             for name, m in matrices.items()}, params)


def cmd_eval(args, cfg: PipelineConfig) -> int:
    matrices, params = _normalized_split(args)
    metrics = model.evaluate(params, matrices[args.on])
    pct = metrics.as_percentages()
    print(f"ACC {pct['ACC']:.1f}  PRC {pct['PRC']:.1f}  "
          f"RCL {pct['RCL']:.1f}  F1 {pct['F1']:.1f}")
    return 0


def cmd_explain(args, cfg: PipelineConfig) -> int:
    matrices, params = _normalized_split(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    train_rows = matrices["train"].rows
    rng = np.random.default_rng(cfg.stage_seed("background"))
    n_bg = min(cfg.shap_background, train_rows.shape[0])
    background = train_rows[rng.choice(train_rows.shape[0], size=n_bg,
                                       replace=False)]
    fn = explain.win_probability_fn(params)

    results = []
    test = matrices["test"]
    with open(out_dir / "attributions.jsonl", "w") as fh:
        for i in range(test.rows.shape[0]):
            res = explain.shap_kernel(fn, test.rows[i], background,
                                      n_samples=cfg.shap_samples,
                                      seed=cfg.stage_seed("shap") + i)
            results.append(res)
            fh.write(json.dumps({
                "instance": i, "base_value": res.base_value,
                "attributions": res.attributions[0].tolist()}) + "\n")

    schema = (prosody.FEATURE_SCHEMA if test.rows.shape[1] == 88
              else tuple(f"dim{i}" for i in range(test.rows.shape[1])))
    ranked = explain.shap_summary(results, schema, top_k=args.topk or cfg.topk)
    with open(out_dir / "shap_summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "feature_name", "mean_abs_shap"])
        for rank, (name, value) in enumerate(ranked, start=1):
            writer.writerow([rank, name, f"{value:.8f}"])
    if cfg.figures:
        report.render_shap_summary(ranked, out_dir / "shap_summary.png")
    return 0


_COMMANDS = {"extract": cmd_extract, "features": cmd_features,
             "pool": cmd_pool, "split": cmd_split, "train": cmd_train,
             "eval": cmd_eval, "explain": cmd_explain}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args.config, args.set)
        return _COMMANDS[args.command](args, cfg)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return 1
        return exc.code or 0
    except NumericError as exc:
        print(f"winspeech: numeric failure: {exc}", file=sys.stderr)
        return 3
    except (WinspeechError, FileNotFoundError) as exc:
        print(f"winspeech: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
