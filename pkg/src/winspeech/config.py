"""Pipeline configuration: plain-text `key = value` files plus overrides.

A single global seed fans out to per-stage seeds by fixed offsets so that
every stage is reproducible independently.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import DataError

SEED_OFFSETS = {"split": 10, "smote": 20, "train": 30, "shap": 40,
                "background": 50}


@dataclass
class PipelineConfig:
    seed: int = 0
    vad_margin_db: float = 6.0
    vad_min_speech: float = 0.25
    vad_min_gap: float = 0.20
    n_speakers: int | None = None  # None = auto dendrogram cut
    split_train: float = 0.7
    split_val: float = 0.2
    split_test: float = 0.1
    smote_k: int = 5
    epochs: int = 50
    batch_size: int = 16
    lr: float = 1e-3
    lr_step: int = 5
    lr_gamma: float = 0.5
    dropout: float = 0.3
    leaky_slope: float = 0.01
    shap_samples: int = 2048
    shap_background: int = 50
    topk: int = 10
    figures: bool = True

    def stage_seed(self, stage: str) -> int:
        return self.seed + SEED_OFFSETS[stage]

    @property
    def split_ratios(self) -> tuple[float, float, float]:
        return (self.split_train, self.split_val, self.split_test)


def _coerce(name: str, kind, raw: str):
    raw = raw.strip()
    if name == "n_speakers":
        return None if raw in ("auto", "none") else int(raw)
    if kind is bool or kind == "bool":
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise DataError(f"config key {name!r}: expected a boolean, got {raw!r}")
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError:
        raise DataError(
            f"config key {name!r}: cannot parse {raw!r} as {kind.__name__}"
        ) from None
    return raw


_FIELD_TYPES = {"seed": int, "n_speakers": int, "smote_k": int, "epochs": int,
                "batch_size": int, "lr_step": int, "shap_samples": int,
                "shap_background": int, "topk": int, "figures": bool,
                "vad_margin_db": float, "vad_min_speech": float,
                "vad_min_gap": float, "split_train": float, "split_val": float,
                "split_test": float, "lr": float, "lr_gamma": float,
                "dropout": float, "leaky_slope": float}


def load_config(path=None, overrides: list[str] | None = None) -> PipelineConfig:
    """Build a config from an optional file and `key=value` override strings."""
    known = {f.name for f in fields(PipelineConfig)}
    cfg = PipelineConfig()

    def apply(key: str, value: str, where: str):
        key = key.strip()
        if key not in known:
            raise DataError(f"{where}: unknown config key {key!r}")
        setattr(cfg, key, _coerce(key, _FIELD_TYPES[key], value))

    if path is not None:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path}:{lineno}: expected `key = value`")
            key, value = line.split("=", 1)
            apply(key, value, f"{path}:{lineno}")
    for item in overrides or []:
        if "=" not in item:
            raise DataError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        apply(key, value, "--set")
    return cfg
