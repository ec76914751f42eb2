"""Flat ``key = value`` experiment configuration.

A config file holds one assignment per line; ``#`` starts a comment.  Values
are coerced to the type of the key's default, and command-line flags
override file values.  Every run writes the fully resolved configuration
(plus its hash) next to its outputs as ``config.resolved``.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

from maeeg.errors import ConfigError

OUT_ENV = "MAEEG_OUT"
RESOLVED_NAME = "config.resolved"

# key -> (default, type); ``None`` defaults mean "unset"
SCHEMA = {
    # global
    "seed": (0, int),
    "out": (None, str),
    "model": ("full", str),  # full | tiny
    "data": (None, str),  # EEGB or CSV path; synthetic corpus when unset
    # synthetic corpus
    "synth_records_per_class": (40, int),
    "synth_subjects": (5, int),
    "synth_sessions": (4, int),
    "synth_noise": (0.3, float),
    "synth_seed": (None, int),  # defaults to seed
    # pretraining
    "mode": ("maeeg", str),
    "sample_length": (30, int),
    "mask_p": (0.065, float),
    "mask_len": (10, int),
    "mask_rate": (None, float),
    "mask_chunks": (None, int),
    "mask_span": (None, int),
    "epochs": (10, int),
    "batch_size": (8, int),
    "lr": (5e-4, float),
    "optimizer": ("adam", str),
    "grad_clip": (1.0, float),
    "temperature": (0.1, float),
    "negatives": (20, int),
    # downstream
    "checkpoint": (None, str),
    "checkpoints": (None, list),  # fine-tune inits, comma separated
    "with_baseline": (False, bool),
    "tap_layer": (2, int),
    "downstream_epochs": (100, int),
    "validate_every": (2, int),
    "downstream_batch_size": (16, int),
    "probe_lr": (None, float),
    "finetune_lr": (None, float),
    "label_fraction": (None, float),
    "n_subjects": (None, int),
    # sweeps
    "sweep_rates": ([0.25, 0.5, 0.75], list),
    "sweep_chunks": ([1, 5, 10], list),
    "sweep_spans": ([10, 26, 52, 78], list),
    "sweep_modes": (["maeeg", "bendr"], list),
    "label_fractions": ([0.001, 0.01, 0.1, 1.0], list),
    "seeds": (None, list),  # sweep seeds; defaults to [seed]
    "workers": (1, int),
    # attention
    "record_index": (0, int),
    "layer": (2, int),
    "stabilize": (False, bool),
    "stabilize_subject": (None, int),
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _scalar(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def coerce(key: str, value):
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}")
    default, kind = SCHEMA[key]
    if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none")):
        return None
    try:
        if kind is bool:
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text in _TRUE:
                return True
            if text in _FALSE:
                return False
            raise ValueError(value)
        if kind is list:
            if isinstance(value, (list, tuple)):
                return list(value)
            return [_scalar(part.strip()) for part in str(value).split(",") if part.strip()]
        if kind is int and isinstance(value, float) and not value.is_integer():
            raise ValueError(value)
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key!r}: cannot interpret {value!r} as {kind.__name__}") from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{line_no}: expected key = value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        values[key] = coerce(key, value)
    return values


def load_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text, str(path))


def resolve(file_values: dict | None = None, overrides: dict | None = None) -> dict:
    """Defaults, then file values, then overrides (``None`` overrides are ignored)."""
    cfg = {key: default for key, (default, _) in SCHEMA.items()}
    for key, value in (file_values or {}).items():
        cfg[key] = coerce(key, value)
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = coerce(key, value)
    if cfg["synth_seed"] is None:
        cfg["synth_seed"] = cfg["seed"]
    if cfg["seeds"] is None:
        cfg["seeds"] = [cfg["seed"]]
    return cfg


def config_hash(cfg: dict) -> str:
    """Hash of the resolved config, ignoring the output location."""
    payload = json.dumps({k: v for k, v in sorted(cfg.items()) if k != "out"}, sort_keys=True, default=str)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _render(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    return str(value)


def write_resolved(cfg: dict, out_dir, command: str) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [f"# command: {command}", f"# config_hash: {config_hash(cfg)}"]
    lines += [f"{key} = {_render(value)}" for key, value in sorted(cfg.items()) if key != "out"]
    path = out_dir / RESOLVED_NAME
    path.write_text("\n".join(lines) + "\n")
    return path


def read_resolved_hash(out_dir) -> str | None:
    path = Path(out_dir) / RESOLVED_NAME
    if not path.exists():
        return None
    for line in path.read_text().splitlines():
        if line.startswith("# config_hash:"):
            return line.split(":", 1)[1].strip()
    return None


def output_dir(cfg: dict, command: str) -> Path:
    if cfg.get("out"):
        return Path(cfg["out"])
    root = os.environ.get(OUT_ENV)
    return Path(root or "runs") / command
