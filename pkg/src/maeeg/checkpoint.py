"""MAEC checkpoint files.

Layout (little-endian)::

    magic   b"MAEC"
    u16     version (= 1)
    u32     config length, then that many bytes of UTF-8 JSON
            (mode and every module config)
    u32     tensor count
    per tensor:
        u16 name length, UTF-8 name,
        u8  ndim, ndim x u32 extents,
        prod(extents) float32 values, row-major
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from maeeg.errors import BadMagicError, DataError, TruncatedFileError, VersionMismatchError

MAGIC = b"MAEC"
VERSION = 1


def write_state(path, config: dict, state: dict) -> None:
    path = Path(path)
    cfg = json.dumps(config, sort_keys=True).encode()
    parts = [MAGIC, struct.pack("<H", VERSION), struct.pack("<I", len(cfg)), cfg,
             struct.pack("<I", len(state))]
    for name, value in state.items():
        arr = np.asarray(value, dtype="<f4")
        raw = name.encode()
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    try:
        path.write_bytes(b"".join(parts))
    except OSError as exc:
        raise DataError(f"cannot write checkpoint {path}: {exc}") from exc


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob, self.pos, self.path = blob, 0, path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise TruncatedFileError(f"{self.path}: truncated at offset {self.pos}")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size))


def read_state(path) -> tuple[dict, dict]:
    """Return ``(config, state)`` from a MAEC file."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    r = _Reader(blob, path)
    magic = blob[:4]
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic at offset 0: expected {MAGIC!r}, got {magic!r}")
    r.take(4)
    (version,) = r.unpack("<H")
    if version != VERSION:
        raise VersionMismatchError(f"{path}: checkpoint version {version}, expected {VERSION}")
    (cfg_len,) = r.unpack("<I")
    config = json.loads(r.take(cfg_len).decode())
    (count,) = r.unpack("<I")
    state = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode()
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I") if ndim else ()
        n = int(np.prod(shape)) if shape else 1
        state[name] = np.frombuffer(r.take(4 * n), dtype="<f4").reshape(shape).astype(np.float32)
    return config, state


def save_model(model, path, extra: dict | None = None) -> None:
    """Write a ModelBundle; ``extra`` is merged into the JSON config block."""
    config = {"kind": "bundle", "model": model.config.to_dict()}
    config.update(extra or {})
    write_state(path, config, model.state_dict())


def load_model(path):
    from maeeg.model import ModelBundle, ModelConfig
    from maeeg.core import Rng
    from maeeg.errors import ConfigError

    config, state = read_state(path)
    if config.get("kind") != "bundle":
        raise ConfigError(f"{path} is not a model-bundle checkpoint (kind={config.get('kind')!r})")
    model = ModelBundle(ModelConfig.from_dict(config["model"]), Rng(0))
    model.load_state_dict(state)
    return model, config
