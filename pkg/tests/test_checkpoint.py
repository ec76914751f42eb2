"""MAEC checkpoint files."""

import struct

import numpy as np
import pytest

from maeeg.checkpoint import load_model, read_state, save_model, write_state
from maeeg.errors import BadMagicError, ConfigError, TruncatedFileError, VersionMismatchError
from maeeg.model import ModelConfig, build_model, tiny_config


@pytest.mark.parametrize("mode", ["maeeg", "bendr", "supervised-baseline"])
def test_round_trip_is_bitwise(mode, tmp_path):
    model = build_model(ModelConfig(mode=mode), seed=3)
    save_model(model, tmp_path / "m.maec", {"epoch": 7})
    loaded, meta = load_model(tmp_path / "m.maec")
    assert loaded.config == model.config
    assert meta["epoch"] == 7
    a, b = model.state_dict(), loaded.state_dict()
    assert list(a) == list(b)
    for name in a:
        assert a[name].tobytes() == b[name].tobytes(), name


def test_state_file_layout(tmp_path):
    path = tmp_path / "s.maec"
    write_state(path, {"kind": "raw"}, {"w": np.arange(6, dtype=np.float32).reshape(2, 3), "s": np.float32(2.5)})
    blob = path.read_bytes()
    assert blob[:4] == b"MAEC" and struct.unpack("<H", blob[4:6]) == (1,)
    config, state = read_state(path)
    assert config == {"kind": "raw"}
    np.testing.assert_array_equal(state["w"], np.arange(6).reshape(2, 3))
    assert state["s"].shape == () and state["s"] == 2.5


def _saved(tmp_path):
    path = tmp_path / "m.maec"
    save_model(build_model(tiny_config(), seed=0), path)
    return path, path.read_bytes()


def test_bad_magic(tmp_path):
    path, blob = _saved(tmp_path)
    path.write_bytes(b"NOPE" + blob[4:])
    with pytest.raises(BadMagicError, match="offset 0"):
        load_model(path)


def test_version_mismatch(tmp_path):
    path, blob = _saved(tmp_path)
    path.write_bytes(blob[:4] + struct.pack("<H", 9) + blob[6:])
    with pytest.raises(VersionMismatchError):
        load_model(path)


@pytest.mark.parametrize("cut", [5, 9, 100, -1])
def test_truncation(tmp_path, cut):
    path, blob = _saved(tmp_path)
    path.write_bytes(blob[:cut])
    with pytest.raises(TruncatedFileError):
        load_model(path)


def test_strict_loading_rejects_mismatched_state(tmp_path):
    model = build_model(tiny_config(), seed=0)
    state = model.state_dict()
    state.pop("head.fc1_bias")
    with pytest.raises(ConfigError, match="missing"):
        model.load_state_dict(state)
    state = model.state_dict()
    state["head.fc1_bias"] = np.zeros(3, dtype=np.float32)
    with pytest.raises(ConfigError, match="shape"):
        model.load_state_dict(state)


def test_non_bundle_checkpoint_is_rejected(tmp_path):
    write_state(tmp_path / "x.maec", {"kind": "raw"}, {})
    with pytest.raises(ConfigError):
        load_model(tmp_path / "x.maec")
