# tests/test_checkpoint.py

import json
import struct

import numpy as np
import pytest

from gtn.core.exceptions import CheckpointError
from gtn.model.checkpoint import (
    checkpoint_digest,
    load_checkpoint,
    save_checkpoint,
    sidecar_path,
)
from gtn.model.config import GtnConfig
from gtn.model.network import audit_parameter_names, build_gtn


def test_f64_round_trip_is_bitwise(tiny_net, tmp_path):
    path = save_checkpoint(tiny_net, tmp_path / "model.gtn")
    loaded = load_checkpoint(path)
    assert loaded.config == tiny_net.config
    assert loaded.params.names() == tiny_net.params.names()
    for name, value in tiny_net.params.items():
        np.testing.assert_array_equal(loaded.params[name], value)


def test_f32_round_trip_is_close(tiny_net, tmp_path):
    path = save_checkpoint(tiny_net, tmp_path / "model.gtn", precision="f32")
    loaded = load_checkpoint(path)
    assert loaded.params.max_abs_diff(tiny_net.params) < 1e-6
    assert loaded.params["value.bias"].dtype == np.float64


def test_sidecar_repeats_config(tiny_net, tmp_path):
    path = save_checkpoint(tiny_net, tmp_path / "model.gtn")
    sidecar = json.loads(sidecar_path(path).read_text())
    assert sidecar["config"]["levels"] == 2
    assert sidecar["precision"] == "f64"
    assert set(sidecar["tensors"]) == set(tiny_net.params.names())


def test_same_network_gives_same_digest(tiny_config, tmp_path):
    a = save_checkpoint(build_gtn(tiny_config, 5), tmp_path / "a.gtn")
    b = save_checkpoint(build_gtn(tiny_config, 5), tmp_path / "b.gtn")
    c = save_checkpoint(build_gtn(tiny_config, 6), tmp_path / "c.gtn")
    assert checkpoint_digest(a) == checkpoint_digest(b) != checkpoint_digest(c)


def test_unknown_precision(tiny_net, tmp_path):
    with pytest.raises(CheckpointError):
        save_checkpoint(tiny_net, tmp_path / "model.gtn", precision="f16")


def test_bad_magic(tiny_net, tmp_path):
    path = save_checkpoint(tiny_net, tmp_path / "model.gtn")
    data = bytearray(path.read_bytes())
    data[0:4] = b"XXXX"
    path.write_bytes(bytes(data))
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)


def test_bad_version(tiny_net, tmp_path):
    path = save_checkpoint(tiny_net, tmp_path / "model.gtn")
    data = bytearray(path.read_bytes())
    data[4:6] = struct.pack("<H", 99)
    path.write_bytes(bytes(data))
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(path)


def test_truncated_file(tiny_net, tmp_path):
    path = save_checkpoint(tiny_net, tmp_path / "model.gtn")
    path.write_bytes(path.read_bytes()[:-9])
    with pytest.raises(CheckpointError, match="Truncated"):
        load_checkpoint(path)


def test_trailing_bytes(tiny_net, tmp_path):
    path = save_checkpoint(tiny_net, tmp_path / "model.gtn")
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(CheckpointError, match="trailing"):
        load_checkpoint(path)


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "absent.gtn")


def test_default_topology_tensor_names(tmp_path):
    config = GtnConfig()
    net = build_gtn(config, seed=0)
    loaded = load_checkpoint(save_checkpoint(net, tmp_path / "model.gtn", precision="f32"))
    assert loaded.params.names() == audit_parameter_names(config)
    assert "conv.4.4.weight" in loaded.params
    assert loaded.params["lstm.4.w_x"].shape == (32, 4 * 288)
    assert loaded.audit() == []


def corrupt_after(path, marker, offset=0):
    data = bytearray(path.read_bytes())
    at = data.find(marker)
    assert at >= 0
    data[at + offset] = 0xFF
    path.write_bytes(bytes(data))


def test_corrupt_config_block(tiny_net, tmp_path):
    path = save_checkpoint(tiny_net, tmp_path / "model.gtn")
    corrupt_after(path, b"channels=", offset=len(b"channels="))
    with pytest.raises(CheckpointError, match="config"):
        load_checkpoint(path)


def test_undecodable_config_value(tiny_net, tmp_path):
    path = save_checkpoint(tiny_net, tmp_path / "model.gtn")
    data = path.read_bytes().replace(b"channels=3", b"channels=?")
    path.write_bytes(data)
    with pytest.raises(CheckpointError, match="channels"):
        load_checkpoint(path)


def test_corrupt_tensor_name(tiny_net, tmp_path):
    path = save_checkpoint(tiny_net, tmp_path / "model.gtn")
    corrupt_after(path, b"conv.1.1.weight")
    with pytest.raises(CheckpointError, match="not UTF-8"):
        load_checkpoint(path)
