# gtn/model/checkpoint.py

"""Binary checkpoint format for GTN parameters.

Layout (little-endian):
    b"GTN1" | u16 version | u32 config length | config text
    | u32 tensor count | records...
Config text is one `key=value` line per GtnConfig field, sorted by key,
values JSON-encoded. Each record is
    u16 name length | name (utf-8) | dtype tag b"f32"/b"f64" | u8 rank
    | rank x u32 dims | row-major payload.
A JSON sidecar next to the file repeats the config for human inspection.
"""

import hashlib
import json
import logging
import struct
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from gtn.core.exceptions import CheckpointError
from gtn.engine.tensor import ParameterSet
from gtn.model.config import GtnConfig
from gtn.model.network import GtnNetwork

logger = logging.getLogger(__name__)

MAGIC = b"GTN1"
FORMAT_VERSION = 1
_DTYPES: Dict[str, Tuple[bytes, str]] = {
    "f64": (b"f64", "<f8"),
    "f32": (b"f32", "<f4"),
}
_TAGS = {tag: (name, np_dtype) for name, (tag, np_dtype) in _DTYPES.items()}

PathLike = Union[str, Path]


def sidecar_path(path: PathLike) -> Path:
    return Path(path).with_suffix(".json")


def _config_text(config: GtnConfig) -> bytes:
    data = config.model_dump()
    lines = [f"{key}={json.dumps(data[key])}" for key in sorted(data)]
    return "\n".join(lines).encode("utf-8")


def _parse_config_text(text: bytes) -> GtnConfig:
    try:
        lines = text.decode("utf-8").splitlines()
    except UnicodeDecodeError as e:
        raise CheckpointError(f"Checkpoint config block is not UTF-8: {e}") from e
    data = {}
    for line in lines:
        if not line.strip():
            continue
        key, sep, raw = line.partition("=")
        if not sep:
            raise CheckpointError(f"Malformed config line in checkpoint: {line!r}")
        try:
            data[key] = json.loads(raw)
        except ValueError as e:
            raise CheckpointError(f"Malformed config value for {key!r} in checkpoint: {e}") from e
    try:
        return GtnConfig(**data)
    except Exception as e:
        raise CheckpointError(f"Checkpoint config block is invalid: {e}") from e


def save_checkpoint(net: GtnNetwork, path: PathLike, precision: str = "f64") -> Path:
    """Writes the network's config and parameters to `path` plus a JSON sidecar.

    Args:
        net: Network to persist
        path: Target file
        precision: "f64" (bitwise round-trip) or "f32"

    Returns:
        The checkpoint path

    Raises:
        CheckpointError: If the precision is unknown or the file cannot be written.
    """
    if precision not in _DTYPES:
        raise CheckpointError(f"Unknown checkpoint precision '{precision}'")
    tag, np_dtype = _DTYPES[precision]
    path = Path(path)

    chunks: List[bytes] = [MAGIC, struct.pack("<H", FORMAT_VERSION)]
    config_block = _config_text(net.config)
    chunks.append(struct.pack("<I", len(config_block)))
    chunks.append(config_block)
    chunks.append(struct.pack("<I", len(net.params)))
    for name, value in net.params.items():
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(tag)
        chunks.append(struct.pack("<B", value.ndim))
        chunks.append(struct.pack(f"<{value.ndim}I", *value.shape))
        chunks.append(np.ascontiguousarray(value, dtype=np_dtype).tobytes())

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(b"".join(chunks))
        sidecar = {
            "format": MAGIC.decode("ascii"),
            "version": FORMAT_VERSION,
            "precision": precision,
            "config": net.config.model_dump(),
            "tensors": {name: list(v.shape) for name, v in net.params.items()},
        }
        sidecar_path(path).write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    except OSError as e:
        logger.error(f"Failed to write checkpoint: {e}", exc_info=True)
        raise CheckpointError(f"Cannot write checkpoint {path}: {e}") from e

    logger.info(
        "Checkpoint saved",
        extra={"path": str(path), "tensors": len(net.params), "precision": precision},
    )
    return path


class _Reader:
    def __init__(self, data: bytes, path: Path) -> None:
        self._data = data
        self._pos = 0
        self._path = path

    def take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise CheckpointError(
                f"Truncated checkpoint {self._path}: needed {n} bytes at offset {self._pos}"
            )
        chunk = self._data[self._pos : self._pos + n]
        self._pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    @property
    def remaining(self) -> int:
        return len(self._data) - self._pos


def load_checkpoint(path: PathLike) -> GtnNetwork:
    """Reads a checkpoint written by `save_checkpoint`.

    Raises:
        CheckpointError: On bad magic or version, truncation, or when the
            tensor names and shapes fail the structural audit.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e

    reader = _Reader(data, path)
    magic = reader.take(len(MAGIC))
    if magic != MAGIC:
        raise CheckpointError(f"Bad magic {magic!r} in {path}; expected {MAGIC!r}")
    (version,) = reader.unpack("<H")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"Unsupported checkpoint version {version} in {path}; expected {FORMAT_VERSION}"
        )
    (config_len,) = reader.unpack("<I")
    config = _parse_config_text(reader.take(config_len))

    params = ParameterSet()
    (count,) = reader.unpack("<I")
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        raw_name = reader.take(name_len)
        try:
            name = raw_name.decode("utf-8")
        except UnicodeDecodeError as e:
            raise CheckpointError(f"Tensor name {raw_name!r} in {path} is not UTF-8") from e
        tag = reader.take(3)
        if tag not in _TAGS:
            raise CheckpointError(f"Unknown dtype tag {tag!r} for tensor {name}")
        _, np_dtype = _TAGS[tag]
        (rank,) = reader.unpack("<B")
        dims = reader.unpack(f"<{rank}I") if rank else ()
        n_bytes = int(np.prod(dims, dtype=np.int64)) * np.dtype(np_dtype).itemsize
        payload = np.frombuffer(reader.take(n_bytes), dtype=np_dtype).reshape(dims)
        try:
            params.add(name, payload.astype(np.float64))
        except Exception as e:
            raise CheckpointError(f"Invalid tensor record {name}: {e}") from e
    if reader.remaining:
        raise CheckpointError(f"{reader.remaining} trailing bytes in {path}")

    net = GtnNetwork(config, params)
    problems = net.audit()
    if problems:
        raise CheckpointError(
            f"Checkpoint {path} fails the structural audit: " + "; ".join(problems)
        )
    logger.info("Checkpoint loaded", extra={"path": str(path), "tensors": count})
    return net


def checkpoint_digest(path: PathLike) -> str:
    """SHA-256 of the checkpoint bytes."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
