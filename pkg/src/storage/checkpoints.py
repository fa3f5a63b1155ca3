"""
Flat binary tensor container used for checkpoints and packed rollout sets.

Layout (little-endian):
    magic      4 bytes  b"CDCK"
    version    u32
    records    repeated until end of file:
        name_len   u32
        name       utf-8 bytes
        rank       u32
        dims       rank x u64
        data       prod(dims) x f32
"""

import os
import struct
from pathlib import Path
from typing import Dict, Mapping, Union

import numpy as np
import structlog
from tenacity import retry, stop_after_attempt, wait_fixed

from src.errors import ArtifactError, MissingPrerequisiteError

logger = structlog.get_logger(__name__)

MAGIC = b"CDCK"
VERSION = 1


def encode_container(arrays: Mapping[str, np.ndarray]) -> bytes:
    chunks = [MAGIC, struct.pack("<I", VERSION)]
    for name, array in arrays.items():
        data = np.ascontiguousarray(array, dtype="<f4")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", data.ndim))
        chunks.append(struct.pack(f"<{data.ndim}Q", *data.shape))
        chunks.append(data.tobytes())
    return b"".join(chunks)


def decode_container(payload: bytes, source: str = "<bytes>") -> Dict[str, np.ndarray]:
    if payload[:4] != MAGIC:
        raise ArtifactError(f"{source}: bad magic {payload[:4]!r}, expected {MAGIC!r}")
    if len(payload) < 8:
        raise ArtifactError(f"{source}: truncated header")
    (version,) = struct.unpack_from("<I", payload, 4)
    if version != VERSION:
        raise ArtifactError(f"{source}: unsupported container version {version}")

    arrays: Dict[str, np.ndarray] = {}
    offset = 8
    try:
        while offset < len(payload):
            (name_len,) = struct.unpack_from("<I", payload, offset)
            offset += 4
            name = payload[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<I", payload, offset)
            offset += 4
            shape = struct.unpack_from(f"<{rank}Q", payload, offset)
            offset += 8 * rank
            count = int(np.prod(shape, dtype=np.int64))
            if offset + 4 * count > len(payload):
                raise ArtifactError(f"{source}: record {name!r} truncated")
            arrays[name] = np.frombuffer(payload, dtype="<f4", count=count, offset=offset).reshape(shape).astype(np.float32)
            offset += 4 * count
    except struct.error as e:
        raise ArtifactError(f"{source}: truncated record at byte {offset}") from e
    return arrays


@retry(stop=stop_after_attempt(3), wait=wait_fixed(0.2), reraise=True)
def _write_atomic(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(payload)
    os.replace(tmp, path)


def save_checkpoint(path: Union[str, Path], arrays: Mapping[str, np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = encode_container(arrays)
    _write_atomic(path, payload)
    logger.info("checkpoint_saved", path=str(path), tensors=len(arrays), bytes=len(payload))
    return path


def load_checkpoint(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise MissingPrerequisiteError(path, "checkpoint")
    return decode_container(path.read_bytes(), str(path))
