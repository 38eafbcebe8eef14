"""
Binary weight file codec.

Layout (all integers 32-bit little-endian unsigned):

    b"SSPW" | version | tensor count
    per tensor: name length | UTF-8 name | rank | extents... | float32 LE data
"""

import logging
import struct
from pathlib import Path
from typing import Dict, Mapping

import numpy as np

from ..utils.error_handler import IngestionError
from ..utils.helpers import PathLike, atomic_write_bytes

logger = logging.getLogger(__name__)

MAGIC = b'SSPW'
FORMAT_VERSION = 1
_U32 = struct.Struct('<I')


def encode_weights(tensors: Mapping[str, np.ndarray]) -> bytes:
    """Serialize named tensors in mapping order."""
    chunks = [MAGIC, _U32.pack(FORMAT_VERSION), _U32.pack(len(tensors))]
    for name, array in tensors.items():
        encoded = name.encode('utf-8')
        array = np.asarray(array)
        chunks.append(_U32.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(_U32.pack(array.ndim))
        chunks.extend(_U32.pack(extent) for extent in array.shape)
        chunks.append(np.ascontiguousarray(array, dtype='<f4').tobytes())
    return b''.join(chunks)


def decode_weights(payload: bytes) -> Dict[str, np.ndarray]:
    """Parse a weight file body into float32 arrays, preserving order."""
    view = memoryview(payload)
    offset = 0

    def take(n: int) -> memoryview:
        nonlocal offset
        if offset + n > len(view):
            raise IngestionError(f"weight file truncated at byte {offset}")
        chunk = view[offset:offset + n]
        offset += n
        return chunk

    def take_u32() -> int:
        return _U32.unpack(take(4))[0]

    if bytes(take(4)) != MAGIC:
        raise IngestionError("not an SSPW weight file (bad magic)")
    version = take_u32()
    if version != FORMAT_VERSION:
        raise IngestionError(f"unsupported weight file version {version}")

    tensors: Dict[str, np.ndarray] = {}
    for _ in range(take_u32()):
        name = bytes(take(take_u32())).decode('utf-8')
        shape = tuple(take_u32() for _ in range(take_u32()))
        count = int(np.prod(shape, dtype=np.int64))
        data = np.frombuffer(take(4 * count), dtype='<f4').astype(np.float32)
        tensors[name] = data.reshape(shape)

    if offset != len(view):
        raise IngestionError(f"{len(view) - offset} trailing bytes in weight file")
    return tensors


def save_weights(path: PathLike, tensors: Mapping[str, np.ndarray]):
    atomic_write_bytes(path, encode_weights(tensors))
    logger.debug(f"Saved {len(tensors)} tensors to {path}")


def load_weights(path: PathLike) -> Dict[str, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"weight file not found: {path}")
    return decode_weights(path.read_bytes())
