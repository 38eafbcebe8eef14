"""
Additional utility functions for the sspb toolkit.
"""

import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF

PathLike = Union[str, os.PathLike]


def splitmix64(value: int) -> int:
    """One round of the SplitMix64 output function."""
    z = (value + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *keys: Union[int, str]) -> int:
    """
    Derive an independent child seed from a parent seed and a key path.

    Integer keys are mixed in directly; string keys through their SHA-256
    digest so the result does not depend on Python's hash randomization.
    """
    state = splitmix64(int(seed) & _MASK64)
    for key in keys:
        if isinstance(key, str):
            key = int.from_bytes(
                hashlib.sha256(key.encode('utf-8')).digest()[:8], 'little'
            )
        state = splitmix64(state ^ (int(key) & _MASK64))
    return state


def make_rng(seed: int, *keys: Union[int, str]) -> np.random.Generator:
    """Seeded generator for the given key path."""
    return np.random.default_rng(derive_seed(seed, *keys))


def canonical_json(data: Any) -> str:
    """Canonical serialization used for hashing."""
    return json.dumps(data, sort_keys=True, separators=(',', ':'), ensure_ascii=False)


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def atomic_write_bytes(path: PathLike, payload: bytes):
    """Write through a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f'.{path.name}.', suffix='.tmp')
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: PathLike, text: str):
    atomic_write_bytes(path, text.encode('utf-8'))


def setup_logging(
    level: Union[int, str] = logging.WARNING,
    log_file: Optional[str] = None
):
    """Install the toolkit log format on the root logger."""
    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    root = logging.getLogger()
    root.setLevel(level)

    handler: logging.Handler = logging.StreamHandler()
    handler.setFormatter(formatter)
    root.handlers = [handler]

    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(formatter)
        root.addHandler(file_handler)
