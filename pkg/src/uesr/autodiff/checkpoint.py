"""Checkpoint container: one ``.npz`` archive of named float/int arrays.

Layout of the archive:

* every tensor is stored under its dotted name, e.g. ``agent0/actor/fc.weight``;
  Adam moments use the suffixes ``@m`` / ``@v`` and step counters ``@step``;
* ``__meta__`` holds a UTF-8 JSON document (config, layout variant and the
  architecture fingerprint) encoded as a uint8 array.

Arrays are written uncompressed with their exact dtype, so a save/load round
trip is bit-exact.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Mapping

import numpy as np

META_KEY = "__meta__"


def fingerprint(**fields) -> str:
    blob = json.dumps(fields, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def save_checkpoint(path, tensors: Mapping[str, np.ndarray], meta: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {name: np.asarray(value) for name, value in tensors.items()}
    if META_KEY in arrays:
        raise KeyError(f"{META_KEY} is reserved")
    arrays[META_KEY] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    # np.savez appends .npz to bare names; write through a handle to keep the path as given
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    with np.load(Path(path), allow_pickle=False) as archive:
        tensors = {name: archive[name] for name in archive.files if name != META_KEY}
        meta = json.loads(archive[META_KEY].tobytes().decode())
    return tensors, meta
