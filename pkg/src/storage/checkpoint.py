"""Checkpoint directories: ``manifest.json`` plus ``tensors.stf``."""
import json
from pathlib import Path

import numpy as np

from errors import FormatError
from storage.stf import iter_tensor_sequence, write_tensor_sequence

MANIFEST = "manifest.json"
TENSORS = "tensors.stf"


def save_checkpoint(directory, tensors, extras=None):
    """Write named tensors (dict name → array) and JSON-able extras."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = list(tensors)
    manifest = {
        "format": "STF1-checkpoint",
        "tensors": [{"name": n, "shape": list(np.shape(tensors[n]))} for n in names],
        "extras": extras or {},
    }
    # 1-d views keep scalars and empty arrays representable
    write_tensor_sequence(directory / TENSORS, (np.reshape(tensors[n], (-1,)) if np.ndim(tensors[n]) == 0 else tensors[n] for n in names))
    (directory / MANIFEST).write_text(json.dumps(manifest, indent=2), encoding="utf-8")


def load_checkpoint(directory):
    directory = Path(directory)
    manifest_path = directory / MANIFEST
    if not manifest_path.exists():
        raise FormatError(f"no checkpoint manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    entries = manifest.get("tensors", [])
    arrays = list(iter_tensor_sequence(directory / TENSORS))
    if len(arrays) != len(entries):
        raise FormatError(f"checkpoint lists {len(entries)} tensors but {TENSORS} holds {len(arrays)}")
    tensors = {}
    for entry, array in zip(entries, arrays):
        shape = tuple(entry["shape"])
        if int(np.prod(shape, dtype=np.int64)) != array.size:
            raise FormatError(f"checkpoint tensor {entry['name']} does not match shape {shape}")
        tensors[entry["name"]] = array.reshape(shape)
    return tensors, manifest.get("extras", {})
