"""Weight archive: a zip holding a JSON manifest plus raw float32-LE tensors.

The manifest fixes the parameter order, names, and shapes, and embeds the
model configuration so an archive is self-describing. Round trips are
bit-exact for float32 models.
"""

from __future__ import annotations

import json
import zipfile
from pathlib import Path

import numpy as np
import torch

from ..errors import InputError
from .config import ModelConfig
from .model import SuperResolutionNet, build_model, parameter_manifest

FORMAT_NAME = "mrisr-weights"
FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
TENSORS_NAME = "tensors.bin"


def save_weights(model: SuperResolutionNet, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    blobs = []
    offset = 0
    for name, p in model.named_parameters():
        arr = p.detach().cpu().numpy().astype("<f4")
        blobs.append(arr.tobytes(order="C"))
        entries.append({"name": name, "shape": list(p.shape), "offset": offset})
        offset += arr.nbytes
    manifest = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "dtype": "float32-le",
        "model_config": model.cfg.to_dict(),
        "parameters": entries,
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        zf.writestr(MANIFEST_NAME, json.dumps(manifest, indent=2, sort_keys=True))
        zf.writestr(TENSORS_NAME, b"".join(blobs))
    return path


def load_weights(path) -> SuperResolutionNet:
    path = Path(path)
    if not path.exists():
        raise InputError(f"weights archive not found: {path}")
    try:
        with zipfile.ZipFile(path) as zf:
            manifest = json.loads(zf.read(MANIFEST_NAME))
            raw = zf.read(TENSORS_NAME)
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError) as exc:
        raise InputError(f"corrupt weights archive {path}: {exc}") from exc
    if manifest.get("format") != FORMAT_NAME:
        raise InputError(f"{path} is not a weights archive")
    if manifest.get("version") != FORMAT_VERSION:
        raise InputError(f"unsupported archive version {manifest.get('version')}")

    cfg = ModelConfig.from_dict(manifest["model_config"])
    model = build_model(cfg, seed=0)
    expected = parameter_manifest(model)
    recorded = [(e["name"], tuple(e["shape"])) for e in manifest["parameters"]]
    if recorded != expected:
        raise InputError(f"archive manifest does not match the model built from its config: {path}")

    with torch.no_grad():
        for entry, (_, p) in zip(manifest["parameters"], model.named_parameters()):
            count = int(np.prod(entry["shape"])) if entry["shape"] else 1
            start = entry["offset"]
            arr = np.frombuffer(raw, dtype="<f4", count=count, offset=start)
            p.copy_(torch.from_numpy(arr.reshape(entry["shape"]).copy()))
    return model
