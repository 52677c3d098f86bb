"""Flat, bit-exact model persistence.

A model file is JSON: a format version, the construction arguments needed
to rebuild the layer stack (including the seed that fixes the
permutations), a config echo, and every parameter array in declaration
order. Floats survive the round trip exactly (shortest-repr encoding).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .flow import InnModel, ModelConfig

FORMAT_VERSION = 1


class ArtifactError(ValueError):
    pass


def save_model(path, model: InnModel, config_snapshot: dict | None = None) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "model": {
            "D": model.D,
            "M": model.M,
            "K": model.K,
            "width": model.W,
            "blocks": model.cfg.blocks,
            "hidden": model.cfg.hidden,
            "depth": model.cfg.depth,
            "slope": model.cfg.slope,
            "clamp": model.cfg.clamp,
            "seed": model.seed,
        },
        "config": config_snapshot or {},
        "params": [
            {"name": p.name, "shape": list(p.value.shape), "data": p.value.ravel().tolist()}
            for p in model.params
        ],
    }
    Path(path).write_text(json.dumps(doc))


def load_model(path) -> tuple[InnModel, dict]:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"cannot read model file {path}: {exc}") from exc
    if doc.get("format_version") != FORMAT_VERSION:
        raise ArtifactError(f"unsupported model format {doc.get('format_version')!r}")
    spec = doc["model"]
    cfg = ModelConfig(
        blocks=spec["blocks"],
        hidden=spec["hidden"],
        depth=spec["depth"],
        slope=spec["slope"],
        clamp=spec["clamp"],
        width=spec["width"],
    )
    model = InnModel(spec["D"], spec["M"], spec["K"], cfg, spec["seed"])
    params = model.params
    saved = doc["params"]
    if len(saved) != len(params):
        raise ArtifactError("parameter count mismatch")
    for p, entry in zip(params, saved):
        if entry["name"] != p.name or tuple(entry["shape"]) != p.value.shape:
            raise ArtifactError(f"parameter layout mismatch at {entry['name']}")
        p.value[:] = np.asarray(entry["data"], dtype=np.float64).reshape(p.value.shape)
    return model, doc.get("config", {})
