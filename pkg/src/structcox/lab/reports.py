"""Report envelopes: every file carries the config hash, seed and tool version."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .. import __version__


def config_hash(config) -> str:
    text = json.dumps(config, sort_keys=True, separators=(",", ":"), default=_default)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if hasattr(obj, "to_json"):
        return obj.to_json()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def envelope(config, seed) -> dict:
    return {"config_hash": config_hash(config), "seed": int(seed), "tool_version": __version__}


def atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_json(path, payload: dict, config, seed):
    body = {**envelope(config, seed), **payload}
    atomic_write(path, json.dumps(body, indent=2, sort_keys=True, default=_default) + "\n")


def write_csv(path, csv_text: str, config, seed):
    """CSV with the envelope as leading ``#`` comment lines (gnuplot skips them)."""
    env = envelope(config, seed)
    head = "".join(f"# {k}: {v}\n" for k, v in env.items())
    atomic_write(path, head + csv_text)
