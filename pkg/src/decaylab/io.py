"""Grid snapshots as a raw little-endian float64 array plus a ``key = value`` text sidecar.

Format ``decaylab-grid`` version 1. The sidecar (``<stem>.txt``) holds::

    format = decaylab-grid
    version = 1
    dtype = <f8
    order = C
    dims = 2
    cells = 64 64
    lower = 0 0
    spacing = 0.015625 0.015625
    time = 0.5

``time`` is optional. The payload (``<stem>.bin``) is the cell-average array
in C order with no header.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .solver import GridField

FORMAT = "decaylab-grid"
VERSION = 1


def _fmt(values) -> str:
    return " ".join(f"{float(v):.17g}" for v in values)


def write_field(stem, u: GridField, time: float | None = None) -> Path:
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    np.ascontiguousarray(u.data, dtype="<f8").tofile(stem.with_suffix(".bin"))
    lines = [
        f"format = {FORMAT}",
        f"version = {VERSION}",
        "dtype = <f8",
        "order = C",
        f"dims = {u.dims}",
        "cells = " + " ".join(str(c) for c in u.cells),
        "lower = " + _fmt(u.lower),
        "spacing = " + _fmt(u.spacing),
    ]
    if time is not None:
        lines.append(f"time = {float(time):.17g}")
    stem.with_suffix(".txt").write_text("\n".join(lines) + "\n")
    return stem


def read_header(stem) -> dict:
    meta = {}
    path = Path(stem).with_suffix(".txt")
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        meta[k] = v
    if meta.get("format") != FORMAT:
        raise ValueError(f"{path}: not a {FORMAT} sidecar")
    if int(meta.get("version", -1)) != VERSION:
        raise ValueError(f"{path}: unsupported version {meta.get('version')}")
    if meta.get("dtype") != "<f8" or meta.get("order") != "C":
        raise ValueError(f"{path}: only little-endian float64 C-order payloads are supported")
    return meta


def read_field(stem) -> tuple[GridField, float | None]:
    meta = read_header(stem)
    cells = tuple(int(c) for c in meta["cells"].split())
    if len(cells) != int(meta["dims"]):
        raise ValueError("cells do not match dims")
    data = np.fromfile(Path(stem).with_suffix(".bin"), dtype="<f8")
    if data.size != int(np.prod(cells)):
        raise ValueError(f"payload has {data.size} values, header expects {int(np.prod(cells))}")
    lower = tuple(float(v) for v in meta["lower"].split())
    spacing = tuple(float(v) for v in meta["spacing"].split())
    t = float(meta["time"]) if "time" in meta else None
    return GridField(data.reshape(cells), lower, spacing), t
