"""Matrix, JSON, and image file formats used by the command-line tools.

Matrices are headerless CSV, one row per line, 17 significant digits (enough
to round-trip doubles exactly), LF line endings.  Manifests and configs are
JSON with lower_snake_case keys.  Segmentation images are plain P3 PPM with a
fixed 12-color palette.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .exceptions import DimensionError
from .linalg import as_matrix

PALETTE12 = [
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200),
    (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230),
    (210, 245, 60), (250, 190, 190), (0, 128, 128), (128, 128, 0),
]


def write_matrix(path, a) -> None:
    """Write a matrix as headerless CSV with full double precision."""
    a = as_matrix(a, "matrix")
    lines = [",".join(format(v, ".17g") for v in row) for row in a]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_matrix(path) -> np.ndarray:
    """Read a headerless CSV matrix, rejecting NaN/Inf and ragged rows."""
    try:
        a = np.loadtxt(path, delimiter=",", ndmin=2, encoding="utf-8")
    except ValueError as exc:
        raise DimensionError(f"{path}: malformed matrix file ({exc})") from exc
    return as_matrix(a, str(path))


def write_json(path, payload: dict) -> None:
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_label_grid(path, labels) -> None:
    """Plain-text grid of 1-indexed integer labels, one row per line."""
    labels = np.asarray(labels)
    lines = [" ".join(str(int(v)) for v in row) for row in labels]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_ppm(path, labels) -> None:
    """Render a label grid to an ASCII (P3) PPM using the fixed palette."""
    labels = np.asarray(labels, dtype=int)
    if labels.ndim != 2:
        raise DimensionError("labels must be a 2-d grid")
    height, width = labels.shape
    out = [f"P3\n{width} {height}\n255"]
    for row in labels:
        parts = []
        for v in row:
            r, g, b = PALETTE12[(int(v) - 1) % len(PALETTE12)]
            parts.append(f"{r} {g} {b}")
        out.append(" ".join(parts))
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8", newline="\n")
