"""Artifact serialization helpers shared by samplers, analytics and the CLI.

All CSV files are comma-separated UTF-8 with a header row and LF line
endings.  Floats are written with 17 significant digits so a 64-bit value
round-trips exactly; re-running a deterministic experiment therefore
reproduces the artifact byte for byte.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


def csv_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([csv_cell(v) for v in row])


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader]
    return header, rows


def write_json(path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(payload, indent=2, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def save_array(path_stem, array: np.ndarray) -> None:
    """Write an array as raw little-endian float64 plus a JSON shape header."""
    arr = np.ascontiguousarray(array, dtype="<f8")
    Path(str(path_stem) + ".bin").write_bytes(arr.tobytes())
    write_json(
        str(path_stem) + ".json",
        {"dtype": "<f8", "order": "C", "shape": list(arr.shape)},
    )


def load_array(path_stem) -> np.ndarray:
    header = read_json(str(path_stem) + ".json")
    raw = Path(str(path_stem) + ".bin").read_bytes()
    flat = np.frombuffer(raw, dtype=header["dtype"])
    return flat.reshape(header["shape"]).copy()
