"""Plot-ready CSV tables and JSON run reports.

CSV files carry a version comment line followed by a header row; floats
are written with 17 significant digits so a read back reproduces the
in-memory values exactly.
"""

from __future__ import annotations

import json

import numpy as np

__all__ = ["write_field_csv", "read_field_csv", "write_report"]

CSV_VERSION = "impscat-csv v1"

_COMPLEX_PARTS = ("Re", "Im")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _vector_headers(name):
    return [f"{p}_{name}{ax}" for ax in "xyz" for p in _COMPLEX_PARTS]


def _vector_cells(row):
    out = []
    for c in row:
        out.append(_fmt(np.real(c)))
        out.append(_fmt(np.imag(c)))
    return out


def write_field_csv(path, positions, kind="field", **vectors):
    """Write positions plus named complex vector fields (E=..., H=..., A=...)."""
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    names = [n for n, v in vectors.items() if v is not None]
    cols = ["x", "y", "z"]
    for n in names:
        cols += _vector_headers(n)
    with open(path, "w", newline="") as fh:
        fh.write(f"# {CSV_VERSION} kind={kind}\n")
        fh.write(",".join(cols) + "\n")
        for i in range(len(positions)):
            cells = [_fmt(v) for v in positions[i]]
            for n in names:
                cells += _vector_cells(np.asarray(vectors[n]).reshape(-1, 3)[i])
            fh.write(",".join(cells) + "\n")


def read_field_csv(path):
    """Read a table written by write_field_csv; returns (positions, fields)."""
    with open(path) as fh:
        version_line = fh.readline().strip()
        if not version_line.startswith(f"# {CSV_VERSION}"):
            raise ValueError(f"{path}: unrecognized CSV version line {version_line!r}")
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array(rows, dtype=float)
    if header[:3] != ["x", "y", "z"]:
        raise ValueError(f"{path}: unexpected columns {header[:3]}")
    positions = data[:, :3]
    fields = {}
    col = 3
    while col < len(header):
        name = header[col].split("_", 1)[1][:-1]
        re = data[:, col : col + 6 : 2]
        im = data[:, col + 1 : col + 6 : 2]
        fields[name] = re + 1j * im
        col += 6
    return positions, fields


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.complexfloating):
        return {"re": float(obj.real), "im": float(obj.imag)}
    return obj


def write_report(path, report: dict):
    """Deterministic JSON report (sorted keys, complex as {re, im})."""
    with open(path, "w") as fh:
        json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
        fh.write("\n")
