"""
Field and curve export.

CSV layout:

    #kind=density
    #time=0.05
    #grid=nodes
    ...
    x1,x2,rho
    0.0,-4.0,-1.0

Floats are written with repr, the shortest string that round-trips, so
read_field_csv returns bitwise-equal samples. JSON carries the same metadata
plus the grid axes and one nested list per component.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Literal

import numpy as np

from .reconstruction import FIELD_TYPES, EulerianGrid, LevelCurves

__all__ = [
    "export_field",
    "write_field_csv",
    "read_field_csv",
    "write_field_json",
    "read_field_json",
    "read_field",
    "write_curves_csv",
    "read_curves_csv",
]

Format = Literal["csv", "json"]

CURVE_HEADER = ("x1", "h", "gamma")


def _format(value: Any) -> str:
    if isinstance(value, float | np.floating):
        return repr(float(value))
    return str(value)


def _parse_meta(key: str, value: str) -> Any:
    if key in ("n_x1", "n_x2"):
        return int(value)
    if key in ("time", "half_height", "mu"):
        return float(value)
    return value


def _build(meta: dict[str, Any], comps: list[np.ndarray]):
    kind = meta["kind"]
    if kind not in FIELD_TYPES:
        raise ValueError(f"unknown field kind {kind!r}")
    grid = EulerianGrid.from_metadata(meta)
    return FIELD_TYPES[kind].from_components(
        grid,
        float(meta["time"]),
        comps,
        mu=float(meta.get("mu", 1.0)),
        config_hash=meta.get("config_hash") or None,
    )


def write_field_csv(field, path: Path) -> Path:
    """One row per grid point, x1 outer and x2 inner."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = field.grid
    X1, X2 = grid.mesh()
    comps = [c.ravel() for c in field.components()]
    with path.open("w", newline="") as fh:
        for key, value in field.metadata().items():
            fh.write(f"#{key}={_format(value)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("x1", "x2") + field.COLUMNS)
        for i, (a, b) in enumerate(zip(X1.ravel(), X2.ravel())):
            writer.writerow([repr(float(a)), repr(float(b))] + [repr(float(c[i])) for c in comps])
    return path


def read_field_csv(path: Path):
    meta: dict[str, Any] = {}
    with Path(path).open(newline="") as fh:
        lines = [line for line in fh if line.strip()]
    body: list[str] = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].rstrip("\n").partition("=")
            meta[key] = _parse_meta(key, value)
        else:
            body.append(line)
    reader = csv.reader(body)
    header = next(reader)
    rows = list(reader)
    grid = EulerianGrid.from_metadata(meta)
    data = np.array([[float(x) for x in row] for row in rows]).reshape(grid.shape + (len(header),))
    comps = [data[..., k] for k in range(2, len(header))]
    expected = FIELD_TYPES[meta["kind"]].COLUMNS
    if tuple(header[2:]) != expected:
        raise ValueError(f"header {header} does not match kind {meta['kind']!r}")
    return _build(meta, comps)


def write_field_json(field, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "kind": field.KIND,
        "metadata": field.metadata(),
        "x1": field.grid.x1.tolist(),
        "x2": field.grid.x2.tolist(),
        "values": {name: c.tolist() for name, c in zip(field.COLUMNS, field.components())},
    }
    path.write_text(json.dumps(payload) + "\n")
    return path


def read_field_json(path: Path):
    payload = json.loads(Path(path).read_text())
    meta = dict(payload["metadata"])
    cls = FIELD_TYPES[payload["kind"]]
    comps = [np.asarray(payload["values"][name], dtype=float) for name in cls.COLUMNS]
    return _build(meta, comps)


def export_field(field, path: Path, fmt: Format = "csv") -> Path:
    """Write a Density/Velocity/FluxField; I/O errors propagate unchanged."""
    if fmt == "csv":
        return write_field_csv(field, path)
    if fmt == "json":
        return write_field_json(field, path)
    raise ValueError(f"unknown export format {fmt!r}")


def read_field(path: Path):
    path = Path(path)
    return read_field_json(path) if path.suffix == ".json" else read_field_csv(path)


def write_curves_csv(curves: LevelCurves, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"#kind=curves\n#time={curves.time!r}\n#config_hash={curves.config_hash or ''}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_HEADER)
        for j, h in enumerate(curves.h):
            for i, x in enumerate(curves.x1):
                writer.writerow([repr(float(x)), repr(float(h)), repr(float(curves.gamma[j, i]))])
    return path


def read_curves_csv(path: Path) -> LevelCurves:
    meta: dict[str, str] = {}
    body: list[str] = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            meta[key] = value
        elif line.strip():
            body.append(line)
    rows = list(csv.reader(body))[1:]
    x = np.array([float(r[0]) for r in rows])
    h = np.array([float(r[1]) for r in rows])
    g = np.array([float(r[2]) for r in rows])
    levels = np.unique(h)
    n = len(x) // len(levels)
    return LevelCurves(
        time=float(meta["time"]),
        x1=x[:n],
        h=h[::n],
        gamma=g.reshape(len(levels), n),
        config_hash=meta.get("config_hash") or None,
    )
