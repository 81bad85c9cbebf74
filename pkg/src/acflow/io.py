"""Snapshot and report serialization.

Field snapshots are a one-line JSON header (dim, points_per_axis, extent,
epsilon, time) followed by the raw little-endian float64 block, row-major.
Diagnostics tables are CSV with a fixed column order.  All floats are
written with repr-stable formatting so reruns are byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .grid import Grid, ScalarField

__all__ = [
    "write_field",
    "read_field",
    "DIAGNOSTICS_COLUMNS",
    "write_diagnostics_csv",
    "write_json",
]

DIAGNOSTICS_COLUMNS = (
    "time",
    "region_descriptor",
    "energy",
    "tilt_excess",
    "height_excess",
    "willmore",
    "discrepancy_l1",
    "discrepancy_max",
)


def _fmt(x: Any) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def write_field(field: ScalarField, path: str | Path) -> None:
    header = {
        "dim": field.grid.dim,
        "points_per_axis": field.grid.points,
        "extent": field.grid.extent,
        "epsilon": field.epsilon,
        "time": field.time,
    }
    blob = field.values.astype("<f8").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(blob)


def read_field(path: str | Path) -> ScalarField:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        header = json.loads(header_line.decode("utf-8"))
        blob = fh.read()
    grid = Grid(dim=header["dim"], extent=header["extent"], points=header["points_per_axis"])
    values = np.frombuffer(blob, dtype="<f8").reshape(grid.shape)
    return ScalarField(
        grid=grid, values=values, epsilon=header["epsilon"], time=header["time"]
    )


def write_diagnostics_csv(rows: Iterable[Mapping[str, Any]], path: str | Path) -> None:
    lines = [",".join(DIAGNOSTICS_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(row[col]) for col in DIAGNOSTICS_COLUMNS))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_table_csv(columns: Sequence[str], rows: Iterable[Sequence[Any]], path: str | Path) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_graph_csv(graph, path: str | Path) -> None:
    """Level-set graph rows: t, base coordinates, height, valid flag."""
    base_dim = graph.heights.ndim - 1
    columns = ["t"] + [f"x{i + 1}" for i in range(base_dim)] + ["h", "valid"]
    n = graph.heights.shape[1]
    axis = -0.5 * graph.base_extent + graph.base_spacing * np.arange(n)
    rows = []
    for ti, t in enumerate(graph.times):
        for idx in np.ndindex(graph.heights.shape[1:]):
            coords = [axis[i] for i in idx]
            rows.append([t, *coords, graph.heights[(ti, *idx)], int(graph.valid[(ti, *idx)])])
    write_table_csv(columns, rows, path)


def write_json(payload: Mapping[str, Any], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n",
        encoding="utf-8",
    )


def _json_default(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"not JSON serializable: {type(obj)!r}")
