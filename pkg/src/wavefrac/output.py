"""ASCII VTU snapshots and the CSV step trace."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Mapping
import xml.etree.ElementTree as ET

import numpy as np

from .mesh import Mesh

TRACE_COLUMNS = ("step", "t", "dt", "kind", "energy", "dissipation", "cracked_nodes", "gmres_iters")
_VTK_QUAD = 9


def _data_array(parent, name: str, values: np.ndarray):
    values = np.asarray(values, dtype=float)
    comps = 1 if values.ndim == 1 else values.shape[1]
    if comps == 2:      # VTK vectors are 3D
        values = np.column_stack([values, np.zeros(len(values))])
        comps = 3
    node = ET.SubElement(parent, "DataArray", type="Float64", Name=name,
                         NumberOfComponents=str(comps), format="ascii")
    node.text = " ".join(repr(float(v)) for v in values.ravel())


def write_vtu(mesh: Mesh, path, point_data: Mapping[str, np.ndarray] | None = None,
              cell_data: Mapping[str, np.ndarray] | None = None) -> Path:
    """Unstructured grid of bilinear quads; vectors of length 2 are padded to 3."""
    point_data, cell_data = dict(point_data or {}), dict(cell_data or {})
    nv, nc = mesh.n_vertices, mesh.n_cells
    for name, arr in point_data.items():
        if len(arr) != nv:
            raise ValueError(f"point field {name!r} has {len(arr)} values for {nv} points")
    for name, arr in cell_data.items():
        if len(arr) != nc:
            raise ValueError(f"cell field {name!r} has {len(arr)} values for {nc} cells")
    root = ET.Element("VTKFile", type="UnstructuredGrid", version="0.1", byte_order="LittleEndian")
    piece = ET.SubElement(ET.SubElement(root, "UnstructuredGrid"), "Piece",
                          NumberOfPoints=str(nv), NumberOfCells=str(nc))
    pts = ET.SubElement(piece, "Points")
    _data_array(pts, "Points", mesh.vertices)
    cells = ET.SubElement(piece, "Cells")
    for name, vals, typ in (("connectivity", mesh.cells.ravel(), "Int64"),
                            ("offsets", 4 * np.arange(1, nc + 1), "Int64"),
                            ("types", np.full(nc, _VTK_QUAD), "UInt8")):
        node = ET.SubElement(cells, "DataArray", type=typ, Name=name, format="ascii")
        node.text = " ".join(str(int(v)) for v in vals)
    if point_data:
        pd = ET.SubElement(piece, "PointData")
        for name, arr in point_data.items():
            _data_array(pd, name, arr)
    if cell_data:
        cd = ET.SubElement(piece, "CellData")
        for name, arr in cell_data.items():
            _data_array(cd, name, arr)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ET.ElementTree(root).write(path, xml_declaration=True, encoding="utf-8")
    return path


def read_vtu_counts(path) -> tuple[int, int]:
    piece = ET.parse(path).getroot().find("UnstructuredGrid/Piece")
    return int(piece.get("NumberOfPoints")), int(piece.get("NumberOfCells"))


def write_trace(records: Iterable, path) -> Path:
    """One row per step; floats are written with repr so they read back exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for r in records:
            writer.writerow([r.step, repr(float(r.t)), repr(float(r.dt)), r.kind,
                             repr(float(r.energy)), repr(float(r.dissipation)),
                             r.cracked_nodes, r.gmres_iters])
    return path


def read_trace(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace header {reader.fieldnames}")
        rows = []
        for row in reader:
            rows.append({"step": int(row["step"]), "t": float(row["t"]), "dt": float(row["dt"]),
                         "kind": row["kind"], "energy": float(row["energy"]),
                         "dissipation": float(row["dissipation"]),
                         "cracked_nodes": int(row["cracked_nodes"]),
                         "gmres_iters": int(row["gmres_iters"])})
        return rows
