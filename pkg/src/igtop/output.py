"""File formats: iteration history, design vectors, interface and VTK export.

Everything is plain text. Floats are written with 17 significant digits so a
written-and-reread value is bitwise identical to the original.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .driver import HistoryRecord
from .enrich import EnrichedModel, MATERIAL
from .errors import ConfigError

_FLOAT = "%.17g"
HISTORY_FIELDS = ("iteration", "compliance", "volume_fraction",
                  "enriched_dofs")


def write_history(path, records) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HISTORY_FIELDS)
        for r in records:
            w.writerow([r.iteration, _FLOAT % r.compliance,
                        _FLOAT % r.volume_fraction, r.enriched_dofs])


def read_history(path) -> list:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != HISTORY_FIELDS:
            raise ConfigError(f"{path} is not a history file: header {header}")
        out = []
        for row in reader:
            out.append(HistoryRecord(iteration=int(row[0]),
                                     compliance=float(row[1]),
                                     volume_fraction=float(row[2]),
                                     enriched_dofs=int(row[3])))
    return out


def write_design(path, design: np.ndarray) -> None:
    """One design coefficient per line."""
    design = np.asarray(design, dtype=float)
    path = Path(path)
    with path.open("w") as fh:
        fh.write("design\n")
        for v in design:
            fh.write(_FLOAT % v + "\n")


def read_design(path) -> np.ndarray:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip()
        if header != "design":
            raise ConfigError(f"{path} is not a design file")
        try:
            values = [float(line) for line in fh if line.strip()]
        except ValueError as err:
            raise ConfigError(f"{path}: {err}") from err
    return np.array(values)


def write_contour(path, model: EnrichedModel) -> None:
    """Material-boundary polyline segments, one cut parent per line.

    Each line holds ``x1 y1 x2 y2``: the straight interface segment joining
    the parent's two edge-intersection points.
    """
    path = Path(path)
    with path.open("w") as fh:
        for row in range(model.n_cut):
            a, b = model.enr_coords[model.parent_slots[row]]
            fh.write(f"{_FLOAT % a[0]} {_FLOAT % a[1]} "
                     f"{_FLOAT % b[0]} {_FLOAT % b[1]}\n")


def write_vtk(path, model: EnrichedModel, title: str = "igtop design") -> None:
    """Legacy ASCII VTK unstructured grid of the resolved geometry.

    Uncut elements are exported as-is; each cut parent is replaced by its
    three interface-conforming integration triangles. A cell scalar marks
    the phase (1 material, 0 void).
    """
    mesh = model.mesh
    points = np.vstack([mesh.nodes, model.enr_coords]) \
        if model.n_enriched else mesh.nodes
    cells = []
    phase = []
    cut = set(int(e) for e in model.cut_parents)
    for e in range(mesh.n_elements):
        if e in cut:
            continue
        cells.append(mesh.elements[e])
        phase.append(1 if model.element_state[e] == MATERIAL else 0)
    for ie in model.integration:
        cells.append(ie.vertex_ids)
        phase.append(1 if ie.material else 0)

    path = Path(path)
    with path.open("w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title.replace("\n", " ")[:255] + "\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(points)} double\n")
        for p in points:
            fh.write(f"{_FLOAT % p[0]} {_FLOAT % p[1]} 0\n")
        fh.write(f"CELLS {len(cells)} {4 * len(cells)}\n")
        for c in cells:
            fh.write(f"3 {c[0]} {c[1]} {c[2]}\n")
        fh.write(f"CELL_TYPES {len(cells)}\n")
        fh.write("5\n" * len(cells))
        fh.write(f"CELL_DATA {len(cells)}\n")
        fh.write("SCALARS material int 1\nLOOKUP_TABLE default\n")
        fh.write("".join(f"{m}\n" for m in phase))
