"""Legacy-VTK (ASCII, version 3.0) export of solved fields.

The solid goes out as an unstructured grid of hexahedra with nodal
displacement vectors; each structure goes out as polydata (vertices for
rigid bodies, lines for beams, quads for shells) carrying base
translations and globalized rotations.  Output is a pure function of the
solution, so re-exports are byte-identical.
"""

from __future__ import annotations

import os

import numpy as np

from .mesh import SolidMesh
from .structures import GeneralizedField, StructureModel


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _points_block(pts: np.ndarray) -> list[str]:
    lines = [f"POINTS {pts.shape[0]} double"]
    lines += [" ".join(_fmt(v) for v in row) for row in pts]
    return lines


def _vectors_block(name: str, vecs: np.ndarray) -> list[str]:
    lines = [f"VECTORS {name} double"]
    lines += [" ".join(_fmt(v) for v in row) for row in vecs]
    return lines


def write_solid_vtk(path: str, mesh: SolidMesh, u_full: np.ndarray, title: str = "solid"):
    u = np.asarray(u_full, dtype=float).reshape(-1, 3)
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
    ]
    lines += _points_block(mesh.nodes)
    m = mesh.n_hexes
    lines.append(f"CELLS {m} {9 * m}")
    lines += ["8 " + " ".join(str(i) for i in hx) for hx in mesh.hexes]
    lines.append(f"CELL_TYPES {m}")
    lines += ["12"] * m
    lines.append(f"POINT_DATA {mesh.n_nodes}")
    lines += _vectors_block("displacement", u)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_structure_vtk(
    path: str, model: StructureModel, fld: GeneralizedField, title: str = "structure"
):
    pts = model.base_node_positions()
    theta_glob = fld.theta @ model.theta_axes.T if model.r else np.zeros_like(pts)
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET POLYDATA",
    ]
    lines += _points_block(pts)
    if model.base.dim == 0:
        lines.append("VERTICES 1 2")
        lines.append("1 0")
    elif model.base.dim == 1:
        m = model.base.n_elements
        lines.append(f"LINES {m} {3 * m}")
        lines += ["2 " + " ".join(str(i) for i in el) for el in model.base.elements]
    else:
        m = model.base.n_elements
        lines.append(f"POLYGONS {m} {5 * m}")
        lines += ["4 " + " ".join(str(i) for i in el) for el in model.base.elements]
    lines.append(f"POINT_DATA {pts.shape[0]}")
    lines += _vectors_block("displacement", fld.sigma)
    lines += _vectors_block("rotation", theta_glob)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def export_fields(solution, mesh: SolidMesh, models: list[StructureModel], out_dir: str):
    """Write solid.vtk plus structure_###.vtk files into out_dir.

    Returns the list of written paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    solid_path = os.path.join(out_dir, "solid.vtk")
    write_solid_vtk(solid_path, mesh, solution.u_full)
    paths.append(solid_path)
    for i, model in enumerate(models):
        p = os.path.join(out_dir, f"structure_{i:03d}.vtk")
        write_structure_vtk(p, model, solution.fields[i], title=f"structure {i}")
        paths.append(p)
    return paths
