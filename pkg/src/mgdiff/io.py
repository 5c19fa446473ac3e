"""Exporters (legacy VTK, CSV traces) and state persistence.

All data files are deterministic functions of their inputs: floats are
written with 17 significant digits (exact double round-trip), no
timestamps are embedded, and wall-clock times go to separate logs.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .amr import AmrTrace, TraceRow
from .mesh import AxisGrid, CartesianMesh
from .solver import StateVector


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _ravel_x_fastest(arr: np.ndarray) -> np.ndarray:
    """VTK expects x varying fastest; our arrays are indexed [x, y(, z)]."""
    return arr.ravel(order="F")


def export_vtk(path, mesh: CartesianMesh, cell_fields: dict, point_fields: dict |
               None = None, title: str | None = None) -> None:
    """Legacy ASCII rectilinear-grid file.

    `cell_fields` maps names to arrays of shape mesh.shape; `point_fields`
    to vertex arrays of shape (n+1 per axis).  2-D meshes are written as
    a single z-plane.
    """
    point_fields = point_fields or {}
    path = Path(path)
    d = mesh.dim
    dims = [ax.coords.size for ax in mesh.axes] + [1] * (3 - d)
    coords = [ax.coords for ax in mesh.axes] + [np.zeros(1)] * (3 - d)

    lines = ["# vtk DataFile Version 3.0"]
    lines.append(title if title else "mgdiff fields")
    lines.append("ASCII")
    lines.append("DATASET RECTILINEAR_GRID")
    lines.append(f"DIMENSIONS {dims[0]} {dims[1]} {dims[2]}")
    for name, c in zip(("X", "Y", "Z"), coords):
        lines.append(f"{name}_COORDINATES {c.size} double")
        lines.append(" ".join(_fmt(v) for v in c))

    if cell_fields:
        lines.append(f"CELL_DATA {mesh.n_cells}")
        for name, arr in cell_fields.items():
            arr = np.asarray(arr)
            if arr.shape != mesh.shape:
                raise ValueError(f"cell field {name!r} has shape {arr.shape}")
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(_fmt(v) for v in _ravel_x_fastest(arr))
    if point_fields:
        n_points = int(np.prod(dims))
        lines.append(f"POINT_DATA {n_points}")
        for name, arr in point_fields.items():
            arr = np.asarray(arr)
            want = tuple(ax.coords.size for ax in mesh.axes)
            if arr.shape != want:
                raise ValueError(f"point field {name!r} has shape {arr.shape}")
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(_fmt(v) for v in _ravel_x_fastest(arr))
    path.write_text("\n".join(lines) + "\n")


def export_trace(path, trace: AmrTrace) -> None:
    """CSV with the fixed header iteration,n_cells,max_eta,keff."""
    if not trace.rows:
        raise ValueError("trace is empty")
    lines = ["iteration,n_cells,max_eta,keff"]
    for row in trace.rows:
        lines.append(f"{row.iteration},{row.n_cells},{_fmt(row.max_eta)},{_fmt(row.keff)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace(path) -> AmrTrace:
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != "iteration,n_cells,max_eta,keff":
        raise ValueError(f"{path}: not a trace file")
    trace = AmrTrace()
    for ln in lines[1:]:
        it, n, eta, k = ln.split(",")
        trace.rows.append(TraceRow(int(it), int(n), float(eta), float(k)))
    return trace


# -- state persistence --------------------------------------------------------


def save_state(directory, state: StateVector, problem_path: str | None = None,
               extra: dict | None = None) -> None:
    """Write a state as .npy arrays plus a JSON manifest (no timestamps)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    mesh = state.mesh
    manifest = {
        "dim": mesh.dim,
        "group_count": state.group_count,
        "axes": [list(map(float, ax.coords)) for ax in mesh.axes],
        "k": state.k,
        "amplitude": state.amplitude,
        "problem": problem_path,
    }
    if extra:
        manifest.update(extra)
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    np.save(directory / "flux.npy", state.flux)
    for ax in range(mesh.dim):
        arr = np.stack([state.currents[g][ax] for g in range(state.group_count)])
        np.save(directory / f"current_{'xyz'[ax]}.npy", arr)


def load_state(directory) -> tuple[StateVector, dict]:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    mesh = CartesianMesh(tuple(AxisGrid(np.asarray(c)) for c in manifest["axes"]))
    flux = np.load(directory / "flux.npy")
    currents = []
    stacks = [np.load(directory / f"current_{'xyz'[ax]}.npy") for ax in range(mesh.dim)]
    for g in range(manifest["group_count"]):
        currents.append([stacks[ax][g] for ax in range(mesh.dim)])
    state = StateVector(mesh=mesh, currents=currents, flux=flux,
                        k=manifest.get("k"), amplitude=manifest.get("amplitude", 1.0))
    return state, manifest
