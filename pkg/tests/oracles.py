"""Independent oracles used across the test suite.

The dense assembler below builds the block operator matrices directly
from local closed-form integrals (velocity mass h/(3 D s) and h/(6 D s),
incidence +-1, removal/fission coefficient * volume) by looping over
cells.  It shares no code with the production assembly and is the
reference for the matrix-free operators and sweep solvers.
"""

import itertools

import numpy as np


def dense_operator(ops, which="M"):
    """Dense M or F on the full dof layout of `ops` (reflective dofs get
    identity rows so the matrix stays invertible)."""
    mesh, lay = ops.mesh, ops.layout
    G, d = ops.group_count, mesh.dim
    N = lay.total
    M = np.zeros((N, N))
    shape = mesh.shape
    w = [mesh.widths(ax) for ax in range(d)]

    def fidx(g, ax, multi):
        return lay.current_offset(g, ax) + int(
            np.ravel_multi_index(multi, mesh.face_shape(ax))
        )

    def cidx(g, multi):
        return lay.flux_offset(g) + int(np.ravel_multi_index(multi, shape))

    for K in itertools.product(*(range(n) for n in shape)):
        vol = float(ops.vol[K])
        mid = ops.material_ids[K]
        for g in range(G):
            if which == "F":
                for gp in range(G):
                    M[cidx(g, K), cidx(gp, K)] += (
                        ops.chi_mat[mid, g] * ops.nu_sigma_f_mat[mid, gp] * vol
                    )
                continue
            D = ops.diffusion_mat[mid, g]
            for ax in range(d):
                wk = w[ax][K[ax]]
                area = vol / wk
                fp = list(K)
                fp[ax] += 1
                im, ip = fidx(g, ax, K), fidx(g, ax, tuple(fp))
                a = wk / (D * area)
                M[im, im] -= a / 3.0
                M[ip, ip] -= a / 3.0
                M[im, ip] -= a / 6.0
                M[ip, im] -= a / 6.0
                M[im, cidx(g, K)] -= 1.0
                M[ip, cidx(g, K)] += 1.0
                M[cidx(g, K), im] -= 1.0
                M[cidx(g, K), ip] += 1.0
            for gp in range(G):
                M[cidx(g, K), cidx(gp, K)] += ops.removal_mat[mid, g, gp] * vol

    if which == "M":
        for ax in range(d):
            for side in (0, 1):
                bc = ops.problem.boundary.condition(ax, side)
                if bc.kind != "vacuum":
                    continue
                for K in itertools.product(*(range(n) for n in shape)):
                    if K[ax] != (0 if side == 0 else shape[ax] - 1):
                        continue
                    f = list(K)
                    f[ax] = 0 if side == 0 else shape[ax]
                    area = float(ops.vol[K]) / w[ax][K[ax]]
                    for g in range(G):
                        i = fidx(g, ax, tuple(f))
                        M[i, i] -= (1.0 / bc.mu) / area
        elim = eliminated_indices(ops)
        M[elim, :] = 0.0
        M[:, elim] = 0.0
        M[elim, elim] = 1.0
    return M


def eliminated_indices(ops):
    """Flat indices of reflective boundary current dofs."""
    mesh, lay = ops.mesh, ops.layout
    out = []
    for g in range(ops.group_count):
        for ax in range(mesh.dim):
            lo, hi = ops.trims[ax]
            fs = mesh.face_shape(ax)
            for multi in itertools.product(*(range(n) for n in fs)):
                if multi[ax] < lo or multi[ax] >= hi:
                    out.append(
                        lay.current_offset(g, ax)
                        + int(np.ravel_multi_index(multi, fs))
                    )
    return np.array(sorted(out), dtype=int)


def dense_solve(ops, rhs):
    """Direct solve of M z = rhs with eliminated dofs pinned to zero."""
    M = dense_operator(ops, "M")
    elim = eliminated_indices(ops)
    b = rhs.copy()
    b[elim] = 0.0
    z = np.linalg.solve(M, b)
    z[elim] = 0.0
    return z


def read_vtk_rectilinear(path):
    """Minimal legacy-VTK rectilinear reader for round-trip checks."""
    lines = open(path).read().splitlines()
    assert lines[0].startswith("# vtk DataFile")
    title = lines[1]
    assert lines[2] == "ASCII" and lines[3] == "DATASET RECTILINEAR_GRID"
    dims = tuple(int(v) for v in lines[4].split()[1:])
    i = 5
    coords = {}
    for name in ("X", "Y", "Z"):
        head = lines[i].split()
        assert head[0] == f"{name}_COORDINATES"
        n = int(head[1])
        coords[name] = np.array([float(v) for v in lines[i + 1].split()])
        assert coords[name].size == n
        i += 2
    fields = {"cell": {}, "point": {}}
    section = None
    while i < len(lines):
        parts = lines[i].split()
        if not parts:
            i += 1
            continue
        if parts[0] == "CELL_DATA":
            section, count = "cell", int(parts[1])
            i += 1
        elif parts[0] == "POINT_DATA":
            section, count = "point", int(parts[1])
            i += 1
        elif parts[0] == "SCALARS":
            name = parts[1]
            assert lines[i + 1].startswith("LOOKUP_TABLE")
            vals = np.array([float(lines[i + 2 + j]) for j in range(count)])
            fields[section][name] = vals
            i += 2 + count
        else:
            i += 1
    return {"title": title, "dims": dims, "coords": coords, **fields}
