"""Lowest-order Raviart-Thomas spaces on Cartesian cells and operator assembly.

Degrees of freedom, per energy group:

  * one scalar per mesh face: the integrated normal flux through the
    face with the fixed global orientation +e_x (not the pointwise
    value), grouped by direction x and ordered lexicographically;
  * one scalar per cell: the piecewise-constant flux.

With this normalization the cell-to-face incidence B has entries +-1
(divergence theorem), and the per-direction velocity mass matrices are
tridiagonal along mesh lines:

  within cell K (width w along x, face area s = |K| / w):
      coupling of the two x-faces   a_K = w / (6 D s)
      each diagonal contribution    2 a_K

Removal and fission couplings are exactly diagonal over cells (constant
coefficients per cell, constant test functions), with entries
coefficient * |K|.

Boundary handling: zero-flux is natural (nothing added); reflective
eliminates the boundary current dof; vacuum adds the Robin term
(1 / mu) / s to the diagonal entry of each boundary face.

Assembly precomputes, per group and direction, the factorized
tridiagonal Schur systems A + B T^-1 B^T used by the inner iterations;
all cross-direction coupling goes through B T^-1 B^T only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .geometry import VACUUM, ProblemDefinition, material_index_array
from .materials import derive_coefficients
from .mesh import CartesianMesh
from .tridiag import thomas_factor, thomas_solve


@dataclass(frozen=True, eq=False)
class DofLayout:
    """Flat ordering [P_x .. P_z, Phi] per group, groups consecutive."""

    mesh: CartesianMesh
    group_count: int
    order: int = 0  # RT order; only 0 is implemented

    @property
    def face_counts(self) -> tuple[int, ...]:
        return self.mesh.n_faces

    @property
    def n_current(self) -> int:
        return sum(self.face_counts)

    @property
    def n_flux(self) -> int:
        return self.mesh.n_cells

    @property
    def group_stride(self) -> int:
        return self.n_current + self.n_flux

    @property
    def total(self) -> int:
        return self.group_count * self.group_stride

    def current_offset(self, g: int, axis: int) -> int:
        return g * self.group_stride + sum(self.face_counts[:axis])

    def flux_offset(self, g: int) -> int:
        return g * self.group_stride + self.n_current


def divergence(currents: list[np.ndarray]) -> np.ndarray:
    """Integrated divergence per cell, B^T P (sum of signed face diffs)."""
    out = np.diff(currents[0], axis=0)
    for ax in range(1, len(currents)):
        out = out + np.diff(currents[ax], axis=ax)
    return out


def cell_to_faces(v: np.ndarray, axis: int) -> np.ndarray:
    """Apply B along one direction: (B v)_F = v(left cell) - v(right cell).

    Domain-boundary faces take the one-sided value (missing neighbor = 0);
    reflective faces are handled by the caller via elimination.
    """
    shape = list(v.shape)
    shape[axis] += 1
    out = np.zeros(shape, dtype=float)
    lo = [slice(None)] * v.ndim
    hi = [slice(None)] * v.ndim
    lo[axis] = slice(0, -1)
    hi[axis] = slice(1, None)
    out[tuple(lo)] -= v
    out[tuple(hi)] += v
    return out


@dataclass(eq=False)
class LineSystem:
    """Factorized tridiagonal Schur systems of one (group, direction) pair."""

    axis: int
    lo: int        # first active face index along the axis
    hi: int        # one past the last active face index
    dinv: np.ndarray | None   # (n_lines, m_active)
    off: np.ndarray | None    # (n_lines, m_active - 1)

    @property
    def active(self) -> bool:
        return self.dinv is not None and self.dinv.shape[-1] > 0

    def solve(self, rhs_lines: np.ndarray) -> np.ndarray:
        return thomas_solve(self.dinv, self.off, rhs_lines)


class BlockOperators:
    """Assembled per-group operators on one mesh/problem pair."""

    def __init__(self, mesh: CartesianMesh, problem: ProblemDefinition):
        if mesh.dim != problem.dim:
            raise DimensionMismatch("mesh and problem dimensions differ")
        self.mesh = mesh
        self.problem = problem
        self.group_count = problem.group_count
        self.layout = DofLayout(mesh, self.group_count)

        self.names = problem.materials.names
        self.material_ids = material_index_array(problem.region_map, mesh, self.names)
        coeffs = [derive_coefficients(problem.materials[n]) for n in self.names]
        g = self.group_count
        nm = len(self.names)
        self.diffusion_mat = np.array([c.diffusion for c in coeffs])      # (nm, G)
        self.removal_mat = np.array([c.removal for c in coeffs])          # (nm, G, G)
        self.delta_mat = np.array([c.delta_e for c in coeffs])            # (nm, G)
        self.chi_mat = np.array([c.chi for c in coeffs])                  # (nm, G)
        self.nu_sigma_f_mat = np.array([c.nu_sigma_f for c in coeffs])    # (nm, G)
        assert self.removal_mat.shape == (nm, g, g)

        self.vol = mesh.cell_volumes
        ids = self.material_ids
        self.diffusion_cell = np.moveaxis(self.diffusion_mat[ids], -1, 0)
        self.delta_cell = np.moveaxis(self.delta_mat[ids], -1, 0)
        self.chi_cell = np.moveaxis(self.chi_mat[ids], -1, 0)
        self.nu_sigma_f_cell = np.moveaxis(self.nu_sigma_f_mat[ids], -1, 0)
        self.removal_diag = self.delta_cell * self.vol          # T^{g,g} entries
        self.inv_removal_diag = 1.0 / self.removal_diag
        self.has_fission = bool(np.any(self.nu_sigma_f_cell > 0))

        d = mesh.dim
        self._width_cell = [
            mesh.widths(ax).reshape([-1 if a == ax else 1 for a in range(d)])
            for ax in range(d)
        ]
        # trims from reflective faces (shared by all groups)
        self.trims = []
        for ax in range(d):
            lo = 1 if problem.boundary.is_reflective(ax, 0) else 0
            hi = mesh.shape[ax] + 1 - (1 if problem.boundary.is_reflective(ax, 1) else 0)
            self.trims.append((lo, hi))

        self._a_off = [
            [self._a_off_cell(gr, ax) for ax in range(d)] for gr in range(g)
        ]
        self.lines = [
            [self._build_lines(gr, ax) for ax in range(d)] for gr in range(g)
        ]

    # -- geometric helpers -------------------------------------------------

    def width_cell(self, axis: int) -> np.ndarray:
        """Cell widths along `axis`, broadcastable to cell shape."""
        return self._width_cell[axis]

    def face_area_cell(self, axis: int) -> np.ndarray:
        """Transverse area of the two `axis`-faces of each cell."""
        return self.vol / self._width_cell[axis]

    def scattering_coeff(self, g_to: int, g_from: int) -> np.ndarray | None:
        """In-scattering cross section sigma_s0[g_from -> g_to] per cell."""
        col = -self.removal_mat[:, g_to, g_from]
        if not np.any(col != 0.0):
            return None
        return col[self.material_ids]

    def removal_coeff(self, g_to: int, g_from: int) -> np.ndarray:
        return self.removal_mat[:, g_to, g_from][self.material_ids]

    # -- fission -----------------------------------------------------------

    def fission_density(self, flux: np.ndarray) -> np.ndarray:
        """sum_g nu_sigma_f[g] * flux[g], per cell."""
        return np.einsum("g...,g...->...", self.nu_sigma_f_cell, flux)

    def fission_vector(self, fission_cell: np.ndarray) -> np.ndarray:
        """Flux block of F Z given the fission density: chi_g |K| fiss."""
        return self.chi_cell * (self.vol * fission_cell)

    def source_moments(self) -> np.ndarray:
        src = self.problem.source
        if src is None:
            raise ValueError("problem has no source field")
        return src.cell_moments(self.mesh, self.material_ids, self.names)

    # -- assembly of per-direction systems ----------------------------------

    def _a_off_cell(self, g: int, axis: int) -> np.ndarray:
        w = self._width_cell[axis]
        return w * w / (6.0 * self.diffusion_cell[g] * self.vol)

    def _robin_terms(self, axis: int):
        """(side0, side1) Robin additions to boundary-face diagonals."""
        out = []
        for side in (0, 1):
            bc = self.problem.boundary.condition(axis, side)
            if bc.kind == VACUUM:
                sl = [slice(None)] * self.mesh.dim
                sl[axis] = 0 if side == 0 else -1
                area = self.face_area_cell(axis)[tuple(sl)]
                out.append((1.0 / bc.mu) / area)
            else:
                out.append(None)
        return out

    def a_diag_face(self, g: int, axis: int) -> np.ndarray:
        """Diagonal of the velocity mass matrix A on the full face set."""
        a_off = self._a_off[g][axis]
        diag = np.zeros(self.mesh.face_shape(axis))
        d = self.mesh.dim
        lo = [slice(None)] * d
        hi = [slice(None)] * d
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        diag[tuple(lo)] += 2.0 * a_off
        diag[tuple(hi)] += 2.0 * a_off
        r0, r1 = self._robin_terms(axis)
        if r0 is not None:
            sl = list(lo)
            sl[axis] = 0
            diag[tuple(sl)] += r0
        if r1 is not None:
            sl = list(hi)
            sl[axis] = -1
            diag[tuple(sl)] += r1
        return diag

    def _build_lines(self, g: int, axis: int) -> LineSystem:
        mesh = self.mesh
        d = mesh.dim
        n = mesh.shape[axis]
        lo, hi = self.trims[axis]
        if hi - lo <= 0:
            return LineSystem(axis, lo, hi, None, None)

        diag = self.a_diag_face(g, axis)
        invt = self.inv_removal_diag[g]
        sl_lo = [slice(None)] * d
        sl_hi = [slice(None)] * d
        sl_lo[axis] = slice(0, -1)
        sl_hi[axis] = slice(1, None)
        diag[tuple(sl_lo)] += invt
        diag[tuple(sl_hi)] += invt
        off = self._a_off[g][axis] - invt

        diag_lines = np.moveaxis(diag, axis, -1).reshape(-1, n + 1)[:, lo:hi].copy()
        off_lines = np.moveaxis(off, axis, -1).reshape(-1, n)[:, lo : hi - 1].copy()
        dinv = thomas_factor(diag_lines, off_lines)
        return LineSystem(axis, lo, hi, dinv, off_lines)

    def solve_direction(self, g: int, axis: int, rhs_face: np.ndarray,
                        out_face: np.ndarray) -> None:
        """Solve the direction block into out_face (inactive faces -> 0)."""
        ls = self.lines[g][axis]
        n = self.mesh.shape[axis]
        if not ls.active:
            out_face[...] = 0.0
            return
        moved = np.moveaxis(rhs_face, axis, -1)
        shape = moved.shape
        rhs_lines = np.ascontiguousarray(moved).reshape(-1, n + 1)
        x_full = np.zeros_like(rhs_lines)
        x_full[:, ls.lo : ls.hi] = ls.solve(rhs_lines[:, ls.lo : ls.hi])
        np.copyto(np.moveaxis(out_face, axis, -1), x_full.reshape(shape))

    def zero_inactive_faces(self, currents: list[np.ndarray]) -> None:
        """Force eliminated (reflective) boundary faces to zero."""
        for ax in range(self.mesh.dim):
            lo, hi = self.trims[ax]
            n = self.mesh.shape[ax]
            sl = [slice(None)] * self.mesh.dim
            if lo > 0:
                s = list(sl)
                s[ax] = slice(0, lo)
                currents[ax][tuple(s)] = 0.0
            if hi < n + 1:
                s = list(sl)
                s[ax] = slice(hi, None)
                currents[ax][tuple(s)] = 0.0


def assemble(mesh: CartesianMesh, problem: ProblemDefinition) -> BlockOperators:
    """Assemble all per-group block operators and the dof layout."""
    return BlockOperators(mesh, problem)


# -- matrix-free application (oracle / residual checks) ----------------------


def _unpack(layout: DofLayout, z: np.ndarray):
    if z.shape != (layout.total,):
        raise DimensionMismatch(f"vector length {z.shape} != layout total {layout.total}")
    mesh = layout.mesh
    currents, flux = [], []
    for g in range(layout.group_count):
        per_dir = []
        for ax in range(mesh.dim):
            o = layout.current_offset(g, ax)
            n = layout.face_counts[ax]
            per_dir.append(z[o : o + n].reshape(mesh.face_shape(ax)).copy())
        currents.append(per_dir)
        o = layout.flux_offset(g)
        flux.append(z[o : o + layout.n_flux].reshape(mesh.shape).copy())
    return currents, np.array(flux)


def _pack(layout: DofLayout, currents, flux) -> np.ndarray:
    z = np.empty(layout.total)
    for g in range(layout.group_count):
        for ax in range(layout.mesh.dim):
            o = layout.current_offset(g, ax)
            n = layout.face_counts[ax]
            z[o : o + n] = currents[g][ax].ravel()
        o = layout.flux_offset(g)
        z[o : o + layout.n_flux] = flux[g].ravel()
    return z


def apply_operator(ops: BlockOperators, z: np.ndarray, which: str = "M") -> np.ndarray:
    """Matrix-free y = M z or y = F z on the flat dof layout.

    Eliminated (reflective) current dofs are treated as zero on input and
    their rows are zero on output.
    """
    if which not in ("M", "F"):
        raise ValueError("which must be 'M' or 'F'")
    layout = ops.layout
    mesh = ops.mesh
    currents, flux = _unpack(layout, np.asarray(z, dtype=float))
    for g in range(layout.group_count):
        ops.zero_inactive_faces(currents[g])

    out_cur = [[None] * mesh.dim for _ in range(layout.group_count)]
    out_flux = np.zeros_like(flux)

    if which == "F":
        fiss = ops.fission_density(flux)
        for g in range(layout.group_count):
            out_flux[g] = ops.chi_cell[g] * ops.vol * fiss
            for ax in range(mesh.dim):
                out_cur[g][ax] = np.zeros(mesh.face_shape(ax))
        return _pack(layout, out_cur, out_flux)

    for g in range(layout.group_count):
        for ax in range(mesh.dim):
            p = currents[g][ax]
            a_off = ops._a_off[g][ax]
            y = ops.a_diag_face(g, ax) * p
            d = mesh.dim
            sl_lo = [slice(None)] * d
            sl_hi = [slice(None)] * d
            sl_lo[ax] = slice(0, -1)
            sl_hi[ax] = slice(1, None)
            y[tuple(sl_hi)] += a_off * p[tuple(sl_lo)]
            y[tuple(sl_lo)] += a_off * p[tuple(sl_hi)]
            y = -y + cell_to_faces(flux[g], ax)
            out_cur[g][ax] = y
        ops.zero_inactive_faces(out_cur[g])
        acc = divergence(currents[g])
        for gp in range(layout.group_count):
            acc = acc + ops.removal_coeff(g, gp) * ops.vol * flux[gp]
        out_flux[g] = acc
    return _pack(layout, out_cur, out_flux)
