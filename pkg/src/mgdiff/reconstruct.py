"""Continuous flux reconstructions from the discrete mixed solution.

Three operators produce a continuous tensor-polynomial nodal field from
the piecewise-constant flux (the current is kept as is):

  average       order-1 nodes, node value = mean over adjacent cells;
  average_plus  same averaging on the order-2 node set;
  postprocess   facet multipliers are recovered cell-locally from the
                momentum equation, a per-cell quadratic-per-axis field
                is fitted to the facet means and the cell mean, and its
                nodal averages give the order-2 field.

Nodes on zero-flux boundary planes are forced to zero so the field is
conforming with the Dirichlet part of the boundary; reflective and Robin
planes keep their averaged values.

The multiplier recovery solves, in each cell and for each face, the
momentum equation tested with that face's basis function.  For a face
with width w, area s and coefficient D (cell values, group diagonal):

  lambda(+side) = phi - w / (D s) * (P_-/6 + P_+/3)
  lambda(-side) = phi + w / (D s) * (P_-/3 + P_+/6)

and the facet value is the mean of the two one-sided recoveries.  The
local fit has the closed form (centered coordinates xi in [-1, 1]):

  a1 = (lambda_+ - lambda_-) / 2
  a2 = 3/2 * ((lambda_+ + lambda_-)/2 - phi)
  a0 = phi - sum_axes a2 / 3

which satisfies every facet-mean and cell-mean constraint exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import SingularLocalSystem
from .fem import BlockOperators
from .geometry import BoundarySpec
from .mesh import CartesianMesh

AVERAGE = "average"
AVERAGE_PLUS = "average_plus"
POSTPROCESS = "postprocess"
RECONSTRUCTIONS = (AVERAGE, AVERAGE_PLUS, POSTPROCESS)


def lagrange_basis(q: int, t: np.ndarray) -> np.ndarray:
    """1-D Lagrange values at t in [0,1]; nodes at j/q; shape (npts, q+1)."""
    t = np.asarray(t, dtype=float)
    if q == 1:
        return np.stack([1.0 - t, t], axis=-1)
    if q == 2:
        return np.stack(
            [(2.0 * t - 1.0) * (t - 1.0), 4.0 * t * (1.0 - t), t * (2.0 * t - 1.0)],
            axis=-1,
        )
    raise ValueError("only orders 1 and 2 are implemented")


def lagrange_basis_deriv(q: int, t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if q == 1:
        one = np.ones_like(t)
        return np.stack([-one, one], axis=-1)
    if q == 2:
        return np.stack([4.0 * t - 3.0, 4.0 - 8.0 * t, 4.0 * t - 1.0], axis=-1)
    raise ValueError("only orders 1 and 2 are implemented")


@dataclass(eq=False)
class NodalField:
    """Continuous per-group field on the global tensor Lagrange nodes."""

    mesh: CartesianMesh
    order: int
    axis_nodes: tuple[np.ndarray, ...]
    values: np.ndarray  # (G, *node_shape)

    @property
    def group_count(self) -> int:
        return self.values.shape[0]

    @property
    def node_shape(self) -> tuple[int, ...]:
        return self.values.shape[1:]

    def vertex_values(self) -> np.ndarray:
        """Values at mesh vertices only, (G, nx+1, ny+1[, nz+1])."""
        q = self.order
        sl = (slice(None),) + tuple(slice(None, None, q) for _ in self.mesh.shape)
        return self.values[sl]

    def sample(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at arbitrary points (N, d) -> (G, N)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = self.mesh.dim
        q = self.order
        n = pts.shape[0]
        cell_idx, ref = [], []
        for ax in range(d):
            c = self.mesh.axes[ax].coords
            i = np.clip(np.searchsorted(c, pts[:, ax], side="right") - 1, 0, c.size - 2)
            cell_idx.append(i)
            ref.append((pts[:, ax] - c[i]) / (c[i + 1] - c[i]))
        basis = [lagrange_basis(q, ref[ax]) for ax in range(d)]
        out = np.zeros((self.group_count, n))
        for rel in product(range(q + 1), repeat=d):
            node_index = tuple(q * cell_idx[ax] + rel[ax] for ax in range(d))
            w = np.ones(n)
            for ax in range(d):
                w = w * basis[ax][:, rel[ax]]
            out += self.values[(slice(None),) + node_index] * w
        return out


def _axis_nodes(mesh: CartesianMesh, q: int) -> tuple[np.ndarray, ...]:
    nodes = []
    for ax in range(mesh.dim):
        c = mesh.axes[ax].coords
        if q == 1:
            nodes.append(c.copy())
        else:
            out = np.empty(2 * c.size - 1)
            out[::2] = c
            out[1::2] = 0.5 * (c[:-1] + c[1:])
            nodes.append(out)
    return tuple(nodes)


def _node_slice(rel: int, n: int, q: int) -> slice:
    return slice(rel, rel + q * (n - 1) + 1, q)


def _accumulate_means(mesh: CartesianMesh, q: int, group_count: int,
                      values_at_rel) -> np.ndarray:
    """Average per-cell nodal values into the global node array.

    `values_at_rel(rel)` returns the (G, *cellshape) values of the
    cellwise polynomials at the relative node position `rel`.
    """
    node_shape = tuple(q * n + 1 for n in mesh.shape)
    acc = np.zeros((group_count,) + node_shape)
    cnt = np.zeros(node_shape)
    for rel in product(range(q + 1), repeat=mesh.dim):
        sl = tuple(_node_slice(rel[ax], mesh.shape[ax], q) for ax in range(mesh.dim))
        acc[(slice(None),) + sl] += values_at_rel(rel)
        cnt[sl] += 1.0
    return acc / cnt


def _apply_dirichlet(values: np.ndarray, boundary: BoundarySpec) -> None:
    for ax in range(boundary.dim):
        for side in (0, 1):
            if boundary.is_zero_flux(ax, side):
                sl = [slice(None)] * values.ndim
                sl[1 + ax] = 0 if side == 0 else -1
                values[tuple(sl)] = 0.0


def average_reconstruction(mesh: CartesianMesh, flux: np.ndarray,
                           boundary: BoundarySpec) -> NodalField:
    """Order-1 nodal field: vertex value = mean of the adjacent cell values."""
    vals = _accumulate_means(mesh, 1, flux.shape[0], lambda rel: flux)
    _apply_dirichlet(vals, boundary)
    return NodalField(mesh, 1, _axis_nodes(mesh, 1), vals)


def average_plus_reconstruction(mesh: CartesianMesh, flux: np.ndarray,
                                boundary: BoundarySpec) -> NodalField:
    """Order-2 nodal field built by the same averaging on the finer node set."""
    vals = _accumulate_means(mesh, 2, flux.shape[0], lambda rel: flux)
    _apply_dirichlet(vals, boundary)
    return NodalField(mesh, 2, _axis_nodes(mesh, 2), vals)


# -- hybrid multipliers and local post-processing -----------------------------


@dataclass(eq=False)
class Multiplier:
    """One scalar per interior facet and group; boundary facets carry the
    Dirichlet/Robin data (zero-flux -> 0, reflective -> one-sided value)."""

    per_axis: list  # per_axis[ax]: (G, *face_shape(ax))


@dataclass(eq=False)
class PostProcessedField:
    """Per-cell coefficients of the quadratic-per-axis local fit.

    phi_hat(xi) = a0 + sum_ax (a1[ax] xi_ax + a2[ax] xi_ax^2) with
    xi in [-1, 1] relative cell coordinates.
    """

    a0: np.ndarray          # (G, *cellshape)
    a1: list                # a1[ax]: (G, *cellshape)
    a2: list

    def values_at(self, xi) -> np.ndarray:
        """Values at one relative position xi (length d) as (G, *cellshape)."""
        out = self.a0.copy()
        for ax, x in enumerate(xi):
            out += self.a1[ax] * x + self.a2[ax] * (x * x)
        return out

    def cell_means(self) -> np.ndarray:
        out = self.a0.copy()
        for ax in range(len(self.a1)):
            out += self.a2[ax] / 3.0
        return out

    def facet_means(self, axis: int, side: int) -> np.ndarray:
        """Mean over the +/- facet of each cell, (G, *cellshape)."""
        sgn = 1.0 if side == 1 else -1.0
        out = self.a0 + sgn * self.a1[axis] + self.a2[axis]
        for ax in range(len(self.a1)):
            if ax != axis:
                out = out + self.a2[ax] / 3.0
        return out


def recover_multipliers(state, operators: BlockOperators) -> Multiplier:
    """Facet multipliers from cell-local momentum tests.

    Interior facets average the two one-sided recoveries; zero-flux
    boundary facets carry 0, reflective ones the one-sided value, vacuum
    ones the Robin trace (p.n / mu).
    """
    ops = operators
    mesh = ops.mesh
    d = mesh.dim
    flux = state.flux
    out = []
    for ax in range(d):
        w = ops.width_cell(ax)
        area = ops.face_area_cell(ax)
        c = w / (ops.diffusion_cell * area)  # (G, *cellshape)
        sl_m = [slice(None)] * d
        sl_p = [slice(None)] * d
        sl_m[ax] = slice(0, -1)
        sl_p[ax] = slice(1, None)
        lam = np.zeros((ops.group_count,) + mesh.face_shape(ax))
        for g in range(ops.group_count):
            p = state.currents[g][ax]
            p_m = p[tuple(sl_m)]
            p_p = p[tuple(sl_p)]
            plus = flux[g] - c[g] * (p_m / 6.0 + p_p / 3.0)
            minus = flux[g] + c[g] * (p_m / 3.0 + p_p / 6.0)
            interior = [slice(None)] * d
            interior[ax] = slice(1, -1)
            lo = [slice(None)] * d
            hi = [slice(None)] * d
            lo[ax] = slice(0, -1)
            hi[ax] = slice(1, None)
            lam[g][tuple(interior)] = 0.5 * (plus[tuple(lo)] + minus[tuple(hi)])
            for side in (0, 1):
                face_sl = [slice(None)] * d
                face_sl[ax] = 0 if side == 0 else -1
                cell_sl = list(face_sl)
                bc = ops.problem.boundary.condition(ax, side)
                if bc.kind == "zero_flux":
                    lam[g][tuple(face_sl)] = 0.0
                elif bc.kind == "reflective":
                    one_sided = minus if side == 0 else plus
                    lam[g][tuple(face_sl)] = one_sided[tuple(cell_sl)]
                else:  # vacuum: phi = (p . n) / mu on the boundary
                    sgn = -1.0 if side == 0 else 1.0
                    pn = sgn * p[tuple(face_sl)] / area[tuple(cell_sl)]
                    lam[g][tuple(face_sl)] = pn / bc.mu
        out.append(lam)
    return Multiplier(out)


def project_Mh(flux: np.ndarray, multiplier: Multiplier,
               operators: BlockOperators) -> PostProcessedField:
    """Fit the per-cell quadratic-per-axis field to facet and cell means.

    The cell-mean block couples the groups through the removal matrix,
    but since that matrix is invertible the constraint reduces to
    mean(phi_hat) = phi groupwise, giving a closed-form solution.
    """
    mesh = operators.mesh
    d = mesh.dim
    a1, a2 = [], []
    sum_a2 = np.zeros_like(flux)
    for ax in range(d):
        lam = multiplier.per_axis[ax]
        sl_m = [slice(None)] * (d + 1)
        sl_p = [slice(None)] * (d + 1)
        sl_m[1 + ax] = slice(0, -1)
        sl_p[1 + ax] = slice(1, None)
        lam_m = lam[tuple(sl_m)]
        lam_p = lam[tuple(sl_p)]
        u = 0.5 * (lam_p + lam_m)
        a1.append(0.5 * (lam_p - lam_m))
        a2.append(1.5 * (u - flux))
        sum_a2 += a2[-1]
    a0 = flux - sum_a2 / 3.0
    if not (np.all(np.isfinite(a0)) and all(np.all(np.isfinite(a)) for a in a1 + a2)):
        raise SingularLocalSystem("post-processing produced non-finite coefficients")
    return PostProcessedField(a0=a0, a1=a1, a2=a2)


def rtn_postprocess(state, operators: BlockOperators,
                    multiplier: Multiplier | None = None) -> NodalField:
    """Order-2 nodal field from the local post-processing (currents untouched)."""
    ops = operators
    mesh = ops.mesh
    if multiplier is None:
        multiplier = recover_multipliers(state, ops)
    proj = project_Mh(state.flux, multiplier, ops)
    xi_of_rel = (-1.0, 0.0, 1.0)

    def values_at_rel(rel):
        return proj.values_at([xi_of_rel[r] for r in rel])

    vals = _accumulate_means(mesh, 2, ops.group_count, values_at_rel)
    _apply_dirichlet(vals, ops.problem.boundary)
    return NodalField(mesh, 2, _axis_nodes(mesh, 2), vals)


def reconstruct(state, operators: BlockOperators, kind: str) -> NodalField:
    """Dispatch on the reconstruction kind."""
    if kind == AVERAGE:
        return average_reconstruction(operators.mesh, state.flux,
                                      operators.problem.boundary)
    if kind == AVERAGE_PLUS:
        return average_plus_reconstruction(operators.mesh, state.flux,
                                           operators.problem.boundary)
    if kind == POSTPROCESS:
        return rtn_postprocess(state, operators)
    raise ValueError(f"unknown reconstruction {kind!r}")


# -- cellwise evaluation at reference points ----------------------------------


def field_cell_values(field: NodalField, ref_pts: np.ndarray,
                      chunk: slice = slice(None)) -> np.ndarray:
    """Values at reference points (npts, d) in every cell of an x-chunk.

    Returns (G, *chunk_cellshape, npts).
    """
    return _field_eval(field, ref_pts, chunk, grad_axis=None)


def field_cell_gradients(field: NodalField, ref_pts: np.ndarray,
                         chunk: slice = slice(None)) -> np.ndarray:
    """Physical gradients at reference points: (G, d, *chunk_cellshape, npts)."""
    mesh = field.mesh
    out = [
        _field_eval(field, ref_pts, chunk, grad_axis=ax) for ax in range(mesh.dim)
    ]
    return np.stack(out, axis=1)


def _local_node_gather(field: NodalField, chunk: slice):
    """Node values per cell: (G, *chunk_cellshape, (q+1)^d tensor dims)."""
    mesh = field.mesh
    q = field.order
    d = mesh.dim
    idx = []
    for ax in range(d):
        rng = np.arange(mesh.shape[ax])
        if ax == 0:
            rng = rng[chunk]
        idx.append(q * rng[:, None] + np.arange(q + 1)[None, :])
    out = []
    for g in range(field.group_count):
        t = field.values[g][idx[0]]           # (cx, q1, NY[, NZ])
        t = t[:, :, idx[1]]                   # (cx, q1, cy, q1[, NZ])
        if d == 3:
            t = t[:, :, :, :, idx[2]]         # (cx, q1, cy, q1, cz, q1)
            t = t.transpose(0, 2, 4, 1, 3, 5)
        else:
            t = t.transpose(0, 2, 1, 3)
        out.append(t)
    return np.stack(out, axis=0)


def _field_eval(field: NodalField, ref_pts: np.ndarray, chunk: slice, grad_axis):
    mesh = field.mesh
    d = mesh.dim
    q = field.order
    ref_pts = np.atleast_2d(ref_pts)
    basis = []
    for ax in range(d):
        if grad_axis == ax:
            basis.append(lagrange_basis_deriv(q, ref_pts[:, ax]))
        else:
            basis.append(lagrange_basis(q, ref_pts[:, ax]))
    local = _local_node_gather(field, chunk)
    if d == 3:
        vals = np.einsum("pa,pb,pc,gijkabc->gijkp", basis[0], basis[1], basis[2],
                         local, optimize=True)
    else:
        vals = np.einsum("pa,pb,gijab->gijp", basis[0], basis[1], local,
                         optimize=True)
    if grad_axis is not None:
        w = mesh.widths(grad_axis)
        if grad_axis == 0:
            w = w[chunk]
        shape = [1] * (d + 2)
        shape[1 + grad_axis] = w.size
        vals = vals / w.reshape(shape)
    return vals
