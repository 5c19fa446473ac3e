"""Per-cell residual and flux error estimators and the weighted norm.

For a reconstruction (p_h, phi_tilde) the local estimators are

  eta_r,K = || delta^-1/2 (S - div p_h - T phi_tilde) ||_{0,K}
  eta_f,K = || D^1/2 (D^-1 p_h + grad phi_tilde) ||_{0,K}

summed over groups inside the norms (delta is the removal diagonal).  In
criticality mode the source is S = (1/k) chi x (nu sigma_f . phi_tilde)
by default (a switch falls back to the piecewise-constant flux).  The
local indicator combines a cell's residual part with the flux parts of
its facet neighbors (the cell included):

  eta_K^2 = eta_r,K^2 + sum_{K' in N(K)} eta_f,K'^2

All integrands are tensor polynomials of degree <= 4 per axis, so the
default 3-point Gauss rule per axis integrates them exactly.

The weighted norm used as an effectivity diagnostic is

  ||(p, phi)||_{S,MG}^2 = sum_K ||D^-1/2 p||^2 + ||delta^1/2 phi||^2
                          + h_K^2 / D_K^min ||div p||^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import BlockOperators, divergence
from .geometry import SOURCE
from .quadrature import QuadratureRule, tensor_rule
from .reconstruct import NodalField, field_cell_gradients, field_cell_values

DEFAULT_RULE = QuadratureRule.gauss(3)
_CHUNK_TARGET = 200_000  # cells per evaluation chunk


@dataclass(eq=False)
class CellEstimators:
    eta_r: np.ndarray
    eta_f: np.ndarray
    eta: np.ndarray

    @property
    def eta_global(self) -> float:
        return float(np.sqrt(np.sum(self.eta**2)))

    @property
    def max_eta(self) -> float:
        return float(np.max(self.eta))


def _x_chunks(mesh):
    per_x = int(np.prod(mesh.shape[1:]))
    step = max(1, _CHUNK_TARGET // max(per_x, 1))
    for i0 in range(0, mesh.shape[0], step):
        yield slice(i0, min(i0 + step, mesh.shape[0]))


def current_cell_values(ops: BlockOperators, state, ref_pts: np.ndarray,
                        chunk: slice = slice(None)) -> np.ndarray:
    """Pointwise current components inside cells: (G, d, *chunk, npts).

    The RT0 component along an axis interpolates linearly between the
    two face values divided by the face area; transverse variation is
    constant.
    """
    mesh = ops.mesh
    d = mesh.dim
    ref_pts = np.atleast_2d(ref_pts)
    i0, i1, _ = chunk.indices(mesh.shape[0])
    out = np.empty((ops.group_count, d)
                   + (i1 - i0,) + mesh.shape[1:] + (ref_pts.shape[0],))
    for ax in range(d):
        area = ops.face_area_cell(ax)[chunk]
        t = ref_pts[:, ax]
        for g in range(ops.group_count):
            p = state.currents[g][ax]
            p = p[slice(i0, i1 + 1) if ax == 0 else chunk]
            sl_m = [slice(None)] * d
            sl_p = [slice(None)] * d
            sl_m[ax] = slice(0, -1)
            sl_p[ax] = slice(1, None)
            p_m = p[tuple(sl_m)][..., None]
            p_p = p[tuple(sl_p)][..., None]
            out[g, ax] = (p_m * (1.0 - t) + p_p * t) / area[..., None]
    return out


def _estimate_pass(ops: BlockOperators, state, field: NodalField,
                   rule: QuadratureRule, want_r: bool, want_f: bool,
                   use_reconstructed_fission: bool):
    mesh = ops.mesh
    d = mesh.dim
    pts, wts = tensor_rule(rule, d)
    eta_r2 = np.zeros(mesh.shape) if want_r else None
    eta_f2 = np.zeros(mesh.shape) if want_f else None

    if want_r:
        if ops.problem.mode == SOURCE:
            k = None
        else:
            k = state.k
            if not k:
                raise ValueError("criticality estimator needs the converged k")
        div_cell = np.stack(
            [divergence(state.currents[g]) for g in range(ops.group_count)]
        ) / ops.vol

    for chunk in _x_chunks(mesh):
        vals = field_cell_values(field, pts, chunk)          # (G, ..., npts)
        if want_f:
            grads = field_cell_gradients(field, pts, chunk)  # (G, d, ..., npts)
            pvals = current_cell_values(ops, state, pts, chunk)
            dch = ops.diffusion_cell[(slice(None), chunk)][..., None]
            err = pvals / np.sqrt(dch[:, None]) + np.sqrt(dch[:, None]) * grads
            integrand = np.einsum("gc...p,gc...p->...p", err, err)
            eta_f2[chunk] = np.einsum("...p,p->...", integrand, wts) * ops.vol[chunk]
        if want_r:
            if ops.problem.mode == SOURCE:
                s_vals = ops.problem.source.values_cellwise(
                    mesh, ops.material_ids, ops.names, pts, chunk
                )
            else:
                if use_reconstructed_fission:
                    fiss = np.einsum(
                        "g...,g...p->...p",
                        ops.nu_sigma_f_cell[(slice(None), chunk)], vals,
                    )
                else:
                    fiss = (ops.fission_density(state.flux)[chunk])[..., None]
                s_vals = ops.chi_cell[(slice(None), chunk)][..., None] * fiss / k
            acc = np.zeros(vals.shape[1:-1])
            for g in range(ops.group_count):
                r = s_vals[g] - div_cell[g][chunk][..., None]
                for gp in range(ops.group_count):
                    if np.any(ops.removal_mat[:, g, gp] != 0.0):
                        r = r - ops.removal_coeff(g, gp)[chunk][..., None] * vals[gp]
                acc += np.einsum("...p,p->...", r * r, wts) / ops.delta_cell[g][chunk]
            eta_r2[chunk] = acc * ops.vol[chunk]
    return eta_r2, eta_f2


def residual_estimator(ops: BlockOperators, state, field: NodalField,
                       rule: QuadratureRule = DEFAULT_RULE,
                       use_reconstructed_fission: bool = True) -> np.ndarray:
    """eta_r per cell (array of shape mesh.shape)."""
    r2, _ = _estimate_pass(ops, state, field, rule, True, False,
                           use_reconstructed_fission)
    return np.sqrt(r2)


def flux_estimator(ops: BlockOperators, state, field: NodalField,
                   rule: QuadratureRule = DEFAULT_RULE) -> np.ndarray:
    """eta_f per cell (array of shape mesh.shape)."""
    _, f2 = _estimate_pass(ops, state, field, rule, False, True, True)
    return np.sqrt(f2)


def total_indicator(mesh, eta_r: np.ndarray, eta_f: np.ndarray) -> CellEstimators:
    """Combine per-cell parts; the neighbor set includes the cell itself."""
    ef2 = eta_f**2
    nsum = ef2.copy()
    for ax in range(mesh.dim):
        lo = [slice(None)] * mesh.dim
        hi = [slice(None)] * mesh.dim
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        nsum[tuple(lo)] += ef2[tuple(hi)]
        nsum[tuple(hi)] += ef2[tuple(lo)]
    eta = np.sqrt(eta_r**2 + nsum)
    return CellEstimators(eta_r=eta_r, eta_f=eta_f, eta=eta)


def estimate(ops: BlockOperators, state, field: NodalField,
             rule: QuadratureRule = DEFAULT_RULE,
             use_reconstructed_fission: bool = True) -> CellEstimators:
    """Both estimators plus the composed local indicator in one pass.

    The state must be at the scale the thresholds refer to (for
    criticality runs: `state.scaled_copy()`, the amplitude an
    unnormalized power iteration started from unit flux would carry).
    """
    r2, f2 = _estimate_pass(ops, state, field, rule, True, True,
                            use_reconstructed_fission)
    return total_indicator(ops.mesh, np.sqrt(r2), np.sqrt(f2))


# -- weighted norm ------------------------------------------------------------


def smg_norm(ops: BlockOperators, state=None, field: NodalField | None = None,
             sampler=None, rule: QuadratureRule = DEFAULT_RULE) -> float:
    """Weighted norm of a discrete pair or of a sampled (error) field.

    Either pass `state` (+ optional `field`, defaulting to the raw
    piecewise-constant flux) or a `sampler(chunk, ref_pts)` returning
    (p (G,d,...,npts), phi (G,...,npts), divp (G,...,npts)).
    """
    mesh = ops.mesh
    pts, wts = tensor_rule(rule, mesh.dim)
    if sampler is None:
        if state is None:
            raise ValueError("pass a state or a sampler")
        div_cell = np.stack(
            [divergence(state.currents[g]) for g in range(ops.group_count)]
        ) / ops.vol

        def sampler(chunk, ref_pts):
            p = current_cell_values(ops, state, ref_pts, chunk)
            if field is not None:
                phi = field_cell_values(field, ref_pts, chunk)
            else:
                phi = np.repeat(
                    state.flux[(slice(None), chunk)][..., None],
                    ref_pts.shape[0], axis=-1,
                )
            dv = np.repeat(
                div_cell[(slice(None), chunk)][..., None], ref_pts.shape[0], axis=-1
            )
            return p, phi, dv

    h2 = mesh.cell_diameters() ** 2
    dmin = ops.diffusion_cell.min(axis=0)
    total = 0.0
    for chunk in _x_chunks(mesh):
        p, phi, divp = sampler(chunk, pts)
        dch = ops.diffusion_cell[(slice(None), chunk)][..., None]
        delta = ops.delta_cell[(slice(None), chunk)][..., None]
        vol = ops.vol[chunk]
        ip = np.einsum("gc...p,gc...p->...p", p / np.sqrt(dch[:, None]),
                       p / np.sqrt(dch[:, None]))
        iphi = np.einsum("g...p,g...p->...p", np.sqrt(delta) * phi,
                         np.sqrt(delta) * phi)
        idiv = np.einsum("g...p,g...p->...p", divp, divp)
        cell_p = np.einsum("...p,p->...", ip, wts) * vol
        cell_phi = np.einsum("...p,p->...", iphi, wts) * vol
        cell_div = np.einsum("...p,p->...", idiv, wts) * vol
        total += float(np.sum(cell_p + cell_phi + h2[chunk] / dmin[chunk] * cell_div))
    return float(np.sqrt(total))
