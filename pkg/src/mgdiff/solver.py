"""Nested iterative solver: power iteration, group sweeps, direction sweeps.

Criticality mode runs an inverse power iteration.  Each outer iteration
performs one Gauss-Seidel pass over the energy groups: the group-g block
system

    (A + B T^-1 B^T) P = B T^-1 S_phi - S_p,      Phi = T^-1 (S_phi - B^T P)

is solved by inner alternating-direction sweeps (Gauss-Seidel over the
direction blocks, one batch of independent SPD tridiagonal line systems
per direction).  On Cartesian meshes the velocity mass matrix is block
diagonal over directions, so directions couple only through B T^-1 B^T.
The eigenvalue update and the stopping residual are

    k+ = k (F Z+, F Z+) / (F Z, F Z+)
    eps = || F Z+ / k+  -  F Z / k ||_inf / || F Z+ / k+ ||_l1

The iterate is rescaled after every outer iteration so the fission
vector has unit l1 norm; the accumulated scale factor is kept on the
state (`amplitude`), so the physically scaled solution an unnormalized
iteration (flux starting at one) would produce is `amplitude` times the
stored arrays.  Estimator thresholds are calibrated against that scale.

Source mode runs the same sweeps with the assembled source moments in
place of the fission term and stops on the relative flux change.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateFissionSource,
    DimensionMismatch,
    MaxIterationsExceeded,
    ZeroFissionNorm,
)
from .fem import BlockOperators, DofLayout, assemble, apply_operator, cell_to_faces, divergence
from .geometry import CRITICALITY, SOURCE, ProblemDefinition
from .mesh import CartesianMesh, interval_parents
from .tridiag import solve_spd_tridiagonal


def line_solve(diag, off, rhs):
    """Direct solve of one (or a batch of) SPD tridiagonal system(s)."""
    return solve_spd_tridiagonal(diag, off, rhs)


@dataclass
class SolverConfig:
    outer_tol: float = 1e-6
    inner_tol: float = 1e-2        # relative l-inf change of P between sweeps
    max_inner_sweeps: int = 30
    max_outer: int = 2000
    chebyshev: bool = False
    chebyshev_cycle: int = 8
    initial_flux: float = 1.0
    # After the outer residual converges, the solution is polished with the
    # fission source frozen: the residual only watches the fission vector,
    # so flux in non-fissile regions (where the error indicators often
    # peak) can lag behind.  The polish is a plain linear solve and runs
    # at the sweep rate, not the power-iteration rate.
    polish_tol: float = 1e-6       # relative l-inf flux change; 0 disables
    max_polish: int = 200

    def __post_init__(self):
        if self.outer_tol <= 0 or self.inner_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(eq=False)
class StateVector:
    """Discrete solution: per-group currents (by direction) and cell fluxes.

    In criticality mode the stored arrays are normalized (unit l1 norm of
    the fission vector); `amplitude` converts to the physical scale.
    """

    mesh: CartesianMesh
    currents: list            # currents[g][ax]: face array
    flux: np.ndarray          # (G, *cellshape)
    k: float | None = None
    amplitude: float = 1.0

    @classmethod
    def initial(cls, mesh: CartesianMesh, group_count: int, flux_value: float = 1.0):
        currents = [
            [np.zeros(mesh.face_shape(ax)) for ax in range(mesh.dim)]
            for _ in range(group_count)
        ]
        flux = np.full((group_count,) + mesh.shape, float(flux_value))
        return cls(mesh=mesh, currents=currents, flux=flux)

    @property
    def group_count(self) -> int:
        return self.flux.shape[0]

    def copy(self) -> "StateVector":
        return StateVector(
            mesh=self.mesh,
            currents=[[p.copy() for p in per_g] for per_g in self.currents],
            flux=self.flux.copy(),
            k=self.k,
            amplitude=self.amplitude,
        )

    def scale(self, factor: float) -> None:
        self.flux *= factor
        for per_g in self.currents:
            for p in per_g:
                p *= factor

    def scaled_copy(self) -> "StateVector":
        """Physical-scale copy (amplitude applied, amplitude reset to 1)."""
        out = self.copy()
        out.scale(self.amplitude)
        out.amplitude = 1.0
        return out

    def to_vector(self, layout: DofLayout) -> np.ndarray:
        if layout.group_count != self.group_count or layout.mesh is not self.mesh:
            if layout.mesh.shape != self.mesh.shape:
                raise DimensionMismatch("layout does not match state")
        z = np.empty(layout.total)
        for g in range(self.group_count):
            for ax in range(self.mesh.dim):
                o = layout.current_offset(g, ax)
                n = layout.face_counts[ax]
                z[o : o + n] = self.currents[g][ax].ravel()
            o = layout.flux_offset(g)
            z[o : o + layout.n_flux] = self.flux[g].ravel()
        return z

    @classmethod
    def from_vector(cls, layout: DofLayout, z: np.ndarray, k: float | None = None):
        if z.shape != (layout.total,):
            raise DimensionMismatch("vector length does not match layout")
        mesh = layout.mesh
        currents, flux = [], []
        for g in range(layout.group_count):
            per = []
            for ax in range(mesh.dim):
                o = layout.current_offset(g, ax)
                n = layout.face_counts[ax]
                per.append(z[o : o + n].reshape(mesh.face_shape(ax)).copy())
            currents.append(per)
            o = layout.flux_offset(g)
            flux.append(z[o : o + layout.n_flux].reshape(mesh.shape).copy())
        return cls(mesh=mesh, currents=currents, flux=np.array(flux), k=k)


@dataclass
class IterationReport:
    eps_history: list[float] = field(default_factory=list)
    k_history: list[float] = field(default_factory=list)
    inner_sweeps: list[list[int]] = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0

    @property
    def outer_iterations(self) -> int:
        return len(self.eps_history)


# -- elementary updates -------------------------------------------------------


def update_keff(k_old: float, fz_old: np.ndarray, fz_new: np.ndarray) -> float:
    """k+ = k (F Z+, F Z+) / (F Z, F Z+); fixed-order reductions."""
    num = float(np.sum(np.asarray(fz_new) * np.asarray(fz_new)))
    den = float(np.sum(np.asarray(fz_old) * np.asarray(fz_new)))
    if den == 0.0:
        raise DegenerateFissionSource("successive fission sources are orthogonal")
    return k_old * num / den


def residual_eps(k_old: float, k_new: float, fz_old: np.ndarray,
                 fz_new: np.ndarray) -> float:
    """l-inf change of the scaled fission vector over its l1 norm."""
    if k_old == 0.0 or k_new == 0.0:
        raise ZeroDivisionError("eigenvalues must be nonzero")
    a = np.asarray(fz_new) / k_new
    b = np.asarray(fz_old) / k_old
    denom = float(np.sum(np.abs(a)))
    if denom == 0.0:
        raise ZeroFissionNorm("scaled fission vector has zero l1 norm")
    return float(np.max(np.abs(a - b)) / denom)


def estimate_dominance_ratio(eps_history) -> float | None:
    """Geometric-mean ratio of the last three residuals, or None."""
    if len(eps_history) < 3:
        return None
    e0, e2 = eps_history[-3], eps_history[-1]
    if e0 <= 0.0 or e2 <= 0.0:
        return None
    sigma = math.sqrt(e2 / e0)
    return sigma if 0.0 < sigma < 1.0 else None


def chebyshev_coefficients(sigma: float, n: int) -> tuple[float, float]:
    """Classical two-term extrapolation coefficients for cycle step n >= 1."""
    if n == 1:
        return 2.0 / (2.0 - sigma), 0.0
    gamma = math.acosh(2.0 / sigma - 1.0)
    alpha = (4.0 / sigma) * math.cosh((n - 1) * gamma) / math.cosh(n * gamma)
    beta = (1.0 - 0.5 * sigma) * alpha - 1.0
    return alpha, beta


def chebyshev_accelerate(prev: StateVector, cur: StateVector, new: StateVector,
                         sigma: float, n: int) -> None:
    """Extrapolate `new` in place from the two previous iterates."""
    alpha, beta = chebyshev_coefficients(sigma, n)
    new.flux[...] = cur.flux + alpha * (new.flux - cur.flux) + beta * (cur.flux - prev.flux)
    for g in range(new.group_count):
        for ax in range(new.mesh.dim):
            p_new = new.currents[g][ax]
            p_cur = cur.currents[g][ax]
            p_prev = prev.currents[g][ax]
            p_new[...] = p_cur + alpha * (p_new - p_cur) + beta * (p_cur - p_prev)


# -- sweeps -------------------------------------------------------------------


def inner_sweep(ops: BlockOperators, g: int, currents_g: list, s_phi: np.ndarray) -> float:
    """One alternating-direction Gauss-Seidel pass; returns max |delta P|."""
    mesh = ops.mesh
    invt = ops.inv_removal_diag[g]
    max_delta = 0.0
    for ax in range(mesh.dim):
        div_other = None
        for ax2 in range(mesh.dim):
            if ax2 == ax:
                continue
            term = np.diff(currents_g[ax2], axis=ax2)
            div_other = term if div_other is None else div_other + term
        r = (s_phi - div_other) * invt if div_other is not None else s_phi * invt
        rhs_face = cell_to_faces(r, ax)
        new = np.empty_like(currents_g[ax])
        ops.solve_direction(g, ax, rhs_face, new)
        delta = float(np.max(np.abs(new - currents_g[ax]))) if new.size else 0.0
        max_delta = max(max_delta, delta)
        currents_g[ax] = new
    return max_delta


def _solve_group(ops: BlockOperators, g: int, currents_g: list, s_phi: np.ndarray,
                 inner_tol: float, max_sweeps: int) -> int:
    n_active = sum(1 for ax in range(ops.mesh.dim) if ops.lines[g][ax].active)
    sweeps = 0
    while sweeps < max_sweeps:
        delta = inner_sweep(ops, g, currents_g, s_phi)
        sweeps += 1
        if n_active <= 1:
            break
        pmax = max(
            (float(np.max(np.abs(p))) for p in currents_g if p.size), default=0.0
        )
        if delta <= inner_tol * pmax or (pmax == 0.0 and delta == 0.0):
            break
    return sweeps


def outer_sweep(ops: BlockOperators, state: StateVector, k: float | None = None,
                source_moments: np.ndarray | None = None,
                inner_tol: float = 1e-2, max_sweeps: int = 30) -> list[int]:
    """One Gauss-Seidel pass over the groups, updating `state` in place.

    Criticality mode (k given): the fission source is frozen at the
    incoming flux; scattering uses already-updated lower groups.  Source
    mode (moments given): same with the assembled source instead.
    """
    if (k is None) == (source_moments is None):
        raise ValueError("pass exactly one of k or source_moments")
    fiss_old = ops.fission_density(state.flux) if k is not None else None
    sweep_counts = []
    for g in range(ops.group_count):
        if k is not None:
            s_phi = ops.chi_cell[g] * ops.vol * fiss_old / k
        else:
            s_phi = source_moments[g].astype(float, copy=True)
        for gp in range(ops.group_count):
            if gp == g:
                continue
            c = ops.scattering_coeff(g, gp)
            if c is not None:
                s_phi = s_phi + c * ops.vol * state.flux[gp]
        sweep_counts.append(
            _solve_group(ops, g, state.currents[g], s_phi, inner_tol, max_sweeps)
        )
        state.flux[g] = ops.inv_removal_diag[g] * (s_phi - divergence(state.currents[g]))
    return sweep_counts


# -- drivers ------------------------------------------------------------------


def _fission_vector(ops: BlockOperators, flux: np.ndarray) -> np.ndarray:
    return ops.fission_vector(ops.fission_density(flux))


def _settle_currents(ops: BlockOperators, state: StateVector, k: float,
                     source_moments: np.ndarray | None = None) -> None:
    """Re-solve the current subproblems against the injected flux.

    Injected warm starts carry zero currents on new face planes; that
    error barely moves the fission-source residual, so it would decay
    only slowly through the regular (loosely solved) sweeps.  One tight
    pass per group with the flux-side sources frozen removes it.
    """
    for g in range(ops.group_count):
        if source_moments is not None:
            s_phi = source_moments[g].astype(float, copy=True)
        else:
            fiss = ops.fission_density(state.flux)
            s_phi = ops.chi_cell[g] * ops.vol * fiss / k
        for gp in range(ops.group_count):
            if gp == g:
                continue
            c = ops.scattering_coeff(g, gp)
            if c is not None:
                s_phi = s_phi + c * ops.vol * state.flux[gp]
        prev = 0.0
        for _ in range(200):
            delta = inner_sweep(ops, g, state.currents[g], s_phi)
            pmax = max(
                (float(np.max(np.abs(p))) for p in state.currents[g] if p.size),
                default=0.0,
            )
            if delta <= 1e-8 * pmax or (pmax == 0.0 and delta == 0.0):
                break
            if prev and delta > 0.9999 * prev:
                break
            prev = delta


def _polish(ops: BlockOperators, state: StateVector, k: float | None,
            source_moments: np.ndarray | None, config: SolverConfig) -> int:
    """Fixed-source sweeps until the pointwise flux stabilizes.

    The fission source (criticality) is frozen at the converged iterate,
    so this is a linear solve; it tightens the flux and currents
    everywhere, including regions the fission-based residual cannot see.
    """
    if config.polish_tol <= 0.0:
        return 0
    fiss = ops.fission_density(state.flux) if k is not None else None
    passes = 0
    for _ in range(config.max_polish):
        passes += 1
        dmax = 0.0
        for g in range(ops.group_count):
            if k is not None:
                s_phi = ops.chi_cell[g] * ops.vol * fiss / k
            else:
                s_phi = source_moments[g].astype(float, copy=True)
            for gp in range(ops.group_count):
                if gp == g:
                    continue
                c = ops.scattering_coeff(g, gp)
                if c is not None:
                    s_phi = s_phi + c * ops.vol * state.flux[gp]
            _solve_group(ops, g, state.currents[g], s_phi, 1e-6, 2)
            new_flux = ops.inv_removal_diag[g] * (
                s_phi - divergence(state.currents[g])
            )
            dmax = max(dmax, float(np.max(np.abs(new_flux - state.flux[g]))))
            state.flux[g] = new_flux
        fmax = float(np.max(np.abs(state.flux)))
        if dmax <= config.polish_tol * fmax:
            break
    return passes


def solve_criticality(problem: ProblemDefinition, mesh: CartesianMesh,
                      config: SolverConfig | None = None,
                      warm_start: StateVector | None = None,
                      operators: BlockOperators | None = None):
    """Inverse power iteration; returns (state with k, report).

    Raises MaxIterationsExceeded (with the best iterate attached) if the
    residual does not reach the outer tolerance.
    """
    if problem.mode != CRITICALITY:
        raise ValueError("problem is not a criticality problem")
    config = config or SolverConfig()
    ops = operators if operators is not None else assemble(mesh, problem)
    t0 = time.perf_counter()

    if warm_start is not None:
        state = warm_start.copy()
        k = state.k if state.k else 1.0
    else:
        state = StateVector.initial(mesh, ops.group_count, config.initial_flux)
        k = 1.0
    for g in range(ops.group_count):
        ops.zero_inactive_faces(state.currents[g])
    if warm_start is not None:
        _settle_currents(ops, state, k)

    fz = _fission_vector(ops, state.flux)
    s = float(np.sum(np.abs(fz)))
    if s == 0.0:
        raise ZeroFissionNorm("initial fission source vanishes")
    state.scale(1.0 / s)
    state.amplitude = state.amplitude * s if warm_start is not None else s

    report = IterationReport()
    inner_tol = config.inner_tol
    stall = 0
    prev_state = cur_state = None
    cheb_step = 0
    sigma = None

    converged = False
    for _ in range(config.max_outer):
        if config.chebyshev:
            prev_state, cur_state = cur_state, state.copy()
        fiss_old = ops.fission_density(state.flux)
        fz_old = ops.fission_vector(fiss_old)
        sweeps = []
        for g in range(ops.group_count):
            s_phi = ops.chi_cell[g] * ops.vol * fiss_old / k
            for gp in range(ops.group_count):
                if gp == g:
                    continue
                c = ops.scattering_coeff(g, gp)
                if c is not None:
                    s_phi = s_phi + c * ops.vol * state.flux[gp]
            sweeps.append(
                _solve_group(ops, g, state.currents[g], s_phi, inner_tol,
                             config.max_inner_sweeps)
            )
            state.flux[g] = ops.inv_removal_diag[g] * (
                s_phi - divergence(state.currents[g])
            )
        fz_new = _fission_vector(ops, state.flux)
        k_new = update_keff(k, fz_old, fz_new)
        eps = residual_eps(k, k_new, fz_old, fz_new)
        k = k_new

        if config.chebyshev and len(report.eps_history) >= 2:
            sigma_new = estimate_dominance_ratio(report.eps_history[-2:] + [eps])
            if sigma_new is None:
                cheb_step = 0
            else:
                if sigma is None or cheb_step >= config.chebyshev_cycle:
                    sigma, cheb_step = sigma_new, 0
                cheb_step += 1
                chebyshev_accelerate(prev_state, cur_state, state, sigma, cheb_step)
                fz_new = _fission_vector(ops, state.flux)

        s = float(np.sum(np.abs(fz_new)))
        if s == 0.0:
            raise ZeroFissionNorm("fission source vanished during iteration")
        state.scale(1.0 / s)
        state.amplitude *= s

        report.eps_history.append(eps)
        report.k_history.append(k)
        report.inner_sweeps.append(sweeps)
        if eps <= config.outer_tol:
            converged = True
            break
        # tighten inner sweeps when the outer residual stalls
        if len(report.eps_history) >= 2 and eps > 0.99 * report.eps_history[-2]:
            stall += 1
            if stall >= 3:
                inner_tol = max(inner_tol * 0.1, 1e-12)
                stall = 0
        else:
            stall = 0

    state.k = k
    report.converged = converged
    if converged:
        _polish(ops, state, k, None, config)
        fz = _fission_vector(ops, state.flux)
        s = float(np.sum(np.abs(fz)))
        if s > 0.0:
            state.scale(1.0 / s)
            state.amplitude *= s
    report.wall_time = time.perf_counter() - t0
    if not converged:
        raise MaxIterationsExceeded(
            f"criticality solve: eps = {report.eps_history[-1]:.3e} after "
            f"{report.outer_iterations} outer iterations",
            state=state,
            report=report,
        )
    return state, report


def solve_source(problem: ProblemDefinition, mesh: CartesianMesh,
                 config: SolverConfig | None = None,
                 warm_start: StateVector | None = None,
                 operators: BlockOperators | None = None):
    """Fixed-source solve; stops on the relative flux change."""
    if problem.mode != SOURCE:
        raise ValueError("problem is not a source problem")
    config = config or SolverConfig()
    ops = operators if operators is not None else assemble(mesh, problem)
    t0 = time.perf_counter()
    moments = ops.source_moments()

    if warm_start is not None:
        state = warm_start.copy()
    else:
        state = StateVector.initial(mesh, ops.group_count, 0.0)
    for g in range(ops.group_count):
        ops.zero_inactive_faces(state.currents[g])
    state.k = None
    state.amplitude = 1.0
    if warm_start is not None:
        _settle_currents(ops, state, 1.0, source_moments=moments)

    report = IterationReport()
    inner_tol = config.inner_tol
    converged = False
    for _ in range(config.max_outer):
        flux_old = state.flux.copy()
        sweeps = outer_sweep(ops, state, source_moments=moments,
                             inner_tol=inner_tol, max_sweeps=config.max_inner_sweeps)
        denom = float(np.sum(np.abs(state.flux)))
        if denom == 0.0:
            # zero source has the unique solution zero
            report.eps_history.append(0.0)
            report.inner_sweeps.append(sweeps)
            converged = True
            break
        eps = float(np.max(np.abs(state.flux - flux_old)) / denom)
        report.eps_history.append(eps)
        report.inner_sweeps.append(sweeps)
        if eps <= config.outer_tol:
            converged = True
            break
    report.converged = converged
    if converged:
        _polish(ops, state, None, moments, config)
    report.wall_time = time.perf_counter() - t0
    if not converged:
        raise MaxIterationsExceeded(
            f"source solve: eps = {report.eps_history[-1]:.3e} after "
            f"{report.outer_iterations} outer iterations",
            state=state,
            report=report,
        )
    return state, report


def criticality_residual(ops: BlockOperators, state: StateVector) -> float:
    """Matrix-free check ||M Z - k^-1 F Z||_inf / ||k^-1 F Z||_l1."""
    z = state.to_vector(ops.layout)
    mz = apply_operator(ops, z, "M")
    fz = apply_operator(ops, z, "F") / state.k
    denom = float(np.sum(np.abs(fz)))
    if denom == 0.0:
        raise ZeroFissionNorm("fission vector has zero norm")
    return float(np.max(np.abs(mz - fz)) / denom)


# -- warm start for refined meshes --------------------------------------------


def inject_state(state: StateVector, new_mesh: CartesianMesh) -> StateVector:
    """Transfer a state onto a nested refinement of its mesh.

    Cell fluxes are copied to children; surviving face currents are
    redistributed proportionally to the child face areas; currents on
    newly created face planes start at zero.
    """
    old = state.mesh
    d = old.dim
    if new_mesh.dim != d:
        raise DimensionMismatch("mesh dimensions differ")
    parents = [interval_parents(old.axes[ax], new_mesh.axes[ax]) for ax in range(d)]
    ratios = [
        new_mesh.widths(ax) / old.widths(ax)[parents[ax]] for ax in range(d)
    ]
    flux = state.flux[(slice(None),) + np.ix_(*parents)]

    currents = []
    for g in range(state.group_count):
        per = []
        for ax in range(d):
            co = old.axes[ax].coords
            cn = new_mesh.axes[ax].coords
            pos = np.clip(np.searchsorted(co, cn), 0, co.size - 1)
            survive = co[pos] == cn
            sel = np.nonzero(survive)[0]
            # transverse gather (parents) and area scaling on the other axes
            p_old_m = np.moveaxis(state.currents[g][ax], ax, 0)
            other = [parents[a] for a in range(d) if a != ax]
            trans = p_old_m[(slice(None),) + np.ix_(*other)]
            scale = np.ones(1)
            for a in range(d):
                if a == ax:
                    continue
                r = ratios[a]
                sh = [1] * (d - 1)
                sh[a if a < ax else a - 1] = r.size
                scale = scale * r.reshape(sh)
            n_new = new_mesh.face_shape(ax)[ax]
            p_new_m = np.zeros((n_new,) + trans.shape[1:])
            p_new_m[sel] = trans[pos[sel]] * scale
            per.append(np.moveaxis(p_new_m, 0, ax))
        currents.append(per)
    return StateVector(mesh=new_mesh, currents=currents, flux=flux,
                       k=state.k, amplitude=state.amplitude)
