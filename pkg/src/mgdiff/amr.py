"""SOLVE - ESTIMATE - MARK - REFINE loop with Cartesian-preserving marking.

Two marking strategies:

  bulk       smallest cell set S (by count) with eta(S) >= theta eta(T),
             realized as the shortest prefix of the cells sorted by
             indicator (ties broken by linear cell index);
  direction  per axis, the smallest set of slabs with combined indicator
             >= theta eta(T); the union over axes is refined.  This is
             the default: bisecting whole slabs keeps the mesh a tensor
             product.

When the bulk strategy drives the refinement, the slabs containing the
marked cells are refined (the mesh must stay a tensor product either
way).  Between iterations the solver is warm-started by injecting the
previous solution onto the refined mesh.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import NoProgress
from .estimator import CellEstimators, estimate
from .fem import assemble
from .geometry import CRITICALITY, ProblemDefinition
from .mesh import CartesianMesh, Slab, refine_slabs
from .reconstruct import POSTPROCESS, RECONSTRUCTIONS, reconstruct
from .solver import SolverConfig, StateVector, inject_state, solve_criticality, solve_source

BULK = "bulk"
DIRECTION = "direction"

# relative slack on the theta threshold so exact-tie prefixes are not
# pushed one entry longer by round-off in the cumulative sums
_TIE_SLACK = 1.0 - 1e-12


@dataclass
class MarkConfig:
    theta: float = 0.5
    strategy: str = DIRECTION

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise ValueError("theta must be in (0, 1]")
        if self.strategy not in (BULK, DIRECTION):
            raise ValueError(f"unknown marking strategy {self.strategy!r}")


@dataclass
class AmrConfig:
    eps_amr: float = 0.06
    max_iterations: int = 10
    reconstruction: str = POSTPROCESS
    warm_start: bool = True
    use_reconstructed_fission: bool = True

    def __post_init__(self):
        if self.eps_amr < 0:
            raise ValueError("eps_amr must be nonnegative")
        if self.reconstruction not in RECONSTRUCTIONS:
            raise ValueError(f"unknown reconstruction {self.reconstruction!r}")


@dataclass
class TraceRow:
    iteration: int
    n_cells: int
    max_eta: float
    keff: float               # global estimator proxy for source problems
    wall_time: float = 0.0
    marked_per_axis: tuple[int, ...] = ()


@dataclass
class AmrTrace:
    rows: list[TraceRow] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)


@dataclass(eq=False)
class AmrResult:
    trace: AmrTrace
    mesh: CartesianMesh
    state: StateVector
    estimators: CellEstimators
    converged: bool


def mark_bulk(eta: np.ndarray, theta: float) -> set[tuple[int, ...]]:
    """Minimal-cardinality cell set capturing a theta fraction of eta."""
    shape = eta.shape
    flat = np.asarray(eta, dtype=float).ravel()
    tot2 = float(np.sum(flat**2))
    if tot2 == 0.0:
        return set()
    order = np.argsort(-flat, kind="stable")
    cum = np.cumsum(flat[order] ** 2)
    target = theta * theta * tot2 * _TIE_SLACK
    count = int(np.searchsorted(cum, target, side="left")) + 1
    count = min(count, flat.size)
    return {tuple(int(i) for i in np.unravel_index(j, shape)) for j in order[:count]}


def mark_direction(eta: np.ndarray, mesh: CartesianMesh, theta: float) -> set[Slab]:
    """Per axis, the shortest slab prefix with eta(prefix) >= theta eta(T)."""
    eta = np.asarray(eta, dtype=float)
    tot2 = float(np.sum(eta**2))
    if tot2 == 0.0:
        return set()
    target = theta * theta * tot2 * _TIE_SLACK
    marked: set[Slab] = set()
    for ax in range(mesh.dim):
        other = tuple(a for a in range(mesh.dim) if a != ax)
        scores2 = np.sum(eta**2, axis=other)
        order = np.argsort(-scores2, kind="stable")
        cum = np.cumsum(scores2[order])
        count = int(np.searchsorted(cum, target, side="left")) + 1
        count = min(count, scores2.size)
        marked.update(Slab(ax, int(i)) for i in order[:count])
    return marked


def _cells_to_slabs(cells, dim: int) -> set[Slab]:
    return {Slab(ax, c[ax]) for c in cells for ax in range(dim)}


def run_amr(problem: ProblemDefinition, mesh: CartesianMesh,
            amr_config: AmrConfig | None = None,
            mark_config: MarkConfig | None = None,
            solver_config: SolverConfig | None = None,
            observer=None) -> AmrResult:
    """Adaptive loop; stops when max_K eta_K <= eps_amr or on the budget.

    `observer(row, mesh, state, estimators)` is called after each
    iteration's estimate (used by the CLI for logging/export).
    """
    amr_config = amr_config or AmrConfig()
    mark_config = mark_config or MarkConfig()
    solver_config = solver_config or SolverConfig()

    trace = AmrTrace()
    state: StateVector | None = None
    converged = False
    for it in range(amr_config.max_iterations + 1):
        t0 = time.perf_counter()
        ops = assemble(mesh, problem)
        warm = state if (amr_config.warm_start and state is not None) else None
        if problem.mode == CRITICALITY:
            state, _ = solve_criticality(problem, mesh, solver_config,
                                         warm_start=warm, operators=ops)
        else:
            state, _ = solve_source(problem, mesh, solver_config,
                                    warm_start=warm, operators=ops)
        scaled = state.scaled_copy()
        recon = reconstruct(scaled, ops, amr_config.reconstruction)
        est = estimate(ops, scaled, recon,
                       use_reconstructed_fission=amr_config.use_reconstructed_fission)
        row = TraceRow(
            iteration=it,
            n_cells=mesh.n_cells,
            max_eta=est.max_eta,
            keff=state.k if problem.mode == CRITICALITY else est.eta_global,
            wall_time=time.perf_counter() - t0,
        )
        trace.rows.append(row)

        if est.max_eta <= amr_config.eps_amr:
            converged = True
        done = converged or it == amr_config.max_iterations
        if not done:
            if mark_config.strategy == DIRECTION:
                slabs = mark_direction(est.eta, mesh, mark_config.theta)
            else:
                slabs = _cells_to_slabs(
                    mark_bulk(est.eta, mark_config.theta), mesh.dim
                )
            if not slabs:
                raise NoProgress("marking selected no slabs while above the threshold")
            row.marked_per_axis = tuple(
                sum(1 for s in slabs if s.axis == ax) for ax in range(mesh.dim)
            )
        if observer is not None:
            observer(row, mesh, state, est)
        if done:
            break
        new_mesh = refine_slabs(mesh, slabs)
        if new_mesh.n_cells <= mesh.n_cells:
            raise NoProgress("refinement did not increase the cell count")
        if amr_config.warm_start:
            state = inject_state(state, new_mesh)
        else:
            state = None
        mesh = new_mesh
    return AmrResult(trace=trace, mesh=mesh, state=state, estimators=est,
                     converged=converged)
