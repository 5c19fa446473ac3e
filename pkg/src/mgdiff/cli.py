"""Command-line interface.

Subcommands:

  validate  check the well-posedness hypotheses of a material library
  solve     one criticality or source solve on a uniform mesh
  amr       full adaptive loop; writes trace.csv, fields.vtk, state/
  export    re-emit the VTK fields from a saved state

All outputs are deterministic; wall-clock timings go to run.log only.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as mgio
from .amr import AmrConfig, MarkConfig, run_amr
from .errors import MgdiffError
from .estimator import estimate
from .fem import assemble
from .geometry import CRITICALITY, load_problem
from .materials import load_material_library, validate_assumptions
from .reconstruct import RECONSTRUCTIONS, reconstruct
from .solver import SolverConfig, solve_criticality, solve_source


@dataclass
class RunConfig:
    """Resolved options of one CLI invocation."""

    problem_path: Path | None = None
    materials_path: Path | None = None
    step: float = 5.0
    out_dir: Path | None = None
    solver: SolverConfig | None = None
    amr: AmrConfig | None = None
    mark: MarkConfig | None = None


def _solver_config(args) -> SolverConfig:
    return SolverConfig(
        outer_tol=args.tol,
        max_outer=args.max_outer,
        chebyshev=args.chebyshev,
    )


def _field_exports(ops, state, est, recon):
    cell_fields = {
        "eta_r": est.eta_r,
        "eta_f": est.eta_f,
        "eta_total": est.eta,
        "material_id": ops.material_ids.astype(float),
    }
    for g in range(ops.group_count):
        cell_fields[f"phi_g{g + 1}"] = state.flux[g]
    point_fields = {}
    vertex = recon.vertex_values()
    for g in range(ops.group_count):
        point_fields[f"phi_tilde_g{g + 1}"] = vertex[g]
    title = f"eta min = {est.eta.min():.5f}, max = {est.eta.max():.5f}"
    return cell_fields, point_fields, title


def cmd_validate(args) -> int:
    ms = load_material_library(args.materials)
    report = validate_assumptions(ms.coefficients())
    print(report.format())
    return 0


def cmd_solve(args) -> int:
    problem = load_problem(args.problem)
    mesh = problem.uniform_mesh(args.step)
    cfg = _solver_config(args)
    if problem.mode == CRITICALITY:
        state, report = solve_criticality(problem, mesh, cfg)
        print(f"k_eff = {state.k:.6f} after {report.outer_iterations} outer iterations "
              f"(eps = {report.eps_history[-1]:.3e}, cells = {mesh.n_cells})")
    else:
        state, report = solve_source(problem, mesh, cfg)
        print(f"source solve converged in {report.outer_iterations} iterations; "
              f"max flux = {float(np.max(state.flux)):.6g} (cells = {mesh.n_cells})")
    if args.out:
        out = Path(args.out)
        mgio.save_state(out / "state", state, problem_path=str(args.problem))
        (out / "run.log").write_text(
            f"wall_time_s {report.wall_time:.3f}\n"
            f"outer_iterations {report.outer_iterations}\n"
        )
        print(f"state written to {out / 'state'}")
    return 0


def cmd_amr(args) -> int:
    problem = load_problem(args.problem)
    mesh = problem.uniform_mesh(args.step)
    amr_cfg = AmrConfig(
        eps_amr=args.eps_amr,
        max_iterations=args.max_iterations,
        reconstruction=args.reconstruction,
    )
    mark_cfg = MarkConfig(theta=args.theta, strategy=args.strategy)
    solver_cfg = _solver_config(args)
    log_lines = []

    def observer(row, cur_mesh, state, est):
        print(f"it {row.iteration}: N_h = {row.n_cells}, "
              f"max_eta = {row.max_eta:.5f}, keff = {row.keff:.5f}")
        log_lines.append(f"iteration {row.iteration} wall_time_s {row.wall_time:.3f} "
                         f"marked {row.marked_per_axis}")

    result = run_amr(problem, mesh, amr_cfg, mark_cfg, solver_cfg, observer=observer)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mgio.export_trace(out / "trace.csv", result.trace)
    ops = assemble(result.mesh, problem)
    scaled = result.state.scaled_copy()
    recon = reconstruct(scaled, ops, amr_cfg.reconstruction)
    cell_fields, point_fields, title = _field_exports(ops, scaled, result.estimators, recon)
    mgio.export_vtk(out / "fields.vtk", result.mesh, cell_fields, point_fields, title)
    mgio.save_state(out / "state", result.state, problem_path=str(args.problem))
    (out / "run.log").write_text("\n".join(log_lines) + "\n")
    print(f"{'converged' if result.converged else 'stopped on budget'}; "
          f"outputs in {out}")
    return 0


def cmd_export(args) -> int:
    state, manifest = mgio.load_state(args.state)
    problem_path = args.problem or manifest.get("problem")
    if not problem_path:
        print("export: no problem file recorded in the state; pass --problem",
              file=sys.stderr)
        return 2
    problem = load_problem(problem_path)
    ops = assemble(state.mesh, problem)
    scaled = state.scaled_copy()
    recon = reconstruct(scaled, ops, args.reconstruction)
    est = estimate(ops, scaled, recon)
    cell_fields, point_fields, title = _field_exports(ops, scaled, est, recon)
    mgio.export_vtk(args.out, state.mesh, cell_fields, point_fields, title)
    print(f"fields written to {args.out}")
    return 0


def _add_solver_args(p):
    p.add_argument("--tol", type=float, default=1e-6, help="outer residual tolerance")
    p.add_argument("--max-outer", type=int, default=2000)
    p.add_argument("--chebyshev", action="store_true",
                   help="enable Chebyshev acceleration of the outer iteration")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mgdiff", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check material hypotheses")
    p.add_argument("--materials", required=True)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("solve", help="single-mesh solve")
    p.add_argument("--problem", required=True)
    p.add_argument("--step", type=float, default=5.0, help="uniform mesh step (cm)")
    p.add_argument("--out", default=None, help="output directory for the state")
    _add_solver_args(p)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("amr", help="adaptive refinement loop")
    p.add_argument("--problem", required=True)
    p.add_argument("--step", type=float, default=5.0)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--eps-amr", type=float, default=0.06)
    p.add_argument("--max-iterations", type=int, default=10)
    p.add_argument("--reconstruction", choices=RECONSTRUCTIONS, default="postprocess")
    p.add_argument("--strategy", choices=("direction", "bulk"), default="direction")
    p.add_argument("--out", required=True)
    _add_solver_args(p)
    p.set_defaults(fn=cmd_amr)

    p = sub.add_parser("export", help="re-emit VTK fields from a saved state")
    p.add_argument("--state", required=True)
    p.add_argument("--problem", default=None)
    p.add_argument("--reconstruction", choices=RECONSTRUCTIONS, default="postprocess")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_export)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return 2
    except MgdiffError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
