"""Multigroup neutron diffusion on Cartesian meshes.

Mixed lowest-order Raviart-Thomas discretization, nested iterative
criticality/source solver, continuous flux reconstructions, a posteriori
error estimators, and a tensor-structure-preserving adaptive mesh
refinement loop.
"""

from .mesh import AxisGrid, CartesianMesh, Slab, build_uniform, refine_slabs
from .materials import (
    EnergyGroupSet,
    GroupCoefficients,
    MaterialData,
    MaterialSet,
    derive_coefficients,
    load_material_library,
    save_material_library,
    validate_assumptions,
)
from .geometry import (
    BoundarySpec,
    ProblemDefinition,
    RegionMap,
    build_homogeneous_cube,
    build_manufactured_source,
    load_problem,
)
from .fem import BlockOperators, DofLayout, apply_operator, assemble
from .solver import (
    IterationReport,
    SolverConfig,
    StateVector,
    residual_eps,
    solve_criticality,
    solve_source,
    update_keff,
)
from .reconstruct import (
    NodalField,
    average_plus_reconstruction,
    average_reconstruction,
    project_Mh,
    reconstruct,
    recover_multipliers,
    rtn_postprocess,
)
from .estimator import CellEstimators, estimate, smg_norm, total_indicator
from .amr import AmrConfig, AmrResult, AmrTrace, MarkConfig, mark_bulk, mark_direction, run_amr

__all__ = [
    "AxisGrid",
    "CartesianMesh",
    "Slab",
    "build_uniform",
    "refine_slabs",
    "EnergyGroupSet",
    "MaterialData",
    "MaterialSet",
    "GroupCoefficients",
    "derive_coefficients",
    "validate_assumptions",
    "load_material_library",
    "save_material_library",
    "RegionMap",
    "BoundarySpec",
    "ProblemDefinition",
    "build_homogeneous_cube",
    "build_manufactured_source",
    "load_problem",
    "DofLayout",
    "BlockOperators",
    "assemble",
    "apply_operator",
    "SolverConfig",
    "StateVector",
    "IterationReport",
    "solve_criticality",
    "solve_source",
    "update_keff",
    "residual_eps",
    "NodalField",
    "average_reconstruction",
    "average_plus_reconstruction",
    "recover_multipliers",
    "project_Mh",
    "rtn_postprocess",
    "reconstruct",
    "CellEstimators",
    "estimate",
    "total_indicator",
    "smg_norm",
    "MarkConfig",
    "AmrConfig",
    "AmrTrace",
    "AmrResult",
    "mark_bulk",
    "mark_direction",
    "run_amr",
]

__version__ = "0.1.0"
