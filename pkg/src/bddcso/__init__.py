"""BDDC preconditioners with subobject constraints for structured Q1 Poisson problems."""

from .bddc import (
    BddcOperator,
    Recipe,
    RecipeError,
    WeightingOperator,
    apply_bddc,
    build_bddc,
    compute_weights,
    harmonic_extension,
    select_constraints,
)
from .experiments import ExperimentConfig, ExperimentError, ReportRow, emit_report, run
from .krylov import SolveReport, pcg
from .linalg import (
    NotSpdError,
    SparseSym,
    UnderconstrainedError,
    dense_sym_eig,
    saddle_factor,
    saddle_solve,
    spd_factor,
    spd_solve,
    tridiag_eig,
)
from .mesh import (
    AssembledSystem,
    CoefficientField,
    StructuredMesh,
    assemble,
    build_mesh,
    element_stiffness,
)
from .partition import (
    InterfaceObject,
    MembershipSets,
    PartitionPair,
    classify_objects,
    count_coarse_dofs,
    partition_uniform,
    refine_by_coefficient,
    refine_uniform,
)
from .problems import ChannelSpec, make_channels, make_constant

__all__ = [
    "AssembledSystem",
    "BddcOperator",
    "ChannelSpec",
    "CoefficientField",
    "ExperimentConfig",
    "ExperimentError",
    "InterfaceObject",
    "MembershipSets",
    "NotSpdError",
    "PartitionPair",
    "Recipe",
    "RecipeError",
    "ReportRow",
    "SolveReport",
    "SparseSym",
    "StructuredMesh",
    "UnderconstrainedError",
    "WeightingOperator",
    "apply_bddc",
    "assemble",
    "build_bddc",
    "build_mesh",
    "classify_objects",
    "compute_weights",
    "count_coarse_dofs",
    "dense_sym_eig",
    "element_stiffness",
    "emit_report",
    "harmonic_extension",
    "make_channels",
    "make_constant",
    "partition_uniform",
    "pcg",
    "refine_by_coefficient",
    "refine_uniform",
    "run",
    "saddle_factor",
    "saddle_solve",
    "select_constraints",
    "spd_factor",
    "spd_solve",
    "tridiag_eig",
]
