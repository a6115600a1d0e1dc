"""Finite element solver for the 2D micropolar Navier-Stokes equations.

Fractional time stepping that decouples the linear velocity, pressure and
angular velocity per step, on uniform quadrilateral meshes with the Q2/Q1
Taylor-Hood pair and Q2 scalar angular velocity.  Includes a
manufactured-solution study harness with CSV convergence reports.
"""

from .mesh import Mesh, DofMap, build_uniform_mesh, build_dof_map
from .femops import (
    FieldVector,
    QuadratureRule,
    quadrature_rule,
    assemble_mass,
    assemble_stiffness,
    assemble_pressure_gradient,
    assemble_divergence,
    assemble_curl_scalar_to_vector,
    assemble_curl_vector_to_scalar,
    assemble_convection,
    assemble_load,
    l2_project,
    error_norms,
)
from .sparsela import (
    CsrMatrix,
    SolveReport,
    SolverError,
    cg_solve,
    gmres_solve,
    apply_dirichlet,
    enforce_zero_mean,
)
from .scheme import PhysParams, TimeGrid, TimeState, FractionalStepSolver
from .mms import StudyReport, StudyRow, convergence_rate
from .cli import RunConfig, ConfigError, parse_config, run_study

__version__ = "0.1.0"
