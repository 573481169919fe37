"""Stochastic Galerkin solvers for lognormal diffusion problems.

Intrusive polynomial-chaos discretization of linear and nonlinear Poisson
problems with lognormal random diffusion, solved by FGMRES with one-level
and two-grid overlapping Schwarz preconditioners (AMG on the coarse grid),
plus Monte Carlo verification and desk-scale solver studies.
"""

from .chaos import (
    ChaosBasis,
    QuadTensor,
    TripleTensor,
    basis_eval,
    enumerate_basis,
    hermite_eval,
    norm_sq,
    quad_tensor,
    triple_tensor,
)
from .config import ConfigError, RunConfig, load_config, parse_config, serialize_config
from .mesh import NestedPair, TriMesh, interpolation_matrix, unit_square, write_vtk
from .randomfield import ExpKernel, KLExpansion, kle_1d, kle_2d, lognormal_pce, sample_field
from .assembly import (
    BCSpec,
    BlockCsrSystem,
    assemble_deterministic,
    assemble_stochastic_linear,
    assemble_stochastic_picard,
)
from .sparsela import (
    CsrMatrix,
    KrylovConfig,
    SolveReport,
    condition_number,
    fgmres,
    gmres,
    ilu0,
    sparse_lu,
    spmv,
)
from .dd import (
    OneLevelRAS,
    Partition,
    TwoGridPreconditioner,
    build_ras,
    build_twogrid,
    partition_overlap,
    ras_apply,
    twogrid_apply,
)
from .amg import AmgHierarchy, amg_setup, amg_vcycle
from .solvers import (
    SolutionPCE,
    moments,
    pdf_at_point,
    relative_error,
    solve_deterministic,
    solve_linear_stochastic,
    solve_nonlinear_stochastic,
)
from .mcs import McsResult, run_mcs, verify_against_mcs
from .bench import StudySpec, run_study

__version__ = "0.1.0"
