"""End-to-end solves: the coupled linear system, the Picard loop for the
nonlinear one, their deterministic counterparts, and post-processing
(moments, probe densities, errors).

Preconditioner setup time (subdomain factorizations, coarse operator, AMG
hierarchy) is accounted separately from the Krylov solve time; nonlinear
solves rebuild operator and preconditioner every Picard iteration and
accumulate both.
"""

import time
from dataclasses import dataclass

import numpy as np
from scipy.stats import gaussian_kde

from .assembly import (
    BCSpec,
    DeterministicKernel,
    P1Workspace,
    assemble_stochastic_linear,
    assemble_stochastic_picard,
    homogeneous_dirichlet,
)
from .chaos import ChaosBasis, enumerate_basis, hermite_table, quad_tensor, triple_tensor
from .config import RunConfig
from .dd import build_ras, build_twogrid, partition_overlap
from .mesh import NestedPair, TriMesh, p1_eval_matrix, unit_square
from .randomfield import ExpKernel, kle_2d, lognormal_pce
from .sparsela import KrylovConfig, SolveReport, fgmres

__all__ = [
    "SolutionPCE",
    "PdfSamples",
    "solve_linear_stochastic",
    "solve_nonlinear_stochastic",
    "solve_deterministic",
    "relative_error",
    "moments",
    "pdf_at_point",
    "StochasticProblem",
    "build_stochastic_problem",
]

PICARD_CAP = 50
STAGNATION_RUN = 5


@dataclass
class SolutionPCE:
    """Chaos expansion of the solution: one nodal field per output index."""

    output_basis: ChaosBasis
    coeff_fields: np.ndarray  # (N+1, nv)
    mesh: TriMesh

    @classmethod
    def from_flat(cls, u, basis, mesh):
        nb = len(basis)
        return cls(basis, u.reshape(mesh.num_vertices, nb).T.copy(), mesh)

    @property
    def flat(self):
        return self.coeff_fields.T.reshape(-1).copy()

    def at_points(self, points):
        """Coefficients interpolated to arbitrary points; shape (N+1, npts)."""
        E = p1_eval_matrix(self.mesh, np.atleast_2d(points))
        return self.coeff_fields @ E.T.toarray()


@dataclass
class PdfSamples:
    """Surrogate draws at a probe point plus a kernel density estimate."""

    point: tuple
    draws: np.ndarray
    grid: np.ndarray
    density: np.ndarray


@dataclass
class StochasticProblem:
    """Everything the stochastic solves share: mesh, field, bases, tensors."""

    config: RunConfig
    mesh: TriMesh
    ws: P1Workspace
    kle: object
    pce: object
    input_basis: ChaosBasis
    output_basis: ChaosBasis
    m: object
    t: object
    f: object
    bc: BCSpec


def build_stochastic_problem(config: RunConfig, f=None, bc=None, need_quad=None) -> StochasticProblem:
    """Construct mesh, KLE, lognormal expansion and coupling tensors."""
    config.validate()
    mesh = unit_square(config.mesh_n)
    ws = P1Workspace(mesh)
    kern = ExpKernel(config.sigma, config.bx, config.by)
    kle = kle_2d(kern, config.M, g0=config.g0)
    input_basis = enumerate_basis(config.M, config.p_in)
    output_basis = enumerate_basis(config.M, config.p_out)
    pce = lognormal_pce(kle, input_basis, mesh)
    m = triple_tensor(input_basis, output_basis)
    if need_quad is None:
        need_quad = config.is_nonlinear
    t = quad_tensor(input_basis, output_basis) if need_quad else None
    if f is None:
        f = 1.0
    if bc is None:
        bc = homogeneous_dirichlet()
    return StochasticProblem(config, mesh, ws, kle, pce, input_basis, output_basis, m, t, f, bc)


def _build_preconditioner(config: RunConfig, A, mesh, nblocks):
    """Preconditioner named in the config; returns (callable, stats_source)."""
    part = partition_overlap(mesh, nblocks, config.nsub, config.overlap)
    if config.preconditioner == "ras1":
        return build_ras(A, part, threads=config.threads), None
    variant = {"2glu": "lu", "2gv2": "v2", "2gv3": "v3"}[config.preconditioner]
    r = config.refinement_factor
    coarse = unit_square(config.mesh_n // r) if r > 1 else mesh
    pair = NestedPair(coarse, mesh)
    pc = build_twogrid(A, pair, part, variant, threads=config.threads,
                       coarse_tol=config.tol_coarse)
    return pc, pc


def _outer_cfg(config):
    return KrylovConfig(rel_tol=config.tol_outer, max_iters=2000, restart=200)


def _krylov_solve(config, A, b, mesh, nblocks, report: SolveReport):
    t0 = time.perf_counter()
    pc, stats_src = _build_preconditioner(config, A, mesh, nblocks)
    report.pc_setup_seconds += time.perf_counter() - t0

    x, rep = fgmres(A, b, pc, _outer_cfg(config))
    report.solve_seconds += rep.solve_seconds
    report.residual_history = rep.residual_history
    report.breakdown |= rep.breakdown
    if stats_src is not None:
        stats = stats_src.coarse_stats
        report.details.setdefault("coarse_calls", 0)
        report.details["coarse_calls"] += stats.calls
        report.details.setdefault("coarse_failures", 0)
        report.details["coarse_failures"] += stats.failures
        report.coarse_iterations = stats.mean_iterations()
        if hasattr(stats_src, "amg_summary"):
            report.details["amg"] = stats_src.amg_summary
    return x, rep


def solve_linear_stochastic(config: RunConfig, f=None, bc=None, problem=None):
    """FGMRES solve of the coupled linear system with the configured
    preconditioner; returns the chaos solution and a populated report."""
    problem = problem or build_stochastic_problem(config, f=f, bc=bc, need_quad=False)
    report = SolveReport()
    t0 = time.perf_counter()
    sys_ = assemble_stochastic_linear(
        problem.mesh, problem.pce, problem.m, problem.output_basis,
        problem.f, problem.bc, ws=problem.ws,
    )
    report.details["assembly_seconds"] = time.perf_counter() - t0
    x, rep = _krylov_solve(config, sys_.matrix, sys_.rhs, problem.mesh,
                           len(problem.output_basis), report)
    report.outer_iterations = rep.outer_iterations
    report.converged = rep.converged
    sol = SolutionPCE.from_flat(x, problem.output_basis, problem.mesh)
    return sol, report


def solve_nonlinear_stochastic(config: RunConfig, f=None, bc=None, problem=None):
    """Picard iteration on the quadratically nonlinear stochastic problem.

    Starts from zero (the first iterate solves the linear problem), stops on
    a relative update below tol_picard, and flags stagnation after five
    consecutive non-monotone update norms.
    """
    problem = problem or build_stochastic_problem(config, f=f, bc=bc, need_quad=True)
    nb = len(problem.output_basis)
    nv = problem.mesh.num_vertices
    report = SolveReport()
    u = np.zeros(nb * nv)
    deltas, inner_counts = [], []
    assembly_seconds = 0.0
    converged = False
    stagnated = False
    nonmono = 0

    for it in range(1, PICARD_CAP + 1):
        t0 = time.perf_counter()
        sys_ = assemble_stochastic_picard(
            problem.mesh, problem.pce, u, problem.m, problem.t,
            problem.f, problem.bc, ws=problem.ws,
        )
        assembly_seconds += time.perf_counter() - t0
        u_new, rep = _krylov_solve(config, sys_.matrix, sys_.rhs, problem.mesh, nb, report)
        inner_counts.append(rep.outer_iterations)

        norm_prev = np.linalg.norm(u)
        diff = np.linalg.norm(u_new - u)
        delta = diff / norm_prev if norm_prev > 0 else (0.0 if diff == 0.0 else np.inf)
        deltas.append(delta)
        u = u_new
        if delta <= config.tol_picard:
            converged = True
            break
        if len(deltas) > 1 and delta > deltas[-2]:
            nonmono += 1
            if nonmono >= STAGNATION_RUN:
                stagnated = True
                break
        else:
            nonmono = 0

    report.picard_iterations = len(deltas)
    report.outer_iterations = int(round(np.mean(inner_counts))) if inner_counts else 0
    report.converged = converged
    report.details.update(
        assembly_seconds=assembly_seconds,
        picard_updates=[float(d) for d in deltas],
        gmres_per_picard=inner_counts,
        stagnated=stagnated,
    )
    sol = SolutionPCE.from_flat(u, problem.output_basis, problem.mesh)
    return sol, report


def _picard_deterministic(config, mesh, coeff_fn, f, bc, report):
    """Shared Picard driver for deterministic nonlinear problems.

    coeff_fn(u_nodal) -> nodal diffusion field frozen at the last iterate.
    """
    kernel = DeterministicKernel(mesh, f, bc)
    u = np.zeros(mesh.num_vertices)
    deltas, inner_counts = [], []
    converged = False
    stagnated = False
    nonmono = 0
    for it in range(1, PICARD_CAP + 1):
        A, b = kernel.assemble(coeff_fn(u))
        u_new, rep = _krylov_solve(config, A, b, mesh, 1, report)
        inner_counts.append(rep.outer_iterations)
        norm_prev = np.linalg.norm(u)
        diff = np.linalg.norm(u_new - u)
        delta = diff / norm_prev if norm_prev > 0 else (0.0 if diff == 0.0 else np.inf)
        deltas.append(delta)
        u = u_new
        if delta <= config.tol_picard:
            converged = True
            break
        if len(deltas) > 1 and delta > deltas[-2]:
            nonmono += 1
            if nonmono >= STAGNATION_RUN:
                stagnated = True
                break
        else:
            nonmono = 0
    report.picard_iterations = len(deltas)
    report.outer_iterations = int(round(np.mean(inner_counts))) if inner_counts else 0
    report.converged = converged
    report.details.update(
        picard_updates=[float(d) for d in deltas],
        gmres_per_picard=inner_counts,
        stagnated=stagnated,
    )
    return u


def solve_deterministic(config: RunConfig, m_nonlin: int = None, f=None, bc=None):
    """Diffusion of a substance with coefficient (1 + u)^m on the unit square.

    m = 0 is a single linear solve; m >= 1 runs Picard with the coefficient
    frozen at the previous iterate.  Default boundary data: u = 0 on the
    left edge, u = 1 on the right, zero flux top and bottom, f = 0.
    """
    config.validate()
    if m_nonlin is None:
        m_nonlin = config.m_nonlin if config.is_nonlinear else 0
    if m_nonlin < 0:
        raise ValueError(f"nonlinearity order must be non-negative, got {m_nonlin}")
    mesh = unit_square(config.mesh_n)
    if bc is None:
        from .assembly import channel_bc

        bc = channel_bc()
    if f is None:
        f = 0.0
    report = SolveReport()
    if m_nonlin == 0:
        kernel = DeterministicKernel(mesh, f, bc)
        A, b = kernel.assemble(np.ones(mesh.num_vertices))
        u, rep = _krylov_solve(config, A, b, mesh, 1, report)
        report.outer_iterations = rep.outer_iterations
        report.converged = rep.converged
        report.picard_iterations = 1
        return u, report

    def coeff_fn(u):
        base = 1.0 + u
        if np.any(base <= 0):
            bad = int(np.argmin(base))
            raise ValueError(f"Picard coefficient (1+u)^m non-positive at node {bad}")
        return base**m_nonlin

    u = _picard_deterministic(config, mesh, coeff_fn, f, bc, report)
    return u, report


def nonlinear_exact_solution(x, m: int):
    """Closed-form solution of the deterministic benchmark problem."""
    return ((2.0 ** (m + 1) - 1.0) * np.asarray(x) + 1.0) ** (1.0 / (m + 1)) - 1.0


def relative_error(u_num, u_truth, mesh: TriMesh = None) -> float:
    """|| truth - numerical ||_2 / || truth ||_2 over nodal values.

    u_truth may be a nodal array or a callable (x, y) evaluated at the mesh
    vertices.
    """
    u_num = np.asarray(u_num)
    if callable(u_truth):
        if mesh is None:
            raise ValueError("need the mesh to evaluate a truth function at nodes")
        truth = u_truth(mesh.vertices[:, 0], mesh.vertices[:, 1])
    else:
        truth = np.asarray(u_truth)
    denom = np.linalg.norm(truth)
    if denom == 0.0:
        raise ValueError("truth field has zero norm")
    return float(np.linalg.norm(truth - u_num) / denom)


def moments(sol: SolutionPCE):
    """Mean and standard deviation fields of the chaos expansion."""
    norms = sol.output_basis.norms_sq()
    mean = sol.coeff_fields[0].copy()
    var = np.sum(sol.coeff_fields[1:] ** 2 * norms[1:, None], axis=0)
    return mean, np.sqrt(var)


def pdf_at_point(sol: SolutionPCE, x, ndraws: int, seed: int, grid_size: int = 256) -> PdfSamples:
    """Push Gaussian germ samples through the surrogate at a probe point.

    Density is a Gaussian kernel estimate with Silverman bandwidth;
    deterministic under a fixed seed.
    """
    point = tuple(np.atleast_1d(np.asarray(x, dtype=float)))
    coeffs = sol.at_points([point])[:, 0]  # (N+1,)
    M = sol.output_basis.M
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal((ndraws, M))
    pmax = sol.output_basis.p
    tables = hermite_table(pmax, xi)  # (pmax+1, ndraws, M)
    draws = np.zeros(ndraws)
    for coeff, alpha in zip(coeffs, sol.output_basis):
        if coeff == 0.0:
            continue
        term = np.full(ndraws, coeff)
        for k, a in enumerate(alpha):
            if a:
                term = term * tables[a, :, k]
        draws += term
    lo, hi = draws.min(), draws.max()
    pad = 0.05 * (hi - lo) if hi > lo else max(1e-12, 0.05 * abs(hi))
    grid = np.linspace(lo - pad, hi + pad, grid_size)
    spread = np.std(draws)
    if spread <= 1e-10 * max(1.0, abs(draws.mean())):
        density = np.zeros(grid_size)  # (near-)degenerate spike; KDE undefined
    else:
        density = gaussian_kde(draws, bw_method="silverman")(grid)
    return PdfSamples(point, draws, grid, density)
