import numpy as np
import pytest

from sgdd.assembly import BCSpec, assemble_deterministic, channel_bc
from sgdd.config import RunConfig
from sgdd.mesh import unit_square
from sgdd.solvers import (
    SolutionPCE,
    moments,
    nonlinear_exact_solution,
    pdf_at_point,
    relative_error,
    solve_deterministic,
    solve_linear_stochastic,
    solve_nonlinear_stochastic,
)
from sgdd.sparsela import sparse_lu


def small_config(**kw):
    base = dict(mesh_n=16, M=2, p_in=2, p_out=2, sigma=0.2, nsub=4,
                preconditioner="2gv3", seed=1)
    base.update(kw)
    return RunConfig(**base).validate()


def test_deterministic_linear_exact():
    cfg = small_config(problem="linear-deterministic")
    u, rep = solve_deterministic(cfg, m_nonlin=0)
    assert rep.converged
    mesh = unit_square(cfg.mesh_n)
    assert np.allclose(u, mesh.vertices[:, 0], atol=1e-6)


def test_deterministic_nonlinear_matches_closed_form():
    # n divisible by 3 so x = 1/3 is a mesh node (and by 2 for the coarse grid)
    cfg = small_config(problem="nonlinear-deterministic", mesh_n=36, tol_outer=1e-10)
    u, rep = solve_deterministic(cfg, m_nonlin=1)
    assert rep.converged
    mesh = unit_square(36)
    x = mesh.vertices[:, 0]
    exact = nonlinear_exact_solution(x, 1)
    # boundary values are imposed exactly
    assert u[np.argmax(x)] == pytest.approx(1.0)
    err = relative_error(u, exact)
    assert err < 2e-4
    # the analytic value sqrt(2) - 1 at x = 1/3
    node = int(np.argmin(np.abs(x - 1.0 / 3.0) + np.abs(mesh.vertices[:, 1] - 0.5)))
    assert x[node] == pytest.approx(1.0 / 3.0)
    assert abs(u[node] - (np.sqrt(2.0) - 1.0)) < 1e-3


def test_deterministic_error_halves_quadratically():
    errs = {}
    for n in (32, 64):
        cfg = small_config(problem="nonlinear-deterministic", mesh_n=n, tol_outer=1e-12,
                           tol_picard=1e-10)
        u, _ = solve_deterministic(cfg, m_nonlin=1)
        mesh = unit_square(n)
        errs[n] = relative_error(u, lambda x, y: nonlinear_exact_solution(x, 1), mesh)
    ratio = errs[32] / errs[64]
    assert 3.5 <= ratio <= 4.5


def test_relative_error_basics():
    truth = np.array([3.0, 4.0])
    assert relative_error(truth, truth) == 0.0
    assert relative_error(2 * truth, truth) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        relative_error(truth, np.zeros(2))


def test_linear_stochastic_sigma_zero_reduces_to_deterministic():
    cfg = small_config(sigma=0.0, g0=0.3, tol_outer=1e-12)
    sol, rep = solve_linear_stochastic(cfg)
    assert rep.converged
    mesh = sol.mesh
    A, b = assemble_deterministic(
        mesh, np.full(mesh.num_vertices, np.exp(0.3)), 1.0,
        BCSpec(dirichlet={"left": 0.0, "right": 0.0, "bottom": 0.0, "top": 0.0}),
    )
    u_det = sparse_lu(A).solve(b)
    assert np.max(np.abs(sol.coeff_fields[0] - u_det)) < 1e-10
    assert np.max(np.abs(sol.coeff_fields[1:])) < 1e-10


def test_linear_stochastic_maximum_principle():
    # f = 0 with inhomogeneous Dirichlet data: the mean stays inside the
    # boundary extremes (up to the Krylov tolerance)
    cfg = small_config(tol_outer=1e-10)
    bc = BCSpec(dirichlet={"left": 0.0, "right": 1.0}, neumann=("top", "bottom"))
    sol, rep = solve_linear_stochastic(cfg, f=0.0, bc=bc)
    assert rep.converged
    mean, _ = moments(sol)
    assert mean.min() >= -1e-8 and mean.max() <= 1.0 + 1e-8


def test_linear_stochastic_single_subdomain_exact_preconditioner():
    cfg = small_config(nsub=1, preconditioner="ras1")
    from sgdd.dd import build_ras, partition_overlap
    from sgdd.solvers import build_stochastic_problem
    from sgdd.assembly import assemble_stochastic_linear
    from sgdd.sparsela import KrylovConfig, fgmres

    prob = build_stochastic_problem(cfg, need_quad=False)
    sys_ = assemble_stochastic_linear(prob.mesh, prob.pce, prob.m, prob.output_basis,
                                      prob.f, prob.bc, ws=prob.ws)
    part = partition_overlap(prob.mesh, prob.output_basis, 1, 1)
    pc = build_ras(sys_.matrix, part, local_solver="lu")
    _, rep = fgmres(sys_.matrix, sys_.rhs, pc, KrylovConfig(rel_tol=1e-5))
    assert rep.converged and rep.outer_iterations == 1


def test_nonlinear_stochastic_first_iterate_is_linear_solution(monkeypatch):
    # cap the loop at one Picard step: starting from zero, the first iterate
    # solves exactly the linear system
    import sgdd.solvers as solvers_mod

    monkeypatch.setattr(solvers_mod, "PICARD_CAP", 1)
    cfg = small_config(problem="nonlinear-stochastic", mesh_n=8, tol_outer=1e-12)
    sol_nl, rep_nl = solve_nonlinear_stochastic(cfg)
    cfg_lin = small_config(mesh_n=8, tol_outer=1e-12)
    sol_lin, _ = solve_linear_stochastic(cfg_lin)
    assert rep_nl.picard_iterations == 1
    assert np.max(np.abs(sol_nl.coeff_fields - sol_lin.coeff_fields)) < 1e-10


def test_nonlinear_stochastic_zero_data_converges_to_zero():
    cfg = small_config(problem="nonlinear-stochastic", mesh_n=8)
    sol, rep = solve_nonlinear_stochastic(cfg, f=0.0)
    assert rep.converged and rep.picard_iterations == 1
    assert np.max(np.abs(sol.coeff_fields)) == 0.0


def test_nonlinear_stochastic_converges_and_matches_sigma_zero_limit():
    cfg = small_config(problem="nonlinear-stochastic", mesh_n=16, sigma=0.0, g0=0.2,
                       tol_picard=1e-10)
    sol, rep = solve_nonlinear_stochastic(cfg)
    assert rep.converged
    assert rep.picard_iterations <= 15
    # deterministic Picard with coefficient c0 (1 + u), same BCs and f
    from sgdd.assembly import DeterministicKernel, homogeneous_dirichlet

    mesh = sol.mesh
    kern = DeterministicKernel(mesh, 1.0, homogeneous_dirichlet())
    u = np.zeros(mesh.num_vertices)
    for _ in range(60):
        A, b = kern.assemble(np.exp(0.2) * (1.0 + u))
        u_new = sparse_lu(A).solve(b)
        if np.linalg.norm(u_new - u) / max(np.linalg.norm(u), 1e-30) <= 1e-12:
            u = u_new
            break
        u = u_new
    assert np.max(np.abs(sol.coeff_fields[0] - u)) < 1e-8
    assert np.max(np.abs(sol.coeff_fields[1:])) < 1e-10


def test_moments():
    mesh = unit_square(2)
    from sgdd.chaos import enumerate_basis

    basis = enumerate_basis(2, 2)
    fields = np.zeros((len(basis), mesh.num_vertices))
    fields[0] = 2.0
    sol = SolutionPCE(basis, fields, mesh)
    mean, std = moments(sol)
    assert np.all(mean == 2.0) and np.all(std == 0.0)

    fields[1] = 0.5  # first-order term has unit norm
    mean, std = moments(sol)
    assert np.allclose(std, 0.5)
    # second-order term (2,0) has norm_sq 2
    fields[1] = 0.0
    idx = basis.index_of((2, 0))
    fields[idx] = 0.5
    _, std = moments(sol)
    assert np.allclose(std, 0.5 * np.sqrt(2.0))


def test_moments_match_surrogate_resampling():
    cfg = small_config(mesh_n=8, sigma=0.3)
    sol, _ = solve_linear_stochastic(cfg)
    mean, std = moments(sol)
    node = 40
    point = sol.mesh.vertices[node]
    pdf = pdf_at_point(sol, point, 1_000_000, seed=3)
    se = pdf.draws.std() / np.sqrt(len(pdf.draws))
    assert abs(pdf.draws.mean() - mean[node]) < 4 * se
    assert abs(pdf.draws.std(ddof=1) - std[node]) / std[node] < 0.01


def test_pdf_at_point_degenerate_and_seeded():
    mesh = unit_square(2)
    from sgdd.chaos import enumerate_basis

    basis = enumerate_basis(2, 1)
    fields = np.zeros((len(basis), mesh.num_vertices))
    fields[0] = 1.5
    sol = SolutionPCE(basis, fields, mesh)
    pdf = pdf_at_point(sol, (0.5, 0.5), 1000, seed=0)
    assert np.all(pdf.draws == 1.5)
    pdf2 = pdf_at_point(sol, (0.5, 0.5), 1000, seed=0)
    assert np.array_equal(pdf.draws, pdf2.draws)


def test_report_json_fields():
    cfg = small_config(mesh_n=8)
    _, rep = solve_linear_stochastic(cfg)
    text = rep.to_json()
    assert '"outer_iterations"' in text and '"pc_setup_seconds"' in text
    assert rep.pc_setup_seconds > 0.0 and rep.solve_seconds > 0.0
