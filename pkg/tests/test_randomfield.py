import numpy as np
import pytest

from sgdd.chaos import enumerate_basis, norm_sq
from sgdd.mesh import unit_square
from sgdd.randomfield import ExpKernel, kle_1d, kle_2d, lognormal_pce, sample_field

from oracles import gauss_hermite_prob, nystrom_1d, nystrom_2d


def test_kernel_validation():
    ExpKernel(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        ExpKernel(-0.1, 1.0, 1.0)
    with pytest.raises(ValueError):
        ExpKernel(1.0, 0.0, 1.0)


def test_kle_1d_eigenvalues_decrease():
    modes = kle_1d(1.0, 1.0, 10)
    lams = [m.lam for m in modes]
    assert all(a > b > 0 for a, b in zip(lams, lams[1:]))


def test_kle_1d_trace_identity():
    # sum over all eigenvalues of the sigma=1 kernel equals the interval length
    modes = kle_1d(0.5, 1.0, 400)
    assert np.sum([m.lam for m in modes]) == pytest.approx(1.0, rel=2e-3)


def test_kle_1d_matches_nystrom():
    modes = kle_1d(1.0, 1.0, 3)
    lam_ref, vec_ref, grid = nystrom_1d(1.0, 1.0, 3)
    for i, mode in enumerate(modes):
        assert mode.lam == pytest.approx(lam_ref[i], rel=1e-4)
        analytic = mode(grid)
        ref = vec_ref[:, i]
        if np.dot(analytic, ref) < 0:
            ref = -ref
        assert np.linalg.norm(analytic - ref) / np.linalg.norm(ref) < 1e-4


def test_kle_1d_orthonormal():
    modes = kle_1d(0.7, 1.0, 6)
    t = (np.arange(4000) + 0.5) / 4000
    h = 1.0 / 4000
    vals = np.array([m(t) for m in modes])
    gram = vals @ vals.T * h
    assert np.max(np.abs(gram - np.eye(6))) < 1e-6


def test_kle_2d_variance_capture_monotone():
    kern = ExpKernel(1.0, 1.0, 1.0)
    captures = []
    for M in (1, 4, 16, 64):
        kle = kle_2d(kern, M)
        captures.append(np.sum(kle.eigenvalues))
    assert all(a < b for a, b in zip(captures, captures[1:]))
    assert captures[-1] < 1.0


def test_kle_2d_trace_capture_200_modes():
    kle = kle_2d(ExpKernel(1.0, 1.0, 1.0), 200)
    assert kle.pool_trace >= 0.99


def test_kle_2d_matches_nystrom():
    # Richardson-corrected midpoint Nystrom removes the oracle's own O(h^2)
    # discretization error (the kernel has a kink on the diagonal)
    kle = kle_2d(ExpKernel(1.0, 1.0, 1.0), 8)
    lam_ref = (4 * nystrom_2d(1.0, 1.0, 1.0, 8, npts=60)
               - nystrom_2d(1.0, 1.0, 1.0, 8, npts=30)) / 3
    assert np.allclose(kle.eigenvalues, lam_ref, rtol=1e-3)


def test_kle_2d_sigma_zero():
    kle = kle_2d(ExpKernel(0.0, 1.0, 1.0), 5)
    assert np.all(kle.eigenvalues == 0.0)


def test_kle_2d_mode_orthonormality():
    kle = kle_2d(ExpKernel(1.0, 1.0, 1.0), 6)
    npts = 2000
    t = (np.arange(npts) + 0.5) / npts
    X, Y = np.meshgrid(t, t, indexing="ij")
    vals = np.array([m(X.ravel(), Y.ravel()) for m in kle.modes])
    gram = vals @ vals.T / npts**2
    assert np.max(np.abs(gram - np.eye(6))) < 1e-6


def test_lognormal_pce_mean_field():
    mesh = unit_square(6)
    kle = kle_2d(ExpKernel(0.3, 1.0, 1.0), 3, g0=0.1)
    basis = enumerate_basis(3, 2)
    pce = lognormal_pce(kle, basis, mesh)
    g = kle.g_fields(mesh.vertices)
    c0 = np.exp(0.1 + 0.5 * np.sum(g * g, axis=0))
    assert np.allclose(pce.coeff_fields[0], c0, rtol=1e-14)
    assert np.all(pce.coeff_fields[0] > 0)


def test_lognormal_pce_sigma_zero():
    mesh = unit_square(4)
    kle = kle_2d(ExpKernel(0.0, 1.0, 1.0), 2, g0=0.25)
    pce = lognormal_pce(kle, enumerate_basis(2, 2), mesh)
    assert np.allclose(pce.coeff_fields[0], np.exp(0.25), rtol=1e-14)
    assert np.all(pce.coeff_fields[1:] == 0.0)


def test_lognormal_pce_rejects_mismatch():
    mesh = unit_square(4)
    kle = kle_2d(ExpKernel(0.3, 1.0, 1.0), 3)
    with pytest.raises(ValueError):
        lognormal_pce(kle, enumerate_basis(2, 2), mesh)


def test_lognormal_pce_matches_quadrature_projection():
    # direct projection <c Psi_alpha>/<Psi_alpha^2> by tensorized quadrature
    mesh = unit_square(3)
    M = 3
    kle = kle_2d(ExpKernel(0.3, 1.0, 1.0), M, g0=0.05)
    basis = enumerate_basis(M, 2)
    pce = lognormal_pce(kle, basis, mesh)

    g = kle.g_fields(mesh.vertices)  # (M, n)
    x, w = gauss_hermite_prob(40)
    from sgdd.chaos import hermite_table

    He = hermite_table(2, x)  # (3, 40)
    for idx, alpha in enumerate(basis):
        num = np.ones(g.shape[1])
        for k, a in enumerate(alpha):
            # separable 1D integrals E[e^{g_k xi} He_a(xi)] per node
            vals = np.exp(np.outer(g[k], x)) * He[a][None, :]
            num = num * (vals @ w)
        expected = np.exp(kle.g0) * num / norm_sq(alpha)
        assert np.allclose(pce.coeff_fields[idx], expected, rtol=1e-8)


def test_lognormal_second_moment_converges_in_p():
    mesh = unit_square(2)
    kle = kle_2d(ExpKernel(0.3, 1.0, 1.0), 2, g0=0.0)
    g = kle.g_fields(mesh.vertices)
    sig2 = np.sum(g * g, axis=0)
    exact = np.exp(sig2) * np.exp(sig2)  # E[c^2] = exp(2 g0 + sigma^2) exp(sigma^2)
    errs = []
    for p in range(1, 5):
        basis = enumerate_basis(2, p)
        pce = lognormal_pce(kle, basis, mesh)
        norms = basis.norms_sq()
        approx = np.sum(pce.coeff_fields**2 * norms[:, None], axis=0)
        errs.append(np.max(np.abs(approx - exact) / exact))
    assert all(a > b for a, b in zip(errs, errs[1:]))


def test_sample_field():
    mesh = unit_square(5)
    kle = kle_2d(ExpKernel(0.3, 1.0, 1.0), 3, g0=0.2)
    field = sample_field(kle, np.zeros(3), mesh)
    assert np.allclose(field, np.exp(0.2), rtol=1e-14)
    rng = np.random.default_rng(1)
    for _ in range(5):
        f = sample_field(kle, rng.standard_normal(3), mesh)
        assert np.all(f > 0)
    with pytest.raises(ValueError):
        sample_field(kle, np.zeros(2), mesh)


def test_sample_field_lognormal_moment():
    mesh = unit_square(2)
    kle = kle_2d(ExpKernel(0.4, 1.0, 1.0), 3, g0=0.1)
    node = 4
    g = kle.g_fields(mesh.vertices)[:, node]
    rng = np.random.default_rng(42)
    ndraw = 100_000
    xi = rng.standard_normal((ndraw, 3))
    samples = np.exp(0.1 + xi @ g)
    exact = np.exp(0.1 + 0.5 * np.sum(g * g))
    se = samples.std() / np.sqrt(ndraw)
    assert abs(samples.mean() - exact) < 3 * se


def test_spectrum_csv(tmp_path):
    kle = kle_2d(ExpKernel(1.0, 1.0, 1.0), 10)
    path = tmp_path / "spec.csv"
    kle.spectrum_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "index,eigenvalue,variance_fraction"
    assert len(lines) == 11
