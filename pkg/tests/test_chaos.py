import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgdd.chaos import (
    basis_eval,
    enumerate_basis,
    hermite_eval,
    norm_sq,
    quad_tensor,
    triple_tensor,
)

from oracles import gauss_hermite_prob, quad_tensor_dense, triple_tensor_dense


def test_basis_sizes():
    assert len(enumerate_basis(3, 3)) == 20
    assert len(enumerate_basis(5, 3)) == 56
    basis = enumerate_basis(2, 0)
    assert len(basis) == 1 and basis[0] == (0, 0)


def test_basis_count_matches_binomial():
    for M in range(1, 10):
        for p in range(6):
            assert len(enumerate_basis(M, p)) == math.comb(M + p, p)


def test_basis_rejects_bad_arguments():
    with pytest.raises(ValueError):
        enumerate_basis(0, 2)
    with pytest.raises(ValueError):
        enumerate_basis(2, -1)


def test_basis_ordering_is_graded_and_deterministic():
    basis = enumerate_basis(3, 2)
    degs = [sum(a) for a in basis]
    assert degs == sorted(degs)
    assert basis[0] == (0, 0, 0)
    # within each degree class: descending lexicographic
    assert basis.indices[1:4] == [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
    assert basis.indices[4:] == [(2, 0, 0), (1, 1, 0), (1, 0, 1), (0, 2, 0), (0, 1, 1), (0, 0, 2)]


def test_hermite_small_orders():
    assert hermite_eval(0, 3.7) == 1.0
    assert hermite_eval(3, 0.0) == 0.0
    assert hermite_eval(2, 2.0) == 3.0  # He_2 = x^2 - 1


@given(st.integers(min_value=0, max_value=12), st.floats(-4, 4))
@settings(max_examples=200, deadline=None)
def test_hermite_matches_numpy(k, x):
    coeffs = np.zeros(k + 1)
    coeffs[k] = 1.0
    expected = np.polynomial.hermite_e.hermeval(x, coeffs)
    assert hermite_eval(k, x) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_basis_eval():
    basis = enumerate_basis(2, 2)
    assert basis_eval(basis[0], [1.3, -0.4]) == 1.0
    assert basis_eval((1, 0), [2.0, 5.0]) == 2.0
    assert basis_eval((2, 1), [1.0, 3.0]) == 0.0  # He_2(1) = 0
    with pytest.raises(ValueError):
        basis_eval((1, 0), [1.0, 2.0, 3.0])


def test_norm_sq():
    assert norm_sq((0, 0, 0)) == 1.0
    assert norm_sq((2, 1)) == 2.0
    # quadrature check of <He_3^2>
    x, w = gauss_hermite_prob(10)
    he3 = x**3 - 3 * x
    assert norm_sq((3,)) == pytest.approx(np.sum(w * he3 * he3), rel=1e-12)


def test_orthogonality_by_quadrature():
    basis = enumerate_basis(3, 3)
    x, w = gauss_hermite_prob(8)
    # <Psi_a Psi_b> = norm_sq(a) delta_ab, via tensorized quadrature
    from oracles import univariate_product_table

    T = univariate_product_table((3, 3), 8)
    D = basis.degrees
    gram = np.ones((len(basis), len(basis)))
    for v in range(3):
        gram *= T[np.ix_(D[:, v], D[:, v])]
    expected = np.diag([norm_sq(a) for a in basis])
    assert np.allclose(gram, expected, atol=1e-12)


def test_triple_tensor_values():
    basis_in = enumerate_basis(2, 2)
    basis_out = enumerate_basis(2, 3)
    m = triple_tensor(basis_in, basis_out)
    # i = 0 row: orthogonality
    for j in range(len(basis_out)):
        for k in range(len(basis_out)):
            expected = norm_sq(basis_out[j]) if j == k else 0.0
            assert m.value(0, j, k) == pytest.approx(expected)
    assert m.value(0, 0, 0) == 1.0


def test_triple_univariate_112():
    basis = enumerate_basis(1, 2)
    m = triple_tensor(basis, basis)
    # quadrature oracle, 10-point rule
    x, w = gauss_hermite_prob(10)
    he1, he2 = x, x**2 - 1
    assert m.value(1, 1, 2) == pytest.approx(np.sum(w * he1 * he1 * he2), rel=1e-12)
    assert m.value(1, 1, 2) == 2.0


def test_triple_tensor_symmetry_and_sparsity():
    basis_in = enumerate_basis(3, 2)
    basis_out = enumerate_basis(3, 3)
    m = triple_tensor(basis_in, basis_out)
    assert np.all(m.values != 0.0)
    ent = m.entries
    for (i, j, k), v in ent.items():
        assert ent[(i, k, j)] == v


def test_triple_tensor_rejects_mismatched_germ():
    with pytest.raises(ValueError):
        triple_tensor(enumerate_basis(2, 2), enumerate_basis(3, 2))


def test_triple_matches_quadrature_oracle():
    for M, p in [(1, 4), (2, 3), (3, 2), (4, 2)]:
        bin_ = enumerate_basis(M, max(p - 1, 0))
        bout = enumerate_basis(M, p)
        m = triple_tensor(bin_, bout)
        dense = triple_tensor_dense(bin_, bout)
        got = np.zeros_like(dense)
        got[m.idx[:, 0], m.idx[:, 1], m.idx[:, 2]] = m.values
        assert np.allclose(got, dense, rtol=1e-12, atol=1e-12)


def test_quad_tensor_values():
    basis = enumerate_basis(1, 2)
    t = quad_tensor(basis, basis)
    x, w = gauss_hermite_prob(10)
    assert t.value(1, 1, 1, 1) == pytest.approx(np.sum(w * x**4), rel=1e-12)
    assert t.value(1, 1, 1, 1) == 3.0
    assert t.value(0, 0, 0, 0) == 1.0


def test_quad_reduces_to_triple_for_i0():
    basis_in = enumerate_basis(2, 2)
    basis_out = enumerate_basis(2, 2)
    t = quad_tensor(basis_in, basis_out)
    m = triple_tensor(basis_out, basis_out)
    for j in range(len(basis_out)):
        for k in range(len(basis_out)):
            for l in range(len(basis_out)):
                assert t.value(0, j, k, l) == pytest.approx(m.value(j, k, l), abs=1e-12)


def test_quad_permutation_symmetry_same_basis():
    basis = enumerate_basis(2, 2)
    t = quad_tensor(basis, basis)
    ent = t.entries
    rng = np.random.default_rng(0)
    keys = list(ent)
    for key in [keys[i] for i in rng.integers(0, len(keys), size=40)]:
        perm = tuple(np.array(key)[rng.permutation(4)])
        assert ent.get(perm, 0.0) == pytest.approx(ent[key], rel=1e-12)


def test_quad_matches_quadrature_oracle():
    for M, p in [(1, 3), (2, 2), (3, 2)]:
        basis = enumerate_basis(M, p)
        t = quad_tensor(basis, basis)
        dense = quad_tensor_dense(basis, basis)
        got = np.zeros_like(dense)
        got[t.idx[:, 0], t.idx[:, 1], t.idx[:, 2], t.idx[:, 3]] = t.values
        assert np.allclose(got, dense, rtol=1e-12, atol=1e-12)


def test_tensor_csv_export(tmp_path):
    basis = enumerate_basis(2, 1)
    m = triple_tensor(basis, basis)
    path = tmp_path / "m.csv"
    m.to_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "i,j,k,value"
    assert len(lines) == len(m) + 1
