"""Hermite chaos bases and the multiplication tensors that couple the
Galerkin system.

Walks through: enumerating a graded multi-index basis, evaluating the
polynomials, and inspecting the sparsity of the triple and quadruple
product tensors as the number of random variables and the expansion
order grow.
"""

import numpy as np

from sgdd.chaos import basis_eval, enumerate_basis, norm_sq, quad_tensor, triple_tensor

# A basis in M = 3 Gaussians up to total order p = 3 has 20 members, the
# size quoted for third-order output expansions with three random variables.
basis = enumerate_basis(3, 3)
print(f"basis: {basis}")
print("first indices:", basis.indices[:6])
print("norms <Psi_i^2>:", basis.norms_sq()[:6])

# Polynomials evaluate as products of univariate Hermites.
xi = np.array([0.3, -1.2, 0.8])
print("\nPsi_i(xi) for the first few i:",
      [round(basis_eval(a, xi), 4) for a in basis.indices[:6]])

# The input expansion is usually shorter (2nd order) than the output (3rd).
input_basis = enumerate_basis(3, 2)
m = triple_tensor(input_basis, basis)
t = quad_tensor(input_basis, basis)

full_m = len(input_basis) * len(basis) ** 2
full_t = len(input_basis) * len(basis) ** 3
print(f"\ntriple tensor: {len(m)} nonzeros of {full_m} ({100 * len(m) / full_m:.1f}%)")
print(f"quad tensor:   {len(t)} nonzeros of {full_t} ({100 * len(t) / full_t:.1f}%)")

# i = 0 rows reproduce the Gram matrix: m_{0jk} = <Psi_j^2> delta_jk.
print("\nm(0,j,j) vs norms:", [m.value(0, j, j) for j in range(4)],
      "=", list(basis.norms_sq()[:4]))

# Sparsity growth with the stochastic dimension.
print("\nnonzero fractions of m as (M, p) grow:")
for M, p in [(2, 2), (3, 2), (4, 2), (3, 3), (3, 4)]:
    bi = enumerate_basis(M, 2)
    bo = enumerate_basis(M, p)
    mm = triple_tensor(bi, bo)
    frac = len(mm) / (len(bi) * len(bo) ** 2)
    print(f"  M={M}, p_out={p}: {len(mm):6d} nonzeros ({100 * frac:.1f}%)")

# Everything is analytic; dump to CSV for diffing against other codes.
m.to_csv("triple_tensor.csv")
print("\nwrote triple_tensor.csv")
