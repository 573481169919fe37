"""Hermite polynomial chaos bases and multiplication tensors.

Multivariate probabilists' Hermite polynomials of independent standard
Gaussians form the basis in which random inputs and outputs are expanded.
The coupled Galerkin systems are driven by the expectations of triple and
quadruple products of these polynomials; both tensors are computed
analytically here (closed-form triple products and Hermite linearization).
Gauss-Hermite quadrature is used only by the test suite as an independent
oracle, never in this module.
"""

import csv
import math

import numpy as np

__all__ = [
    "ChaosBasis",
    "TripleTensor",
    "QuadTensor",
    "enumerate_basis",
    "hermite_eval",
    "basis_eval",
    "norm_sq",
    "triple_product_1d",
    "quad_product_1d",
    "hermite_linearization",
    "triple_tensor",
    "quad_tensor",
]


def _graded_indices(M, p):
    """Multi-indices of length M with total degree <= p.

    Ordering is graded (total degree ascending) and, within a degree class,
    descending lexicographic, e.g. for M=3: (0,0,0), (1,0,0), (0,1,0),
    (0,0,1), (2,0,0), (1,1,0), ...  The ordering is fixed so coefficient
    vectors are reproducible across runs and machines.
    """

    def compositions(total, nparts):
        if nparts == 1:
            yield (total,)
            return
        for head in range(total, -1, -1):
            for tail in compositions(total - head, nparts - 1):
                yield (head,) + tail

    out = []
    for deg in range(p + 1):
        out.extend(compositions(deg, M))
    return out


class ChaosBasis:
    """Ordered set of Hermite multi-indices in M variables up to order p.

    Immutable after construction; `indices` is a list of tuples, the i-th
    tuple holding the per-variable Hermite orders of basis function i.
    """

    def __init__(self, M, p, indices):
        self.M = M
        self.p = p
        self.indices = list(indices)
        self._lookup = {alpha: i for i, alpha in enumerate(self.indices)}
        self.degrees = np.array(self.indices, dtype=np.int64).reshape(len(self.indices), M)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __getitem__(self, i):
        return self.indices[i]

    def index_of(self, alpha):
        return self._lookup[tuple(alpha)]

    def norms_sq(self):
        """Array of <Psi_i^2> for every basis function."""
        return np.array([norm_sq(a) for a in self.indices])

    def __repr__(self):
        return f"ChaosBasis(M={self.M}, p={self.p}, size={len(self)})"


def enumerate_basis(M: int, p: int) -> ChaosBasis:
    """Build the graded-lex ordered Hermite chaos basis of M variables, order p.

    The basis has (M+p)!/(M!p!) members and starts with the all-zero index
    (the constant chaos).
    """
    if M < 1:
        raise ValueError(f"need at least one random variable, got M={M}")
    if p < 0:
        raise ValueError(f"expansion order must be non-negative, got p={p}")
    indices = _graded_indices(M, p)
    expected = math.comb(M + p, p)
    assert len(indices) == expected
    return ChaosBasis(M, p, indices)


def hermite_eval(k: int, x):
    """Probabilists' Hermite polynomial He_k at x (scalar or array).

    Three-term recurrence He_{k+1} = x He_k - k He_{k-1}, He_0 = 1, He_1 = x.
    """
    if k < 0:
        raise ValueError(f"polynomial order must be non-negative, got {k}")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if k == 0:
        return prev if prev.ndim else float(prev)
    cur = x.copy()
    for n in range(1, k):
        prev, cur = cur, x * cur - n * prev
    return cur if cur.ndim else float(cur)


def hermite_table(kmax: int, x):
    """He_0..He_kmax evaluated at x; shape (kmax+1,) + x.shape."""
    x = np.asarray(x, dtype=float)
    out = np.empty((kmax + 1,) + x.shape)
    out[0] = 1.0
    if kmax >= 1:
        out[1] = x
    for n in range(1, kmax):
        out[n + 1] = x * out[n] - n * out[n - 1]
    return out


def basis_eval(alpha, xi):
    """Evaluate the multivariate chaos Psi_alpha at the germ sample xi."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != len(alpha):
        raise ValueError(f"germ has {xi.shape[-1]} entries, index has {len(alpha)}")
    val = np.ones(xi.shape[:-1])
    for k, a in enumerate(alpha):
        if a:
            val = val * hermite_eval(a, xi[..., k])
    return val if val.ndim else float(val)


def norm_sq(alpha) -> float:
    """<Psi_alpha^2> = prod_k alpha_k! for probabilists' Hermite chaoses."""
    out = 1.0
    for a in alpha:
        out *= math.factorial(a)
    return out


def triple_product_1d(a: int, b: int, c: int) -> float:
    """<He_a He_b He_c> for a single standard Gaussian.

    Nonzero only when a+b+c is even and the triangle inequalities hold, in
    which case the value is a! b! c! / ((s-a)! (s-b)! (s-c)!) with s the
    half-sum.
    """
    tot = a + b + c
    if tot % 2:
        return 0.0
    s = tot // 2
    if s < a or s < b or s < c:
        return 0.0
    return (
        math.factorial(a) * math.factorial(b) * math.factorial(c)
        / (math.factorial(s - a) * math.factorial(s - b) * math.factorial(s - c))
    )


def hermite_linearization(a: int, b: int):
    """Coefficients of He_a He_b = sum_s L_s He_s.

    Returns (orders, coeffs): s runs over |a-b| .. a+b in steps of two, and
    L_s = <He_a He_b He_s> / s!.
    """
    orders = list(range(abs(a - b), a + b + 1, 2))
    coeffs = [triple_product_1d(a, b, s) / math.factorial(s) for s in orders]
    return orders, coeffs


def quad_product_1d(a: int, b: int, c: int, d: int) -> float:
    """<He_a He_b He_c He_d> via linearization of He_a He_b plus triples."""
    orders, coeffs = hermite_linearization(a, b)
    return sum(L * triple_product_1d(s, c, d) for s, L in zip(orders, coeffs))


class _SparseTensor:
    """Sparse expectation tensor stored as sorted index rows + values.

    Only nonzero entries are stored.  `idx` has one row per entry and one
    column per tensor axis; rows are lexicographically sorted so lookups can
    binary-search and iteration order is deterministic.
    """

    naxes = None

    def __init__(self, idx, values, input_basis, output_basis):
        idx = np.asarray(idx, dtype=np.int64).reshape(-1, self.naxes)
        values = np.asarray(values, dtype=float)
        order = np.lexsort(idx.T[::-1])
        self.idx = idx[order]
        self.values = values[order]
        self.input_basis = input_basis
        self.output_basis = output_basis
        self._keys = self._pack(self.idx)

    def _pack(self, idx):
        dims = [len(self.input_basis)] + [len(self.output_basis)] * (self.naxes - 1)
        key = idx[:, 0].astype(np.int64)
        for ax in range(1, self.naxes):
            key = key * dims[ax] + idx[:, ax]
        return key

    def value(self, *index) -> float:
        key = self._pack(np.array([index], dtype=np.int64))[0]
        pos = np.searchsorted(self._keys, key)
        if pos < len(self._keys) and self._keys[pos] == key:
            return float(self.values[pos])
        return 0.0

    @property
    def entries(self):
        """Sparse map index-tuple -> value (built on demand)."""
        return {tuple(row): v for row, v in zip(self.idx.tolist(), self.values)}

    def __len__(self):
        return len(self.values)

    def to_csv(self, path):
        """Dump nonzero entries for cross-implementation diffing."""
        header = ["i", "j", "k", "l"][: self.naxes] + ["value"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row, v in zip(self.idx.tolist(), self.values):
                writer.writerow(row + [repr(v)])


class TripleTensor(_SparseTensor):
    """m_ijk = <Psi_i Psi_j Psi_k>, i over the input basis, j,k over the output."""

    naxes = 3

    def blocks(self):
        """Group entries by (k, j) -> (i array, value array), k test, j trial."""
        out = {}
        for (i, j, k), v in zip(self.idx.tolist(), self.values):
            out.setdefault((k, j), ([], []))
            out[(k, j)][0].append(i)
            out[(k, j)][1].append(v)
        return {
            key: (np.array(ii, dtype=np.int64), np.array(vv))
            for key, (ii, vv) in out.items()
        }


class QuadTensor(_SparseTensor):
    """t_ijkl = <Psi_i Psi_j Psi_k Psi_l>, i over the input basis."""

    naxes = 4

    def blocks(self):
        """Group entries by (l, k) -> (i array, j array, value array)."""
        out = {}
        for (i, j, k, l), v in zip(self.idx.tolist(), self.values):
            out.setdefault((l, k), ([], [], []))
            rec = out[(l, k)]
            rec[0].append(i)
            rec[1].append(j)
            rec[2].append(v)
        return {
            key: (np.array(ii, dtype=np.int64), np.array(jj, dtype=np.int64), np.array(vv))
            for key, (ii, jj, vv) in out.items()
        }


def _check_same_germ(input_basis, output_basis):
    if input_basis.M != output_basis.M:
        raise ValueError(
            f"bases use different germs: M={input_basis.M} vs M={output_basis.M}"
        )


def triple_tensor(input_basis: ChaosBasis, output_basis: ChaosBasis) -> TripleTensor:
    """Assemble the sparse tensor <Psi_i Psi_j Psi_k> analytically.

    Multivariate entries are products of univariate closed-form triples over
    the variables; only nonzeros are stored.  Symmetric in (j, k).
    """
    _check_same_germ(input_basis, output_basis)
    M = input_basis.M
    # closed-form univariate table T[a, b, c]
    pa, pb = input_basis.p, output_basis.p
    T = np.zeros((pa + 1, pb + 1, pb + 1))
    for a in range(pa + 1):
        for b in range(pb + 1):
            for c in range(pb + 1):
                T[a, b, c] = triple_product_1d(a, b, c)

    Din = input_basis.degrees
    Dout = output_basis.degrees
    nout = len(output_basis)
    rows, vals = [], []
    for i in range(len(input_basis)):
        ai = Din[i]
        for j in range(nout):
            aj = Dout[j]
            # vectorized over k
            col = np.ones(nout)
            for v in range(M):
                col *= T[ai[v], aj[v], Dout[:, v]]
            (kk,) = np.nonzero(col)
            for k in kk:
                rows.append((i, j, int(k)))
                vals.append(col[k])
    return TripleTensor(np.array(rows, dtype=np.int64).reshape(-1, 3), vals,
                        input_basis, output_basis)


def quad_tensor(input_basis: ChaosBasis, output_basis: ChaosBasis) -> QuadTensor:
    """Assemble the sparse tensor <Psi_i Psi_j Psi_k Psi_l> analytically.

    Univariate quadruple products come from the Hermite linearization of
    He_a He_b followed by closed-form triples; multivariate entries are
    products over variables.  Only nonzeros are stored.
    """
    _check_same_germ(input_basis, output_basis)
    M = input_basis.M
    pa, pb = input_basis.p, output_basis.p
    U = np.zeros((pa + 1, pb + 1, pb + 1, pb + 1))
    for a in range(pa + 1):
        for b in range(pb + 1):
            for c in range(pb + 1):
                for d in range(pb + 1):
                    U[a, b, c, d] = quad_product_1d(a, b, c, d)

    Din = input_basis.degrees
    Dout = output_basis.degrees
    nout = len(output_basis)
    idx_chunks, val_chunks = [], []
    kcol = Dout[:, None, :]  # (nout, 1, M)
    lcol = Dout[None, :, :]
    for i in range(len(input_basis)):
        ai = Din[i]
        for j in range(nout):
            aj = Dout[j]
            block = np.ones((nout, nout))
            for v in range(M):
                block *= U[ai[v], aj[v]][kcol[:, :, v], lcol[:, :, v]]
            kk, ll = np.nonzero(block)
            if kk.size:
                chunk = np.empty((kk.size, 4), dtype=np.int64)
                chunk[:, 0] = i
                chunk[:, 1] = j
                chunk[:, 2] = kk
                chunk[:, 3] = ll
                idx_chunks.append(chunk)
                val_chunks.append(block[kk, ll])
    if idx_chunks:
        idx = np.concatenate(idx_chunks)
        vals = np.concatenate(val_chunks)
    else:
        idx = np.empty((0, 4), dtype=np.int64)
        vals = np.empty(0)
    return QuadTensor(idx, vals, input_basis, output_basis)
