"""Numba kernels for the zero-fill incomplete factorization.

The factorization and the triangular sweeps are row-sequential and cannot
be vectorized with numpy; the jitted versions run at C speed and release
the GIL so subdomain solves can proceed concurrently.
"""

import numpy as np
from numba import njit

__all__ = ["ilu0_factor", "ilu0_solve"]


@njit(cache=True, nogil=True)
def ilu0_factor(n, indptr, indices, data, diag_pos):
    """In-place ILU(0) on a CSR matrix with sorted column indices.

    L carries a unit diagonal; its strict lower entries and U overwrite
    `data` on the original sparsity pattern.  Returns the row of the first
    zero pivot, or -1 on success.
    """
    for i in range(n):
        row_start = indptr[i]
        row_end = indptr[i + 1]
        for p in range(row_start, row_end):
            k = indices[p]
            if k >= i:
                break
            dk = data[diag_pos[k]]
            if dk == 0.0:
                return k
            factor = data[p] / dk
            data[p] = factor
            # subtract factor * row k (columns > k) from row i on the pattern
            qk = diag_pos[k] + 1
            qi = p + 1
            k_end = indptr[k + 1]
            while qk < k_end and qi < row_end:
                ck = indices[qk]
                ci = indices[qi]
                if ck == ci:
                    data[qi] -= factor * data[qk]
                    qk += 1
                    qi += 1
                elif ck < ci:
                    qk += 1
                else:
                    qi += 1
        if data[diag_pos[i]] == 0.0:
            return i
    return -1


@njit(cache=True, nogil=True)
def ilu0_solve(n, indptr, indices, data, diag_pos, b, out):
    """Solve LU z = b with the in-place ILU(0) factor; writes into `out`."""
    # forward: L (unit diagonal)
    for i in range(n):
        acc = b[i]
        for p in range(indptr[i], diag_pos[i]):
            acc -= data[p] * out[indices[p]]
        out[i] = acc
    # backward: U
    for i in range(n - 1, -1, -1):
        acc = out[i]
        for p in range(diag_pos[i] + 1, indptr[i + 1]):
            acc -= data[p] * out[indices[p]]
        out[i] = acc / data[diag_pos[i]]
