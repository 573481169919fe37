"""Classical algebraic multigrid, used as the coarse-grid preconditioner of
the two-grid variant that pairs an inner Krylov solve with one V-cycle.

Setup is classical Ruge-Stuben coarsening on the strength graph with
direct interpolation and Galerkin coarse operators; the cycle is V(1,1)
with damped Jacobi smoothing (order-independent, hence deterministic).
The coarse block matrix of the stochastic system is treated as a plain
scalar sparse matrix.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .sparsela import CsrMatrix, as_csr, sparse_lu

__all__ = ["AmgHierarchy", "amg_setup", "amg_vcycle"]

_JACOBI_OMEGA = 2.0 / 3.0
_MAX_LEVELS = 25


@dataclass
class _Level:
    A: CsrMatrix
    P: CsrMatrix  # interpolation to this level from the next coarser one
    inv_diag: np.ndarray
    omega: float


class AmgHierarchy:
    """Immutable multilevel hierarchy; coarsest level factored exactly."""

    def __init__(self, levels, coarsest, coarse_factor, theta, cutoff):
        self.levels = levels  # list of _Level, finest first
        self.coarsest = coarsest
        self.coarse_factor = coarse_factor
        self.theta = theta
        self.cutoff = cutoff

    @property
    def level_sizes(self):
        return [lvl.A.shape[0] for lvl in self.levels] + [self.coarsest.shape[0]]

    def operator_complexity(self):
        nnz = [lvl.A.nnz for lvl in self.levels] + [self.coarsest.nnz]
        return sum(nnz) / nnz[0]

    def summary(self):
        return {
            "levels": self.level_sizes,
            "operator_complexity": self.operator_complexity(),
            "theta": self.theta,
        }


def _strength_graph(A: CsrMatrix, theta):
    """Boolean mask over A's entries marking strong connections.

    Entries of opposite sign to the diagonal compete; i -> j is strong when
    |a_ij| >= theta * max_k |a_ik| over those sign-filtered candidates.
    """
    n = A.shape[0]
    rows = np.repeat(np.arange(n), np.diff(A.indptr))
    diag = A.diagonal()
    offdiag = A.indices != rows
    opposite = A.data * diag[rows] < 0.0
    cand = offdiag & opposite
    mags = np.where(cand, np.abs(A.data), 0.0)
    row_max = np.zeros(n)
    np.maximum.at(row_max, rows, mags)
    strong = cand & (mags >= theta * row_max[rows]) & (mags > 0.0)
    return strong, rows


def _rs_coarsen(A: CsrMatrix, strong, rows):
    """Classical first-pass C/F splitting with a bucket priority queue.

    The measure of a point is the number of points strongly depending on it;
    highest measure becomes C, its strong dependents become F, and every F
    assignment bumps the measure of the F point's other strong neighbours.
    Ties break on the lower index for determinism.
    """
    n = A.shape[0]
    cols = A.indices
    # strong adjacency i -> S(i)
    s_ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(s_ptr, rows[strong] + 1, 1)
    np.cumsum(s_ptr, out=s_ptr)
    s_idx = cols[strong]
    # transpose: who strongly depends on i
    st = sp.csr_matrix(
        (np.ones(strong.sum()), (s_idx, rows[strong])), shape=(n, n)
    ).tocsr()
    measure = np.diff(st.indptr).astype(np.int64)

    UNDECIDED, COARSE, FINE = 0, 1, 2
    state = np.zeros(n, dtype=np.int8)
    # isolated points (no strong connections either way) become C points
    isolated = (measure == 0) & (np.diff(s_ptr) == 0)
    state[isolated] = COARSE

    maxm = int(measure.max()) if n else 0
    buckets = [[] for _ in range(maxm + 2)]
    for i in range(n):
        if state[i] == UNDECIDED:
            buckets[measure[i]].append(i)
    in_bucket = measure.copy()
    top = maxm

    def bump(i):
        if state[i] == UNDECIDED:
            measure[i] += 1
            buckets[min(measure[i], maxm + 1)].append(i)

    while top >= 0:
        while top >= 0 and not buckets[top]:
            top -= 1
        if top < 0:
            break
        i = buckets[top].pop()
        if state[i] != UNDECIDED or min(measure[i], maxm + 1) != top:
            continue  # stale queue entry
        state[i] = COARSE
        for p in range(st.indptr[i], st.indptr[i + 1]):
            j = st.indices[p]
            if state[j] == UNDECIDED:
                state[j] = FINE
                for q in range(s_ptr[j], s_ptr[j + 1]):
                    bump(s_idx[q])
        top = min(maxm + 1, top + 2)
    # stragglers with no coarse influence become C
    state[state == UNDECIDED] = COARSE
    return state == COARSE


def _direct_interpolation(A: CsrMatrix, strong, rows, is_coarse):
    """Stuben direct interpolation on the strong coarse neighbours.

    F-point weights are -alpha * a_ij / a~_ii split by sign, where alpha
    rescales so the full off-diagonal mass flows through the interpolatory
    set and weak entries of matching sign are lumped into the diagonal.
    """
    n = A.shape[0]
    cols = A.indices
    data = A.data
    coarse_id = np.cumsum(is_coarse) - 1
    nc = int(is_coarse.sum())

    diag = A.diagonal()
    offdiag = cols != rows
    neg = offdiag & (data < 0)
    pos = offdiag & (data > 0)
    interp = strong & is_coarse[cols]
    neg_i = interp & neg
    pos_i = interp & pos

    def rowsum(mask):
        out = np.zeros(n)
        np.add.at(out, rows[mask], data[mask])
        return out

    sum_neg = rowsum(neg)
    sum_pos = rowsum(pos)
    sum_neg_i = rowsum(neg_i)
    sum_pos_i = rowsum(pos_i)

    # positive entries without a positive interpolatory partner are lumped
    # into the diagonal (and vice versa for negative ones)
    lump_pos = np.where(sum_pos_i == 0.0, sum_pos, 0.0)
    lump_neg = np.where(sum_neg_i == 0.0, sum_neg, 0.0)
    dtilde = diag + lump_pos + lump_neg
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.where(sum_neg_i != 0.0, sum_neg / sum_neg_i, 0.0)
        beta = np.where(sum_pos_i != 0.0, sum_pos / sum_pos_i, 0.0)

    w_rows, w_cols, w_vals = [], [], []
    # C points interpolate themselves
    cpts = np.nonzero(is_coarse)[0]
    w_rows.append(cpts)
    w_cols.append(coarse_id[cpts])
    w_vals.append(np.ones(len(cpts)))
    # F points
    use = (neg_i | pos_i) & ~is_coarse[rows]
    rr = rows[use]
    cc = cols[use]
    scale = np.where(data[use] < 0, alpha[rr], beta[rr])
    vals = -scale * data[use] / dtilde[rr]
    w_rows.append(rr)
    w_cols.append(coarse_id[cc])
    w_vals.append(vals)

    P = sp.coo_matrix(
        (np.concatenate(w_vals), (np.concatenate(w_rows), np.concatenate(w_cols))),
        shape=(n, nc),
    ).tocsr()
    P.sum_duplicates()
    P.sort_indices()
    return P


def _safe_omega(A, inv_diag):
    """Damping that keeps the Jacobi sweep contractive.

    The nominal 2/3 is fine for M-matrix stencils (lambda_max of D^-1 A
    just under 2) but amplifies on strongly coupled chaos blocks where
    lambda_max exceeds 3; a deterministic power iteration estimates
    lambda_max and caps omega at 4/(3 lambda_max).
    """
    x = np.ones(A.shape[0])
    lam = 1.0
    for _ in range(20):
        y = inv_diag * (A @ x)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return _JACOBI_OMEGA
        lam = norm / np.linalg.norm(x)
        x = y / norm
    return min(_JACOBI_OMEGA, 4.0 / (3.0 * lam))


def amg_setup(A, theta: float = 0.25, cutoff: int = 200) -> AmgHierarchy:
    """Build the multilevel hierarchy down to `cutoff` unknowns (max 25 levels).

    A level that fails to shrink by at least 5% truncates the hierarchy
    there; the coarsest operator is factored exactly.
    """
    A = as_csr(A).astype(np.float64)
    if np.any(A.diagonal() == 0.0):
        raise ValueError("AMG needs a nonzero diagonal")
    levels = []
    current = A
    while current.shape[0] > cutoff and len(levels) < _MAX_LEVELS:
        strong, rows = _strength_graph(current, theta)
        is_coarse = _rs_coarsen(current, strong, rows)
        nc = int(is_coarse.sum())
        if nc == 0 or nc > 0.95 * current.shape[0]:
            break  # coarsening stalled; factor what we have
        P = _direct_interpolation(current, strong, rows, is_coarse)
        coarse = as_csr(P.T @ current @ P)
        inv_diag = 1.0 / current.diagonal()
        levels.append(_Level(current, P, inv_diag, _safe_omega(current, inv_diag)))
        current = coarse
    factor = sparse_lu(current)
    return AmgHierarchy(levels, current, factor, theta, cutoff)


def amg_vcycle(h: AmgHierarchy, r) -> np.ndarray:
    """One V(1,1) cycle with zero initial guess; a fixed linear operator."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape[0] != (h.levels[0].A.shape[0] if h.levels else h.coarsest.shape[0]):
        raise ValueError("residual length does not match the hierarchy")
    return _cycle(h, 0, r)


def _cycle(h: AmgHierarchy, depth, r):
    if depth == len(h.levels):
        return h.coarse_factor.solve(r)
    lvl = h.levels[depth]
    # pre-smooth from zero guess
    x = lvl.omega * lvl.inv_diag * r
    resid = r - lvl.A @ x
    x = x + lvl.P @ _cycle(h, depth + 1, lvl.P.T @ resid)
    resid = r - lvl.A @ x
    x = x + lvl.omega * lvl.inv_diag * resid
    return x
