"""Sparse kernels and Krylov solvers: ILU(0), exact sparse LU, GMRES and
its flexible variant, plus dense condition-number estimation.

Matrices are scipy CSR throughout.  Both Krylov solvers are
right-preconditioned so the Givens-recurrence residual is the true
residual ||b - A x||; convergence is declared on ||b - A x|| / ||b||.
"""

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._kernels import ilu0_factor, ilu0_solve

__all__ = [
    "CsrMatrix",
    "KrylovConfig",
    "SolveReport",
    "spmv",
    "ilu0",
    "sparse_lu",
    "gmres",
    "fgmres",
    "condition_number",
    "read_matrix",
    "write_matrix",
]

# the sparse matrix type used across the package
CsrMatrix = sp.csr_matrix


def as_csr(A) -> CsrMatrix:
    """Canonical CSR: sorted column indices, duplicates merged."""
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    return A


@dataclass
class KrylovConfig:
    """Tolerances and limits for the Krylov solvers.

    rel_tol is measured against ||b||; max_iters counts total iterations
    across restart cycles.
    """

    rel_tol: float = 1e-5
    max_iters: int = 1000
    restart: int = 200

    def __post_init__(self):
        if not 0.0 < self.rel_tol < 1.0:
            raise ValueError(f"rel_tol must be in (0, 1), got {self.rel_tol}")
        if self.restart < 1:
            raise ValueError(f"restart must be at least 1, got {self.restart}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")


@dataclass
class SolveReport:
    """What a solve did: iteration counts, residuals, timings, flags."""

    outer_iterations: int = 0
    coarse_iterations: float = 0.0
    picard_iterations: int = 0
    pc_setup_seconds: float = 0.0
    solve_seconds: float = 0.0
    residual_history: list = field(default_factory=list)
    converged: bool = False
    breakdown: bool = False
    details: dict = field(default_factory=dict)

    def to_json(self, path=None):
        payload = {
            "outer_iterations": self.outer_iterations,
            "coarse_iterations": self.coarse_iterations,
            "picard_iterations": self.picard_iterations,
            "pc_setup_seconds": self.pc_setup_seconds,
            "solve_seconds": self.solve_seconds,
            "residual_history": list(map(float, self.residual_history)),
            "converged": bool(self.converged),
            "breakdown": bool(self.breakdown),
            "details": self.details,
        }
        text = json.dumps(payload, indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def residual_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "relative_residual"])
            for i, r in enumerate(self.residual_history):
                writer.writerow([i, repr(float(r))])


def spmv(A, x) -> np.ndarray:
    """y = A x."""
    x = np.asarray(x)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} @ {x.shape}")
    return A @ x


class Ilu0Factor:
    """Zero-fill incomplete LU on the matrix's own sparsity pattern."""

    def __init__(self, A: CsrMatrix):
        A = as_csr(A)
        n = A.shape[0]
        self.n = n
        self.indptr = A.indptr.astype(np.int64)
        self.indices = A.indices.astype(np.int64)
        self.data = A.data.astype(np.float64).copy()
        diag_pos = np.full(n, -1, dtype=np.int64)
        for i in range(n):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            pos = np.searchsorted(self.indices[lo:hi], i) + lo
            if pos < hi and self.indices[pos] == i:
                diag_pos[i] = pos
        missing = np.nonzero(diag_pos < 0)[0]
        if missing.size:
            raise ValueError(f"zero pivot: row {missing[0]} has no diagonal entry")
        self.diag_pos = diag_pos
        bad = ilu0_factor(n, self.indptr, self.indices, self.data, diag_pos)
        if bad >= 0:
            raise ValueError(f"zero pivot in row {bad} during ILU(0)")

    def solve(self, b):
        out = np.empty(self.n)
        ilu0_solve(self.n, self.indptr, self.indices, self.data, self.diag_pos,
                   np.asarray(b, dtype=np.float64), out)
        return out

    __call__ = solve


def ilu0(A) -> Ilu0Factor:
    """Factor A into L U on A's pattern; apply = one forward/back sweep."""
    return Ilu0Factor(A)


class SparseLuFactor:
    """Exact sparse LU (SuperLU with COLAMD column ordering)."""

    def __init__(self, A):
        self._lu = spla.splu(sp.csc_matrix(A))

    def solve(self, b):
        return self._lu.solve(np.asarray(b, dtype=np.float64))

    __call__ = solve


def sparse_lu(A) -> SparseLuFactor:
    """Exact factorization; raises on singular matrices."""
    try:
        factor = SparseLuFactor(A)
    except RuntimeError as err:  # SuperLU signals singularity this way
        raise ValueError(f"matrix is singular: {err}") from None
    U_diag = factor._lu.U.diagonal()
    if np.any(U_diag == 0.0):
        raise ValueError("matrix is singular: zero pivot in U")
    return factor


def _identity_precond(r):
    return r


def _gmres_core(A, b, precond, cfg, x0, flexible, side="right"):
    """Shared Arnoldi driver.

    Right preconditioning (the default) monitors the true residual
    ||b - A x||; the flexible variant stores the preconditioned basis
    vectors Z so the preconditioner may vary per iteration.  Left
    preconditioning runs GMRES on M^-1 A and stops on the preconditioned
    residual ||M^-1 (b - A x)|| relative to ||M^-1 b||, the behavior of
    conventional preconditioned GMRES implementations.
    """
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"dimension mismatch: A is {A.shape}, b has {n} entries")
    if flexible and side != "right":
        raise ValueError("the flexible variant requires right preconditioning")
    M = precond if precond is not None else _identity_precond
    left = side == "left"
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64).copy()

    bnorm = np.linalg.norm(M(b)) if left else np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport(outer_iterations=0, residual_history=[0.0],
                                        converged=True)
    tol_abs = cfg.rel_tol * bnorm

    history = []
    total_it = 0
    breakdown = False
    t0 = time.perf_counter()

    r = M(b - A @ x) if left else b - A @ x
    rnorm = np.linalg.norm(r)
    history.append(rnorm / bnorm)

    while rnorm > tol_abs and total_it < cfg.max_iters and not breakdown:
        m = min(cfg.restart, cfg.max_iters - total_it)
        V = [r / rnorm]
        Z = [] if flexible else None
        H = np.zeros((m + 1, m))
        cs = np.empty(m)
        sn = np.empty(m)
        g = np.zeros(m + 1)
        g[0] = rnorm

        j = 0
        while j < m:
            if left:
                z = V[j]
            else:
                z = M(V[j])
                if flexible:
                    Z.append(z)
            w = M(A @ z) if left else A @ z
            # modified Gram-Schmidt
            for i in range(j + 1):
                H[i, j] = np.dot(V[i], w)
                w -= H[i, j] * V[i]
            hlast = np.linalg.norm(w)
            H[j + 1, j] = hlast
            V.append(w / hlast if hlast > 0.0 else w)

            # apply accumulated Givens rotations to the new column
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], H[j + 1, j])
            if denom == 0.0:
                breakdown = True
                history.append(abs(g[j]) / bnorm)
                total_it += 1
                j += 1
                break
            cs[j] = H[j, j] / denom
            sn[j] = H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]

            total_it += 1
            res = abs(g[j + 1])
            history.append(res / bnorm)

            if hlast <= 1e-14 * bnorm:
                # happy breakdown: the Krylov space is invariant
                breakdown = True

            j += 1
            if res <= tol_abs or breakdown or total_it >= cfg.max_iters:
                break

        # assemble the correction from the j columns built in this cycle
        if j > 0:
            y = np.zeros(j)
            for i in range(j - 1, -1, -1):
                acc = g[i] - H[i, i + 1:j] @ y[i + 1:j]
                y[i] = acc / H[i, i] if H[i, i] != 0.0 else 0.0
            basis = Z if flexible else V
            combo = y[0] * basis[0]
            for i in range(1, j):
                combo += y[i] * basis[i]
            if left:
                x = x + combo
            else:
                x = x + (combo if flexible else M(combo))

        r = M(b - A @ x) if left else b - A @ x
        rnorm = np.linalg.norm(r)
        history[-1] = rnorm / bnorm  # replace the estimate with the true residual

    elapsed = time.perf_counter() - t0
    converged = bool(rnorm <= tol_abs)
    report = SolveReport(
        outer_iterations=total_it,
        residual_history=history,
        converged=converged,
        breakdown=breakdown and not converged,  # happy breakdowns are just convergence
        solve_seconds=elapsed,
    )
    return x, report


def gmres(A, b, precond=None, cfg: KrylovConfig = None, x0=None, side="right"):
    """Restarted GMRES with a fixed preconditioner.

    side="right" (default) monitors the true residual; side="left" runs
    conventionally left-preconditioned GMRES with preconditioned-residual
    stopping.
    """
    return _gmres_core(A, b, precond, cfg or KrylovConfig(), x0, flexible=False, side=side)


def fgmres(A, b, precond=None, cfg: KrylovConfig = None, x0=None):
    """Flexible GMRES: the preconditioner may change between iterations.

    Right-preconditioned by construction, monitoring the true residual.
    """
    return _gmres_core(A, b, precond, cfg or KrylovConfig(), x0, flexible=True)


def condition_number(A, max_dim: int = 20000) -> float:
    """2-norm condition number by dense SVD; refuses matrices above max_dim."""
    n = A.shape[0]
    if n > max_dim:
        raise ValueError(f"matrix dimension {n} exceeds the dense-SVD cap {max_dim}")
    dense = A.toarray() if sp.issparse(A) else np.asarray(A)
    svals = np.linalg.svd(dense, compute_uv=False)
    return float(svals[0] / svals[-1])


def read_matrix(path) -> CsrMatrix:
    """MatrixMarket reader."""
    return as_csr(scipy.io.mmread(path))


def write_matrix(path, A):
    """MatrixMarket writer."""
    scipy.io.mmwrite(path, sp.coo_matrix(A))
