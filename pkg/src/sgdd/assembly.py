"""P1 finite element assembly: deterministic operators and the coupled
stochastic Galerkin block systems (linear and Picard-linearized).

The coupled system is laid out block-interleaved: all chaos coefficients
of a node are contiguous (dof = node * nblocks + k), so subdomain
restriction operates on whole nodes.  Every block is a scalar stiffness
matrix with an effective nodal coefficient field; the element coefficient
is the average of its vertex values, consistent with the nodal
representation of the lognormal chaos coefficients.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .chaos import ChaosBasis, QuadTensor, TripleTensor
from .mesh import TAG_NAMES, TriMesh
from .randomfield import LognormalPCE
from .sparsela import CsrMatrix, as_csr

__all__ = [
    "BCSpec",
    "BlockCsrSystem",
    "P1Workspace",
    "DeterministicKernel",
    "assemble_deterministic",
    "assemble_stochastic_linear",
    "assemble_stochastic_picard",
]


@dataclass(frozen=True)
class BCSpec:
    """Boundary conditions: Dirichlet values per edge, the rest natural.

    mode "eliminate" applies symmetric elimination (identity rows/columns);
    mode "penalty" adds `penalty_weight` to boundary diagonals.  In the
    stochastic system the penalty enters the weak form before projection,
    so block k is penalized with weight * <Psi_k^2>.
    """

    dirichlet: dict = field(default_factory=dict)
    mode: str = "eliminate"
    penalty_weight: float = 1e7
    neumann: tuple = ()

    def __post_init__(self):
        if self.mode not in ("eliminate", "penalty"):
            raise ValueError(f"unknown BC mode {self.mode!r}")
        if self.mode == "penalty" and self.penalty_weight <= 0:
            raise ValueError(f"penalty weight must be positive, got {self.penalty_weight}")
        for tag in list(self.dirichlet) + list(self.neumann):
            if tag not in TAG_NAMES or tag == "interior":
                raise ValueError(f"unknown edge tag {tag!r}")


def homogeneous_dirichlet() -> BCSpec:
    return BCSpec(dirichlet={"left": 0.0, "right": 0.0, "bottom": 0.0, "top": 0.0})


def channel_bc() -> BCSpec:
    """u = 0 on the left edge, u = 1 on the right, zero flux top/bottom."""
    return BCSpec(dirichlet={"left": 0.0, "right": 1.0}, neumann=("bottom", "top"))


@dataclass
class BlockCsrSystem:
    """The coupled Galerkin system: (N+1) x (N+1) blocks of mesh operators."""

    nblocks: int
    block_dim: int
    matrix: CsrMatrix
    rhs: np.ndarray
    mesh: TriMesh = None
    basis: ChaosBasis = None

    @property
    def dim(self):
        return self.nblocks * self.block_dim


class P1Workspace:
    """Per-mesh precomputation shared by every assembly.

    Holds element geometry, the scalar CSR pattern over nodes, the scatter
    map from (element, a, b) into the pattern's data array, and the
    consistent mass matrix.
    """

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        v = mesh.vertices[mesh.triangles]  # (nt, 3, 2)
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        self.area = 0.5 * det
        if np.any(self.area <= 0):
            raise ValueError("mesh has non-positively oriented triangles")
        # grad lambda_a = (y_b - y_c, x_c - x_b) / (2 area), (a,b,c) cyclic
        y = v[:, :, 1]
        x = v[:, :, 0]
        bcoef = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
        ccoef = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
        grads = np.stack([bcoef, ccoef], axis=2) / (2.0 * self.area)[:, None, None]
        # geometric element stiffness: area * grad_a . grad_b
        self.geo = np.einsum("tad,tbd,t->tab", grads, grads, self.area)

        tris = mesh.triangles
        rows = np.repeat(tris, 3, axis=1).ravel()
        cols = np.tile(tris, (1, 3)).ravel()
        nv = mesh.num_vertices
        pattern = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(nv, nv)).tocsr()
        pattern.sum_duplicates()
        pattern.sort_indices()
        self.indptr = pattern.indptr
        self.indices = pattern.indices
        self.nnz = pattern.nnz
        csr_rows = np.repeat(np.arange(nv), np.diff(self.indptr))
        csr_keys = csr_rows.astype(np.int64) * nv + self.indices
        keys = rows.astype(np.int64) * nv + cols
        self.scatter = np.searchsorted(csr_keys, keys)
        self.diag_pos = np.searchsorted(csr_keys, np.arange(nv, dtype=np.int64) * nv + np.arange(nv))

        # consistent P1 mass matrix for load vectors
        mloc = (np.ones((3, 3)) + np.eye(3)) / 12.0
        mdata = np.bincount(self.scatter, weights=(self.area[:, None, None] * mloc).ravel(),
                            minlength=self.nnz)
        self.mass = sp.csr_matrix((mdata, self.indices.copy(), self.indptr.copy()), shape=(nv, nv))

    def stiffness_data(self, coeff_nodal) -> np.ndarray:
        """Scalar stiffness data for int c grad u . grad v, c = vertex average."""
        ce = coeff_nodal[self.mesh.triangles].mean(axis=1)
        return np.bincount(self.scatter, weights=(ce[:, None, None] * self.geo).ravel(),
                           minlength=self.nnz)

    def stiffness(self, coeff_nodal) -> CsrMatrix:
        return sp.csr_matrix(
            (self.stiffness_data(coeff_nodal), self.indices.copy(), self.indptr.copy()),
            shape=(self.mesh.num_vertices, self.mesh.num_vertices),
        )

    def load_vector(self, f) -> np.ndarray:
        f_nodal = np.full(self.mesh.num_vertices, float(f)) if np.ndim(f) == 0 else np.asarray(f, dtype=float)
        return self.mass @ f_nodal


def _dirichlet_nodes(mesh: TriMesh, bc: BCSpec):
    """Boundary node indices and their Dirichlet values, sorted by node."""
    nodes, values = [], []
    for tag, val in bc.dirichlet.items():
        idx = mesh.tagged(tag)
        nodes.append(idx)
        values.append(np.full(len(idx), float(val)))
    if not nodes:
        return np.empty(0, dtype=np.int64), np.empty(0)
    nodes = np.concatenate(nodes)
    values = np.concatenate(values)
    order = np.argsort(nodes)
    return nodes[order], values[order]


def apply_bc(A: CsrMatrix, b: np.ndarray, bd_dofs, bd_values, bc: BCSpec, penalty_scale=None):
    """Impose Dirichlet data on the assembled (block) system in place.

    bd_dofs/bd_values are global dof indices and target values.  For the
    penalty mode, `penalty_scale` holds the per-dof weak-form scaling
    (the chaos Gram diagonal); defaults to one.
    """
    n = A.shape[0]
    if bd_dofs.size == 0:
        return A, b
    if bc.mode == "penalty":
        scale = np.ones(len(bd_dofs)) if penalty_scale is None else penalty_scale
        w = bc.penalty_weight * scale
        diag = sp.csr_matrix((w, (bd_dofs, bd_dofs)), shape=(n, n))
        A = as_csr(A + diag)
        b = b.copy()
        b[bd_dofs] += w * bd_values
        return A, b

    # symmetric elimination
    is_bd = np.zeros(n, dtype=bool)
    is_bd[bd_dofs] = True
    g_full = np.zeros(n)
    g_full[bd_dofs] = bd_values

    A = A.copy()
    rows = np.repeat(np.arange(n), np.diff(A.indptr))
    col_bd = is_bd[A.indices]
    row_bd = is_bd[rows]

    b = b.copy()
    lift = np.zeros(n)
    np.add.at(lift, rows[col_bd], A.data[col_bd] * g_full[A.indices[col_bd]])
    b -= lift
    A.data[col_bd | row_bd] = 0.0
    # unit diagonal on constrained dofs
    diag = sp.csr_matrix((np.ones(len(bd_dofs)), (bd_dofs, bd_dofs)), shape=(n, n))
    A = as_csr(A + diag)
    A.eliminate_zeros()
    b[bd_dofs] = bd_values
    return A, b


def assemble_deterministic(mesh: TriMesh, coeff, f, bc: BCSpec, ws: P1Workspace = None):
    """Stiffness system for -div(c grad u) = f with the given BCs.

    Returns (A, b) as CSR + vector.  The coefficient must be positive
    everywhere (well-posedness).
    """
    ws = ws or P1Workspace(mesh)
    coeff = np.full(mesh.num_vertices, float(coeff)) if np.ndim(coeff) == 0 else np.asarray(coeff, dtype=float)
    if np.any(coeff <= 0) or not np.all(np.isfinite(coeff)):
        bad = int(np.argmin(coeff))
        raise ValueError(f"coefficient field must be positive and finite (node {bad}: {coeff[bad]})")
    A = ws.stiffness(coeff)
    b = ws.load_vector(f)
    nodes, values = _dirichlet_nodes(mesh, bc)
    return apply_bc(A, b, nodes, values, bc)


class DeterministicKernel:
    """Repeated deterministic assemblies on a fixed mesh/BC (Monte Carlo path).

    Precomputes the pattern, the load vector and the boundary index
    machinery once; `assemble(coeff)` then only recomputes values.
    """

    def __init__(self, mesh: TriMesh, f, bc: BCSpec):
        self.mesh = mesh
        self.bc = bc
        self.ws = P1Workspace(mesh)
        self.b0 = self.ws.load_vector(f)
        self.nodes, self.values = _dirichlet_nodes(mesh, bc)
        n = mesh.num_vertices
        self.is_bd = np.zeros(n, dtype=bool)
        self.is_bd[self.nodes] = True
        self.g_full = np.zeros(n)
        self.g_full[self.nodes] = self.values
        rows = np.repeat(np.arange(n), np.diff(self.ws.indptr))
        self.col_bd = self.is_bd[self.ws.indices]
        self.row_bd = self.is_bd[rows]
        self.bd_rows_of_cols = rows[self.col_bd]
        self.bd_cols_g = self.g_full[self.ws.indices[self.col_bd]]

    def assemble(self, coeff_nodal):
        if np.any(coeff_nodal <= 0):
            bad = int(np.argmin(coeff_nodal))
            raise ValueError(f"coefficient field must be positive (node {bad}: {coeff_nodal[bad]})")
        data = self.ws.stiffness_data(coeff_nodal)
        b = self.b0.copy()
        if self.nodes.size:
            if self.bc.mode == "penalty":
                data = data.copy()
                data[self.ws.diag_pos[self.nodes]] += self.bc.penalty_weight
                b[self.nodes] += self.bc.penalty_weight * self.values
            else:
                lift = np.zeros(len(b))
                np.add.at(lift, self.bd_rows_of_cols, data[self.col_bd] * self.bd_cols_g)
                b -= lift
                data = data.copy()
                data[self.col_bd | self.row_bd] = 0.0
                data[self.ws.diag_pos[self.nodes]] = 1.0
                b[self.nodes] = self.values
        n = self.mesh.num_vertices
        A = sp.csr_matrix((data, self.ws.indices, self.ws.indptr), shape=(n, n))
        return A, b


def _block_coo(ws: P1Workspace, nb: int, block_fields):
    """Assemble the interleaved block CSR from per-block nodal coefficients.

    block_fields: dict (test k, trial j) -> nodal coefficient field; each
    block is a scalar stiffness with that coefficient.
    """
    nv = ws.mesh.num_vertices
    dim = nv * nb
    rows_sc = np.repeat(np.arange(nv, dtype=np.int64), np.diff(ws.indptr))
    chunks_r, chunks_c, chunks_v = [], [], []
    for (k, j), w in sorted(block_fields.items()):
        if not np.any(w):
            continue
        data = ws.stiffness_data(w)
        chunks_r.append(rows_sc * nb + k)
        chunks_c.append(ws.indices.astype(np.int64) * nb + j)
        chunks_v.append(data)
    if not chunks_r:
        return sp.csr_matrix((dim, dim))
    A = sp.coo_matrix(
        (np.concatenate(chunks_v), (np.concatenate(chunks_r), np.concatenate(chunks_c))),
        shape=(dim, dim),
    ).tocsr()
    A.sort_indices()
    return A


def _block_dirichlet(mesh, basis, bc):
    """Dirichlet dofs/values/Gram-scales for the interleaved block system.

    Deterministic boundary data lands on chaos coefficient 0; coefficients
    k >= 1 get homogeneous conditions.
    """
    nodes, values = _dirichlet_nodes(mesh, bc)
    nb = len(basis)
    dofs = (nodes[:, None] * nb + np.arange(nb)[None, :]).ravel()
    vals = np.zeros((len(nodes), nb))
    vals[:, 0] = values
    norms = np.tile(basis.norms_sq(), len(nodes))
    return dofs, vals.ravel(), norms


def _stochastic_rhs(ws: P1Workspace, nb: int, f):
    rhs = np.zeros(ws.mesh.num_vertices * nb)
    rhs[0::nb] = ws.load_vector(f)  # <Psi_k> = 0 for k >= 1
    return rhs


def assemble_stochastic_linear(
    mesh: TriMesh,
    c_pce: LognormalPCE,
    m: TripleTensor,
    output_basis: ChaosBasis,
    f,
    bc: BCSpec,
    ws: P1Workspace = None,
) -> BlockCsrSystem:
    """Coupled linear Galerkin system: block (k,j) has coefficient
    sum_i m_ijk c_i(x); rhs block k is the load vector times <Psi_k>."""
    if m.input_basis is not c_pce.basis and len(m.input_basis) != len(c_pce.basis):
        raise ValueError("triple tensor input basis does not match the coefficient expansion")
    if len(m.output_basis) != len(output_basis):
        raise ValueError("triple tensor output basis does not match the solution basis")
    ws = ws or P1Workspace(mesh)
    nb = len(output_basis)
    fields = {}
    for (k, j), (ii, vv) in m.blocks().items():
        fields[(k, j)] = vv @ c_pce.coeff_fields[ii]
    A = _block_coo(ws, nb, fields)
    rhs = _stochastic_rhs(ws, nb, f)
    dofs, vals, norms = _block_dirichlet(mesh, output_basis, bc)
    A, rhs = apply_bc(A, rhs, dofs, vals, bc, penalty_scale=norms)
    return BlockCsrSystem(nb, mesh.num_vertices, A, rhs, mesh, output_basis)


def assemble_stochastic_picard(
    mesh: TriMesh,
    c_pce: LognormalPCE,
    u_prev: np.ndarray,
    m: TripleTensor,
    t: QuadTensor,
    f,
    bc: BCSpec,
    ws: P1Workspace = None,
) -> BlockCsrSystem:
    """Picard-linearized nonlinear Galerkin system.

    Block (l,k) has coefficient sum_i m_ikl c_i + sum_ij t_ijkl c_i u_j^n;
    the system is generally non-symmetric for u_prev != 0.  Rejects states
    whose mean linearized diffusivity E[c (1 + u)] loses positivity (a
    Picard divergence signal).
    """
    ws = ws or P1Workspace(mesh)
    nb = len(t.output_basis)
    nv = mesh.num_vertices
    u_prev = np.asarray(u_prev, dtype=float)
    if u_prev.shape != (nb * nv,):
        raise ValueError(f"previous iterate has shape {u_prev.shape}, expected ({nb * nv},)")
    U = u_prev.reshape(nv, nb)

    fields = {}
    for (l, k), (ii, vv) in m.blocks().items():
        fields[(l, k)] = vv @ c_pce.coeff_fields[ii]

    # nodal products c_i * u_j^n, one row per (i,j) pair used by the tensor
    tblocks = t.blocks()
    pair_pos = {}
    for ii, jj, _ in tblocks.values():
        for i, j in zip(ii.tolist(), jj.tolist()):
            pair_pos.setdefault((i, j), len(pair_pos))
    if pair_pos:
        pairs = np.array(list(pair_pos), dtype=np.int64)
        PM = c_pce.coeff_fields[pairs[:, 0]] * U[:, pairs[:, 1]].T
    for (l, k), (ii, jj, vv) in tblocks.items():
        rows = np.array([pair_pos[(i, j)] for i, j in zip(ii.tolist(), jj.tolist())])
        contrib = vv @ PM[rows]
        if (l, k) in fields:
            fields[(l, k)] = fields[(l, k)] + contrib
        else:
            fields[(l, k)] = contrib

    w00 = fields.get((0, 0))
    if w00 is None or np.any(w00 <= 0):
        bad = int(np.argmin(w00)) if w00 is not None else 0
        raise ValueError(
            f"mean linearized diffusivity is non-positive at node {bad}; Picard iterate diverged"
        )

    A = _block_coo(ws, nb, fields)
    rhs = _stochastic_rhs(ws, nb, f)
    basis = t.output_basis
    dofs, vals, norms = _block_dirichlet(mesh, basis, bc)
    A, rhs = apply_bc(A, rhs, dofs, vals, bc, penalty_scale=norms)
    return BlockCsrSystem(nb, nv, A, rhs, mesh, basis)
