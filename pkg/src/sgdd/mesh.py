"""Structured triangulations of the unit square and nested coarse/fine pairs.

Every mesh is an (n+1) x (n+1) vertex grid, each cell split along the same
diagonal, so nesting, point location and subdomain partitioning are exact
and reproducible.  Vertex index = iy * (n+1) + ix.
"""

import numpy as np
import scipy.sparse as sp

__all__ = [
    "TriMesh",
    "NestedPair",
    "unit_square",
    "interpolation_matrix",
    "p1_eval_matrix",
    "write_vtk",
    "INTERIOR",
    "LEFT",
    "RIGHT",
    "BOTTOM",
    "TOP",
]

INTERIOR, LEFT, RIGHT, BOTTOM, TOP = 0, 1, 2, 3, 4
TAG_NAMES = {"interior": INTERIOR, "left": LEFT, "right": RIGHT, "bottom": BOTTOM, "top": TOP}


class TriMesh:
    """Triangulation of [0,1]^2 with per-vertex boundary tags.

    vertices: (nv, 2) float; triangles: (nt, 3) int, positively oriented;
    boundary_tags: (nv,) int8 using the module tag constants.  `n` is the
    grid resolution (nv = (n+1)^2).  Immutable after construction.
    """

    def __init__(self, n, vertices, triangles, boundary_tags):
        self.n = n
        self.vertices = vertices
        self.triangles = triangles
        self.boundary_tags = boundary_tags

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_triangles(self):
        return len(self.triangles)

    def tagged(self, tag):
        """Vertex indices carrying the given boundary tag (int or name)."""
        if isinstance(tag, str):
            tag = TAG_NAMES[tag]
        return np.nonzero(self.boundary_tags == tag)[0]

    def __repr__(self):
        return f"TriMesh(n={self.n}, vertices={self.num_vertices})"


def unit_square(n: int) -> TriMesh:
    """Structured right-diagonal triangulation with (n+1)^2 vertices."""
    if n < 1:
        raise ValueError(f"resolution must be at least 1, got {n}")
    coords = np.arange(n + 1) / n
    X, Y = np.meshgrid(coords, coords, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    ix, iy = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    v00 = (iy * (n + 1) + ix).ravel()
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    # diagonal from (0,0) to (1,1) in every cell; lower triangle gets the
    # even global index, upper the odd one
    tris = np.empty((2 * n * n, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([v00, v10, v11])
    tris[1::2] = np.column_stack([v00, v11, v01])

    gx = np.tile(np.arange(n + 1), n + 1)
    gy = np.repeat(np.arange(n + 1), n + 1)
    tags = np.zeros(len(vertices), dtype=np.int8)
    tags[gy == 0] = BOTTOM
    tags[gy == n] = TOP
    tags[gx == 0] = LEFT
    tags[gx == n] = RIGHT
    return TriMesh(n, vertices, tris, tags)


class NestedPair:
    """Coarse/fine mesh pair with the coarse vertex set inside the fine one."""

    def __init__(self, coarse: TriMesh, fine: TriMesh):
        if fine.n % coarse.n:
            raise ValueError(f"fine n={fine.n} is not a multiple of coarse n={coarse.n}")
        self.coarse = coarse
        self.fine = fine
        self.refinement_factor = fine.n // coarse.n


def p1_eval_matrix(mesh: TriMesh, points) -> sp.csr_matrix:
    """Sparse (npts x nv) matrix of P1 basis values at arbitrary points.

    Each row holds the barycentric weights of the containing triangle; ties
    on cell diagonals go to the lower triangle (the lower global index).
    Rows sum to one; zero weights are dropped so vertex points give a single
    unit entry.
    """
    pts = np.asarray(points, dtype=float)
    n = mesh.n
    g = pts * n
    cell = np.clip(np.floor(g + 1e-12).astype(np.int64), 0, n - 1)
    frac = g - cell
    # snap away float dust so nested grids give exact weights
    frac[np.abs(frac) < 1e-10] = 0.0
    frac[np.abs(frac - 1.0) < 1e-10] = 1.0

    fx, fy = frac[:, 0], frac[:, 1]
    v00 = cell[:, 1] * (n + 1) + cell[:, 0]
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1

    lower = fy <= fx  # tie -> lower triangle
    cols = np.where(lower[:, None], np.column_stack([v00, v10, v11]),
                    np.column_stack([v00, v11, v01]))
    w_lower = np.column_stack([1.0 - fx, fx - fy, fy])
    w_upper = np.column_stack([1.0 - fy, fx, fy - fx])
    weights = np.where(lower[:, None], w_lower, w_upper)

    rows = np.repeat(np.arange(len(pts)), 3)
    mat = sp.csr_matrix(
        (weights.ravel(), (rows, cols.ravel())), shape=(len(pts), mesh.num_vertices)
    )
    mat.eliminate_zeros()
    mat.sum_duplicates()
    return mat


def interpolation_matrix(pair: NestedPair) -> sp.csr_matrix:
    """P1 interpolation from the coarse to the fine grid (fine x coarse).

    Row f holds the coarse basis values at fine vertex f; rows sum to one
    and coarse == fine gives the identity.
    """
    return p1_eval_matrix(pair.coarse, pair.fine.vertices)


def write_vtk(path, mesh: TriMesh, point_data=None, title="sgdd mesh"):
    """Legacy ASCII VTK export of the mesh and optional nodal fields."""
    point_data = point_data or {}
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title[:255] + "\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.num_vertices} double\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g} 0\n")
        nt = mesh.num_triangles
        fh.write(f"CELLS {nt} {4 * nt}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"3 {a} {b} {c}\n")
        fh.write(f"CELL_TYPES {nt}\n")
        fh.write("\n".join(["5"] * nt) + "\n")
        if point_data:
            fh.write(f"POINT_DATA {mesh.num_vertices}\n")
            for name, values in point_data.items():
                fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                fh.write("\n".join(f"{v:.17g}" for v in np.asarray(values)) + "\n")
