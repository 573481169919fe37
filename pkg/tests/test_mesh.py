import numpy as np
import pytest

from sgdd.mesh import (
    LEFT,
    RIGHT,
    NestedPair,
    interpolation_matrix,
    p1_eval_matrix,
    unit_square,
    write_vtk,
)


def tri_areas(mesh):
    v = mesh.vertices[mesh.triangles]
    return 0.5 * ((v[:, 1, 0] - v[:, 0, 0]) * (v[:, 2, 1] - v[:, 0, 1])
                  - (v[:, 2, 0] - v[:, 0, 0]) * (v[:, 1, 1] - v[:, 0, 1]))


def test_unit_square_counts():
    m = unit_square(1)
    assert m.num_vertices == 4 and m.num_triangles == 2
    m = unit_square(100)
    assert m.num_vertices == 10201
    assert m.num_triangles == 2 * 100 * 100


def test_triangles_positively_oriented_and_tile():
    m = unit_square(7)
    areas = tri_areas(m)
    assert np.all(areas > 0)
    assert np.sum(areas) == pytest.approx(1.0, rel=1e-14)


def test_boundary_tags():
    m = unit_square(4)
    assert set(m.vertices[m.tagged("left"), 0]) == {0.0}
    assert set(m.vertices[m.tagged("right"), 0]) == {1.0}
    # corners belong to left/right
    assert len(m.tagged(LEFT)) == 5 and len(m.tagged(RIGHT)) == 5
    interior = m.tagged("interior")
    assert len(interior) == 9


def test_rejects_bad_resolution():
    with pytest.raises(ValueError):
        unit_square(0)


def test_nested_pair_vertices_subset():
    pair = NestedPair(unit_square(4), unit_square(8))
    assert pair.refinement_factor == 2
    fine_set = {tuple(v) for v in np.round(pair.fine.vertices, 12)}
    for v in np.round(pair.coarse.vertices, 12):
        assert tuple(v) in fine_set
    with pytest.raises(ValueError):
        NestedPair(unit_square(3), unit_square(8))


def test_interpolation_constant_and_linear():
    pair = NestedPair(unit_square(3), unit_square(9))
    P = interpolation_matrix(pair)
    assert P.shape == (pair.fine.num_vertices, pair.coarse.num_vertices)
    ones = np.ones(pair.coarse.num_vertices)
    assert np.allclose(P @ ones, 1.0, atol=1e-14)
    xc = pair.coarse.vertices[:, 0]
    assert np.allclose(P @ xc, pair.fine.vertices[:, 0], atol=1e-13)


def test_interpolation_identity_when_equal():
    import scipy.sparse as sp

    m = unit_square(5)
    P = interpolation_matrix(NestedPair(m, m))
    assert (P - sp.identity(m.num_vertices, format="csr")).nnz == 0


def test_interpolation_weights_in_unit_range():
    pair = NestedPair(unit_square(4), unit_square(12))
    P = interpolation_matrix(pair)
    assert P.data.min() >= 0.0 and P.data.max() <= 1.0
    assert np.allclose(np.asarray(P.sum(axis=1)).ravel(), 1.0, atol=1e-14)
    # each fine vertex interpolated from one coarse triangle: <= 3 entries
    assert np.all(np.diff(P.indptr) <= 3)


def test_p1_eval_interior_point():
    m = unit_square(2)
    E = p1_eval_matrix(m, [(0.3, 0.1), (0.5, 0.5)])
    f = m.vertices[:, 0] + 2.0 * m.vertices[:, 1]  # linear, reproduced exactly
    vals = E @ f
    assert vals[0] == pytest.approx(0.5, abs=1e-13)
    assert vals[1] == pytest.approx(1.5, abs=1e-13)


def test_vtk_export(tmp_path):
    m = unit_square(2)
    path = tmp_path / "mesh.vtk"
    write_vtk(path, m, {"u": np.arange(m.num_vertices, dtype=float)})
    text = path.read_text()
    assert text.startswith("# vtk DataFile Version 3.0")
    assert "POINTS 9 double" in text
    assert "SCALARS u double 1" in text
