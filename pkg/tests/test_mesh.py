import numpy as np
import pytest

from adflux.mesh import (
    TriMesh,
    build_uniform_mesh,
    control_volume_area,
    control_volume_boundary,
    dump_mesh,
    load_mesh,
    split_element,
)

REF = TriMesh(
    vertices=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
    triangles=np.array([[0, 1, 2]]),
)


@pytest.mark.parametrize(
    "n,nv,nt",
    [(1, 4, 2), (2, 9, 8), (4, 25, 32), (128, 16641, 32768)],
)
def test_uniform_mesh_counts(n, nv, nt):
    mesh = build_uniform_mesh(n)
    assert mesh.n_vertices == nv
    assert mesh.n_elements == nt
    assert len(mesh.interior_vertices) == (n - 1) ** 2


def test_uniform_mesh_geometry():
    mesh = build_uniform_mesh(4)
    assert np.all(mesh.signed_areas > 0)
    assert mesh.areas.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(mesh.diameters, np.sqrt(2.0) / 4)
    assert mesh.h == pytest.approx(np.sqrt(2.0) / 4)


def test_invalid_meshes_rejected():
    with pytest.raises(ValueError):
        build_uniform_mesh(0)
    with pytest.raises(ValueError):  # clockwise triangle
        TriMesh(
            vertices=np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
            triangles=np.array([[0, 2, 1]]),
        )


def test_p1_gradients_partition():
    mesh = build_uniform_mesh(3)
    # basis gradients sum to zero; phi_i(p_j) = delta_ij
    assert np.allclose(mesh.p1_gradients.sum(axis=1), 0.0, atol=1e-14)
    lam = mesh.barycentric(mesh.element_points)
    assert np.allclose(lam, np.broadcast_to(np.eye(3), lam.shape), atol=1e-13)


def test_barycentric_partition_of_unity():
    mesh = build_uniform_mesh(2)
    rng = np.random.default_rng(0)
    w = rng.dirichlet((1.0, 1.0, 1.0), size=(mesh.n_elements, 5))
    pts = np.einsum("nqk,nki->nqi", w, mesh.element_points)
    lam = mesh.barycentric(pts)
    assert np.allclose(lam.sum(axis=-1), 1.0, atol=1e-13)
    assert np.allclose(lam, w, atol=1e-12)


def test_quadrilateral_split_areas():
    mesh = build_uniform_mesh(3)
    d = mesh.dual
    assert np.allclose(d.quad_areas, mesh.areas[:, None] / 3.0, atol=1e-15)
    assert np.allclose(d.sub_areas.sum(axis=(1, 2)), mesh.areas, atol=1e-15)
    # unit reference triangle: each quadrilateral takes a sixth... of 2x area
    assert np.allclose(REF.dual.quad_areas, 1.0 / 6.0, atol=1e-15)


def test_dual_segment_normals():
    d = REF.dual
    assert np.allclose(
        np.hypot(d.cv_normals[..., 0], d.cv_normals[..., 1]), 1.0, atol=1e-14
    )
    # outward: points away from the owning quadrilateral's centroid
    mid = 0.5 * (d.cv_a + d.cv_b)
    qc = d.quads.mean(axis=2)[:, :, None, :]
    assert np.all(np.einsum("nasi,nasi->nas", d.cv_normals, mid - qc) > 0)
    # the shared dual segment of adjacent quadrilaterals has opposite normals
    for i in range(3):
        assert np.allclose(
            d.cv_normals[:, i, 0] + d.cv_normals[:, (i + 1) % 3, 1], 0.0, atol=1e-14
        )
        assert np.allclose(d.cv_a[:, i, 0], d.cv_b[:, (i + 1) % 3, 1], atol=1e-15)


def test_split_element_segments():
    split = split_element(REF, 0)
    assert np.allclose(split.barycenter, [1.0 / 3.0, 1.0 / 3.0])
    for i in range(3):
        s0, s1 = split.cv_segments[i]
        assert np.allclose(s0.b, split.barycenter)
        assert np.allclose(s1.a, split.barycenter)
        assert s0.length > 0 and s1.length > 0
    with pytest.raises(IndexError):
        split_element(REF, 1)


def test_control_volume_partition():
    mesh = build_uniform_mesh(4)
    total = sum(control_volume_area(mesh, z) for z in range(mesh.n_vertices))
    assert total == pytest.approx(1.0, abs=1e-13)


def test_control_volume_boundary_counts():
    mesh = build_uniform_mesh(2)
    center = int(np.flatnonzero(
        (mesh.vertices[:, 0] == 0.5) & (mesh.vertices[:, 1] == 0.5)
    )[0])
    segs = control_volume_boundary(mesh, center)
    assert len(segs) == 2 * len(mesh.vertex_to_elements[center])
    assert len(segs) == 12
    # closed polyline: outward-flux of a constant field vanishes
    flux = sum(s.length * s.normal for s in segs)
    assert np.allclose(flux, 0.0, atol=1e-14)


def test_dump_load_roundtrip(tmp_path):
    mesh = build_uniform_mesh(3)
    path = tmp_path / "mesh.txt"
    dump_mesh(mesh, path)
    back = load_mesh(path)
    assert np.array_equal(back.vertices, mesh.vertices)
    assert np.array_equal(back.triangles, mesh.triangles)
    (tmp_path / "bad.txt").write_text("q 1 2 3\n")
    with pytest.raises(ValueError):
        load_mesh(tmp_path / "bad.txt")
