import math

import numpy as np
import pytest

from hopfharm import gallery as G
from hopfharm.geometry import JordanDomain, classify_points
from hopfharm.mesh import (
    MeshError,
    MeshMap,
    TriangleMesh,
    dirichlet_energy,
    jacobian_stats,
    load_mesh_map,
    mirror_permutation,
    save_json,
    signed_image_area,
    structured_rectangle,
    submesh_by_image,
    triangulate,
    wirtinger,
)


def _max_edge(mesh):
    return float(mesh.edge_lengths().max())


def test_disk_partition(disk):
    mesh = triangulate(disk, 0.5)
    assert abs(math.fsum(mesh.areas) - disk.polygon.area) < 1e-12


def test_square_quality(square):
    mesh = triangulate(square, 0.1)
    assert np.all(classify_points(square, mesh.vertices) >= 0)
    assert _max_edge(mesh) <= 0.1 + 1e-12
    assert mesh.min_angles_deg().min() >= 20.0 - 1e-9


def test_clover_min_angle():
    mesh = triangulate(G.clover(0.5).X, 0.05)
    assert mesh.min_angles_deg().min() >= 20.0 - 1e-9
    assert _max_edge(mesh) <= 0.05 + 1e-12


def test_boundary_loop_orientation(disk_mesh):
    loop = disk_mesh.vertices[disk_mesh.boundary_loop]
    assert JordanDomain(loop).polygon.area > 0
    assert np.all(np.abs(np.abs(loop) - 1) < 1e-3)


def test_rejects_bad_mesh():
    with pytest.raises(MeshError):
        TriangleMesh(np.array([0, 1, 1j]), np.array([[0, 2, 1]]))  # clockwise


def test_wirtinger_identity_and_conjugate(disk_mesh):
    d = wirtinger(MeshMap.sample(disk_mesh, lambda z: z))
    assert np.allclose(d.hz, 1, atol=1e-12) and np.allclose(d.hzbar, 0, atol=1e-12)
    d = wirtinger(MeshMap.sample(disk_mesh, np.conj))
    assert np.allclose(d.hz, 0, atol=1e-12) and np.allclose(d.hzbar, 1, atol=1e-12)


def test_wirtinger_affine(disk_mesh):
    # hand algebra: h = z + 0.3 conj(z) gives J = 1 - 0.09
    d = wirtinger(MeshMap.sample(disk_mesh, lambda z: z + 0.3 * np.conj(z)))
    assert np.allclose(d.hz, 1, atol=1e-12)
    assert np.allclose(d.hzbar, 0.3, atol=1e-12)
    assert np.allclose(d.jacobian, 0.91, atol=1e-12)


def test_wirtinger_exact_for_general_affine(disk_mesh, rng):
    a, b, c = rng.normal(size=3) + 1j * rng.normal(size=3)
    d = wirtinger(MeshMap.sample(disk_mesh, lambda z: a * z + b * np.conj(z) + c))
    assert np.max(np.abs(d.hz - a)) < 1e-12 and np.max(np.abs(d.hzbar - b)) < 1e-12
    assert np.allclose(d.jacobian, abs(a) ** 2 - abs(b) ** 2, atol=1e-12)


def test_energy_identity_and_conjugate(disk_mesh):
    area = math.fsum(disk_mesh.areas)
    assert dirichlet_energy(MeshMap.sample(disk_mesh, lambda z: z)) == pytest.approx(2 * area, rel=1e-12)
    assert dirichlet_energy(MeshMap.sample(disk_mesh, np.conj)) == pytest.approx(2 * area, rel=1e-12)
    assert abs(2 * area - 2 * math.pi) < 2e-3


def test_energy_matches_gradient_integral(disk_mesh, rng):
    # independent oracle: |grad u|^2 + |grad v|^2 from real gradients per triangle
    vals = rng.normal(size=disk_mesh.n_vertices) + 1j * rng.normal(size=disk_mesh.n_vertices)
    m = MeshMap(disk_mesh, vals)
    total = 0.0
    for tri in disk_mesh.triangles:
        p = disk_mesh.vertices[tri]
        A = np.array([[p[1].real - p[0].real, p[1].imag - p[0].imag],
                      [p[2].real - p[0].real, p[2].imag - p[0].imag]])
        area = 0.5 * abs(np.linalg.det(A))
        for comp in (vals[tri].real, vals[tri].imag):
            grad = np.linalg.solve(A, comp[1:] - comp[0])
            total += area * grad @ grad
    assert dirichlet_energy(m) == pytest.approx(total, rel=1e-10)


def test_energy_lower_bound_random(disk_mesh, rng):
    for _ in range(5):
        vals = rng.normal(size=disk_mesh.n_vertices) + 1j * rng.normal(size=disk_mesh.n_vertices)
        m = MeshMap(disk_mesh, vals)
        assert dirichlet_energy(m) >= 2 * abs(signed_image_area(m))


def test_submesh_whole_and_half(disk, disk_mesh):
    m = MeshMap.sample(disk_mesh, lambda z: z)
    big = JordanDomain(1.01 * disk.boundary)
    sub = submesh_by_image(m, big)
    assert sub.triangles.size == disk_mesh.n_triangles
    assert np.array_equal(np.sort(sub.interior), np.sort(disk_mesh.interior_vertices))
    left = JordanDomain(np.array([-2 - 2j, -1e-3 - 2j, -1e-3 + 2j, -2 + 2j]))
    sub = submesh_by_image(m, left)
    expect = np.flatnonzero(np.all(disk_mesh.vertices[disk_mesh.triangles].real <= -1e-3, axis=1))
    assert np.array_equal(np.sort(sub.triangles), expect)


def test_submesh_monotone_in_region(disk_mesh):
    m = MeshMap.sample(disk_mesh, lambda z: z)
    prev = None
    for r in (1.2, 0.8, 0.5, 0.2):
        sub = set(submesh_by_image(m, JordanDomain(0.1 + r * G.unit_disk(64).boundary)).triangles)
        if prev is not None:
            assert sub <= prev
        prev = sub


def test_submesh_heart_h0(heart):
    mesh = heart.mesh(0.1)
    sub = submesh_by_image(heart.initial_map(mesh), heart.Y1)
    assert 0 < sub.triangles.size < mesh.n_triangles


def test_jacobian_stats(disk_mesh):
    s = jacobian_stats(MeshMap.sample(disk_mesh, lambda z: z))
    assert s["min_jacobian"] == pytest.approx(1.0) and s["count_negative"] == 0
    s = jacobian_stats(MeshMap.sample(disk_mesh, np.conj))
    assert s["max_jacobian"] == pytest.approx(-1.0) and s["count_negative"] == disk_mesh.n_triangles


def test_butterfly_jacobian_concentration():
    mesh = G.butterfly_mesh(0.05)
    m = G.butterfly_map().on_mesh(mesh)
    d = wirtinger(m)
    assert jacobian_stats(m)["count_negative"] == 0
    small = np.argsort(d.jacobian)[:20]
    c = mesh.centroids[small]
    # the flattest triangles hug the squeezed segment [0, 1]
    assert np.all(np.abs(c.imag) < 0.05) and np.all((c.real > -0.05) & (c.real < 1.0))


def test_structured_rectangle_quality():
    mesh = structured_rectangle(-1, 1, -1.5, 1.5, 0.1, columns=[0.0])
    assert _max_edge(mesh) <= 0.1 + 1e-12
    assert mesh.min_angles_deg().min() >= 20
    assert abs(math.fsum(mesh.areas) - 6.0) < 1e-12
    assert np.any(np.abs(mesh.vertices.real) < 1e-15)


def test_symmetric_mesh(heart):
    mesh = heart.mesh(0.1)
    perm = mirror_permutation(mesh)
    assert np.allclose(mesh.vertices[perm], -np.conj(mesh.vertices), atol=1e-12)
    assert mesh.min_angles_deg().min() >= 20 - 1e-9


def test_mesh_map_roundtrip(tmp_path, disk_mesh):
    m = MeshMap.sample(disk_mesh, lambda z: z ** 2)
    save_json(m, tmp_path / "m.json")
    back = load_mesh_map(tmp_path / "m.json")
    assert np.array_equal(back.values, m.values)
    assert np.array_equal(back.mesh.triangles, disk_mesh.triangles)


def test_refinement_recovers_from_stalled_lattice():
    # plain circumcentre refinement stalls on this lattice; the mesher must still deliver
    from hopfharm.gallery import unit_disk

    m = triangulate(unit_disk(), 0.0125)
    p = m.vertices[m.triangles]
    assert np.abs(p - np.roll(p, -1, axis=1)).max() <= 0.0125
    assert m.areas.min() > 0
