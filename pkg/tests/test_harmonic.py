import math

import numpy as np
import pytest

from hopfharm import gallery as G
from hopfharm.geometry import JordanDomain, classify_points
from hopfharm.harmonic import (
    BoundaryMap,
    BoundaryMapError,
    boundary_trace,
    douglas_integral,
    douglas_study,
    harmonic_replacement,
    poisson_extension,
    radial_extension,
    rkc_extend_and_check,
    solve_dirichlet,
)
from hopfharm.mesh import MeshMap, dirichlet_energy, submesh_by_image, submesh_from_mask, triangulate, wirtinger


def _solve(mesh, fn):
    return solve_dirichlet(mesh, fn(mesh.vertices[mesh.boundary_loop]))


def test_identity_reproduced(disk_mesh):
    m, rep = _solve(disk_mesh, lambda z: z)
    assert np.max(np.abs(m.values - disk_mesh.vertices)) < 1e-9
    assert rep.residual_norm <= 1e-10


def test_constant_reproduced(disk_mesh):
    m, _ = _solve(disk_mesh, lambda z: np.full(z.shape, 0.3 - 2j))
    assert np.max(np.abs(m.values - (0.3 - 2j))) < 1e-12


def test_square_monomial_second_order(disk):
    errs = []
    for h in (0.2, 0.1, 0.05):
        mesh = triangulate(disk, h)
        m, _ = _solve(mesh, lambda z: z ** 2)
        errs.append(np.max(np.abs(m.values - mesh.vertices ** 2)))
    assert errs[0] / errs[1] > 3 and errs[1] / errs[2] > 3


def test_maximum_principle(disk_mesh, rng):
    from shapely.geometry import MultiPoint, Point

    theta = np.sort(rng.uniform(0, 2 * np.pi, 7))
    corners = 2 * np.exp(1j * theta)
    Y = JordanDomain.from_points(corners)[0]
    g = BoundaryMap.from_polyline(G.unit_disk().boundary,
                                  _on_polygon(Y.boundary, np.arange(256) / 256))
    m, _ = solve_dirichlet(disk_mesh, boundary_trace(g, disk_mesh, G.unit_disk()))
    assert np.all(classify_points(Y, m.values, tol=1e-9) >= 0)


def _on_polygon(z, frac):
    seg = np.abs(np.roll(z, -1) - z)
    cum = np.concatenate([[0], np.cumsum(seg)])
    zc = np.concatenate([z, z[:1]])
    s = frac * cum[-1]
    return np.interp(s, cum, zc.real) + 1j * np.interp(s, cum, zc.imag)


def test_poisson_examples(rng):
    z = 0.9 * np.sqrt(rng.uniform(size=50)) * np.exp(2j * np.pi * rng.uniform(size=50))
    assert abs(poisson_extension(lambda w: w, [0j])[0]) < 1e-14
    assert np.max(np.abs(poisson_extension(lambda w: w ** 2, z) - z ** 2)) < 1e-12
    # hand computation: cos t + 2i sin t = (3w - conj(w)) / 2 on the circle
    ext = poisson_extension(lambda w: w.real + 2j * w.imag, z)
    assert np.max(np.abs(ext - (z.real + 2j * z.imag))) < 1e-12
    with pytest.raises(ValueError):
        poisson_extension(lambda w: w, [1.0])


def test_poisson_agrees_with_fem(disk):
    fn = lambda w: np.exp(w) + np.conj(w) ** 3
    errs = []
    for h in (0.2, 0.1):
        mesh = triangulate(disk, h)
        m, _ = _solve(mesh, fn)
        inner = np.flatnonzero(np.abs(mesh.vertices) < 0.9)
        errs.append(np.max(np.abs(m.values[inner] - poisson_extension(fn, mesh.vertices[inner]))))
    assert errs[1] < errs[0] / 3


def test_replacement_fixed_point_and_reduction(disk_mesh, rng):
    m, _ = _solve(disk_mesh, lambda z: z ** 2)
    sub = submesh_by_image(m, JordanDomain(0.6 * G.unit_disk(64).boundary))
    assert sub.interior.size > 0
    again = harmonic_replacement(m, sub)
    assert np.max(np.abs(again.values - m.values)) < 1e-10
    noisy = m.with_values(m.values + 0.05 * rng.normal(size=m.values.size))
    whole = submesh_from_mask(disk_mesh, np.arange(disk_mesh.n_triangles))
    full = harmonic_replacement(noisy, whole)
    ref, _ = solve_dirichlet(disk_mesh, noisy.values[disk_mesh.boundary_loop])
    assert np.max(np.abs(full.values - ref.values)) < 1e-10


def test_replacement_never_raises_energy(disk_mesh, rng):
    vals = disk_mesh.vertices + 0.1 * (rng.normal(size=disk_mesh.n_vertices) + 1j * rng.normal(size=disk_mesh.n_vertices))
    m = MeshMap(disk_mesh, vals)
    for r in (0.3, 0.6, 0.9):
        sub = submesh_by_image(m, JordanDomain(0.2 + r * G.unit_disk(64).boundary))
        new = harmonic_replacement(m, sub)
        assert dirichlet_energy(new) <= dirichlet_energy(m) + 1e-12
        keep = np.setdiff1d(np.arange(disk_mesh.n_vertices), sub.interior)
        assert np.array_equal(new.values[keep], m.values[keep])
        m = new


def test_replacement_empty_interior(disk_mesh):
    m = MeshMap.sample(disk_mesh, lambda z: z)
    sub = submesh_by_image(m, JordanDomain(5 + 0.1 * G.unit_disk(16).boundary))
    assert harmonic_replacement(m, sub) is m


def test_heart_first_step(heart):
    mesh = heart.mesh(0.1)
    h0 = heart.initial_map(mesh)
    h1 = harmonic_replacement(h0, submesh_by_image(h0, heart.Y1, rival=heart.Y2))
    assert dirichlet_energy(h1) < dirichlet_energy(h0)


def test_rkc_identity(disk):
    g = BoundaryMap.on_circle(lambda w: w, 256)
    r = rkc_extend_and_check(disk, disk, g, 0.1)
    assert r.min_jacobian == pytest.approx(1.0, abs=1e-9) and r.escape_count == 0


def test_rkc_ellipse(disk):
    # derived: the extension is x + 2iy, Jacobian 2
    Y = JordanDomain(np.cos(np.linspace(0, 2 * np.pi, 256, endpoint=False))
                     + 2j * np.sin(np.linspace(0, 2 * np.pi, 256, endpoint=False)))
    g = BoundaryMap.on_circle(lambda w: w.real + 2j * w.imag, 256)
    r = rkc_extend_and_check(disk, Y, g, 0.1)
    assert r.min_jacobian == pytest.approx(2.0, abs=1e-9)
    assert np.max(wirtinger(r.map).jacobian) == pytest.approx(2.0, abs=1e-9)
    assert r.escape_count == 0
    assert r.report.energy == pytest.approx(5 * math.fsum(r.map.mesh.areas), rel=1e-9)


def test_rkc_clover_escapes():
    c = G.clover(0.05)
    r = rkc_extend_and_check(c.X, c.Y_eps, c.g_eps, 0.05)
    assert r.escape_count > 0 and r.escape_depth > 0.01


def test_radial_extension_is_homeomorphic(heart):
    mesh = heart.mesh(0.1)
    m = radial_extension(mesh, heart.X, heart.g)
    assert wirtinger(m).jacobian.min() > 0
    assert np.array_equal(m.values[mesh.boundary_loop], boundary_trace(heart.g, mesh, heart.X))


def test_douglas_identity_band_count():
    for n in (64, 512, 4096):
        oracle = n * (n - 3) * (2 * np.pi / n) ** 2  # integrand is 1 off the band
        assert douglas_integral(lambda w: w, n) == pytest.approx(oracle, rel=1e-12)
    assert abs(douglas_integral(lambda w: w, 4096) / (4 * np.pi ** 2) - 1) < 1e-3


def test_douglas_square_map():
    # |w^2 - v^2|^2 / |w - v|^2 = 2 + 2 cos(angle difference); sum off the band by hand
    for n in (64, 1024):
        off = 2 * (n - 3) + 2 * (-1 - 2 * np.cos(2 * np.pi / n))
        oracle = n * off * (2 * np.pi / n) ** 2
        assert douglas_integral(lambda w: w ** 2, n) == pytest.approx(oracle, rel=1e-11)
    vals = [douglas_integral(lambda w: w ** 2, n) for n in (256, 512, 1024)]
    assert vals[0] < vals[1] < vals[2] < 8 * np.pi ** 2


def test_douglas_flags():
    assert not douglas_study(lambda w: w).divergent
    st = douglas_study(G.lacunary_map())
    assert st.divergent and st.last_ratio > 1.5
    assert all(a < b for a, b in zip(st.values, st.values[1:]))


def test_douglas_small_n():
    with pytest.raises(ValueError):
        douglas_integral(lambda w: w, 8)


def test_boundary_map_validation(tmp_path):
    with pytest.raises(BoundaryMapError):
        BoundaryMap(np.array([0.0, 2.0, 1.0]), np.array([0, 1, 1j]), 3.0)
    with pytest.raises(BoundaryMapError):
        BoundaryMap(np.array([0.0, 1.0, 2.0]), np.array([0, 1, np.nan]), 3.0)
    g = BoundaryMap.on_circle(lambda w: w, 64)
    assert g.is_positively_oriented()
    assert np.allclose(g(g.s), g.values)
    from hopfharm.harmonic import load_boundary_map
    import json

    (tmp_path / "g.json").write_text(json.dumps(g.to_json()))
    back = load_boundary_map(tmp_path / "g.json")
    assert np.array_equal(back.values, g.values) and back.period == g.period
