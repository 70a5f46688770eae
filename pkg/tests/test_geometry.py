import json
import math

import numpy as np
import pytest

from hopfharm import gallery as G
from hopfharm.geometry import (
    DomainError,
    JordanDomain,
    Location,
    classify_points,
    contains_point,
    is_convex,
    load_domain,
    reflex_vertices,
    regular_polygon,
    save_domain,
    signed_area,
    somewhere_convex_probe,
)


def test_signed_area_square(square):
    assert signed_area(square) == 1.0
    assert signed_area(square.reversed()) == -1.0


def test_signed_area_256gon():
    n = 256
    oracle = n / 2 * math.sin(2 * math.pi / n)  # closed form for the inscribed n-gon
    z = regular_polygon(n)
    assert signed_area(z) == pytest.approx(oracle, rel=1e-13)
    assert abs(signed_area(z) - math.pi) < 1e-3


def test_degenerate_rejected():
    with pytest.raises(DomainError):
        signed_area(np.array([0j, 1 + 0j]))
    with pytest.raises(DomainError):
        JordanDomain(np.array([0, 1]))


def test_clockwise_and_self_intersecting_rejected():
    with pytest.raises(DomainError):
        JordanDomain(np.array([0, 1j, 1 + 1j, 1]))
    with pytest.raises(DomainError):
        JordanDomain(np.array([0, 1 + 1j, 1, 1j]))  # bow tie


def test_contains_point(square):
    assert contains_point(square, 0.5 + 0.5j) is Location.INSIDE
    assert contains_point(square, 2.0) is Location.OUTSIDE
    assert contains_point(square, 1.0 + 0.5j, tol=1e-9) is Location.BOUNDARY


def test_classification_rigid_motion_invariant(square, rng):
    pts = rng.uniform(-0.5, 1.5, 200) + 1j * rng.uniform(-0.5, 1.5, 200)
    rot, shift = np.exp(0.7j), 3 - 2j
    moved = square.transformed(lambda z: rot * z + shift)
    assert np.array_equal(classify_points(square, pts), classify_points(moved, rot * pts + shift))


def test_is_convex(square, heart):
    L = JordanDomain(np.array([0, 2, 2 + 1j, 1 + 1j, 1 + 2j, 2j]))
    assert is_convex(square)
    assert not is_convex(L)
    assert not is_convex(heart.Y)


def test_probe_square_edge(square):
    assert somewhere_convex_probe(square, 0.5, 0.1)


def test_probe_clover_corner():
    c = G.clover(0.3)
    assert not somewhere_convex_probe(c.Y_eps, 0.3 + 0.3j, 0.05)


def test_probe_heart_smooth_point(heart):
    z = heart.Y.boundary
    k = int(np.argmax(z.real))  # outer side of the right lobe
    assert somewhere_convex_probe(heart.Y, z[k], 0.05)


def test_probe_rejects_interior_point(square):
    with pytest.raises(DomainError):
        somewhere_convex_probe(square, 0.5 + 0.5j, 0.1)


def test_convex_implies_probe_everywhere():
    d = JordanDomain(regular_polygon(12, radius=2.0))
    for y0 in d.boundary:
        assert somewhere_convex_probe(d, y0, 0.05)


def test_reflex_vertices_clover():
    c = G.clover(0.2)
    found = c.Y_eps.boundary[reflex_vertices(c.Y_eps)]
    assert found.size == 4
    assert np.abs(found[:, None] - c.reflex_points[None, :]).min(axis=1).max() < 1e-12


def test_domain_file_roundtrip(tmp_path, square):
    p = tmp_path / "d.json"
    save_domain(square, p)
    d, flipped = load_domain(p)
    assert not flipped and np.array_equal(d.boundary, square.boundary)
    p.write_text(json.dumps({"name": "cw", "boundary": [[0, 0], [0, 1], [1, 1], [1, 0]]}))
    d, flipped = load_domain(p)
    assert flipped and signed_area(d) == 1.0
