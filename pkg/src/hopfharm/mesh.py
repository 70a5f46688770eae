"""Triangle meshes and piecewise-linear maps on them.

A :class:`MeshMap` is the P1 interpolant of a complex-valued map, so its
Wirtinger derivatives are constant on every triangle and all energy and
Jacobian quantities below are exact for the interpolant.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import triangle as shewchuk
from scipy import sparse
from shapely.geometry import Polygon, box

from .geometry import (
    BOUNDARY_TOL,
    DomainError,
    JordanDomain,
    as_complex,
    classify_points,
    distance_to_boundary,
)

MIN_ANGLE_DEG = 20.0


class MeshError(ValueError):
    """Raised for invalid meshes or mesh maps."""


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a.real * b.imag - a.imag * b.real


def triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = vertices[triangles]
    return 0.5 * _cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])


def _boundary_loop(triangles: np.ndarray) -> np.ndarray:
    directed = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    fwd = {(int(a), int(b)) for a, b in directed}
    nxt = {}
    for a, b in fwd:
        if (b, a) not in fwd:
            if a in nxt:
                raise MeshError("boundary is not a single simple loop")
            nxt[a] = b
    if not nxt:
        raise MeshError("mesh has no boundary")
    start = min(nxt)
    loop = [start]
    while True:
        v = nxt[loop[-1]]
        if v == start:
            break
        loop.append(v)
        if len(loop) > len(nxt):
            raise MeshError("boundary walk did not close")
    if len(loop) != len(nxt):
        raise MeshError("mesh boundary has more than one component")
    return np.asarray(loop, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Conforming counterclockwise triangulation with a single boundary loop."""

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_loop: np.ndarray = None

    def __post_init__(self):
        v = as_complex(self.vertices).ravel()
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if t.size and (t.min() < 0 or t.max() >= v.shape[0]):
            raise MeshError("triangle index out of range")
        if not np.all(np.isfinite(v)):
            raise MeshError("non-finite vertex")
        areas = triangle_areas(v, t)
        if np.any(areas <= 0):
            raise MeshError(f"{int(np.sum(areas <= 0))} triangles have non-positive area")
        loop = _boundary_loop(t) if self.boundary_loop is None else np.asarray(self.boundary_loop, dtype=np.int64)
        for arr in (v, t, loop):
            arr.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "boundary_loop", loop)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @cached_property
    def areas(self) -> np.ndarray:
        return triangle_areas(self.vertices, self.triangles)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def is_boundary(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary_loop] = True
        return mask

    @cached_property
    def interior_vertices(self) -> np.ndarray:
        return np.flatnonzero(~self.is_boundary)

    @cached_property
    def vertex_triangles(self) -> sparse.csr_matrix:
        """Incidence matrix, vertices x triangles."""
        m = self.n_triangles
        rows = self.triangles.ravel()
        cols = np.repeat(np.arange(m), 3)
        return sparse.csr_matrix((np.ones(3 * m), (rows, cols)), shape=(self.n_vertices, m))

    @cached_property
    def edges(self) -> np.ndarray:
        t = self.triangles
        e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        return np.unique(e, axis=0)

    def edge_lengths(self) -> np.ndarray:
        e = self.edges
        return np.abs(self.vertices[e[:, 1]] - self.vertices[e[:, 0]])

    def min_angles_deg(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        angles = []
        for i in range(3):
            u = p[:, (i + 1) % 3] - p[:, i]
            w = p[:, (i + 2) % 3] - p[:, i]
            angles.append(np.abs(np.angle(w / u)))
        return np.degrees(np.min(angles, axis=0))

    @cached_property
    def stiffness(self) -> sparse.csr_matrix:
        return stiffness_matrix(self.vertices, self.triangles)

    def to_json(self) -> dict:
        v = self.vertices
        return {
            "vertices": np.c_[v.real, v.imag].tolist(),
            "triangles": self.triangles.tolist(),
            "boundary_loop": self.boundary_loop.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "TriangleMesh":
        return cls(as_complex(data["vertices"]), np.asarray(data["triangles"]),
                   data.get("boundary_loop"))


def stiffness_matrix(vertices: np.ndarray, triangles: np.ndarray) -> sparse.csr_matrix:
    """P1 stiffness (cotangent Laplacian) with ``u @ K @ u = int |grad u|^2``."""
    p = vertices[triangles]
    area = triangle_areas(vertices, triangles)
    # edge opposite vertex i
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    local = (e[:, :, None].real * e[:, None, :].real + e[:, :, None].imag * e[:, None, :].imag)
    local /= 4.0 * area[:, None, None]
    rows = np.repeat(triangles, 3, axis=1).ravel()
    cols = np.tile(triangles, (1, 3)).ravel()
    n = vertices.shape[0]
    return sparse.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


# ---------------------------------------------------------------- meshing

def _as_polyline(c) -> np.ndarray:
    a = np.asarray(c)
    # a flat real sequence is a list of points on the real axis, not an (x, y) pair
    if a.ndim == 1 and not np.iscomplexobj(a):
        return a.astype(complex)
    return as_complex(a).ravel()


def _subdivide(a: complex, b: complex, spacing: float) -> np.ndarray:
    """Points a, ..., (excluding b) splitting segment ab into pieces <= spacing."""
    n = max(1, int(math.ceil(abs(b - a) / spacing - 1e-9)))
    return a + (b - a) * np.arange(n) / n


def _polyline_points(z: np.ndarray, spacing: float, closed: bool = True) -> np.ndarray:
    ends = np.roll(z, -1) if closed else z[1:]
    starts = z if closed else z[:-1]
    pts = [_subdivide(a, b, spacing) for a, b in zip(starts, ends)]
    if not closed:
        pts.append(z[-1:])
    return np.concatenate(pts)


def lattice_points(xmin: float, xmax: float, ymin: float, ymax: float, spacing: float,
                   origin: complex = 0j) -> np.ndarray:
    """Equilateral lattice with horizontal rows, one row through ``origin``."""
    dy = spacing * math.sqrt(3) / 2
    k0 = math.floor((ymin - origin.imag) / dy) - 1
    k1 = math.ceil((ymax - origin.imag) / dy) + 1
    out = []
    for k in range(k0, k1 + 1):
        y = origin.imag + k * dy
        off = origin.real + (0.5 * spacing if k % 2 else 0.0)
        j0 = math.floor((xmin - off) / spacing) - 1
        j1 = math.ceil((xmax - off) / spacing) + 1
        x = off + spacing * np.arange(j0, j1 + 1)
        out.append(x + 1j * y)
    p = np.concatenate(out)
    keep = (p.real >= xmin) & (p.real <= xmax) & (p.imag >= ymin) & (p.imag <= ymax)
    return p[keep]


def _seed_points(boundary: np.ndarray, spacing: float, constraints: list[np.ndarray],
                 origin: complex, clearance: float) -> np.ndarray:
    lat = lattice_points(boundary.real.min(), boundary.real.max(),
                         boundary.imag.min(), boundary.imag.max(), spacing, origin)
    lat = lat[classify_points(boundary, lat, tol=1e-12) == 1]
    keep = distance_to_boundary(boundary, lat) >= clearance * spacing
    for c in constraints:
        a, b = c[:-1], c[1:]
        ab = b - a
        ap = lat[:, None] - a[None, :]
        t = np.clip((ap.real * ab.real + ap.imag * ab.imag) / np.abs(ab) ** 2, 0, 1)
        dist = np.abs(ap - t * ab).min(axis=1)
        keep &= dist >= clearance * spacing
    return lat[keep]


def _refine(out: dict, target_edge: float, min_angle: float, rounds: int = 80):
    """Area-refine triangles with an edge above ``target_edge``; ``None`` if stuck."""
    for _ in range(rounds):
        v = out["vertices"][:, 0] + 1j * out["vertices"][:, 1]
        t = out["triangles"]
        p = v[t]
        longest = np.max(np.abs(p - np.roll(p, -1, axis=1)), axis=1)
        if longest.max() <= target_edge:
            return out, None
        a = triangle_areas(v, t)
        limits = np.where(longest > target_edge, 0.3 * a, -1.0)
        out = shewchuk.triangulate(
            {**out, "triangle_max_area": limits}, f"rpq{min_angle:g}DaQ")
    return out, p[longest > target_edge]


def _run_triangle(points: np.ndarray, segments: np.ndarray, target_edge: float,
                  min_angle: float) -> tuple[np.ndarray, np.ndarray]:
    area = 0.45 * target_edge ** 2
    pslg = {"vertices": np.c_[points.real, points.imag], "segments": segments}
    out = shewchuk.triangulate(pslg, f"pq{min_angle:g}Da{area:.17g}Q")
    out, stuck = _refine(out, target_edge, min_angle)
    for _ in range(5):
        if stuck is None:
            break
        # circumcentre insertion can stall on co-circular lattice points;
        # seed the stuck triangles with their centroids and start over
        extra = stuck.mean(axis=1)
        verts = np.concatenate([out["vertices"], np.c_[extra.real, extra.imag]])
        out = shewchuk.triangulate({"vertices": verts, "segments": out["segments"]},
                                   f"pq{min_angle:g}Da{area:.17g}Q")
        out, stuck = _refine(out, target_edge, min_angle, 20)
    if stuck is not None:
        raise MeshError("could not reach the requested edge length")
    v = out["vertices"][:, 0] + 1j * out["vertices"][:, 1]
    t = out["triangles"].astype(np.int64)
    neg = triangle_areas(v, t) < 0
    t[neg] = t[neg][:, ::-1]
    return v, t


def _drop_unused(v: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    used = np.unique(t)
    remap = -np.ones(v.shape[0], dtype=np.int64)
    remap[used] = np.arange(used.shape[0])
    return v[used], remap[t]


def triangulate(d: JordanDomain, target_edge: float, min_angle: float = MIN_ANGLE_DEG,
                constraints=None, spacing: float | None = None, origin: complex = 0j) -> TriangleMesh:
    """Quality Delaunay refinement of ``d`` seeded with an equilateral lattice.

    ``constraints`` is an optional list of interior polylines that become mesh
    edges (e.g. a branch cut). Interior seeds come from a lattice of the given
    ``spacing`` (default ``0.9 * target_edge``) through ``origin``; the
    lattice makes P1 derivative errors cancel in local averages.
    """
    if not target_edge > 0:
        raise MeshError("target_edge must be positive")
    if not isinstance(d, JordanDomain):
        raise DomainError("triangulate expects a JordanDomain")
    s = 0.9 * target_edge if spacing is None else float(spacing)
    if s > target_edge:
        raise MeshError("lattice spacing exceeds target_edge")
    constraints = [_as_polyline(c) for c in (constraints or [])]
    bnd = _polyline_points(d.boundary, s)
    pieces = [bnd]
    segs = [np.c_[np.arange(bnd.shape[0]), (np.arange(bnd.shape[0]) + 1) % bnd.shape[0]]]
    offset = bnd.shape[0]
    for c in constraints:
        cp = _polyline_points(c, s, closed=False)
        pieces.append(cp)
        idx = offset + np.arange(cp.shape[0])
        segs.append(np.c_[idx[:-1], idx[1:]])
        offset += cp.shape[0]
    seeds = _seed_points(d.boundary, s, constraints, origin, clearance=0.45)
    pieces.append(seeds)
    pts = np.concatenate(pieces)
    # constraint endpoints may coincide with boundary points
    _, first, inverse = np.unique(np.round(np.c_[pts.real, pts.imag], 12), axis=0,
                                  return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(order.shape[0])
    pts_u = pts[np.sort(first)]
    segments = rank[inverse[np.concatenate(segs)]]
    v, t = _run_triangle(pts_u, segments, target_edge, min_angle)
    v, t = _drop_unused(v, t)
    return TriangleMesh(v, t)


def triangulate_symmetric(d: JordanDomain, target_edge: float, min_angle: float = MIN_ANGLE_DEG,
                          spacing: float | None = None) -> TriangleMesh:
    """Mesh that is exactly invariant under ``(x, y) -> (-x, y)``.

    The right half of ``d`` is meshed and reflected; ``d`` itself must be
    mirror symmetric.
    """
    s = 0.9 * target_edge if spacing is None else float(spacing)
    z = d.boundary
    big = 2 * d.diameter() + 1
    half = d.polygon.intersection(box(0.0, z.imag.min() - big, big, z.imag.max() + big))
    if half.geom_type != "Polygon":
        raise DomainError("right half of the domain is not a single polygon")
    ring = np.asarray(half.exterior.coords)[:-1]
    hz = ring[:, 0] + 1j * ring[:, 1]
    hz = np.where(np.abs(hz.real) < 1e-12, 1j * hz.imag, hz)
    hz = hz[np.abs(hz - np.roll(hz, 1)) > 1e-14]
    if sum(np.abs(hz.real) == 0) < 2:
        raise DomainError("domain does not straddle the symmetry axis")
    half_dom, _ = JordanDomain.from_points(hz, name="half")
    hz = half_dom.boundary
    # boundary points; the axis edge is split at lattice rows with a vertex on x = 0
    dy = s * math.sqrt(3) / 2
    pts = []
    for a, b in zip(hz, np.roll(hz, -1)):
        if a.real == 0 and b.real == 0:
            lo, hi = sorted((a.imag, b.imag))
            k = np.arange(math.ceil(lo / (2 * dy)), math.floor(hi / (2 * dy)) + 1)
            ys = 2 * dy * k
            ys = ys[(ys > lo + 0.3 * s) & (ys < hi - 0.3 * s)]
            ys = np.sort(ys) if b.imag > a.imag else np.sort(ys)[::-1]
            pts.append(np.concatenate([[a], 1j * ys]))
        else:
            pts.append(_subdivide(a, b, s))
    bnd = np.concatenate(pts)
    n = bnd.shape[0]
    segs = np.c_[np.arange(n), (np.arange(n) + 1) % n]
    seeds = _seed_points(hz, s, [], 0j, clearance=0.45)
    v, t = _run_triangle(np.concatenate([bnd, seeds]), segs, target_edge, min_angle)
    v, t = _drop_unused(v, t)
    v = np.where(np.abs(v.real) < 1e-12, 1j * v.imag, v)
    on_axis = v.real == 0
    if np.any(v.real < 0):
        raise MeshError("half mesh crossed the axis")
    mirror_index = np.arange(v.shape[0]) + v.shape[0]
    mirror_index[on_axis] = np.flatnonzero(on_axis)
    verts = np.concatenate([v, -v.real + 1j * v.imag])
    tris = np.concatenate([t, mirror_index[t][:, ::-1]])
    verts, tris = _drop_unused(verts, tris)
    return TriangleMesh(verts, tris)


def mirror_permutation(mesh: TriangleMesh, tol: float = 1e-12) -> np.ndarray:
    """Index map ``i -> j`` with ``vertex[j] = reflect(vertex[i])`` about x = 0."""
    v = mesh.vertices
    key = {(round(p.real, 11), round(p.imag, 11)): i for i, p in enumerate(v)}
    perm = np.empty(v.shape[0], dtype=np.int64)
    for i, p in enumerate(v):
        j = key.get((round(-p.real, 11) + 0.0, round(p.imag, 11)))
        if j is None or abs(v[j] - (-p.real + 1j * p.imag)) > tol:
            raise MeshError("mesh is not mirror symmetric")
        perm[i] = j
    return perm


def structured_rectangle(x0: float, x1: float, y0: float, y1: float, target_edge: float,
                         columns=()) -> TriangleMesh:
    """Row-aligned triangulation of a rectangle.

    Every triangle has its vertices on two adjacent horizontal rows, and each
    requested ``columns`` abscissa is a mesh line, so maps depending on y
    alone are interpolated with zero Jacobian.
    """
    nrows = max(2, int(math.ceil((y1 - y0) / (target_edge * math.sqrt(3) / 2))))
    ys = y0 + (y1 - y0) * np.arange(nrows + 1) / nrows
    s = 0.9 * target_edge
    breaks = sorted({x0, x1, *[c for c in columns if x0 < c < x1]})
    rows = []
    for k, y in enumerate(ys):
        xs = []
        for a, b in zip(breaks[:-1], breaks[1:]):
            m = max(1, int(math.ceil((b - a) / s)))
            grid = a + (b - a) * np.arange(m + 1) / m
            if k % 2:
                mid = 0.5 * (grid[:-1] + grid[1:])
                grid = np.concatenate([[a], mid, [b]])
            xs.append(grid[:-1])
        xs.append([x1])
        rows.append(np.concatenate(xs) + 1j * y)
    verts = np.concatenate(rows)
    starts = np.cumsum([0] + [r.shape[0] for r in rows])
    tris = []
    for k in range(nrows):
        lo, hi = rows[k], rows[k + 1]
        i = j = 0
        bi, bj = starts[k], starts[k + 1]
        while i < lo.shape[0] - 1 or j < hi.shape[0] - 1:
            # close the quad with its shorter diagonal
            advance_lo = j == hi.shape[0] - 1 or (
                i < lo.shape[0] - 1 and abs(lo[i + 1] - hi[j]) <= abs(hi[j + 1] - lo[i]))
            if advance_lo:
                tris.append((bi + i, bi + i + 1, bj + j))
                i += 1
            else:
                tris.append((bi + i, bj + j + 1, bj + j))
                j += 1
    return TriangleMesh(verts, np.asarray(tris))


# ------------------------------------------------------------ mesh maps

@dataclass(frozen=True, eq=False)
class MeshMap:
    mesh: TriangleMesh
    values: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.values, dtype=complex).ravel()
        if h.shape[0] != self.mesh.n_vertices:
            raise MeshError("values length differs from vertex count")
        if not np.all(np.isfinite(h)):
            raise MeshError("non-finite map value")
        h = h.copy()
        h.setflags(write=False)
        object.__setattr__(self, "values", h)

    @classmethod
    def sample(cls, mesh: TriangleMesh, fn) -> "MeshMap":
        return cls(mesh, fn(mesh.vertices))

    def with_values(self, values) -> "MeshMap":
        return MeshMap(self.mesh, values)

    def to_json(self) -> dict:
        data = self.mesh.to_json()
        data["values"] = np.c_[self.values.real, self.values.imag].tolist()
        return data

    @classmethod
    def from_json(cls, data: dict) -> "MeshMap":
        return cls(TriangleMesh.from_json(data), as_complex(data["values"]))


def save_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj.to_json()))


def load_mesh_map(path) -> MeshMap:
    return MeshMap.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class TriangleDerivatives:
    hz: np.ndarray
    hzbar: np.ndarray
    jacobian: np.ndarray
    area: np.ndarray


def affine_wirtinger(p: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(h_z, h_zbar)`` of the affine map through triangles ``p`` -> ``h``.

    ``p`` and ``h`` have shape ``(m, 3)``. Exact for affine data.
    """
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    d1, d2 = h[:, 1] - h[:, 0], h[:, 2] - h[:, 0]
    det = e1 * np.conj(e2) - e2 * np.conj(e1)
    if np.any(det == 0):
        raise MeshError("zero-area triangle")
    hz = (d1 * np.conj(e2) - d2 * np.conj(e1)) / det
    hzbar = (e1 * d2 - e2 * d1) / det
    return hz, hzbar


def wirtinger(m: MeshMap) -> TriangleDerivatives:
    t = m.mesh.triangles
    hz, hzbar = affine_wirtinger(m.mesh.vertices[t], m.values[t])
    jac = np.abs(hz) ** 2 - np.abs(hzbar) ** 2
    return TriangleDerivatives(hz, hzbar, jac, m.mesh.areas)


def dirichlet_energy(m: MeshMap) -> float:
    """``int |Dh|^2`` of the interpolant, ``sum 2 (|h_z|^2 + |h_zbar|^2) area``."""
    d = wirtinger(m)
    return math.fsum(2.0 * (np.abs(d.hz) ** 2 + np.abs(d.hzbar) ** 2) * d.area)


def signed_image_area(m: MeshMap) -> float:
    d = wirtinger(m)
    return math.fsum(d.jacobian * d.area)


def jacobian_stats(m: MeshMap, near_zero_tol: float = 1e-10, negative_tol: float = 1e-12) -> dict:
    """Per-triangle Jacobian summary.

    ``area_weighted_min`` is the smallest ``J * area / mean(area)``, i.e. the
    worst signed image area in units of the mean triangle area.
    """
    d = wirtinger(m)
    j = d.jacobian
    return {
        "min_jacobian": float(j.min()),
        "max_jacobian": float(j.max()),
        "count_negative": int(np.sum(j < -negative_tol)),
        "count_near_zero": int(np.sum(np.abs(j) <= near_zero_tol)),
        "area_weighted_min": float(np.min(j * d.area / d.area.mean())),
    }


@dataclass(frozen=True)
class SubMesh:
    triangles: np.ndarray
    interior: np.ndarray
    boundary: np.ndarray

    @property
    def empty(self) -> bool:
        return self.triangles.shape[0] == 0


def vertices_in_region(m: MeshMap, region: JordanDomain, tol: float = BOUNDARY_TOL,
                       rival: JordanDomain | None = None) -> np.ndarray:
    """Vertices whose image lies in the closed region.

    With ``rival`` given, images within ``tol`` of both boundaries count as
    outside.
    """
    code = classify_points(region, m.values, tol)
    inside = code >= 0
    if rival is not None:
        tie = (code == 0) & (distance_to_boundary(rival, m.values) <= tol)
        inside &= ~tie
    return inside


def submesh_by_image(m: MeshMap, region: JordanDomain, tol: float = BOUNDARY_TOL,
                     rival: JordanDomain | None = None) -> SubMesh:
    """Discrete preimage of ``region`` under ``m``.

    Selected triangles have all three vertex images in the closed region;
    interior vertices are non-boundary mesh vertices whose incident triangles
    are all selected; the remaining vertices of selected triangles carry the
    Dirichlet data.
    """
    mesh = m.mesh
    inside = vertices_in_region(m, region, tol, rival)
    sel = np.all(inside[mesh.triangles], axis=1)
    tri = np.flatnonzero(sel)
    incident = np.asarray(mesh.vertex_triangles.sum(axis=1)).ravel()
    selected = np.asarray(mesh.vertex_triangles @ sel.astype(float)).ravel()
    touched = selected > 0
    interior = touched & (selected == incident) & ~mesh.is_boundary
    return SubMesh(tri, np.flatnonzero(interior), np.flatnonzero(touched & ~interior))


def submesh_from_mask(mesh: TriangleMesh, selected: np.ndarray) -> SubMesh:
    sel = np.zeros(mesh.n_triangles, dtype=bool)
    sel[selected] = True
    incident = np.asarray(mesh.vertex_triangles.sum(axis=1)).ravel()
    count = np.asarray(mesh.vertex_triangles @ sel.astype(float)).ravel()
    touched = count > 0
    interior = touched & (count == incident) & ~mesh.is_boundary
    return SubMesh(np.flatnonzero(sel), np.flatnonzero(interior), np.flatnonzero(touched & ~interior))
