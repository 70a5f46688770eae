"""Discrete and disk-based harmonic extension.

The FEM solver works on any :class:`~hopfharm.mesh.TriangleMesh`; the
Poisson and Douglas routines take boundary data on the unit circle.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .geometry import (
    BOUNDARY_TOL,
    JordanDomain,
    as_complex,
    classify_points,
    distance_to_boundary,
    signed_area,
)
from .mesh import MeshError, MeshMap, SubMesh, TriangleMesh, dirichlet_energy, stiffness_matrix, triangulate, wirtinger

SOLVE_TOL = 1e-10
POISSON_N = 2048
DIVERGENCE_RATIO = 1.5


class BoundaryMapError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BoundaryMap:
    """Piecewise-linear closed curve parameterised by boundary arclength.

    ``s`` are strictly increasing knots inside one ``period``; between knots
    (and from the last knot back to the first) the image is interpolated
    linearly. For data on the unit circle ``s`` is the angle and the period
    is ``2*pi``.
    """

    s: np.ndarray
    values: np.ndarray
    period: float

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float).ravel()
        v = as_complex(self.values).ravel()
        if s.shape != v.shape or s.shape[0] < 3:
            raise BoundaryMapError("need at least 3 knots with one image each")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(v))):
            raise BoundaryMapError("non-finite knot or image")
        if np.any(np.diff(s) <= 0):
            raise BoundaryMapError("knots must be strictly increasing")
        if not s[-1] - s[0] < self.period:
            raise BoundaryMapError("knots must lie within one period")
        for a in (s, v):
            a.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "period", float(self.period))

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        xp = np.concatenate([self.s, [self.s[0] + self.period]])
        fp = np.concatenate([self.values, self.values[:1]])
        u = self.s[0] + np.mod(t - self.s[0], self.period)
        return np.interp(u, xp, fp.real) + 1j * np.interp(u, xp, fp.imag)

    def image_area(self) -> float:
        return signed_area(self.values)

    def is_positively_oriented(self) -> bool:
        return self.image_area() > 0

    @classmethod
    def from_polyline(cls, source, images) -> "BoundaryMap":
        """Knots at the vertices of the closed polyline ``source``."""
        z = as_complex(source).ravel()
        seg = np.abs(np.roll(z, -1) - z)
        s = np.concatenate([[0.0], np.cumsum(seg[:-1])])
        return cls(s, images, float(math.fsum(seg)))

    @classmethod
    def on_circle(cls, fn, n: int = 1024) -> "BoundaryMap":
        """Sample ``fn(e^{i theta})`` at ``n`` equally spaced angles."""
        theta = 2 * np.pi * np.arange(n) / n
        return cls(theta, fn(np.exp(1j * theta)), 2 * np.pi)

    def sample_on(self, domain: JordanDomain, points) -> np.ndarray:
        """Evaluate at points of ``domain``'s boundary by arclength lookup.

        Arclength is measured from ``domain.boundary[0]`` and rescaled to this
        map's period, so the map and the polygon may use different units.
        """
        t = boundary_arclength(domain, points)
        return self(t * self.period / domain.perimeter() + self.s[0])

    def to_json(self) -> dict:
        return {"samples": np.c_[self.s, self.values.real, self.values.imag].tolist(),
                "period": self.period}

    @classmethod
    def from_json(cls, data: dict) -> "BoundaryMap":
        a = np.asarray(data["samples"], dtype=float)
        return cls(a[:, 0], a[:, 1] + 1j * a[:, 2], data.get("period", 2 * np.pi))


def load_boundary_map(path) -> BoundaryMap:
    return BoundaryMap.from_json(json.loads(Path(path).read_text()))


def boundary_arclength(domain: JordanDomain, points) -> np.ndarray:
    """Arclength position of each point's nearest projection on the boundary."""
    z = domain.boundary
    p = np.atleast_1d(as_complex(points))
    ab = np.roll(z, -1) - z
    offsets = np.concatenate([[0.0], np.cumsum(np.abs(ab))[:-1]])
    out = np.empty(p.shape[0])
    step = max(1, 2_000_000 // z.shape[0])
    for lo in range(0, p.shape[0], step):
        ap = p[lo : lo + step, None] - z[None, :]
        t = np.clip((ap.real * ab.real + ap.imag * ab.imag) / np.abs(ab) ** 2, 0.0, 1.0)
        dist = np.abs(ap - t * ab)
        k = np.argmin(dist, axis=1)
        rows = np.arange(k.shape[0])
        out[lo : lo + step] = offsets[k] + t[rows, k] * np.abs(ab[k])
    return out


# ------------------------------------------------------------ FEM solves

@dataclass(frozen=True)
class SolveReport:
    residual_norm: float
    iterations: int
    energy: float

    def to_json(self) -> dict:
        return {"residual_norm": self.residual_norm, "iterations": self.iterations, "energy": self.energy}


def _solve_block(K: sparse.csr_matrix, free: np.ndarray, fixed: np.ndarray, values: np.ndarray,
                 tol: float) -> tuple[np.ndarray, float, int]:
    """Minimise the quadratic form of ``K`` over ``free`` with ``fixed`` prescribed."""
    K = K.tocsr()
    Kff = K[free][:, free].tocsc()
    rhs = -(K[free][:, fixed] @ values[fixed])
    b = np.c_[rhs.real, rhs.imag]
    try:
        lu = splu(Kff)
    except RuntimeError as exc:
        raise MeshError(f"singular Dirichlet system: {exc}") from exc
    x = lu.solve(b)
    scale = max(float(np.linalg.norm(b)), float(np.linalg.norm(Kff @ x)), 1e-300)
    res = float(np.linalg.norm(Kff @ x - b)) / scale
    it = 1
    # iterative refinement in the rare case the direct solve is loose
    while res > tol and it < 5:
        x += lu.solve(b - Kff @ x)
        res = float(np.linalg.norm(Kff @ x - b)) / scale
        it += 1
    return x[:, 0] + 1j * x[:, 1], res, it


def solve_dirichlet(mesh: TriangleMesh, boundary_values, tol: float = SOLVE_TOL) -> tuple[MeshMap, SolveReport]:
    """Discrete harmonic extension of values given along ``mesh.boundary_loop``."""
    a = np.asarray(boundary_values)
    bv = as_complex(a) if a.ndim == 2 else a.astype(complex).ravel()
    if bv.shape[0] != mesh.boundary_loop.shape[0]:
        raise MeshError("one boundary value per boundary_loop vertex is required")
    values = np.zeros(mesh.n_vertices, dtype=complex)
    values[mesh.boundary_loop] = bv
    free = mesh.interior_vertices
    res, it = 0.0, 0
    if free.size:
        values[free], res, it = _solve_block(mesh.stiffness, free, mesh.boundary_loop, values, tol)
    m = MeshMap(mesh, values)
    return m, SolveReport(res, it, dirichlet_energy(m))


def harmonic_replacement(m: MeshMap, sub: SubMesh, tol: float = SOLVE_TOL) -> MeshMap:
    """Replace values on ``sub.interior`` by the discrete harmonic solve there.

    The solve uses only the selected triangles; since every triangle touching
    an interior vertex is selected, the total energy cannot increase.
    """
    if sub.interior.size == 0:
        return m
    mesh = m.mesh
    K = stiffness_matrix(mesh.vertices, mesh.triangles[sub.triangles])
    values = np.array(m.values)
    values[sub.interior], _, _ = _solve_block(K, sub.interior, sub.boundary, values, tol)
    return MeshMap(mesh, values)


def boundary_trace(g: BoundaryMap, mesh: TriangleMesh, X: JordanDomain) -> np.ndarray:
    return g.sample_on(X, mesh.vertices[mesh.boundary_loop])


def _ray_hits(z: np.ndarray, center: complex, directions: np.ndarray) -> np.ndarray:
    """Distance from ``center`` along each unit direction to the farthest crossing of the polygon ``z``."""
    a = z - center
    e = np.roll(z, -1) - z
    out = np.empty(directions.shape[0])
    step = max(1, 2_000_000 // z.shape[0])
    for lo in range(0, directions.shape[0], step):
        u = directions[lo : lo + step, None]
        den = u.real * e.imag - u.imag * e.real
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (a.real * e.imag - a.imag * e.real) / den
            s = (a.real * u.imag - a.imag * u.real) / den
        ok = (np.abs(den) > 0) & (s >= -1e-12) & (s <= 1 + 1e-12) & (t > 0)
        out[lo : lo + step] = np.where(ok, t, -np.inf).max(axis=1)
    return out


def radial_extension(mesh: TriangleMesh, X: JordanDomain, g: BoundaryMap, center: complex = 0j,
                     image_center: complex = 0j) -> MeshMap:
    """Cone extension ``h(c + t (p - c)) = c' + t (g(p) - c')`` for ``p`` on the boundary.

    For ``X`` and the target both star-shaped about their centres (boundaries
    that are radial graphs) this is a homeomorphism carrying the boundary data
    exactly. It is the homeomorphic starting map of the alternating process.
    """
    v = mesh.vertices
    values = np.full(v.shape[0], complex(image_center))
    r = np.abs(v - center)
    away = r > 0
    u = (v[away] - center) / r[away]
    reach = _ray_hits(X.boundary, center, u)
    if np.any(~np.isfinite(reach)):
        raise ValueError("domain is not star-shaped about the centre")
    p = center + reach * u
    values[away] = image_center + (r[away] / reach) * (g.sample_on(X, p) - image_center)
    bl = mesh.boundary_loop
    values[bl] = g.sample_on(X, v[bl])
    return MeshMap(mesh, values)


@dataclass
class ExtensionCheck:
    map: MeshMap
    min_jacobian: float
    escape_points: np.ndarray
    escape_depth: float
    report: SolveReport

    @property
    def escape_count(self) -> int:
        return int(self.escape_points.shape[0])

    @property
    def diffeomorphic(self) -> bool:
        return self.min_jacobian > 0


def escapes(m: MeshMap, Y: JordanDomain, tol: float = BOUNDARY_TOL) -> tuple[np.ndarray, float]:
    """Interior-vertex images outside the closure of ``Y`` and their max depth."""
    idx = m.mesh.interior_vertices
    img = m.values[idx]
    out = classify_points(Y, img, tol) < 0
    pts = img[out]
    depth = float(distance_to_boundary(Y, pts).max()) if pts.size else 0.0
    return pts, depth


def rkc_extend_and_check(X: JordanDomain, Y: JordanDomain, g: BoundaryMap, target_edge: float,
                         mesh: TriangleMesh | None = None, tol: float = SOLVE_TOL) -> ExtensionCheck:
    """Harmonic extension of ``g`` over a mesh of ``X`` with a Jacobian and escape audit."""
    mesh = triangulate(X, target_edge) if mesh is None else mesh
    m, rep = solve_dirichlet(mesh, boundary_trace(g, mesh, X), tol)
    pts, depth = escapes(m, Y)
    return ExtensionCheck(m, float(wirtinger(m).jacobian.min()), pts, depth, rep)


# ------------------------------------------------------ unit-circle data

def circle_samples(g, n: int) -> np.ndarray:
    """``g`` at ``e^{2 pi i k / n}``; ``g`` is a BoundaryMap in angle or a callable of the point."""
    theta = 2 * np.pi * np.arange(n) / n
    if isinstance(g, BoundaryMap):
        return g(theta * g.period / (2 * np.pi) + g.s[0])
    return np.asarray(g(np.exp(1j * theta)), dtype=complex)


def poisson_extension(g, points, n: int = POISSON_N, tol: float = BOUNDARY_TOL) -> np.ndarray:
    """Poisson integral of circle data by the ``n``-point trapezoid rule."""
    z = np.atleast_1d(as_complex(points))
    if np.any(np.abs(z) >= 1 - tol):
        raise ValueError("evaluation points must lie inside the unit disk")
    gk = circle_samples(g, n)
    xi = np.exp(2j * np.pi * np.arange(n) / n)
    out = np.empty(z.shape[0], dtype=complex)
    step = max(1, 4_000_000 // n)
    for lo in range(0, z.shape[0], step):
        zz = z[lo : lo + step, None]
        kernel = (1 - np.abs(zz) ** 2) / np.abs(xi[None, :] - zz) ** 2
        out[lo : lo + step] = kernel @ gk / n
    return out


def douglas_integral(g, n: int) -> float:
    """Trapezoid value of the Douglas double integral of circle data.

    The cyclic band ``|i - j| <= 1`` is skipped, where the sampled integrand
    is 0/0 or dominated by the singular kernel.
    """
    if n < 16:
        raise ValueError("n must be at least 16")
    gk = circle_samples(g, n)
    xi = np.exp(2j * np.pi * np.arange(n) / n)
    idx = np.arange(n)
    total = []
    step = max(1, 2_000_000 // n)
    for lo in range(0, n, step):
        rows = idx[lo : lo + step]
        gap = np.abs(rows[:, None] - idx[None, :])
        band = np.minimum(gap, n - gap) <= 1
        den = np.abs(xi[rows, None] - xi[None, :]) ** 2
        num = np.abs(gk[rows, None] - gk[None, :]) ** 2
        q = np.where(band, 0.0, num / np.where(band, 1.0, den))
        total.append(math.fsum(q.sum(axis=1)))
    return math.fsum(total) * (2 * np.pi / n) ** 2


def douglas_fourier(coefficients: dict) -> float:
    """Exact Douglas integral ``4 pi^2 sum |n| |c_n|^2`` of a trigonometric polynomial."""
    return 4 * np.pi ** 2 * math.fsum(abs(k) * abs(c) ** 2 for k, c in coefficients.items())


@dataclass(frozen=True)
class DouglasStudy:
    ns: tuple
    values: tuple
    last_ratio: float
    divergent: bool

    def to_json(self) -> dict:
        return {"N": list(self.ns), "values": list(self.values), "last_ratio": self.last_ratio,
                "divergent": self.divergent}


def douglas_study(g, ns=(1024, 2048, 4096, 8192), threshold: float = DIVERGENCE_RATIO) -> DouglasStudy:
    """Douglas values along a refinement sequence with a divergence flag.

    ``last_ratio`` compares the last two increments, (I_k - I_{k-1}) /
    (I_{k-1} - I_{k-2}). Increments shrink for finite-energy data and keep
    growing when the integral diverges.
    """
    ns = tuple(int(n) for n in ns)
    if len(ns) < 3:
        raise ValueError("need at least three resolutions")
    vals = tuple(douglas_integral(g, n) for n in ns)
    d1, d2 = vals[-2] - vals[-3], vals[-1] - vals[-2]
    floor = 1e-12 * max(abs(vals[-1]), 1.0)
    ratio = 0.0 if abs(d1) <= floor else d2 / d1
    if abs(d1) <= floor and abs(d2) > floor:
        ratio = math.inf
    return DouglasStudy(ns, vals, float(ratio), bool(ratio > threshold))
