"""Planar Jordan domains stored as closed polylines of complex vertices.

Points are plain Python/numpy complex numbers ``x + iy`` throughout the
package; a domain boundary is a 1-D complex array without the repeated
closing vertex.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import shapely
from shapely.geometry import Polygon

BOUNDARY_TOL = 1e-9
DISK_VERTICES = 128


class DomainError(ValueError):
    """Raised for malformed or degenerate polygonal domains."""


class Location(enum.Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"
    BOUNDARY = "boundary"


def as_complex(points) -> np.ndarray:
    """Coerce complex scalars, complex arrays or ``(n, 2)`` arrays to complex."""
    a = np.asarray(points)
    if np.iscomplexobj(a):
        return a.astype(complex)
    a = a.astype(float)
    if a.ndim >= 1 and a.shape[-1] == 2:
        return a[..., 0] + 1j * a[..., 1]
    return a.astype(complex)


def _boundary_of(d) -> np.ndarray:
    if isinstance(d, JordanDomain):
        return d.boundary
    return as_complex(d)


def signed_area(d) -> float:
    """Shoelace area of a closed polyline; positive iff counterclockwise.

    Accepts a :class:`JordanDomain` or a raw vertex sequence (so reversed
    polylines can be measured too).
    """
    z = _boundary_of(d)
    if z.shape[0] < 3:
        raise DomainError("a polygon needs at least 3 vertices")
    w = np.roll(z, -1)
    terms = z.real * w.imag - w.real * z.imag
    return 0.5 * math.fsum(terms)


def _self_intersects(z: np.ndarray) -> bool:
    ring = shapely.LinearRing(np.c_[z.real, z.imag])
    return not ring.is_simple


@dataclass(frozen=True, eq=False)
class JordanDomain:
    """Positively oriented simple polygon.

    ``boundary`` lists the vertices once (closure is implicit).
    """

    boundary: np.ndarray
    name: str = ""
    _polygon: Polygon = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        z = as_complex(self.boundary).ravel()
        if z.shape[0] < 3:
            raise DomainError("a polygon needs at least 3 vertices")
        if not np.all(np.isfinite(z)):
            raise DomainError("boundary contains non-finite coordinates")
        if z[0] == z[-1]:
            z = z[:-1]
        z.setflags(write=False)
        object.__setattr__(self, "boundary", z)
        if _self_intersects(z):
            raise DomainError(f"boundary of {self.name or 'domain'} is not simple")
        if signed_area(z) <= 0:
            raise DomainError("boundary must be positively oriented (counterclockwise)")
        object.__setattr__(self, "_polygon", Polygon(np.c_[z.real, z.imag]))

    @classmethod
    def from_points(cls, points, name: str = "", reorient: bool = True) -> tuple["JordanDomain", bool]:
        """Build a domain, flipping clockwise input. Returns ``(domain, flipped)``."""
        z = as_complex(points).ravel()
        if z.shape[0] >= 2 and z[0] == z[-1]:
            z = z[:-1]
        flipped = False
        if reorient and z.shape[0] >= 3 and signed_area(z) < 0:
            z = z[::-1].copy()
            flipped = True
        return cls(z, name), flipped

    @property
    def polygon(self) -> Polygon:
        return self._polygon

    @property
    def n(self) -> int:
        return self.boundary.shape[0]

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        return self.boundary, np.roll(self.boundary, -1)

    def perimeter(self) -> float:
        a, b = self.edges()
        return math.fsum(np.abs(b - a))

    def diameter(self) -> float:
        z = self.boundary
        lo, hi = z.real.min() + 1j * z.imag.min(), z.real.max() + 1j * z.imag.max()
        return float(abs(hi - lo))

    def reversed(self) -> np.ndarray:
        return self.boundary[::-1].copy()

    def transformed(self, fn, name: str | None = None) -> "JordanDomain":
        """Image under a vertex-wise map (orientation preserving assumed)."""
        return JordanDomain(fn(self.boundary), self.name if name is None else name)

    def to_json(self) -> dict:
        z = self.boundary
        return {"name": self.name, "boundary": np.c_[z.real, z.imag].tolist()}


def load_domain(path) -> tuple[JordanDomain, bool]:
    """Read ``{"name", "boundary"}``; returns the domain and a re-orientation flag."""
    data = json.loads(Path(path).read_text())
    return JordanDomain.from_points(data["boundary"], name=data.get("name", ""))


def save_domain(d: JordanDomain, path) -> None:
    Path(path).write_text(json.dumps(d.to_json()))


def distance_to_boundary(d, points) -> np.ndarray:
    """Euclidean distance from each point to the boundary polyline."""
    z = _boundary_of(d)
    p = np.atleast_1d(as_complex(points))
    a = z[None, :]
    ab = (np.roll(z, -1) - z)[None, :]
    ap = p[:, None] - a
    denom = np.where(np.abs(ab) > 0, np.abs(ab) ** 2, 1.0)
    t = np.clip((ap.real * ab.real + ap.imag * ab.imag) / denom, 0.0, 1.0)
    return np.abs(ap - t * ab).min(axis=1)


def winding_numbers(d, points) -> np.ndarray:
    """Crossing-rule winding number of the boundary around each point."""
    z = _boundary_of(d)
    p = np.atleast_1d(as_complex(points))
    a = z[None, :]
    b = np.roll(z, -1)[None, :]
    py = p.imag[:, None]
    is_left = (b.real - a.real) * (py - a.imag) - (p.real[:, None] - a.real) * (b.imag - a.imag)
    up = (a.imag <= py) & (b.imag > py) & (is_left > 0)
    down = (a.imag > py) & (b.imag <= py) & (is_left < 0)
    return up.sum(axis=1) - down.sum(axis=1)


def classify_points(d, points, tol: float = BOUNDARY_TOL) -> np.ndarray:
    """Vectorised :func:`contains_point`: 1 inside, 0 boundary, -1 outside."""
    p = np.atleast_1d(as_complex(points))
    out = np.empty(p.shape[0], dtype=np.int8)
    # chunking keeps the (points x edges) temporaries bounded
    step = max(1, 2_000_000 // max(1, _boundary_of(d).shape[0]))
    for lo in range(0, p.shape[0], step):
        chunk = p[lo : lo + step]
        on = distance_to_boundary(d, chunk) <= tol
        inside = winding_numbers(d, chunk) != 0
        out[lo : lo + step] = np.where(on, 0, np.where(inside, 1, -1))
    return out


def contains_point(d, p, tol: float = BOUNDARY_TOL) -> Location:
    code = int(classify_points(d, [as_complex(p)], tol)[0])
    return {1: Location.INSIDE, 0: Location.BOUNDARY, -1: Location.OUTSIDE}[code]


def turning_cross(z: np.ndarray) -> np.ndarray:
    """Normalised cross product of consecutive edges at each vertex (sine of turn)."""
    e_in = z - np.roll(z, 1)
    e_out = np.roll(z, -1) - z
    cross = e_in.real * e_out.imag - e_in.imag * e_out.real
    scale = np.abs(e_in) * np.abs(e_out)
    return np.where(scale > 0, cross / np.where(scale > 0, scale, 1.0), 0.0)


def is_convex(d, tol: float = BOUNDARY_TOL) -> bool:
    z = _boundary_of(d)
    if signed_area(z) < 0:
        z = z[::-1]
    return bool(np.all(turning_cross(z) >= -tol))


def regular_polygon(n: int, center: complex = 0j, radius: float = 1.0, phase: float = 0.0) -> np.ndarray:
    t = phase + 2 * np.pi * np.arange(n) / n
    return center + radius * np.exp(1j * t)


def somewhere_convex_probe(d: JordanDomain, y0, eps: float, tol: float = BOUNDARY_TOL,
                           disk_vertices: int = DISK_VERTICES) -> bool:
    """Is the closed domain intersected with a small disk about ``y0`` convex?

    The disk is replaced by an inscribed regular polygon.
    """
    y0 = complex(as_complex(y0))
    if eps <= 0:
        raise DomainError("eps must be positive")
    if distance_to_boundary(d, [y0])[0] > tol:
        raise DomainError(f"probe point {y0} is not on the boundary")
    disk = regular_polygon(disk_vertices, y0, eps)
    cap = d.polygon.intersection(Polygon(np.c_[disk.real, disk.imag]))
    if cap.is_empty or cap.geom_type != "Polygon" or len(cap.interiors):
        return False
    ring = np.asarray(cap.exterior.coords)[:-1]
    zc = ring[:, 0] + 1j * ring[:, 1]
    # drop repeated vertices shapely may leave behind
    keep = np.abs(zc - np.roll(zc, 1)) > 1e-14
    zc = zc[keep]
    if zc.shape[0] < 3:
        return False
    return is_convex(zc, tol=max(tol, 1e-9))


def reflex_vertices(d: JordanDomain, eps: float | None = None, tol: float = BOUNDARY_TOL) -> np.ndarray:
    """Indices of boundary vertices where the local convexity probe fails."""
    z = d.boundary
    if eps is None:
        edge = np.abs(np.roll(z, -1) - z)
        eps = 0.25 * float(edge.min())
    # only vertices turning right can fail the probe; test those directly
    candidates = np.flatnonzero(turning_cross(z) < -tol)
    return np.array([i for i in candidates if not somewhere_convex_probe(d, z[i], eps, tol)], dtype=int)
