"""Closed-form maps, domains and boundary data used as oracles."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from shapely.geometry import MultiPoint, Polygon, box

from .geometry import JordanDomain, as_complex, regular_polygon
from .harmonic import BoundaryMap, radial_extension
from .mesh import MeshMap, TriangleMesh, structured_rectangle, triangulate, triangulate_symmetric

ARC_SAMPLES = 256
DISK_SAMPLES = 256

Fn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ClosedFormMap:
    """A map with exact Wirtinger derivatives."""

    fn: Fn
    dz: Fn
    dzbar: Fn
    domain: JordanDomain | None = None
    branch_note: str = ""
    name: str = ""

    def __call__(self, z):
        return self.fn(np.asarray(z, dtype=complex))

    def d_z(self, z):
        return self.dz(np.asarray(z, dtype=complex))

    def d_zbar(self, z):
        return self.dzbar(np.asarray(z, dtype=complex))

    def hopf(self, z):
        return self.d_z(z) * np.conj(self.d_zbar(z))

    def on_mesh(self, mesh: TriangleMesh) -> MeshMap:
        return MeshMap(mesh, self(mesh.vertices))


def compose(outer: ClosedFormMap, inner: ClosedFormMap, name: str = "") -> ClosedFormMap:
    """``outer o inner`` with the chain rule for Wirtinger derivatives."""

    def dz(z):
        w = inner(z)
        return outer.d_z(w) * inner.d_z(z) + outer.d_zbar(w) * np.conj(inner.d_zbar(z))

    def dzbar(z):
        w = inner(z)
        return outer.d_z(w) * inner.d_zbar(z) + outer.d_zbar(w) * np.conj(inner.d_z(z))

    return ClosedFormMap(lambda z: outer(inner(z)), dz, dzbar, inner.domain, name=name)


def affine(a: complex, b: complex = 0j, c: complex = 0j) -> ClosedFormMap:
    """``z -> c + a z + b conj(z)``."""
    return ClosedFormMap(lambda z: c + a * z + b * np.conj(z),
                         lambda z: np.full(np.shape(z), a, dtype=complex),
                         lambda z: np.full(np.shape(z), b, dtype=complex), name="affine")


def identity() -> ClosedFormMap:
    return affine(1.0)


def mobius(a: complex) -> ClosedFormMap:
    """Disk automorphism ``(z - a) / (1 - conj(a) z)``."""
    return ClosedFormMap(lambda z: (z - a) / (1 - np.conj(a) * z),
                         lambda z: (1 - abs(a) ** 2) / (1 - np.conj(a) * z) ** 2,
                         lambda z: np.zeros(np.shape(z), dtype=complex), name="mobius")


def twist(c: float) -> ClosedFormMap:
    """``z -> z exp(i c |z|^2)``, a diffeomorphism of every disk about 0."""

    def fn(z):
        return z * np.exp(1j * c * np.abs(z) ** 2)

    return ClosedFormMap(fn, lambda z: np.exp(1j * c * np.abs(z) ** 2) * (1 + 1j * c * np.abs(z) ** 2),
                         lambda z: 1j * c * z ** 2 * np.exp(1j * c * np.abs(z) ** 2), name="twist")


def exponential() -> ClosedFormMap:
    return ClosedFormMap(np.exp, np.exp, lambda z: np.zeros(np.shape(z), dtype=complex), name="exp")


def harmonic_quadratic(b: float) -> ClosedFormMap:
    """``z + b conj(z)^2``, harmonic and injective on the unit disk for ``|b| < 1/2``."""
    return ClosedFormMap(lambda z: z + b * np.conj(z) ** 2,
                         lambda z: np.ones(np.shape(z), dtype=complex),
                         lambda z: 2 * b * np.conj(z), name="harmonic_quadratic")


# ---------------------------------------------------------------- butterfly

def unit_disk(n: int = DISK_SAMPLES, phase: float = 0.0) -> JordanDomain:
    return JordanDomain(regular_polygon(n, phase=phase), name="unit_disk")


def _sqrt_branch(z: np.ndarray) -> np.ndarray:
    """Square root with argument in [0, 2 pi), cut along the positive real axis."""
    theta = np.mod(np.angle(z), 2 * np.pi)
    return np.sqrt(np.abs(z)) * np.exp(0.5j * theta)


def butterfly(z) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Value, ``h_z`` and ``h_zbar`` of the butterfly map at ``z``."""
    z = np.asarray(z, dtype=complex)
    s = _sqrt_branch(z)
    z32 = z * s
    h = z - np.conj(z) - 1j * (z32 - np.conj(z32))
    return h, 1 - 1.5j * s, -1 + 1.5j * np.conj(s)


def butterfly_map() -> ClosedFormMap:
    return ClosedFormMap(lambda z: butterfly(z)[0], lambda z: butterfly(z)[1], lambda z: butterfly(z)[2],
                         unit_disk(), branch_note="arg z in [0, 2 pi); cut along [0, 1]", name="butterfly")


def butterfly_phi(z):
    return -(4 + 9 * np.asarray(z, dtype=complex)) / 4


def butterfly_target(n: int = 1024) -> JordanDomain:
    """Image of the unit circle, a polygon with the notch at the origin."""
    theta = 2 * np.pi * np.arange(n) / n
    return JordanDomain(2 * (np.sin(1.5 * theta) + 1j * np.sin(theta)), name="butterfly_target")


def butterfly_mesh(target_edge: float) -> TriangleMesh:
    """Disk mesh with the squeezed segment [0, 1] as a row of mesh edges."""
    spacing = 1.0 / math.ceil(1.0 / (0.9 * target_edge))
    return triangulate(unit_disk(), target_edge, constraints=[np.array([0.0, 1.0])], spacing=spacing)


# -------------------------------------------------------------------- strip

def strip_map(x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.exp(1j * y) * np.where(x >= 0, np.cosh(x), 1.0)


def _strip_dz(z):
    return 0.5 * np.exp(1j * z.imag) * np.exp(np.maximum(z.real, 0.0))


def _strip_dzbar(z):
    return -0.5 * np.exp(1j * z.imag) * np.exp(-np.maximum(z.real, 0.0))


STRIP_HALF_WIDTH = 1.0


def strip_domain(ell: float = STRIP_HALF_WIDTH, T: float = STRIP_HALF_WIDTH) -> JordanDomain:
    h = math.pi / 2
    return JordanDomain(np.array([-ell - 1j * h, T - 1j * h, T + 1j * h, -ell + 1j * h]), name="strip_box")


def strip_closed_form() -> ClosedFormMap:
    return ClosedFormMap(lambda z: strip_map(z.real, z.imag), _strip_dz, _strip_dzbar, strip_domain(),
                         branch_note="C^{1,1}: second derivatives jump across x = 0", name="strip")


def strip_mesh(target_edge: float, ell: float = STRIP_HALF_WIDTH, T: float = STRIP_HALF_WIDTH) -> TriangleMesh:
    return structured_rectangle(-ell, T, -math.pi / 2, math.pi / 2, target_edge, columns=[0.0])


def semi_annulus(T: float = STRIP_HALF_WIDTH, n: int = 256) -> JordanDomain:
    """Image of the box: ``1 < |w| < cosh T``, ``Re w > 0``."""
    t = np.linspace(-np.pi / 2, np.pi / 2, n)
    outer = math.cosh(T) * np.exp(1j * t)
    inner = np.exp(1j * t[::-1])
    return JordanDomain(np.concatenate([outer, inner]), name="semi_annulus")


# ------------------------------------------------------------------ control

def control_map(k: float = 0.3) -> ClosedFormMap:
    """``z + k conj(z) |z|^2``: smooth, not a solution of the Hopf-Laplace equation."""
    return ClosedFormMap(lambda z: z + k * np.conj(z) * np.abs(z) ** 2,
                         lambda z: 1 + k * np.conj(z) ** 2,
                         lambda z: 2 * k * np.abs(z) ** 2, unit_disk(), name="control")


# ------------------------------------------------------------------- clover

@dataclass(frozen=True, eq=False)
class CloverData:
    eps: float
    X: JordanDomain
    Y_eps: JordanDomain | None
    g_eps: BoundaryMap
    corners: np.ndarray

    @property
    def reflex_points(self) -> np.ndarray:
        """Images of the four cusps of X, where Y_eps fails to be convex."""
        return self.eps * self.corners


def clover_arcs(samples_per_arc: int = ARC_SAMPLES) -> list[np.ndarray]:
    """Semicircles centred at 1, i, -1, -i in counterclockwise order, each
    without its final corner."""
    t = np.arange(samples_per_arc) / samples_per_arc * np.pi
    return [c + np.exp(1j * (t + start)) for c, start in
            ((1, -np.pi / 2), (1j, 0.0), (-1, np.pi / 2), (-1j, np.pi))]


def clover_g(eps: float, z: np.ndarray, arc: int) -> np.ndarray:
    x, y = z.real, z.imag
    if arc == 0:
        return (2 * x - eps * x + 2 * eps - 2) + 1j * eps * y
    if arc == 1:
        return eps * x + 1j * (2 * y - eps * y + 2 * eps - 2)
    if arc == 2:
        return (2 * x - eps * x - 2 * eps + 2) + 1j * eps * y
    return eps * x + 1j * (2 * y - eps * y - 2 * eps + 2)


def clover(eps: float, samples_per_arc: int = ARC_SAMPLES) -> CloverData:
    if not 0 <= eps <= 1:
        raise ValueError("eps must lie in [0, 1]")
    arcs = clover_arcs(samples_per_arc)
    X = JordanDomain(np.concatenate(arcs), name="clover")
    images = np.concatenate([clover_g(eps, a, k) for k, a in enumerate(arcs)])
    g = BoundaryMap.from_polyline(X.boundary, images)
    Y = JordanDomain(images, name=f"clover_target_{eps:g}") if eps > 0 else None
    corners = np.array([1 - 1j, 1 + 1j, -1 + 1j, -1 - 1j])
    return CloverData(float(eps), X, Y, g, corners)


def clover_cells(eps: float, samples_per_arc: int = ARC_SAMPLES) -> tuple[JordanDomain, JordanDomain]:
    """Horizontal and vertical convex cells whose union is the clover target.

    Each cell is the convex hull of two opposite half-ellipse lobes; they
    overlap in the square with corners ``eps (+-1 +- i)``.
    """
    if not 0 < eps <= 1:
        raise ValueError("cells need eps in (0, 1]")
    ends = (1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j)
    img = [clover_g(eps, np.r_[a, c], k) for k, (a, c) in enumerate(zip(clover_arcs(samples_per_arc), ends))]
    horiz = np.concatenate([img[0], img[2]])
    vert = np.concatenate([img[1], img[3]])
    return (JordanDomain.from_points(_hull(horiz), name="clover_horizontal")[0],
            JordanDomain.from_points(_hull(vert), name="clover_vertical")[0])


def _hull(z: np.ndarray) -> np.ndarray:
    ring = np.asarray(MultiPoint(np.c_[z.real, z.imag]).convex_hull.exterior.coords)[:-1]
    return ring[:, 0] + 1j * ring[:, 1]


# -------------------------------------------------------------------- heart

HEART_CENTER = 0.45
HEART_TIP = -1.6j


@dataclass(frozen=True, eq=False)
class HeartSetup:
    X: JordanDomain
    Y: JordanDomain
    Y1: JordanDomain
    Y2: JordanDomain
    g: BoundaryMap

    def initial_map(self, mesh: TriangleMesh) -> MeshMap:
        """Radial extension ``h0(r e^{it}) = r G(t)`` of the boundary data.

        The heart is star-shaped about the origin, so ``h0`` is a
        homeomorphism with boundary trace ``g`` and mirror symmetric when
        ``g`` is.
        """
        return radial_extension(mesh, self.X, self.g)

    def mesh(self, target_edge: float) -> TriangleMesh:
        return triangulate_symmetric(self.X, target_edge)


def _lobe(samples: int, sign: float) -> np.ndarray:
    disk = regular_polygon(samples, center=sign * HEART_CENTER, phase=np.pi / 2)
    hull = MultiPoint(np.c_[np.r_[disk.real, HEART_TIP.real], np.r_[disk.imag, HEART_TIP.imag]]).convex_hull
    ring = np.asarray(hull.exterior.coords)[:-1]
    z = ring[:, 0] + 1j * ring[:, 1]
    return z


def _resample_closed(z: np.ndarray, fractions: np.ndarray) -> np.ndarray:
    seg = np.abs(np.roll(z, -1) - z)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    zc = np.concatenate([z, z[:1]])
    s = fractions * cum[-1]
    return np.interp(s, cum, zc.real) + 1j * np.interp(s, cum, zc.imag)


def heart_setup(samples: int = 512) -> HeartSetup:
    """Symmetric heart Y = Y1 u Y2 with arclength-proportional data on the disk.

    Each lobe is the convex hull of a unit disk centred at (+-0.45, 0) and
    the tip (0, -1.6); the union has a reflex notch on the axis at the top.
    ``g`` sends the circle point at angle ``pi/2 + 2 pi t`` to the heart
    point at arclength fraction ``t`` counterclockwise from the notch.
    """
    if samples < 64 or samples % 2:
        raise ValueError("samples must be an even number >= 64")
    Y2 = JordanDomain.from_points(_lobe(4 * samples, 1.0), name="Y2")[0]
    Y1 = JordanDomain.from_points(-np.conj(Y2.boundary[::-1]), name="Y1")[0]
    union = Y1.polygon.union(Y2.polygon)
    half = union.intersection(box(0.0, -10.0, 10.0, 10.0))
    ring = np.asarray(half.exterior.coords)[:-1]
    hz = ring[:, 0] + 1j * ring[:, 1]
    hz = np.where(np.abs(hz.real) < 1e-12, 1j * hz.imag, hz)
    hz = JordanDomain.from_points(hz)[0].boundary
    # right half boundary from the notch down to the tip (clockwise on the right)
    axis = np.flatnonzero(hz.real == 0)
    notch = axis[np.argmax(hz[axis].imag)]
    tip = axis[np.argmin(hz[axis].imag)]
    ordered = np.roll(hz, -tip)  # counterclockwise from the tip up the right side
    k = (notch - tip) % hz.shape[0]
    right = ordered[: k + 1]  # tip -> notch
    left = -np.conj(right[::-1])[1:-1]  # notch -> tip on the left side
    full = np.concatenate([right[-1:], left, right[:-1]])  # notch, left side, tip, right side
    n = samples
    frac = np.arange(n) / n
    pts = _resample_closed(full, frac)
    # exact mirror pairing: point k and point n-k
    half_n = n // 2
    pts[0] = 1j * pts[0].imag
    pts[half_n] = 1j * pts[half_n].imag
    pts[half_n + 1 :] = -np.conj(pts[1:half_n][::-1])
    Y = JordanDomain(pts, name="heart")
    X = unit_disk(n, phase=np.pi / 2)
    g = BoundaryMap.from_polyline(X.boundary, pts)
    return HeartSetup(X, Y, Y1, Y2, g)


# ------------------------------------------------------- Douglas examples

def lacunary_map(terms: int = 30, power: float = 1.1) -> Callable:
    """``e^{it} + sum_k k^{-power} e^{i 2^k t}``; log-type modulus, infinite Douglas integral."""
    k = np.arange(1, terms + 1)

    def g(w):
        w = np.asarray(w, dtype=complex)
        t = np.angle(w)
        out = w.copy()
        for kk in k:
            out = out + kk ** (-power) * np.exp(1j * (2.0 ** kk) * t)
        return out

    return g


def lacunary_douglas_partial(n_max: int, terms: int = 30, power: float = 1.1) -> float:
    """Exact Douglas integral of the frequencies below ``n_max``."""
    k = np.arange(1, terms + 1)
    keep = 2.0 ** k < n_max
    return 4 * np.pi ** 2 * (1 + math.fsum(2.0 ** k[keep] * k[keep] ** (-2 * power)))


# ------------------------------------------------ random homeomorphisms

def random_circle_homeomorphism(rng: np.random.Generator, modes: int = 4, amplitude: float = 0.6):
    """Increasing circle map ``t -> t + sum a_k sin(k t + p_k) / k`` with ``sum |a_k| < 1``."""
    a = rng.uniform(-1, 1, modes)
    a *= amplitude / np.abs(a).sum()
    p = rng.uniform(0, 2 * np.pi, modes)
    k = np.arange(1, modes + 1)
    rot = rng.uniform(0, 2 * np.pi)

    def psi(t):
        t = np.asarray(t, dtype=float)
        return rot + t + np.sum(a[:, None] * np.sin(k[:, None] * t[None, :] + p[:, None]) / k[:, None], axis=0)

    return psi


def random_convex_target(rng: np.random.Generator, n: int = 256) -> JordanDomain:
    """Ellipse with random axes and rotation, or a random convex polygon."""
    if rng.uniform() < 0.5:
        ax, by = rng.uniform(0.6, 1.8, 2)
        rot = np.exp(1j * rng.uniform(0, np.pi))
        t = 2 * np.pi * np.arange(n) / n
        return JordanDomain(rot * (ax * np.cos(t) + 1j * by * np.sin(t)), name="ellipse")
    pts = rng.normal(size=(24, 2))
    hull = MultiPoint(pts).convex_hull
    ring = np.asarray(hull.exterior.coords)[:-1]
    return JordanDomain.from_points(ring, name="random_polygon")[0]


def random_convex_problem(rng: np.random.Generator, n: int = 512):
    """Disk X, convex Y and a random orientation-preserving homeomorphism g."""
    X = unit_disk(DISK_SAMPLES)
    Y = random_convex_target(rng)
    psi = random_circle_homeomorphism(rng)
    # parametrise the target boundary by normalised arclength
    t = 2 * np.pi * np.arange(n) / n
    frac = np.mod(psi(t), 2 * np.pi) / (2 * np.pi)
    images = _resample_closed(Y.boundary, frac)
    g = BoundaryMap(t, images, 2 * np.pi)
    return X, Y, g


# ---------------------------------------------------- energy identity pairs

def energy_identity_pairs() -> dict:
    """Diffeomorphism pairs ``(h, H, G, X, f)`` with ``h = H o f`` and ``f(G) = X``.

    None of them is rotationally symmetric, so the polar quadrature error is
    visible and shrinks with the node count.
    """
    from .hopf import EllipticDisk

    disk = EllipticDisk()
    ellipse = EllipticDisk(0.1j, 1.2, 0.2)
    out = {}
    for name, H, f, G, X in [
        ("affine_mobius_twist", affine(1.0, 0.3), compose(twist(0.7), mobius(0.3 + 0.2j)), disk, disk),
        ("quadratic_twist_mobius", harmonic_quadratic(0.2), compose(mobius(-0.2 + 0.1j), twist(0.8)), disk, disk),
        ("twist_ellipse", twist(0.6), compose(affine(1.2, 0.2, 0.1j), mobius(-0.25j)), disk, ellipse),
    ]:
        out[name] = (compose(H, f, name=name), H, G, X, f)
    return out


# ----------------------------------------------------------------- manifest

GALLERY = {
    "butterfly": "Squeezes [0,1] to the origin; Hopf product -(4+9z)/4 on the unit disk.",
    "strip": "e^{iy} cosh x on [0,1] x [-pi/2, pi/2], e^{iy} for x <= 0; Hopf product -1/4.",
    "control": "z + 0.3 conj(z)|z|^2 on the unit disk; not Hopf-harmonic.",
    "clover:<eps>": "Four-leaf circular clover X, target Y_eps and piecewise affine g_eps.",
    "heart": "Symmetric heart target from two convex lobes, with arclength data on the disk.",
}


def manifest() -> dict:
    return {"schema": "hopfharm/1", "examples": [{"name": k, "description": v} for k, v in GALLERY.items()]}


def write_example(name: str, out_dir) -> list[str]:
    """Write domain and boundary files for a gallery example; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    if name == "butterfly":
        files["X.json"] = unit_disk().to_json()
        files["Y.json"] = butterfly_target().to_json()
        X = unit_disk()
        files["g.json"] = BoundaryMap.from_polyline(X.boundary, butterfly(X.boundary)[0]).to_json()
    elif name == "strip":
        files["X.json"] = strip_domain().to_json()
        files["Y.json"] = semi_annulus().to_json()
    elif name.startswith("clover"):
        eps = float(name.split(":")[1]) if ":" in name else 0.05
        c = clover(eps)
        files["X.json"] = c.X.to_json()
        if c.Y_eps is not None:
            files["Y.json"] = c.Y_eps.to_json()
        files["g.json"] = c.g_eps.to_json()
    elif name == "heart":
        hs = heart_setup()
        files.update({"X.json": hs.X.to_json(), "Y.json": hs.Y.to_json(), "Y1.json": hs.Y1.to_json(),
                      "Y2.json": hs.Y2.to_json(), "g.json": hs.g.to_json()})
    else:
        raise KeyError(f"unknown gallery example {name!r}")
    paths = []
    for fname, data in files.items():
        p = out / fname
        p.write_text(json.dumps(data))
        paths.append(str(p))
    return paths
