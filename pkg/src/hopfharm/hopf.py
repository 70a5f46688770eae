"""Hopf products of mesh maps and their diagnostics."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .mesh import MeshMap, TriangleMesh, wirtinger

SIGMA_TOL = 1e-14
MIN_RING = 3


@dataclass(frozen=True, eq=False)
class HopfField:
    phi: np.ndarray
    centroids: np.ndarray
    area: np.ndarray
    mesh: TriangleMesh | None = None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["centroid_x", "centroid_y", "re_phi", "im_phi", "area"])
            for c, p, a in zip(self.centroids, self.phi, self.area):
                w.writerow([repr(c.real), repr(c.imag), repr(p.real), repr(p.imag), repr(a)])


def hopf_product(m: MeshMap) -> HopfField:
    d = wirtinger(m)
    return HopfField(d.hz * np.conj(d.hzbar), m.mesh.centroids, d.area, m.mesh)


def sampled_field(mesh: TriangleMesh, fn) -> HopfField:
    """Field with ``phi = fn(centroid)``, for testing the residual on known functions."""
    c = mesh.centroids
    return HopfField(np.asarray(fn(c), dtype=complex) * np.ones(c.shape[0]), c, mesh.areas, mesh)


@dataclass(frozen=True)
class ResidualReport:
    global_residual: float
    per_vertex: np.ndarray
    skipped: np.ndarray

    def to_json(self) -> dict:
        v = self.per_vertex[np.isfinite(self.per_vertex)]
        return {"global": self.global_residual, "max_vertex": float(v.max()) if v.size else 0.0,
                "evaluated_vertices": int(v.size), "skipped_vertices": int(self.skipped.size)}


def holomorphy_residual(f: HopfField, vertices=None) -> ResidualReport:
    """Local anti-holomorphic part of ``phi`` around interior vertices.

    On each one-ring the centroid samples are fitted by ``a + b w + c conj(w)``
    in the least-squares sense, ``w`` being the offset from the vertex; the
    vertex residual is ``|c|``. ``global_residual`` averages ``|c|`` with
    weights one third of the one-ring area. ``per_vertex`` is NaN at vertices
    that were not evaluated (mesh boundary or fewer than three triangles).
    """
    mesh = f.mesh
    if mesh is None:
        raise ValueError("field carries no mesh")
    vt = mesh.vertex_triangles.tocsr()
    cand = mesh.interior_vertices if vertices is None else np.asarray(vertices, dtype=np.int64)
    counts = np.diff(vt.indptr)[cand]
    ok = counts >= MIN_RING
    skipped = cand[~ok]
    cand = cand[ok]
    per_vertex = np.full(mesh.n_vertices, np.nan)
    if cand.size == 0:
        return ResidualReport(0.0, per_vertex, skipped)
    # flattened (vertex, triangle) incidences of the candidates
    starts, stops = vt.indptr[cand], vt.indptr[cand + 1]
    owner = np.repeat(np.arange(cand.size), stops - starts)
    tri = vt.indices[np.concatenate([np.arange(a, b) for a, b in zip(starts, stops)])]
    w = f.centroids[tri] - mesh.vertices[cand][owner]
    scale = np.bincount(owner, np.abs(w)) / np.bincount(owner)
    w = w / scale[owner]
    basis = np.stack([np.ones_like(w), w, np.conj(w)], axis=1)
    normal = np.zeros((cand.size, 3, 3), dtype=complex)
    rhs = np.zeros((cand.size, 3), dtype=complex)
    for i in range(3):
        rhs[:, i] = np.bincount(owner, (np.conj(basis[:, i]) * f.phi[tri]).real, minlength=cand.size) \
            + 1j * np.bincount(owner, (np.conj(basis[:, i]) * f.phi[tri]).imag, minlength=cand.size)
        for j in range(3):
            prod = np.conj(basis[:, i]) * basis[:, j]
            normal[:, i, j] = np.bincount(owner, prod.real, minlength=cand.size) \
                + 1j * np.bincount(owner, prod.imag, minlength=cand.size)
    coef = np.linalg.solve(normal, rhs[..., None])[..., 0]
    c = np.abs(coef[:, 2]) / scale
    per_vertex[cand] = c
    ring_area = np.bincount(owner, mesh.areas[tri], minlength=cand.size) / 3.0
    g = math.fsum(c * ring_area) / math.fsum(ring_area)
    return ResidualReport(g, per_vertex, skipped)


@dataclass(frozen=True)
class StretchPair:
    dH: np.ndarray
    dV: np.ndarray
    jacobian: np.ndarray
    phi: np.ndarray

    def identity_errors(self) -> dict:
        """Worst relative violation of the algebraic stretch identities."""
        scale = np.maximum(self.dH ** 2, 1e-300)
        return {
            "product": float(np.max(np.abs(self.dH * self.dV - np.abs(self.jacobian)) / scale)),
            "difference": float(np.max(np.abs(self.dH ** 2 - self.dV ** 2 - 4 * np.abs(self.phi)) / scale)),
            "order": float(np.max(np.maximum(self.dV - self.dH, 0.0))),
        }


def stretch_from(hz: np.ndarray, hzbar: np.ndarray) -> StretchPair:
    a, b = np.abs(hz), np.abs(hzbar)
    return StretchPair(a + b, np.abs(a - b), a ** 2 - b ** 2, hz * np.conj(hzbar))


def stretch(m: MeshMap) -> StretchPair:
    d = wirtinger(m)
    return stretch_from(d.hz, d.hzbar)


# ---------------------------------------------------------- energy identity

@dataclass(frozen=True)
class EllipticDisk:
    """The region ``{center + a w + b conj(w) : |w| < 1}`` with ``|a| > |b|``."""

    center: complex = 0j
    a: complex = 1.0
    b: complex = 0j

    def __post_init__(self):
        if not abs(self.a) > abs(self.b):
            raise ValueError("need |a| > |b| for an orientation preserving image of the disk")

    def nodes(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Polar midpoint rule with ``n`` radii and ``n`` angles."""
        r = (np.arange(n) + 0.5) / n
        t = 2 * np.pi * (np.arange(n) + 0.5) / n
        w = (r[:, None] * np.exp(1j * t[None, :])).ravel()
        wt = np.repeat(r * (1.0 / n) * (2 * np.pi / n), n)
        jac = abs(self.a) ** 2 - abs(self.b) ** 2
        return self.center + self.a * w + self.b * np.conj(w), wt * jac

    def area(self) -> float:
        return math.pi * (abs(self.a) ** 2 - abs(self.b) ** 2)


class InversionError(RuntimeError):
    def __init__(self, message: str, location: complex):
        super().__init__(f"{message} at z = {location}")
        self.location = location


def solve_wirtinger_chain(Hw, Hwbar, hz, hzbar):
    """``(f_z, f_zbar)`` from ``h = H o f`` by inverting the chain rule."""
    jac = np.abs(Hw) ** 2 - np.abs(Hwbar) ** 2
    fz = (np.conj(Hw) * hz - Hwbar * np.conj(hzbar)) / jac
    fzbar = (np.conj(Hw) * hzbar - Hwbar * np.conj(hz)) / jac
    return fz, fzbar


def newton_invert(H, targets: np.ndarray, guess: np.ndarray, sources: np.ndarray,
                  tol: float = 1e-13, max_iter: int = 50) -> np.ndarray:
    """Solve ``H(w) = targets`` by damped Newton iteration from ``guess``."""
    w = np.array(guess, dtype=complex)
    scale = max(1.0, float(np.abs(targets).max()))
    for _ in range(max_iter):
        r = H(w) - targets
        err = np.abs(r)
        if np.all(err <= tol * scale):
            return w
        a, b = H.d_z(w), H.d_zbar(w)
        jac = np.abs(a) ** 2 - np.abs(b) ** 2
        if np.any(jac <= 0):
            i = int(np.argmin(jac))
            raise InversionError("non-positive Jacobian of H during inversion", complex(sources[i]))
        step = (np.conj(a) * r - b * np.conj(r)) / jac
        t = np.ones(w.shape[0])
        for _ in range(30):
            trial = w - t * step
            worse = np.abs(H(trial) - targets) > err
            if not np.any(worse & (err > tol * scale)):
                break
            t = np.where(worse, 0.5 * t, t)
        w = w - t * step
    r = np.abs(H(w) - targets)
    i = int(np.argmax(r))
    if r[i] > 1e3 * tol * scale:
        raise InversionError("Newton inversion did not converge", complex(sources[i]))
    return w


@dataclass(frozen=True)
class IdentityGap:
    lhs: float
    rhs: float
    gap: float
    rhs_terms: tuple
    min_jf: float
    energy_G: float
    energy_X: float

    @property
    def relative_gap(self) -> float:
        """Gap over the larger of the two energies; both sides may vanish."""
        return self.gap / max(self.energy_G, self.energy_X, 1e-300)

    def to_json(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "gap": self.gap, "relative_gap": self.relative_gap,
                "rhs_terms": list(self.rhs_terms), "min_jf": self.min_jf}


def energy_identity_gap(h, H, G: EllipticDisk, X: EllipticDisk, quadrature_n: int = 256,
                        f=None) -> IdentityGap:
    """Both sides of the energy identity for ``f = H^{-1} o h``.

    ``h`` and ``H`` expose ``__call__``, ``d_z`` and ``d_zbar``. ``f`` may be
    given in closed form; otherwise it is found pointwise by Newton inversion
    of ``H`` seeded from the nearest ``X``-node image. ``min_jf`` is the
    smallest ``|f_z|^2 - |f_zbar|^2`` met, a conditioning indicator for the
    right-hand integrands.
    """
    zg, wg = G.nodes(quadrature_n)
    zx, wx = X.nodes(quadrature_n)
    hz, hzb = h.d_z(zg), h.d_zbar(zg)
    Hz, Hzb = H.d_z(zx), H.d_zbar(zx)
    e_g = math.fsum(2 * (np.abs(hz) ** 2 + np.abs(hzb) ** 2) * wg)
    e_x = math.fsum(2 * (np.abs(Hz) ** 2 + np.abs(Hzb) ** 2) * wx)
    if f is not None:
        fz, fzb = f.d_z(zg), f.d_zbar(zg)
    else:
        targets = h(zg)
        tree = cKDTree(np.c_[H(zx).real, H(zx).imag])
        _, k = tree.query(np.c_[targets.real, targets.imag])
        w = newton_invert(H, targets, zx[k], zg)
        fz, fzb = solve_wirtinger_chain(H.d_z(w), H.d_zbar(w), hz, hzb)
    jf = np.abs(fz) ** 2 - np.abs(fzb) ** 2
    if np.any(jf <= 0):
        i = int(np.argmin(jf))
        raise InversionError("f is not orientation preserving", complex(zg[i]))
    phi = hz * np.conj(hzb)
    mod = np.abs(phi)
    sigma = np.where(mod < SIGMA_TOL, 0.0, phi / np.where(mod < SIGMA_TOL, 1.0, mod))
    t1 = 4 * (np.abs(fz - sigma * fzb) ** 2 / jf - 1) * np.abs(hz * hzb)
    t2 = 4 * (np.abs(hz) - np.abs(hzb)) ** 2 * np.abs(fzb) ** 2 / jf
    r1, r2 = math.fsum(t1 * wg), math.fsum(t2 * wg)
    lhs, rhs = e_x - e_g, r1 + r2
    return IdentityGap(lhs, rhs, abs(lhs - rhs), (r1, r2), float(jf.min()), e_g, e_x)
