"""Holomorphic quadratic differentials and their trajectories."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .geometry import JordanDomain, as_complex, classify_points, distance_to_boundary
from .hopf import HopfField, holomorphy_residual
from .mesh import MeshMap

MAX_DEGREE = 16
MIN_STEP_FRACTION = 64
TURN_COS = math.cos(math.pi / 4)
ANGLE_TOL = 0.05

VERTICAL = "vertical"
HORIZONTAL = "horizontal"


class CriticalPointError(ValueError):
    """Raised when a direction is requested at (or too near) a zero of phi."""


@dataclass(frozen=True, eq=False)
class QuadDifferential:
    """``phi dz^2`` on ``domain``.

    ``kind`` is ``"polynomial"`` (``coefficients`` c0..cd in z),
    ``"constant"``, ``"function"`` (vectorised callable) or ``"sampled"``
    (a Hopf field evaluated by weighted local linear fits).
    """

    kind: str
    domain: JordanDomain
    coefficients: tuple = ()
    func: object = None
    field: HopfField | None = None
    fit_residual: float | None = None
    crit_tol: float | None = None

    def __post_init__(self):
        if self.kind not in ("polynomial", "constant", "function", "sampled"):
            raise ValueError(f"unknown form {self.kind!r}")
        if self.kind == "polynomial" and len(self.coefficients) - 1 > MAX_DEGREE:
            raise ValueError(f"polynomial degree above {MAX_DEGREE}")
        if self.crit_tol is None:
            object.__setattr__(self, "crit_tol", 1e-8 * max(self.domain.diameter(), 1.0))
        if self.kind == "sampled":
            c = self.field.centroids
            object.__setattr__(self, "_tree", cKDTree(np.c_[c.real, c.imag]))

    @classmethod
    def polynomial(cls, coefficients, domain: JordanDomain) -> "QuadDifferential":
        return cls("polynomial", domain, tuple(complex(c) for c in coefficients))

    @classmethod
    def constant(cls, value: complex, domain: JordanDomain) -> "QuadDifferential":
        return cls("constant", domain, (complex(value),))

    @classmethod
    def from_function(cls, fn, domain: JordanDomain) -> "QuadDifferential":
        return cls("function", domain, func=fn)

    @classmethod
    def from_field(cls, f: HopfField, domain: JordanDomain) -> "QuadDifferential":
        """Lower-fidelity evaluator for a sampled Hopf field."""
        return cls("sampled", domain, field=f, fit_residual=holomorphy_residual(f).global_residual)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        if self.kind in ("polynomial", "constant"):
            out = np.zeros_like(z)
            for c in reversed(self.coefficients):
                out = out * z + c
            return out
        if self.kind == "function":
            return np.asarray(self.func(z), dtype=complex) * np.ones_like(z)
        return self._sampled(z)

    def _sampled(self, z, k: int = 12):
        flat = np.atleast_1d(z).ravel()
        d, idx = self._tree.query(np.c_[flat.real, flat.imag], k=k)
        c = self.field.centroids[idx]
        phi = self.field.phi[idx]
        w = 1.0 / (d + 1e-12)
        out = np.empty(flat.shape[0], dtype=complex)
        for i in range(flat.shape[0]):
            A = np.c_[np.ones(k), c[i] - flat[i]] * w[i][:, None]
            coef = np.linalg.lstsq(A, phi[i] * w[i], rcond=None)[0]
            out[i] = coef[0]
        return out.reshape(np.shape(z))


def critical_points(q: QuadDifferential) -> np.ndarray:
    """Zeros of a polynomial or constant form inside the closed domain."""
    if q.kind == "constant":
        if q.coefficients[0] == 0:
            raise ValueError("the zero differential has no isolated critical points")
        return np.zeros(0, dtype=complex)
    if q.kind != "polynomial":
        raise NotImplementedError("critical points are only available for polynomial forms")
    c = np.trim_zeros(np.asarray(q.coefficients, dtype=complex), "b")
    if c.size == 0:
        raise ValueError("the zero differential has no isolated critical points")
    if c.size == 1:
        return np.zeros(0, dtype=complex)
    roots = np.roots(c[::-1])
    inside = classify_points(q.domain, roots) >= 0
    return np.sort_complex(roots[inside])


def _direction(phi: complex, kind: str) -> complex:
    a = abs(phi)
    u = np.conj(phi) / a
    return complex(np.sqrt(-u if kind == VERTICAL else u))


def _canonical(t: complex) -> complex:
    if abs(t.imag) > 1e-15:
        return t if t.imag > 0 else -t
    return t if t.real > 0 else -t


def direction(q: QuadDifferential, z, kind: str = VERTICAL, prev=None) -> complex:
    """Unit ``tau`` with ``tau^2 phi(z)`` negative (vertical) or positive (horizontal).

    Of ``+-tau`` the one closer to ``prev`` is returned; without ``prev`` the
    canonical choice has ``Im tau >= 0`` with ties going to ``Re tau > 0``.
    """
    phi = complex(q(complex(z)))
    if abs(phi) <= q.crit_tol:
        raise CriticalPointError(f"|phi| <= crit_tol at {complex(z)}")
    t = _direction(phi, kind)
    if prev is None:
        return _canonical(t)
    return t if (np.conj(prev) * t).real >= 0 else -t


def vertical_direction(q: QuadDifferential, z, prev=None) -> complex:
    return direction(q, z, VERTICAL, prev)


def horizontal_direction(q: QuadDifferential, z, prev=None) -> complex:
    return direction(q, z, HORIZONTAL, prev)


@dataclass(frozen=True, eq=False)
class Trajectory:
    points: np.ndarray
    kind: str
    termination: str
    phi_length: float
    ends: tuple = ()
    max_angle_defect: float = 0.0

    def window(self, lo: float, hi: float, key=np.real) -> "Trajectory":
        """Sub-arc of points whose ``key`` lies in [lo, hi] (phi-length not recomputed)."""
        k = key(self.points)
        keep = (k >= lo) & (k <= hi)
        return replace(self, points=self.points[keep])

    def restricted(self, q: QuadDifferential, lo: float, hi: float, key=np.real) -> "Trajectory":
        sub = self.window(lo, hi, key)
        return replace(sub, phi_length=phi_length(q, sub.points))

    def to_csv(self, path) -> None:
        write_trajectories_csv([self], path)


def phi_length(q: QuadDifferential, points) -> float:
    """Midpoint rule for ``int |phi|^{1/2} |dz|`` along a polyline."""
    p = np.asarray(points, dtype=complex)
    if p.shape[0] < 2:
        return 0.0
    mid = 0.5 * (p[1:] + p[:-1])
    return math.fsum(np.sqrt(np.abs(q(mid))) * np.abs(np.diff(p)))


def _hermite(z0: complex, z1: complex, d0: complex, d1: complex, h: float, s: float) -> complex:
    """Cubic Hermite point at parameter ``s`` in [0, h] of a unit-speed step."""
    u = s / h
    return ((2 * u ** 3 - 3 * u ** 2 + 1) * z0 + (u ** 3 - 2 * u ** 2 + u) * h * d0
            + (-2 * u ** 3 + 3 * u ** 2) * z1 + (u ** 3 - u ** 2) * h * d1)


def _root_density(q: QuadDifferential, z) -> float:
    return float(np.sqrt(abs(complex(q(z)))))


def _piece_length(q: QuadDifferential, z0, z1, d0, d1, h, s) -> float:
    """Simpson rule for the phi-length over the parameter interval [0, s]."""
    zm = _hermite(z0, z1, d0, d1, h, 0.5 * s)
    ze = _hermite(z0, z1, d0, d1, h, s)
    return s / 6.0 * (_root_density(q, z0) + 4 * _root_density(q, zm) + _root_density(q, ze))


def _boundary_hit(q: QuadDifferential, z0, z1, d0, d1, h, tol: float = 1e-13) -> float:
    """Largest parameter in [0, h] whose Hermite point is still inside (bisection)."""
    a, b = 0.0, h
    while (b - a) > tol:
        m = 0.5 * (a + b)
        if classify_points(q.domain, [_hermite(z0, z1, d0, d1, h, m)], tol=0.0)[0] > 0:
            a = m
        else:
            b = m
    return a


def _end_direction(q: QuadDifferential, z, kind, like) -> complex:
    try:
        return direction(q, z, kind, like)
    except CriticalPointError:
        return like


def _trace_one(q: QuadDifferential, z0: complex, d0: complex, kind: str, step: float, max_steps: int,
               angle_tol: float):
    pts = [z0]
    z, prev = z0, d0
    h = step
    worst = 0.0
    length = []
    term = "step_limit"
    steps = 0
    while steps < max_steps:
        if abs(complex(q(z))) < 10 * q.crit_tol:
            h *= 0.5
            if h < step / MIN_STEP_FRACTION:
                term = "hit_critical"
                break
        try:
            k1 = direction(q, z, kind, prev)
            k2 = direction(q, z + 0.5 * h * k1, kind, k1)
            k3 = direction(q, z + 0.5 * h * k2, kind, k2)
            k4 = direction(q, z + h * k3, kind, k3)
            turns = min((np.conj(prev) * k).real for k in (k1, k2, k3, k4))
        except CriticalPointError:
            turns = -1.0
        if turns < TURN_COS:
            # abrupt turning means the step reached a zero of phi
            h *= 0.5
            if h < step / MIN_STEP_FRACTION:
                term = "hit_critical"
                break
            continue
        z_new = z + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        d_new = _end_direction(q, z_new, kind, k4)
        if classify_points(q.domain, [z_new], tol=0.0)[0] <= 0:
            s = _boundary_hit(q, z, z_new, k1, d_new, h)
            if s > 0:
                pts.append(_hermite(z, z_new, k1, d_new, h, s))
                length.append(_piece_length(q, z, z_new, k1, d_new, h, s))
            term = "hit_boundary"
            break
        chord = z_new - z
        tau = chord / abs(chord)
        pm = complex(q(0.5 * (z + z_new)))
        val = tau * tau * pm
        sign_ok = val.real < 0 if kind == VERTICAL else val.real > 0
        defect = abs(val.imag) / abs(pm)
        if not sign_ok or defect > angle_tol:
            h *= 0.5
            if h < step / MIN_STEP_FRACTION:
                term = "hit_critical" if abs(pm) < 1e3 * q.crit_tol else "step_limit"
                break
            continue
        worst = max(worst, defect)
        pts.append(z_new)
        length.append(_piece_length(q, z, z_new, k1, d_new, h, h))
        prev = d_new
        z = z_new
        steps += 1
        h = min(step, 2 * h)
    return np.asarray(pts), term, worst, math.fsum(length)


def trace(q: QuadDifferential, z0, kind: str = VERTICAL, step: float = 0.01, max_steps: int = 10_000,
          angle_tol: float = ANGLE_TOL) -> Trajectory:
    """Trace the trajectory of ``kind`` through ``z0`` in both directions with RK4.

    Steps have unit speed, so the phi-length is accumulated per step by
    Simpson's rule along the cubic Hermite interpolant, which keeps it fourth
    order in ``step``. Boundary exits are located on the same interpolant.
    """
    z0 = complex(as_complex(z0))
    if classify_points(q.domain, [z0])[0] != 1:
        raise ValueError(f"start point {z0} is not interior")
    d0 = direction(q, z0, kind)  # raises at a critical start
    fwd, tf, wf, lf = _trace_one(q, z0, d0, kind, step, max_steps, angle_tol)
    bwd, tb, wb, lb = _trace_one(q, z0, -d0, kind, step, max_steps, angle_tol)
    pts = np.concatenate([bwd[::-1], fwd[1:]])
    ends = (tb, tf)
    term = "hit_boundary" if ends == ("hit_boundary", "hit_boundary") else \
        next(t for t in ends if t != "hit_boundary")
    return Trajectory(pts, kind, term, lf + lb, ends, max(wf, wb))


def trace_vertical(q: QuadDifferential, z0, step: float = 0.01, max_steps: int = 10_000) -> Trajectory:
    return trace(q, z0, VERTICAL, step, max_steps)


def trace_horizontal(q: QuadDifferential, z0, step: float = 0.01, max_steps: int = 10_000) -> Trajectory:
    return trace(q, z0, HORIZONTAL, step, max_steps)


# ------------------------------------------------------- length checks

def _polyline_inside(domain: JordanDomain, pts: np.ndarray, samples: int = 64) -> bool:
    t = np.linspace(0, 1, samples)
    seg = pts[:-1, None] + (pts[1:] - pts[:-1])[:, None] * t[None, :]
    return bool(np.all(classify_points(domain, seg.ravel(), tol=1e-9) >= 0))


def _fine_length(q: QuadDifferential, pts: np.ndarray, per_segment: int = 400) -> float:
    t = np.linspace(0, 1, per_segment + 1)
    dense = np.concatenate([a + (b - a) * t[:-1] for a, b in zip(pts[:-1], pts[1:])] + [pts[-1:]])
    return phi_length(q, dense)


@dataclass(frozen=True)
class LengthCheck:
    traj_length: float
    min_competitor: float
    passed: bool
    competitors: int

    def to_json(self) -> dict:
        return {"traj_length": self.traj_length, "min_competitor": self.min_competitor, "pass": self.passed}


def minimal_length_check(q: QuadDifferential, t: Trajectory, competitors: int = 100, seed: int = 0,
                         tol: float = 1e-9, max_tries: int = 100_000) -> LengthCheck:
    """Compare the phi-length of ``t`` with random polylines joining its endpoints.

    Competitors pass through 1 to 3 waypoints scattered about the chord and
    are redrawn until they stay inside the closed domain.
    """
    pts = np.asarray(t.points)
    if pts.shape[0] < 2 or abs(pts[-1] - pts[0]) == 0:
        return LengthCheck(0.0, 0.0, True, 0)
    a, b = pts[0], pts[-1]
    own = phi_length(q, pts)
    rng = np.random.default_rng(seed)
    spread = 0.3 * abs(b - a)
    best = math.inf
    found = tries = 0
    while found < competitors:
        tries += 1
        if tries > max_tries:
            raise RuntimeError("could not draw competitors inside the domain")
        k = int(rng.integers(1, 4))
        s = np.sort(rng.uniform(0, 1, k))
        way = a + (b - a) * s + spread * (rng.normal(size=k) + 1j * rng.normal(size=k))
        poly = np.concatenate([[a], way, [b]])
        if not _polyline_inside(q.domain, poly):
            continue
        found += 1
        best = min(best, _fine_length(q, poly))
    return LengthCheck(own, best, bool(own <= best + tol * max(1.0, own)), competitors)


# ---------------------------------------------------- constancy checks

def interpolate(m: MeshMap, points) -> np.ndarray:
    """P1 interpolation of ``m`` at points inside its mesh."""
    p = np.atleast_1d(as_complex(points))
    mesh = m.mesh
    c = mesh.centroids
    tree = cKDTree(np.c_[c.real, c.imag])
    k = min(16, mesh.n_triangles)
    _, idx = tree.query(np.c_[p.real, p.imag], k=k)
    idx = idx.reshape(p.shape[0], k)
    tri = mesh.triangles[idx]
    v = mesh.vertices[tri]
    e1, e2 = v[..., 1] - v[..., 0], v[..., 2] - v[..., 0]
    r = p[:, None] - v[..., 0]
    det = e1.real * e2.imag - e1.imag * e2.real
    l1 = (r.real * e2.imag - r.imag * e2.real) / det
    l2 = (e1.real * r.imag - e1.imag * r.real) / det
    l0 = 1 - l1 - l2
    bary_min = np.minimum(np.minimum(l0, l1), l2)
    best = np.argmax(bary_min, axis=1)
    rows = np.arange(p.shape[0])
    if np.any(bary_min[rows, best] < -1e-9):
        bad = p[np.flatnonzero(bary_min[rows, best] < -1e-9)[0]]
        raise ValueError(f"point {bad} lies outside the mesh")
    vals = m.values[tri[rows, best]]
    return l0[rows, best] * vals[:, 0] + l1[rows, best] * vals[:, 1] + l2[rows, best] * vals[:, 2]


def _diameter(values: np.ndarray) -> float:
    best = 0.0
    for lo in range(0, values.shape[0], 1024):
        chunk = values[lo : lo + 1024]
        best = max(best, float(np.abs(chunk[:, None] - values[None, :]).max()))
    return best


def constancy_on_trajectory(m, t: Trajectory, domain: JordanDomain | None = None) -> dict:
    """Oscillation (max pairwise distance) of the map along the trajectory."""
    pts = np.asarray(t.points)
    if isinstance(m, MeshMap):
        vals = interpolate(m, pts)
    else:
        dom = domain if domain is not None else getattr(m, "domain", None)
        if dom is not None and np.any(classify_points(dom, pts, tol=1e-9) < 0):
            raise ValueError("trajectory leaves the map's domain")
        vals = np.asarray(m(pts), dtype=complex)
    return {"oscillation": _diameter(vals), "samples": int(pts.shape[0])}


# ------------------------------------------------------------- export

def write_trajectories_csv(trajectories, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trajectory", "t_index", "x", "y"])
        for j, t in enumerate(trajectories):
            for i, p in enumerate(t.points):
                w.writerow([j, i, repr(p.real), repr(p.imag)])
