"""Alternating harmonic replacement over two overlapping convex cells."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .geometry import BOUNDARY_TOL, JordanDomain, reflex_vertices
from .harmonic import (BoundaryMap, boundary_trace, harmonic_replacement, radial_extension, rkc_extend_and_check,
                       solve_dirichlet)
from .hopf import holomorphy_residual, hopf_product
from .mesh import MeshMap, TriangleMesh, dirichlet_energy, submesh_by_image, triangulate, wirtinger

UNION_TOL = 1e-3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class AlternatingConfig:
    cells: tuple
    max_iters: int = 20
    energy_tol: float = 1e-10
    sup_tol: float = 1e-8
    target_edge: float = 0.05

    def __post_init__(self):
        if len(self.cells) != 2:
            raise ConfigError("exactly two cells are supported")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be positive")
        if self.target_edge <= 0:
            raise ConfigError("target_edge must be positive")
        a, b = (c.polygon for c in self.cells)
        if a.intersection(b).area <= 0:
            raise ConfigError("cells do not overlap")

    def check_target(self, Y: JordanDomain, tol: float = UNION_TOL) -> None:
        """Raise unless the union of the cells equals ``Y`` up to ``tol`` relative area."""
        a, b = (c.polygon for c in self.cells)
        diff = a.union(b).symmetric_difference(Y.polygon).area
        if diff > tol * Y.polygon.area:
            raise ConfigError(f"cells do not assemble the target (area mismatch {diff:.3g})")

    @property
    def same_cells(self) -> bool:
        a, b = self.cells
        return a is b or (a.n == b.n and np.array_equal(a.boundary, b.boundary))


def parse_config(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    types = {"max_iters": int, "energy_tol": float, "sup_tol": float, "target_edge": float}
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            out[key] = types[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}") from exc
    return out


def load_config(path, cells) -> AlternatingConfig:
    with open(path) as fh:
        return AlternatingConfig(tuple(cells), **parse_config(fh.read()))


@dataclass(frozen=True)
class IterationRecord:
    index: int
    energy: float
    sup_delta: float
    replaced_interior_count: int
    hopf_residual: float


@dataclass
class AlternatingTrace:
    records: list = field(default_factory=list)
    final_status: str = "max_iters"
    iterates: list | None = None

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])

    def energy_increase(self) -> float:
        """Largest step-to-step energy increase (0 for a non-increasing column)."""
        e = self.energies
        return float(max(np.max(np.diff(e), initial=0.0), 0.0))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "energy", "sup_delta", "replaced_interior_count", "hopf_residual"])
            for r in self.records:
                w.writerow([r.index, repr(r.energy), repr(r.sup_delta), r.replaced_interior_count,
                            repr(r.hopf_residual)])

    def to_json(self) -> dict:
        return {"final_status": self.final_status, "iterations": len(self.records) - 1,
                "energy_first": self.records[0].energy, "energy_last": self.records[-1].energy,
                "hopf_residual_first": self.records[0].hopf_residual,
                "hopf_residual_last": self.records[-1].hopf_residual,
                "max_energy_increase": self.energy_increase()}


@dataclass(frozen=True)
class AlternatingResult:
    final: MeshMap
    trace: AlternatingTrace
    initial: MeshMap


def _record(index: int, m: MeshMap, delta: float, replaced: int) -> IterationRecord:
    return IterationRecord(index, dirichlet_energy(m), delta, replaced,
                           holomorphy_residual(hopf_product(m)).global_residual)


def _centroid(poly) -> complex:
    c = poly.centroid
    return complex(c.x, c.y)


def run_alternating(X: JordanDomain, g: BoundaryMap, cfg: AlternatingConfig, initial="harmonic",
                    mesh: TriangleMesh | None = None, tol: float = BOUNDARY_TOL,
                    keep_iterates: bool = False) -> AlternatingResult:
    """Alternate harmonic replacement on the preimages of the two cells.

    ``initial`` is a MeshMap carrying the boundary data, ``"harmonic"`` (the
    discrete harmonic extension of ``g``) or ``"radial"`` (the cone extension
    between the centroids of ``X`` and of the union of the cells, for
    star-shaped domains). A harmonic start is already harmonic on every
    preimage, so it is a fixed point; the process only moves from a
    non-harmonic start such as the radial one.
    Odd steps replace on the preimage of the first cell, even steps on the
    second; vertex images within ``tol`` of both cell boundaries are kept
    fixed (unless the cells coincide). The run converges when two consecutive steps (one, if the cells
    coincide) move no vertex by ``sup_tol`` and lower the energy by less than
    ``energy_tol``; it stalls when both cells select no free vertex.
    """
    if isinstance(initial, MeshMap):
        mesh = initial.mesh
    elif mesh is None:
        mesh = triangulate(X, cfg.target_edge)
    trace_vals = boundary_trace(g, mesh, X)
    if isinstance(initial, str):
        if initial == "harmonic":
            h, _ = solve_dirichlet(mesh, trace_vals)
        elif initial == "radial":
            target = cfg.cells[0].polygon.union(cfg.cells[1].polygon)
            h = radial_extension(mesh, X, g, _centroid(X.polygon), _centroid(target))
        else:
            raise ValueError(f"unknown initial map {initial!r}")
    else:
        h = initial
        if np.max(np.abs(h.values[mesh.boundary_loop] - trace_vals), initial=0.0) > 1e-9:
            raise ValueError("initial map does not carry the boundary data")
    Y1, Y2 = cfg.cells
    trace = AlternatingTrace(iterates=[h] if keep_iterates else None)
    trace.records.append(_record(0, h, math.nan, 0))
    start = h
    need = 1 if cfg.same_cells else 2
    quiet = empty = 0
    for j in range(1, cfg.max_iters + 1):
        cell, rival = (Y1, Y2) if j % 2 else (Y2, Y1)
        if cfg.same_cells:
            rival = None  # every boundary image would tie with itself
        sub = submesh_by_image(h, cell, tol, rival)
        new = harmonic_replacement(h, sub) if sub.interior.size else h
        delta = float(np.max(np.abs(new.values - h.values)))
        rec = _record(j, new, delta, int(sub.interior.size))
        drop = trace.records[-1].energy - rec.energy
        trace.records.append(rec)
        if keep_iterates:
            trace.iterates.append(new)
        h = new
        empty = empty + 1 if sub.interior.size == 0 else 0
        if empty >= 2:
            trace.final_status = "stalled"
            break
        quiet = quiet + 1 if (delta < cfg.sup_tol and drop < cfg.energy_tol) else 0
        if quiet >= need:
            trace.final_status = "converged"
            break
    return AlternatingResult(h, trace, start)


# ----------------------------------------------------------- symmetry

def mirror_error(m: MeshMap, perm: np.ndarray) -> float:
    """``max |h(-x, y) + conj(h(x, y))|`` over mirror vertex pairs."""
    return float(np.max(np.abs(m.values[perm] + np.conj(m.values))))


def reflect_map(m: MeshMap, perm: np.ndarray) -> MeshMap:
    """The conjugated map ``z -> -conj(h(-conj z))`` on a mirror-symmetric mesh."""
    return m.with_values(-np.conj(m.values[perm]))


# ----------------------------------------------------------- squeezing

@dataclass(frozen=True)
class CollapsedComponent:
    vertices: np.ndarray
    image_point: complex
    diameter: float

    def to_json(self) -> dict:
        return {"vertex_count": int(self.vertices.size), "image_point": [self.image_point.real, self.image_point.imag],
                "diameter": self.diameter}


def _edge_graph(mesh: TriangleMesh, keep: np.ndarray) -> sparse.csr_matrix:
    e = mesh.edges
    e = e[keep[e[:, 0]] & keep[e[:, 1]]]
    n = mesh.n_vertices
    return sparse.coo_matrix((np.ones(e.shape[0]), (e[:, 0], e[:, 1])), shape=(n, n)).tocsr()


def _point_diameter(z: np.ndarray) -> float:
    if z.size < 2:
        return 0.0
    best = 0.0
    for lo in range(0, z.size, 1024):
        best = max(best, float(np.abs(z[lo : lo + 1024, None] - z[None, :]).max()))
    return best


def detect_squeezing(m: MeshMap, Y: JordanDomain, corner_tol: float, min_vertices: int = 2,
                     corners: np.ndarray | None = None) -> list[CollapsedComponent]:
    """Mesh-connected vertex sets sent within ``corner_tol`` of a non-convex corner of ``Y``.

    Corners default to the boundary vertices of ``Y`` failing the local
    convexity probe. Components are sorted by decreasing diameter.
    """
    if corners is None:
        corners = Y.boundary[reflex_vertices(Y)]
    corners = np.atleast_1d(np.asarray(corners, dtype=complex))
    if corners.size == 0:
        return []
    tree = cKDTree(np.c_[corners.real, corners.imag])
    dist, owner = tree.query(np.c_[m.values.real, m.values.imag])
    near = dist <= corner_tol
    if not near.any():
        return []
    mesh = m.mesh
    graph = _edge_graph(mesh, near)
    ncomp, labels = connected_components(graph, directed=False)
    out = []
    for c in np.unique(labels[near]):
        idx = np.flatnonzero((labels == c) & near)
        if idx.size < min_vertices:
            continue
        point = corners[np.bincount(owner[idx]).argmax()]
        out.append(CollapsedComponent(idx, complex(point), _point_diameter(mesh.vertices[idx])))
    out.sort(key=lambda c: -c.diameter)
    return out


# --------------------------------------------------------- monotonicity

def check_discrete_monotonicity(m: MeshMap, tol: float = 1e-12, near_zero_tol: float = 1e-10,
                                point_tol: float = 1e-8) -> dict:
    """Discrete proxy for monotonicity of a map with non-negative Jacobian.

    Triangles with ``J < -tol`` are reversed. Triangles with ``|J| <=
    near_zero_tol`` are collapsed; inside them, edges whose end images agree
    within ``point_tol`` link vertices into fiber pieces. The collapse is
    acceptable when no two distinct pieces share an image point, i.e. every
    discrete fiber is connected. Disconnected fibers count as a failure of
    monotonicity and get the ``reversed`` verdict too.
    """
    d = wirtinger(m)
    j = d.jacobian
    reversed_count = int(np.sum(j < -tol))
    collapsed = np.abs(j) <= near_zero_tol
    frac = float(d.area[collapsed].sum() / d.area.sum())
    result = {"reversed_triangles": reversed_count, "near_zero_area_fraction": frac,
              "disconnected_fibers": 0}
    if reversed_count:
        result["verdict"] = "reversed"
        return result
    if not collapsed.any():
        result["verdict"] = "clean"
        return result
    mesh = m.mesh
    tri = mesh.triangles[collapsed]
    e = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    e = e[np.abs(m.values[e[:, 0]] - m.values[e[:, 1]]) <= point_tol]
    n = mesh.n_vertices
    graph = sparse.coo_matrix((np.ones(e.shape[0]), (e[:, 0], e[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    verts = np.unique(tri)
    lab = labels[verts]
    # one representative image per fiber piece
    first = np.unique(lab, return_index=True)[1]
    reps = m.values[verts[first]]
    pairs = cKDTree(np.c_[reps.real, reps.imag]).query_pairs(point_tol)
    result["disconnected_fibers"] = len(pairs)
    result["verdict"] = "reversed" if pairs else "collapsed_ok"
    return result


# ------------------------------------------------------ critical epsilon

@dataclass(frozen=True)
class CriticalEstimate:
    eps_hat: float
    bracket: tuple
    evaluations: dict
    diagnostic: str = ""

    def to_json(self) -> dict:
        return {"eps_hat": self.eps_hat, "bracket": list(self.bracket), "diagnostic": self.diagnostic,
                "evaluations": {repr(k): v for k, v in sorted(self.evaluations.items())}}


def clover_escape_depth(eps: float, mesh: TriangleMesh | None = None, target_edge: float = 0.05,
                        samples_per_arc: int = 256) -> float:
    from .gallery import clover

    c = clover(eps, samples_per_arc)
    return rkc_extend_and_check(c.X, c.Y_eps, c.g_eps, target_edge, mesh=mesh).escape_depth


def estimate_critical_epsilon(resolution: float = 0.05, target_edge: float = 0.05, depth_tol: float = 1e-6,
                              eps_min: float = 0.01, samples_per_arc: int = 256) -> CriticalEstimate:
    """Bisection for the clover parameter where the harmonic extension stops escaping.

    The predicate is ``escape_depth > depth_tol``; it should hold at
    ``eps_min`` and fail at 1. The returned bracket has width at most
    ``resolution`` and satisfies predicate(lo) and not predicate(hi).
    """
    from .gallery import clover

    if resolution <= 0:
        raise ValueError("resolution must be positive")
    mesh = triangulate(clover(1.0, samples_per_arc).X, target_edge)
    evals: dict = {}

    def escapes_at(eps: float) -> bool:
        evals[eps] = clover_escape_depth(eps, mesh, target_edge, samples_per_arc)
        return evals[eps] > depth_tol

    lo, hi = eps_min, 1.0
    p_lo, p_hi = escapes_at(lo), escapes_at(hi)
    if p_lo == p_hi:
        return CriticalEstimate(math.nan, (lo, hi), evals,
                                f"predicate is {p_lo} at both ends of [{lo}, {hi}]")
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if escapes_at(mid):
            lo = mid
        else:
            hi = mid
    return CriticalEstimate(0.5 * (lo + hi), (lo, hi), evals)
