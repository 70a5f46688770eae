"""Acceptance criteria, one test each, with pinned tolerances and runtime limits.

Every criterion prints a PASS/FAIL line in the terminal summary.
"""
import math
import time

import numpy as np
import pytest

from hopfharm import gallery as G
from hopfharm.alternating import AlternatingConfig, estimate_critical_epsilon, mirror_error, run_alternating
from hopfharm.geometry import JordanDomain
from hopfharm.harmonic import (
    BoundaryMap,
    boundary_trace,
    douglas_integral,
    douglas_study,
    rkc_extend_and_check,
    solve_dirichlet,
)
from hopfharm.hopf import energy_identity_gap, holomorphy_residual, hopf_product, stretch
from hopfharm.mesh import MeshMap, dirichlet_energy, mirror_permutation, triangulate, wirtinger
from hopfharm.quaddiff import (
    QuadDifferential,
    constancy_on_trajectory,
    minimal_length_check,
    trace_vertical,
)


def _rate(edges, values):
    return float(np.polyfit(np.log(edges), np.log(values), 1)[0])


def test_criterion_1_stretch_identities(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    mesh = triangulate(G.unit_disk(), 0.1)
    maps = [G.control_map(), G.twist(0.8), G.mobius(0.3 - 0.2j), G.harmonic_quadratic(0.3),
            G.compose(G.twist(0.5), G.mobius(0.2j))]
    dH, dV, J, phi = [], [], [], []
    for f in maps:
        s = stretch(f.on_mesh(mesh))
        k = rng.choice(mesh.n_triangles, 200, replace=False)
        dH.append(s.dH[k]), dV.append(s.dV[k]), J.append(s.jacobian[k]), phi.append(s.phi[k])
    dH, dV, J, phi = map(np.concatenate, (dH, dV, J, phi))
    scale = np.maximum(1.0, dH ** 2)
    prod = float(np.max(np.abs(dH * dV - np.abs(J)) / scale))
    diff = float(np.max(np.abs(dH ** 2 - dV ** 2 - 4 * np.abs(phi)) / scale))
    order = bool(np.all(dV ** 2 <= np.abs(J) + 1e-12 * scale) and np.all(np.abs(J) <= dH ** 2 + 1e-12 * scale))
    dt = time.perf_counter() - t0
    acceptance(1, "stretch identities", {
        "count": dH.size == 1000, "product": prod <= 1e-12, "difference": diff <= 1e-12,
        "ordering": order, "runtime": dt < 1.0,
    }, f"product {prod:.1e}, difference {diff:.1e}, {dt:.2f} s")


def test_criterion_2_hopf_product_oracle(acceptance):
    t0 = time.perf_counter()
    edges = (0.1, 0.05, 0.025)
    bf, st = G.butterfly_map(), G.strip_closed_form()
    eb, es = [], []
    for h in edges:
        mesh = G.butterfly_mesh(h)
        eb.append(float(np.max(np.abs(hopf_product(bf.on_mesh(mesh)).phi - G.butterfly_phi(mesh.centroids)))))
        mesh = G.strip_mesh(h)
        es.append(float(np.max(np.abs(hopf_product(st.on_mesh(mesh)).phi + 0.25))))
    fb = [eb[i] / eb[i + 1] for i in range(2)]
    fs = [es[i] / es[i + 1] for i in range(2)]
    dt = time.perf_counter() - t0
    acceptance(2, "Hopf product oracle", {
        "butterfly": min(fb) >= 1.5, "strip": min(fs) >= 1.5, "runtime": dt < 30,
    }, f"butterfly errors {np.round(eb, 5).tolist()} factors {np.round(fb, 2).tolist()}, "
       f"strip errors {np.round(es, 6).tolist()} factors {np.round(fs, 2).tolist()}, {dt:.1f} s")


def test_criterion_3_residual_discriminates(acceptance):
    t0 = time.perf_counter()
    edges = (0.05, 0.025, 0.0125)
    rb = [holomorphy_residual(hopf_product(G.butterfly_map().on_mesh(G.butterfly_mesh(h)))).global_residual
          for h in edges]
    rs = [holomorphy_residual(hopf_product(G.strip_closed_form().on_mesh(G.strip_mesh(h)))).global_residual
          for h in edges]
    rc = holomorphy_residual(hopf_product(G.control_map().on_mesh(triangulate(G.unit_disk(), edges[-1]))))
    rc = rc.global_residual
    dt = time.perf_counter() - t0
    acceptance(3, "holomorphy residual discriminates", {
        "butterfly_rate": _rate(edges, rb) >= 0.8, "strip_rate": _rate(edges, rs) >= 0.8,
        "control_stalls": rc > 10 * rb[-1], "runtime": dt < 60,
    }, f"rates butterfly {_rate(edges, rb):.3f} strip {_rate(edges, rs):.3f}, "
       f"control/butterfly {rc / rb[-1]:.1f}, {dt:.1f} s")


def test_criterion_4_energy_identity(acceptance):
    t0 = time.perf_counter()
    checks, notes = {}, []
    for name, (h, H, Gd, Xd, _) in sorted(G.energy_identity_pairs().items()):
        gaps = [energy_identity_gap(h, H, Gd, Xd, n).relative_gap for n in (64, 128, 256)]
        checks[f"{name}_gap"] = gaps[-1] < 1e-3
        checks[f"{name}_decreasing"] = gaps[0] > gaps[1] > gaps[2]
        notes.append(f"{name} {gaps[-1]:.1e}")
    dt = time.perf_counter() - t0
    checks["runtime"] = dt < 60
    acceptance(4, "energy identity", checks, ", ".join(notes) + f", {dt:.1f} s")


def test_criterion_5_rkc_and_failure(acceptance):
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240607)
    minj, esc = [], []
    for _ in range(5):
        X, Y, g = G.random_convex_problem(rng)
        r = rkc_extend_and_check(X, Y, g, 0.05)
        minj.append(r.min_jacobian), esc.append(r.escape_count)
    c = G.clover(0.05)
    depth = rkc_extend_and_check(c.X, c.Y_eps, c.g_eps, 0.05).escape_depth
    est = estimate_critical_epsilon(0.05)
    lo, hi = est.bracket
    dt = time.perf_counter() - t0
    acceptance(5, "RKC and its failure", {
        "convex_min_jacobian": min(minj) > 0, "convex_no_escape": sum(esc) == 0,
        "clover_escapes": depth > 0.01, "bracket_width": hi - lo <= 0.05,
        "bracket_inside": 0 < lo < hi <= 1, "runtime": dt < 300,
    }, f"min_jacobian {min(minj):.3f}, clover depth {depth:.3f}, bracket ({lo:.4f}, {hi:.4f}), {dt:.1f} s")


def test_criterion_6_alternating_process(acceptance, heart):
    t0 = time.perf_counter()
    mesh = heart.mesh(0.04)
    perm = mirror_permutation(mesh)
    cfg = AlternatingConfig((heart.Y1, heart.Y2), max_iters=40, target_edge=0.04)
    cfg.check_target(heart.Y)
    res = run_alternating(heart.X, heart.g, cfg, heart.initial_map(mesh), keep_iterates=True)
    rec = res.trace.records
    loop = mesh.boundary_loop
    ref = boundary_trace(heart.g, mesh, heart.X)
    trace_ok = all(np.array_equal(m.values[loop], ref) for m in res.trace.iterates)
    mirror = [mirror_error(m, perm) for m in res.trace.iterates]
    ratio = rec[-1].hopf_residual / rec[0].hopf_residual
    dt = time.perf_counter() - t0
    acceptance(6, "alternating process on the heart", {
        "iterations": len(rec) - 1 >= 20, "energy_non_increasing": res.trace.energy_increase() <= 1e-9,
        "boundary_trace": trace_ok, "mirror_symmetry": max(mirror) <= 1e-8,
        "residual_halved": ratio <= 0.5, "runtime": dt < 300,
    }, f"{len(rec) - 1} iterations ({res.trace.final_status}), energy {rec[0].energy:.5f} -> "
       f"{rec[-1].energy:.5f}, max increase {res.trace.energy_increase():.1e}, "
       f"max mirror error {max(mirror):.2e} (initial {mirror[0]:.1e}, final {mirror[-1]:.2e}), "
       f"residual ratio {ratio:.3f}, {dt:.1f} s")


def test_criterion_7_trajectories(acceptance):
    t0 = time.perf_counter()
    strip = QuadDifferential.constant(-0.25, G.strip_domain())
    dev = 0.0
    for z0 in (0.5 + 0.2j, -0.7 - 1.1j, 0.9 + 1.4j, 0.0 + 0.0j):
        t = trace_vertical(strip, z0)
        dev = max(dev, float(np.max(np.abs(t.points.imag - z0.imag))))
    disk = G.unit_disk()
    q = QuadDifferential.polynomial([-1.0, -9 / 4], disk)
    axis = trace_vertical(q, 0.5)
    imag = float(np.max(np.abs(axis.points.imag)))
    osc = constancy_on_trajectory(G.butterfly_map(), axis.window(0.05, 0.95))["oscillation"]
    rng = np.random.default_rng(11)
    starts = []
    while len(starts) < 20:
        u, v = rng.uniform(size=2)
        z = 0.85 * math.sqrt(u) * np.exp(2j * math.pi * v)
        if abs(z + 4 / 9) >= 0.05:
            starts.append(z)
    checks = [minimal_length_check(q, trace_vertical(q, z, step=0.01), 100, seed=k) for k, z in enumerate(starts)]
    passed = sum(c.passed for c in checks)
    margin = min((c.min_competitor - c.traj_length) / c.traj_length for c in checks)
    dt = time.perf_counter() - t0
    acceptance(7, "trajectories", {
        "straight_lines": dev < 1e-8, "butterfly_axis": imag < 1e-6, "constancy": osc < 1e-9,
        "minimal_length": passed == 20, "runtime": dt < 60,
    }, f"deviation {dev:.1e}, |Im| {imag:.1e}, oscillation {osc:.1e}, {passed}/20 minimal "
       f"(smallest margin {100 * margin:.2f}%), {dt:.1f} s")


def test_criterion_8_douglas(acceptance):
    t0 = time.perf_counter()
    rel = abs(douglas_integral(lambda w: w, 4096) / (4 * math.pi ** 2) - 1)
    ident = douglas_study(lambda w: w)
    lac = douglas_study(G.lacunary_map())
    dt = time.perf_counter() - t0
    acceptance(8, "Douglas integral", {
        "identity": rel < 1e-3, "identity_not_flagged": not ident.divergent,
        "log_modulus_flagged": lac.divergent, "runtime": dt < 30,
    }, f"identity rel error {rel:.1e}, lacunary last ratio {lac.last_ratio:.3f}, {dt:.1f} s")


def test_criterion_9_energy_lower_bound(acceptance, heart):
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    disk = G.unit_disk()
    dmesh = triangulate(disk, 0.05)
    maps = [f.on_mesh(dmesh) for f in (G.identity(), G.control_map(), G.twist(0.8), G.harmonic_quadratic(0.3))]
    maps.append(G.butterfly_map().on_mesh(G.butterfly_mesh(0.05)))
    maps.append(G.strip_closed_form().on_mesh(G.strip_mesh(0.05)))
    maps.append(MeshMap.sample(dmesh, np.conj))
    maps.append(MeshMap(dmesh, dmesh.vertices + 0.05 * (rng.normal(size=dmesh.n_vertices)
                                                        + 1j * rng.normal(size=dmesh.n_vertices))))
    # harmonic extensions onto gallery targets
    problems = {
        "disk": (disk, disk, BoundaryMap.from_polyline(disk.boundary, disk.boundary)),
        "butterfly": (disk, G.butterfly_target(),
                      BoundaryMap.from_polyline(disk.boundary, G.butterfly(disk.boundary)[0])),
        "clover_1": (G.clover(1.0).X, G.clover(1.0).Y_eps, G.clover(1.0).g_eps),
        "clover_0.5": (G.clover(0.5).X, G.clover(0.5).Y_eps, G.clover(0.5).g_eps),
        "heart": (heart.X, heart.Y, heart.g),
        "random_convex": G.random_convex_problem(rng),
    }
    area_gap = math.inf
    for X, Y, g in problems.values():
        mesh = triangulate(X, 0.05)
        m, _ = solve_dirichlet(mesh, boundary_trace(g, mesh, X))
        maps.append(m)
        area_gap = min(area_gap, dirichlet_energy(m) - 2 * Y.polygon.area)
    mesh = heart.mesh(0.08)
    cfg = AlternatingConfig((heart.Y1, heart.Y2), max_iters=6, target_edge=0.08)
    maps.extend(run_alternating(heart.X, heart.g, cfg, heart.initial_map(mesh), keep_iterates=True).trace.iterates)
    # equality holds for conformal maps, so allow rounding relative to the energy
    slack = min((dirichlet_energy(m) - 2 * abs(math.fsum(wirtinger(m).area * wirtinger(m).jacobian)))
                / dirichlet_energy(m) for m in maps)
    dt = time.perf_counter() - t0
    acceptance(9, "energy lower bound", {
        "discrete_inequality": slack >= -1e-14, "area_bound": area_gap >= -1e-2, "runtime": dt < 10,
    }, f"{len(maps)} maps, min relative slack {slack:.2e}, min energy - 2 area(Y) {area_gap:.3f}, {dt:.1f} s")
