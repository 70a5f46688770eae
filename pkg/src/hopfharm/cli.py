"""``hopfharm`` command line.

Each command writes ``report.json`` (schema ``hopfharm/1``) plus its data
files into ``--out``. Heavy modules are imported after the thread flag has
been applied to the BLAS environment variables.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

SCHEMA = "hopfharm/1"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARSE = 3
EXIT_MESH = 4
EXIT_SOLVE = 5
EXIT_CRITICAL = 6


class CommandError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _digest(args: argparse.Namespace, files: list[str]) -> str:
    h = hashlib.sha256()
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}
    h.update(json.dumps(flags, sort_keys=True, default=str).encode())
    for f in files:
        if f and Path(f).is_file():
            h.update(Path(f).read_bytes())
        else:
            h.update(str(f).encode())
    return h.hexdigest()


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise CommandError(EXIT_PARSE, f"cannot read {path}: {exc}") from exc


def _domain(path):
    from .geometry import DomainError, JordanDomain

    data = _load_json(path)
    try:
        return JordanDomain.from_points(data["boundary"], name=data.get("name", ""))[0]
    except (KeyError, DomainError, ValueError) as exc:
        raise CommandError(EXIT_PARSE, f"bad domain file {path}: {exc}") from exc


def _boundary(path):
    from .harmonic import BoundaryMap, BoundaryMapError

    data = _load_json(path)
    try:
        return BoundaryMap.from_json(data)
    except (KeyError, BoundaryMapError, ValueError) as exc:
        raise CommandError(EXIT_PARSE, f"bad boundary file {path}: {exc}") from exc


def _mesh(domain, edge, **kw):
    from .mesh import MeshError, triangulate

    try:
        return triangulate(domain, edge, **kw)
    except (MeshError, ValueError, RuntimeError) as exc:
        raise CommandError(EXIT_MESH, f"meshing failed: {exc}") from exc


# ---------------------------------------------------------------- commands

def cmd_extend(args, out: Path) -> tuple[dict, list, list]:
    from .harmonic import rkc_extend_and_check
    from .mesh import save_json
    from . import svg

    X, Y, g = _domain(args.domain), _domain(args.target), _boundary(args.boundary)
    mesh = _mesh(X, args.edge)
    try:
        r = rkc_extend_and_check(X, Y, g, args.edge, mesh=mesh)
    except (RuntimeError, ValueError) as exc:
        raise CommandError(EXIT_SOLVE, f"solve failed: {exc}") from exc
    save_json(r.map, out / "map.json")
    svg.mesh_image(r.map, out / "image.svg", outline=Y)
    metrics = {"min_jacobian": r.min_jacobian, "escape_count": r.escape_count, "escape_depth": r.escape_depth,
               "energy": r.report.energy, "residual": r.report.residual_norm, "vertices": mesh.n_vertices}
    return metrics, [str(out / "map.json"), str(out / "image.svg")], [args.domain, args.target, args.boundary]


def cmd_alternate(args, out: Path):
    from .alternating import AlternatingConfig, ConfigError, detect_squeezing, parse_config, run_alternating
    from .mesh import save_json
    from . import svg

    X, g = _domain(args.domain), _boundary(args.boundary)
    cells = (_domain(args.cell1), _domain(args.cell2))
    try:
        opts = parse_config(Path(args.config).read_text()) if args.config else {}
        cfg = AlternatingConfig(cells, **opts)
    except (ConfigError, OSError) as exc:
        raise CommandError(EXIT_PARSE, f"bad config: {exc}") from exc
    mesh = _mesh(X, cfg.target_edge)
    res = run_alternating(X, g, cfg, initial=args.initial, mesh=mesh, keep_iterates=args.frames)
    outputs = [out / "trace.csv", out / "final_map.json", out / "squeezing.json"]
    res.trace.to_csv(outputs[0])
    save_json(res.final, outputs[1])
    target = _cells_union(cells)
    comps = detect_squeezing(res.final, target, args.corner_tol)
    outputs[2].write_text(json.dumps({"schema": SCHEMA, "components": [c.to_json() for c in comps]}, indent=1))
    if args.frames:
        for k, m in enumerate(res.trace.iterates):
            outputs.append(Path(svg.mesh_image(m, out / f"frame_{k:03d}.svg", outline=target)))
    metrics = res.trace.to_json()
    metrics["squeezing_components"] = len(comps)
    if res.trace.final_status == "stalled":
        metrics["diagnostic"] = "both cells selected no free vertex"
    return metrics, [str(p) for p in outputs], [args.domain, args.cell1, args.cell2, args.boundary, args.config]


def _cells_union(cells):
    """The target assembled from two cells, as a JordanDomain."""
    import numpy as np

    from .geometry import JordanDomain

    poly = cells[0].polygon.union(cells[1].polygon)
    ring = np.asarray(poly.exterior.coords)[:-1]
    return JordanDomain.from_points(ring[:, 0] + 1j * ring[:, 1], name="union")[0]


def _gallery_levels(name: str, edges):
    from . import gallery as G
    from .mesh import MeshMap

    makers = {"butterfly": (G.butterfly_mesh, G.butterfly_map()),
              "strip": (G.strip_mesh, G.strip_closed_form()),
              "control": (lambda e: _mesh(G.unit_disk(), e), G.control_map())}
    if name not in makers:
        raise CommandError(EXIT_PARSE, f"unknown gallery map {name!r}")
    mk, fn = makers[name]
    return [MeshMap.sample(mk(e), fn) for e in edges]


def cmd_hopf_check(args, out: Path):
    import numpy as np

    from .hopf import holomorphy_residual, hopf_product
    from .mesh import MeshError, load_mesh_map

    edges = [args.edge / 2 ** k for k in range(args.refinements)]
    if args.map.startswith("gallery:"):
        maps = _gallery_levels(args.map.split(":", 1)[1], edges)
        files = []
    else:
        try:
            maps = [load_mesh_map(args.map)]
        except (OSError, ValueError, KeyError, MeshError) as exc:
            raise CommandError(EXIT_PARSE, f"cannot read map {args.map}: {exc}") from exc
        edges = [float(np.sqrt(4 / np.sqrt(3) * maps[0].mesh.areas.mean()))]
        files = [args.map]
    res = [holomorphy_residual(hopf_product(m)).global_residual for m in maps]
    rate = float(np.polyfit(np.log(edges), np.log(res), 1)[0]) if len(res) > 1 and min(res) > 0 else None
    with open(out / "residuals.csv", "w") as fh:
        fh.write("edge,residual\n")
        for e, r in zip(edges, res):
            fh.write(f"{e!r},{r!r}\n")
    return {"edges": edges, "residuals": res, "rate": rate}, [str(out / "residuals.csv")], files


def _parse_starts(text: str):
    pts = []
    for item in text.split(";"):
        item = item.strip()
        if item:
            x, y = (float(v) for v in item.split(","))
            pts.append(complex(x, y))
    if not pts:
        raise CommandError(EXIT_PARSE, "no start points")
    return pts


def _quaddiff(spec: str, domain_file):
    from . import gallery as G
    from .quaddiff import QuadDifferential

    if spec == "gallery:butterfly":
        return QuadDifferential.from_function(G.butterfly_phi, G.unit_disk())
    if spec == "gallery:strip":
        return QuadDifferential.constant(-0.25, G.strip_domain())
    if spec.startswith("poly:"):
        try:
            coeffs = [complex(c.replace(" ", "")) for c in spec[5:].split(",")]
        except ValueError as exc:
            raise CommandError(EXIT_PARSE, f"bad coefficients in {spec!r}") from exc
        dom = _domain(domain_file) if domain_file else G.unit_disk()
        return QuadDifferential.polynomial(coeffs, dom)
    raise CommandError(EXIT_PARSE, f"unknown differential {spec!r}")


def cmd_trace(args, out: Path):
    from .quaddiff import CriticalPointError, minimal_length_check, trace, write_trajectories_csv
    from . import svg

    q = _quaddiff(args.spec, args.domain)
    trajs = []
    for k, z0 in enumerate(_parse_starts(args.starts)):
        try:
            trajs.append(trace(q, z0, args.kind, step=args.step))
        except CriticalPointError as exc:
            raise CommandError(EXIT_CRITICAL, f"start {z0}: {exc}") from exc
    checks = [minimal_length_check(q, t, competitors=args.competitors, seed=args.seed + k).passed
              if args.kind == "vertical" else None for k, t in enumerate(trajs)]
    write_trajectories_csv(trajs, out / "trajectories.csv")
    svg.trajectories(q.domain, trajs, out / "trajectories.svg")
    passed = [c for c in checks if c is not None]
    metrics = {"phi_lengths": [t.phi_length for t in trajs], "terminations": [t.termination for t in trajs],
               "minimal_length_pass_rate": (sum(passed) / len(passed)) if passed else None}
    return metrics, [str(out / "trajectories.csv"), str(out / "trajectories.svg")], [args.domain]


def cmd_douglas(args, out: Path):
    from . import gallery as G
    from .harmonic import douglas_study

    if args.boundary == "gallery:identity":
        g, files = (lambda z: z), []
    elif args.boundary == "gallery:lacunary":
        g, files = G.lacunary_map(), []
    else:
        g, files = _boundary(args.boundary), [args.boundary]
    try:
        st = douglas_study(g, args.n)
    except ValueError as exc:
        raise CommandError(EXIT_PARSE, str(exc)) from exc
    return st.to_json(), [], files


def cmd_gallery(args, out: Path):
    from . import gallery as G

    if args.name is None:
        return G.manifest(), [], []
    try:
        paths = G.write_example(args.name, out)
    except (KeyError, ValueError) as exc:
        raise CommandError(EXIT_PARSE, str(exc)) from exc
    return {"example": args.name, "files": len(paths)}, paths, []


# -------------------------------------------------------------- plumbing

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hopfharm", description="Monotone Hopf-harmonic mapping toolkit.")
    p.add_argument("--out", default="hopfharm_out", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="BLAS thread cap")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("extend", help="harmonic extension with Jacobian and escape audit")
    s.add_argument("domain"), s.add_argument("target"), s.add_argument("boundary")
    s.add_argument("--edge", type=float, default=0.05)
    s.set_defaults(func=cmd_extend)

    s = sub.add_parser("alternate", help="alternating harmonic replacement over two cells")
    s.add_argument("domain"), s.add_argument("cell1"), s.add_argument("cell2"), s.add_argument("boundary")
    s.add_argument("--config")
    s.add_argument("--initial", choices=("radial", "harmonic"), default="radial")
    s.add_argument("--corner-tol", type=float, default=1e-3)
    s.add_argument("--frames", action="store_true", help="write one SVG per iterate")
    s.set_defaults(func=cmd_alternate)

    s = sub.add_parser("hopf-check", help="holomorphy residual of the Hopf product")
    s.add_argument("map", help="MeshMap JSON file or gallery:butterfly|strip|control")
    s.add_argument("--refinements", type=int, default=3)
    s.add_argument("--edge", type=float, default=0.1, help="coarsest edge for gallery maps")
    s.set_defaults(func=cmd_hopf_check)

    s = sub.add_parser("trace", help="trajectories of a quadratic differential")
    s.add_argument("spec", help="poly:c0,c1,... | gallery:butterfly | gallery:strip")
    s.add_argument("--domain", help="domain file for polynomial forms (default unit disk)")
    s.add_argument("--starts", required=True, help="x,y;x,y;...")
    s.add_argument("--kind", choices=("vertical", "horizontal"), default="vertical")
    s.add_argument("--step", type=float, default=0.01)
    s.add_argument("--competitors", type=int, default=100)
    s.set_defaults(func=cmd_trace)

    s = sub.add_parser("douglas", help="Douglas integral refinement study")
    s.add_argument("boundary", help="circle BoundaryMap file or gallery:identity|lacunary")
    s.add_argument("--n", type=int, nargs="+", default=[1024, 2048, 4096, 8192])
    s.set_defaults(func=cmd_douglas)

    s = sub.add_parser("gallery", help="list examples or write one to --out")
    s.add_argument("name", nargs="?")
    s.set_defaults(func=cmd_gallery)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {"schema": SCHEMA, "command": args.command}
    try:
        metrics, outputs, files = args.func(args, out)
        report.update(inputs=_digest(args, files), outputs=outputs, metrics=metrics, status="ok")
        code = EXIT_OK
    except CommandError as exc:
        report.update(inputs=_digest(args, []), outputs=[], metrics={},
                      status={"error": {"code": exc.code, "message": str(exc)}})
        code = exc.code
    except Exception as exc:  # unexpected failures still leave a report behind
        report.update(inputs=_digest(args, []), outputs=[], metrics={},
                      status={"error": {"code": EXIT_ERROR, "message": f"{type(exc).__name__}: {exc}"}})
        code = EXIT_ERROR
    (out / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    if code:
        print(f"hopfharm: {report['status']['error']['message']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
