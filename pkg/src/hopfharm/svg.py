"""Static SVG figures: outlines, mesh images coloured by a per-triangle scalar, trajectories."""
from __future__ import annotations

from pathlib import Path

import numpy as np

WIDTH = 480


def _frame(points: np.ndarray, pad: float = 0.05):
    lo = complex(points.real.min(), points.imag.min())
    hi = complex(points.real.max(), points.imag.max())
    span = max(hi.real - lo.real, hi.imag - lo.imag, 1e-12)
    scale = WIDTH * (1 - 2 * pad) / span
    height = int(round((hi.imag - lo.imag) * scale + 2 * pad * WIDTH))

    def xy(z):
        z = np.asarray(z)
        return (z.real - lo.real) * scale + pad * WIDTH, height - ((z.imag - lo.imag) * scale + pad * WIDTH)

    return xy, height


def _ramp(t: float) -> str:
    """Blue to red through white."""
    t = min(max(t, 0.0), 1.0)
    if t < 0.5:
        u = t / 0.5
        r, g, b = int(255 * u), int(255 * u), 255
    else:
        u = (t - 0.5) / 0.5
        r, g, b = 255, int(255 * (1 - u)), int(255 * (1 - u))
    return f"#{r:02x}{g:02x}{b:02x}"


def _path(xy, z: np.ndarray, closed: bool) -> str:
    x, y = xy(z)
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(x, y))
    tag = "polygon" if closed else "polyline"
    return f'<{tag} points="{pts}" fill="none" stroke="black" stroke-width="1"/>'


def _write(path, height: int, body: list[str]) -> str:
    text = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
            f'viewBox="0 0 {WIDTH} {height}">\n' + "\n".join(body) + "\n</svg>\n")
    Path(path).write_text(text)
    return str(path)


def mesh_image(m, path, scalar=None, outline=None) -> str:
    """Image triangles of a MeshMap filled by ``scalar`` (defaults to the Jacobian)."""
    from .mesh import wirtinger

    tri = m.values[m.mesh.triangles]
    s = wirtinger(m).jacobian if scalar is None else np.asarray(scalar, dtype=float)
    lo, hi = float(s.min()), float(s.max())
    span = hi - lo if hi > lo else 1.0
    allpts = tri.ravel() if outline is None else np.concatenate([tri.ravel(), outline.boundary])
    xy, height = _frame(allpts)
    body = []
    for t, v in zip(tri, s):
        x, y = xy(t)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(x, y))
        c = _ramp((v - lo) / span)
        body.append(f'<polygon points="{pts}" fill="{c}" stroke="{c}" stroke-width="0.3"/>')
    if outline is not None:
        body.append(_path(xy, outline.boundary, True))
    return _write(path, height, body)


def trajectories(domain, trajs, path) -> str:
    xy, height = _frame(domain.boundary)
    body = [_path(xy, domain.boundary, True)]
    for t in trajs:
        if len(t.points) > 1:
            body.append(_path(xy, np.asarray(t.points), False).replace('stroke="black"', 'stroke="#c03030"'))
    return _write(path, height, body)
