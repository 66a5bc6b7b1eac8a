"""Static SVG 1.1 snapshots of a planning step.

World y points up; SVG y points down, so every y is negated when written.
Coordinates are printed with three decimals, which makes output byte-stable.
"""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from posh.factor_graph import Graph

MARGIN = 1.0
GRAY = "#808080"
LIGHT = "#c8c8c8"
GREEN = "#2ca02c"
RED = "#d62728"
BLUE = "#1f77b4"


def _f(v: float) -> str:
    s = f"{float(v):.3f}"
    return "0.000" if s == "-0.000" else s


def _pt(p) -> str:
    return f"{_f(p[0])},{_f(-p[1])}"


def _polyline(points, color, width, extra="") -> str:
    pts = " ".join(_pt(p) for p in points)
    return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{_f(width)}"{extra}/>'


def _line(a, b, color, width, extra="") -> str:
    return (
        f'<line x1="{_f(a[0])}" y1="{_f(-a[1])}" x2="{_f(b[0])}" y2="{_f(-b[1])}" '
        f'stroke="{color}" stroke-width="{_f(width)}"{extra}/>'
    )


def _circle(c, r, color) -> str:
    return f'<circle cx="{_f(c[0])}" cy="{_f(-c[1])}" r="{_f(r)}" fill="{color}"/>'


def frame_bounds(world=None, graph=None, executed=None, best_path=None, pruned=None, goal=None,
                 bounds=None, robot_radius=0.5) -> tuple[np.ndarray, np.ndarray]:
    """Axis-aligned box covering everything drawn (and ``bounds`` if given)."""
    pts = []
    if bounds is not None:
        pts.append(np.asarray(bounds, dtype=float).reshape(2, 2))
    if world is not None:
        for ob in world.obstacles:
            pts.append(np.array([ob.center - ob.half_extents, ob.center + ob.half_extents]))
        if world.robot_true is not None:
            p = world.robot_true.position
            pts.append(np.array([p - robot_radius, p + robot_radius]))
    if goal is not None:
        g = np.asarray(goal, dtype=float)
        pts.append(np.array([g - robot_radius, g + robot_radius]))
    if graph is not None and graph.variables:
        pts.append(np.array([x[:2] for x in graph.variables.values()]))
    for arr in (executed, best_path, pruned):
        if arr is not None and len(arr):
            pts.append(np.asarray(arr, dtype=float).reshape(-1, 2))
    if not pts:
        return np.zeros(2), np.ones(2)
    allp = np.vstack(pts)
    return allp.min(axis=0), allp.max(axis=0)


def render_frame(world, graph: Graph | None = None, executed=None, best_path=None, out=None, *,
                 goal=None, pruned_edges=None, bounds=None, robot_radius: float = 0.5,
                 title: str | None = None) -> str:
    """SVG of one step: obstacles, graph, executed and best paths, robot and goal.

    ``best_path`` and ``executed`` are ``(k, 2)`` position arrays;
    ``pruned_edges`` is a ``(m, 2, 2)`` array of segment endpoints. When
    ``out`` is given the document is also written there.
    """
    executed = None if executed is None else np.asarray(executed, dtype=float).reshape(-1, 2)
    best_path = None if best_path is None else np.asarray(best_path, dtype=float).reshape(-1, 2)
    pruned = None if pruned_edges is None else np.asarray(pruned_edges, dtype=float).reshape(-1, 2, 2)
    lo, hi = frame_bounds(world, graph, executed, best_path, pruned, goal, bounds, robot_radius)
    lo, hi = lo - MARGIN, hi + MARGIN
    w, h = hi - lo
    # in SVG coordinates the visible y range is [-hi_y, -lo_y]
    view = f"{_f(lo[0])} {_f(-hi[1])} {_f(w)} {_f(h)}"
    scale = 20.0
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{view}" '
        f'width="{_f(w * scale)}" height="{_f(h * scale)}">',
    ]
    if title:
        lines.append(f"<title>{escape(title)}</title>")
    lines.append(f'<rect x="{_f(lo[0])}" y="{_f(-hi[1])}" width="{_f(w)}" height="{_f(h)}" fill="white"/>')

    if world is not None:
        lines.append('<g id="obstacles">')
        for ob in sorted(world.obstacles, key=lambda o: o.id):
            x0, y1 = ob.center - ob.half_extents, ob.center + ob.half_extents
            lines.append(
                f'<rect x="{_f(x0[0])}" y="{_f(-y1[1])}" width="{_f(2 * ob.half_extents[0])}" '
                f'height="{_f(2 * ob.half_extents[1])}" fill="{GRAY}"/>'
            )
        lines.append("</g>")

    if graph is not None:
        lines.append('<g id="graph">')
        for a, b in sorted(graph.edges()):
            lines.append(_line(graph.variables[a], graph.variables[b], LIGHT, 0.05))
        for v in sorted(graph.variables):
            lines.append(_circle(graph.variables[v], 0.08, LIGHT))
        lines.append("</g>")

    if pruned is not None and len(pruned):
        lines.append('<g id="pruned">')
        for a, b in pruned:
            lines.append(_line(a, b, BLUE, 0.06, ' stroke-dasharray="0.2,0.15"'))
        lines.append("</g>")

    if executed is not None and len(executed) > 1:
        lines.append(_polyline(executed, GREEN, 0.12, ' id="executed"'))
    if best_path is not None and len(best_path) > 1:
        lines.append(_polyline(best_path, RED, 0.1, ' id="best"'))

    if goal is not None:
        lines.append(_circle(goal, robot_radius, GREEN).replace("<circle", '<circle id="goal"', 1))
    if world is not None and world.robot_true is not None:
        lines.append(_circle(world.robot_true.position, robot_radius, GRAY).replace("<circle", '<circle id="robot"', 1))
    lines.append("</svg>")
    doc = "\n".join(lines) + "\n"
    if out is not None:
        Path(out).write_text(doc)
    return doc
