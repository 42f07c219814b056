"""Deterministic SVG plots of scenarios, lattices and trajectories."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .graph import EdgeStatus, GridSpec, VertexStatus, VoxelGraph
from .scenario import Scenario

SIZE = 500
MARGIN = 20
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf")


def _xy(p) -> tuple[str, str]:
    span = SIZE - 2 * MARGIN
    return f"{MARGIN + p[0] * span:.2f}", f"{SIZE - MARGIN - p[1] * span:.2f}"


def render_svg(sc: Scenario, trajectories=(), grid: GridSpec | None = None,
               graph: VoxelGraph | None = None) -> str:
    """SVG of the unit square with obstacles, start/goal and trajectories.

    ``trajectories`` is a sequence of ``(label, states)`` pairs; each becomes
    one polyline through all its states. ``graph`` adds validated vertices
    and solved edges; ``grid`` draws the voxel lines.
    """
    span = SIZE - 2 * MARGIN
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
           f'viewBox="0 0 {SIZE} {SIZE}">',
           f'<rect x="{MARGIN}" y="{MARGIN}" width="{span}" height="{span}" fill="white" stroke="black"/>']
    if graph is not None and grid is None:
        grid = graph.grid
    if grid is not None:
        for k in range(1, grid.K):
            a0, b0 = _xy((k / grid.K, 0.0))
            a1, b1 = _xy((k / grid.K, 1.0))
            out.append(f'<line class="grid" x1="{a0}" y1="{b0}" x2="{a1}" y2="{b1}" stroke="#dddddd"/>')
            a0, b0 = _xy((0.0, k / grid.K))
            a1, b1 = _xy((1.0, k / grid.K))
            out.append(f'<line class="grid" x1="{a0}" y1="{b0}" x2="{a1}" y2="{b1}" stroke="#dddddd"/>')
    for o in sc.obstacles:
        x, y = _xy((o.xmin, o.ymax))
        out.append(f'<rect class="obstacle" x="{x}" y="{y}" width="{(o.xmax - o.xmin) * span:.2f}" '
                   f'height="{(o.ymax - o.ymin) * span:.2f}" fill="#555555"/>')
    if graph is not None:
        for rec in graph.edges:
            if rec.status is EdgeStatus.SOLVED:
                pts = " ".join(",".join(_xy(s)) for s in rec.trajectory.states)
                out.append(f'<polyline class="edge" points="{pts}" fill="none" stroke="#bbbbbb"/>')
        for rec in graph.vertices:
            if rec.status is VertexStatus.VALIDATED:
                x, y = _xy(rec.configuration)
                out.append(f'<circle class="vertex" cx="{x}" cy="{y}" r="2" fill="#888888"/>')
    for k, (label, states) in enumerate(trajectories):
        states = np.asarray(states, dtype=float).reshape(-1, 4)
        pts = " ".join(",".join(_xy(s)) for s in states)
        color = PALETTE[k % len(PALETTE)]
        out.append(f'<polyline class="trajectory" data-label="{escape(str(label))}" points="{pts}" '
                   f'fill="none" stroke="{color}" stroke-width="2"/>')
    for cls, s, color in (("start", sc.start_state, "#2ca02c"), ("goal", sc.goal_state, "#d62728")):
        x, y = _xy(s)
        out.append(f'<circle class="{cls}" cx="{x}" cy="{y}" r="6" fill="{color}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
