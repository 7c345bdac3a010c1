"""Minimal SVG rendering of nodal loops and balls (1024 x 1024 viewbox)."""

from __future__ import annotations

import numpy as np

SIZE = 1024


def _mapper(bounds):
    (x0, x1), (y0, y1) = bounds
    span = max(x1 - x0, y1 - y0)

    def to_px(p):
        p = np.asarray(p, dtype=float)
        u = (p[..., 0] - x0) / span * SIZE
        v = SIZE - (p[..., 1] - y0) / span * SIZE
        return u, v

    return to_px, SIZE / span


def render(polylines, bounds, circles=(), title: str = "") -> str:
    """SVG text for ``polylines`` (arrays of shape (m, 2)) inside ``bounds``.

    ``circles`` are ``(center, radius)`` pairs drawn dashed.
    """
    to_px, scale = _mapper(bounds)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {SIZE} {SIZE}" '
           f'width="{SIZE}" height="{SIZE}">',
           f'<rect width="{SIZE}" height="{SIZE}" fill="white"/>']
    if title:
        out.append(f'<title>{title}</title>')
    for pl in polylines:
        pl = np.asarray(pl)
        if len(pl) < 2:
            continue
        u, v = to_px(pl)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(u, v))
        out.append(f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="1.5"/>')
    for c, r in circles:
        u, v = to_px(np.asarray(c, dtype=float))
        out.append(f'<circle cx="{float(u):.2f}" cy="{float(v):.2f}" r="{r * scale:.2f}" '
                   'fill="none" stroke="steelblue" stroke-dasharray="8,6"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_contour(ct, bounds, circles=(), title: str = "") -> str:
    """Render every component of a :class:`~nodal_lab.nodal.Contour`.

    Periodic polylines are unwrapped, so they may run past the bounds.
    """
    return render([ct.polyline(k) for k in range(ct.n_components)], bounds, circles, title)
