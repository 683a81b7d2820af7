"""Static SVG flow diagram of an alignment: one column per model,
rectangle height proportional to topic mass, ribbon thickness proportional
to the alignment weight between consecutive models, colors keyed by path.

Emitted by hand (rectangles plus cubic-Bezier strokes); no plotting
dependency.
"""
from __future__ import annotations

import colorsys
from pathlib import Path

import numpy as np

from .alignment import AlignmentGraph, reorder_topics
from .errors import IoFailure

__all__ = ["path_color", "render_flow_svg", "write_flow_svg"]

MARGIN_X = 50.0
MARGIN_TOP = 50.0
MARGIN_BOTTOM = 40.0
RECT_WIDTH = 18.0
RECT_GAP = 6.0
# Links below this share of the pair's largest weight are not drawn.
LINK_CUTOFF = 1e-9


def path_color(path_id: int) -> str:
    """Deterministic hex color per path ID (golden-angle hue spacing)."""
    hue = (path_id * 0.618033988749895) % 1.0
    r, g, b = colorsys.hsv_to_rgb(hue, 0.6, 0.85)
    return f"#{int(r * 255):02x}{int(g * 255):02x}{int(b * 255):02x}"


def _column_layout(masses: np.ndarray, perm: np.ndarray, budget: float):
    """y-position and height per topic, stacked in display order."""
    k = masses.size
    rect_budget = budget - (k - 1) * RECT_GAP
    total = float(masses.sum())
    heights = masses / total * rect_budget if total > 0 else np.full(k, rect_budget / k)
    order = np.argsort(perm)  # topic shown in display slot j
    tops = np.empty(k)
    cursor = MARGIN_TOP
    for slot in range(k):
        topic = int(order[slot])
        tops[topic] = cursor
        cursor += heights[topic] + RECT_GAP
    return tops, heights


def render_flow_svg(graph: AlignmentGraph, path_of: dict, permutations=None,
                    width: float = 1000.0, height: float = 600.0) -> str:
    """Render the alignment as an SVG string."""
    if permutations is None:
        permutations = reorder_topics(graph).permutations
    n_models = graph.n_models
    budget = height - MARGIN_TOP - MARGIN_BOTTOM
    if n_models == 1:
        xs = [width / 2 - RECT_WIDTH / 2]
    else:
        span = width - 2 * MARGIN_X - RECT_WIDTH
        xs = [MARGIN_X + m * span / (n_models - 1) for m in range(n_models)]

    layouts = [_column_layout(graph.masses[m], np.asarray(permutations[m]), budget)
               for m in range(n_models)]
    # Pixels per unit mass; columns share the mass total so any column works.
    unit = (budget - (graph.ks[0] - 1) * RECT_GAP) / float(graph.masses[0].sum())

    links = []
    for m in range(n_models - 1):
        if (m, m + 1) not in graph.weights:
            continue
        w = graph.weights[(m, m + 1)]
        cutoff = LINK_CUTOFF * float(w.max()) if w.size else 0.0
        tops_a, heights_a = layouts[m]
        tops_b, heights_b = layouts[m + 1]
        x1 = xs[m] + RECT_WIDTH
        x2 = xs[m + 1]
        cx1 = x1 + (x2 - x1) * 0.4
        cx2 = x1 + (x2 - x1) * 0.6
        for a in range(graph.ks[m]):
            for b in range(graph.ks[m + 1]):
                if w[a, b] <= cutoff:
                    continue
                y1 = tops_a[a] + heights_a[a] / 2
                y2 = tops_b[b] + heights_b[b] / 2
                color = path_color(path_of[(m, a)])
                links.append(
                    f'<path d="M {x1:.3f} {y1:.3f} C {cx1:.3f} {y1:.3f}, '
                    f'{cx2:.3f} {y2:.3f}, {x2:.3f} {y2:.3f}" fill="none" '
                    f'stroke="{color}" stroke-opacity="0.5" '
                    f'stroke-width="{max(w[a, b] * unit, 0.5):.3f}" '
                    f'data-pair="{m}-{m + 1}" data-source="{a}" data-target="{b}" '
                    f'data-weight="{w[a, b]!r}"/>')

    rects = []
    labels = []
    for m in range(n_models):
        tops, heights = layouts[m]
        for k in range(graph.ks[m]):
            color = path_color(path_of[(m, k)])
            rects.append(
                f'<rect id="topic-{m}-{k}" x="{xs[m]:.3f}" y="{tops[k]:.3f}" '
                f'width="{RECT_WIDTH:.3f}" height="{heights[k]:.3f}" fill="{color}" '
                f'data-model="{m}" data-topic="{k}" data-path="{path_of[(m, k)]}" '
                f'data-mass="{graph.mass((m, k))!r}"/>')
        labels.append(
            f'<text x="{xs[m] + RECT_WIDTH / 2:.3f}" y="{height - MARGIN_BOTTOM / 2:.3f}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="13">'
            f'K={graph.ks[m]}</text>')

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:g}" height="{height:g}" '
        f'viewBox="0 0 {width:g} {height:g}">',
        f'<rect width="{width:g}" height="{height:g}" fill="white"/>',
        '<g class="links">', *links, '</g>',
        '<g class="topics">', *rects, '</g>',
        '<g class="labels">', *labels, '</g>',
        '</svg>',
    ]
    return "\n".join(parts)


def write_flow_svg(graph: AlignmentGraph, path_of: dict, out_path, permutations=None,
                   width: float = 1000.0, height: float = 600.0) -> None:
    svg = render_flow_svg(graph, path_of, permutations, width, height)
    try:
        Path(out_path).write_text(svg, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {out_path}: {exc}") from exc
