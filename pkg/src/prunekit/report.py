"""Self-contained SVG renderings of the experiment data products.

Charts are emitted as plain SVG text with fixed-precision coordinates, so a
re-run over the same data writes byte-identical files. No external renderer.
"""

from __future__ import annotations

import numpy as np

PALETTE = [
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#ff7f0e",
    "#9467bd",
    "#8c564b",
    "#17becf",
    "#7f7f7f",
]

WIDTH = 880
HEIGHT = 560
MARGIN_LEFT = 80
MARGIN_RIGHT = 220
MARGIN_TOP = 60
MARGIN_BOTTOM = 70


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def _axis_range(values) -> tuple[float, float]:
    lo = float(min(values))
    hi = float(max(values))
    if lo == hi:
        lo -= 0.5
        hi += 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _open_svg(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect x="0" y="0" width="100%" height="100%" fill="#ffffff"/>',
        f'<text x="{WIDTH / 2:.1f}" y="30" text-anchor="middle" font-size="18" '
        f'font-family="sans-serif">{_escape(title)}</text>',
    ]


def _axes(lines, x_label, y_label, x_lo, x_hi, y_lo, y_hi):
    left, right = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
    top, bottom = MARGIN_TOP, HEIGHT - MARGIN_BOTTOM

    def to_px(x, y):
        px = left + (x - x_lo) / (x_hi - x_lo) * (right - left)
        py = bottom - (y - y_lo) / (y_hi - y_lo) * (bottom - top)
        return px, py

    for i in range(6):
        xv = x_lo + (x_hi - x_lo) * i / 5
        yv = y_lo + (y_hi - y_lo) * i / 5
        px, _ = to_px(xv, y_lo)
        _, py = to_px(x_lo, yv)
        lines.append(
            f'<line x1="{px:.2f}" y1="{top}" x2="{px:.2f}" y2="{bottom}" stroke="#e0e0e0"/>'
        )
        lines.append(
            f'<line x1="{left}" y1="{py:.2f}" x2="{right}" y2="{py:.2f}" stroke="#e0e0e0"/>'
        )
        lines.append(
            f'<text x="{px:.2f}" y="{bottom + 20}" text-anchor="middle" font-size="12" '
            f'font-family="sans-serif">{xv:.3g}</text>'
        )
        lines.append(
            f'<text x="{left - 8}" y="{py + 4:.2f}" text-anchor="end" font-size="12" '
            f'font-family="sans-serif">{yv:.3g}</text>'
        )
    lines.append(
        f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" '
        'fill="none" stroke="#333333"/>'
    )
    lines.append(
        f'<text x="{(left + right) / 2:.1f}" y="{HEIGHT - 16}" text-anchor="middle" '
        f'font-size="14" font-family="sans-serif">{_escape(x_label)}</text>'
    )
    lines.append(
        f'<text x="20" y="{(top + bottom) / 2:.1f}" text-anchor="middle" font-size="14" '
        f'font-family="sans-serif" transform="rotate(-90 20 {(top + bottom) / 2:.1f})">'
        f"{_escape(y_label)}</text>"
    )
    return to_px


def line_chart_svg(title: str, x_label: str, y_label: str, series) -> str:
    """series: iterable of (label, xs, ys). Long series are stride-thinned."""
    lines = _open_svg(title)
    all_x = [x for _, xs, _ in series for x in xs]
    all_y = [y for _, _, ys in series for y in ys]
    if not all_x:
        lines.append(
            f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT / 2:.1f}" text-anchor="middle" '
            'font-size="14" font-family="sans-serif">no data</text></svg>'
        )
        return "\n".join(lines)
    x_lo, x_hi = _axis_range(all_x)
    y_lo, y_hi = _axis_range(all_y)
    to_px = _axes(lines, x_label, y_label, x_lo, x_hi, y_lo, y_hi)
    for s, (label, xs, ys) in enumerate(series):
        color = PALETTE[s % len(PALETTE)]
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        stride = max(1, len(xs) // 800)
        pts = [to_px(x, y) for x, y in zip(xs[::stride], ys[::stride])]
        if len(xs) > 1 and (len(xs) - 1) % stride:
            pts.append(to_px(xs[-1], ys[-1]))
        path = " ".join(f"{'M' if i == 0 else 'L'}{p[0]:.2f},{p[1]:.2f}" for i, p in enumerate(pts))
        lines.append(f'<path d="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = MARGIN_TOP + 18 * s + 10
        lx = WIDTH - MARGIN_RIGHT + 16
        lines.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        lines.append(
            f'<text x="{lx + 28}" y="{ly + 4}" font-size="12" font-family="sans-serif">'
            f"{_escape(label)}</text>"
        )
    lines.append("</svg>")
    return "\n".join(lines)


def heatmap_svg(title: str, labels, values) -> str:
    """Correlation heatmap; None cells render as gray n/a."""
    k = len(labels)
    lines = _open_svg(title)
    left, top = MARGIN_LEFT + 60, MARGIN_TOP + 20
    cell = min(60, (WIDTH - left - 40) // max(k, 1), (HEIGHT - top - 40) // max(k, 1))
    for i in range(k):
        lines.append(
            f'<text x="{left - 8}" y="{top + i * cell + cell / 2 + 4:.1f}" text-anchor="end" '
            f'font-size="11" font-family="sans-serif">{_escape(labels[i])}</text>'
        )
        lines.append(
            f'<text x="{left + i * cell + cell / 2:.1f}" y="{top - 8}" text-anchor="middle" '
            f'font-size="11" font-family="sans-serif">{_escape(labels[i])}</text>'
        )
        for j in range(k):
            v = values[i][j]
            if v is None:
                fill = "#cccccc"
                text = "n/a"
            else:
                # Blue for +1, white for 0, red for -1.
                t = max(-1.0, min(1.0, float(v)))
                if t >= 0:
                    rgb = (int(255 * (1 - t)), int(255 * (1 - 0.55 * t)), 255)
                else:
                    rgb = (255, int(255 * (1 + 0.55 * t)), int(255 * (1 + t)))
                fill = f"#{rgb[0]:02x}{rgb[1]:02x}{rgb[2]:02x}"
                text = f"{t:.2f}"
            x = left + j * cell
            y = top + i * cell
            lines.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}" '
                'stroke="#ffffff"/>'
            )
            lines.append(
                f'<text x="{x + cell / 2:.1f}" y="{y + cell / 2 + 4:.1f}" text-anchor="middle" '
                f'font-size="11" font-family="sans-serif">{text}</text>'
            )
    lines.append("</svg>")
    return "\n".join(lines)


def histogram_svg(title: str, x_label: str, bin_edges, counts) -> str:
    lines = _open_svg(title)
    edges = np.asarray(bin_edges, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.int64)
    if counts.size == 0:
        lines.append(
            f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT / 2:.1f}" text-anchor="middle" '
            'font-size="14" font-family="sans-serif">no data</text></svg>'
        )
        return "\n".join(lines)
    y_hi = max(1, int(counts.max()))
    to_px = _axes(lines, x_label, "count", float(edges[0]), float(edges[-1]), 0.0, float(y_hi))
    for left_edge, right_edge, c in zip(edges[:-1], edges[1:], counts):
        x0, y0 = to_px(float(left_edge), 0.0)
        x1, y1 = to_px(float(right_edge), float(c))
        lines.append(
            f'<rect x="{x0:.2f}" y="{y1:.2f}" width="{x1 - x0:.2f}" height="{y0 - y1:.2f}" '
            'fill="#1f77b4" stroke="#ffffff" stroke-width="0.5"/>'
        )
    lines.append("</svg>")
    return "\n".join(lines)
