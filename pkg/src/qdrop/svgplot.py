"""Minimal SVG emitter for line charts and bar charts with whiskers.

Deliberately dependency free: the experiment CSVs are small and the
figures only need axes, polylines, bars and error whiskers.
"""

from __future__ import annotations

import math

_WIDTH, _HEIGHT = 640, 420
_MARGIN = 60
_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f")


class PlotError(ValueError):
    pass


def _scale(vmin, vmax):
    if math.isclose(vmin, vmax):
        vmin, vmax = vmin - 1.0, vmax + 1.0
    return vmin, vmax


def _x_px(v, vmin, vmax):
    return _MARGIN + (v - vmin) / (vmax - vmin) * (_WIDTH - 2 * _MARGIN)


def _y_px(v, vmin, vmax):
    return _HEIGHT - _MARGIN - (v - vmin) / (vmax - vmin) * (_HEIGHT - 2 * _MARGIN)


def _axes(xlabel: str, ylabel: str, xmin, xmax, ymin, ymax) -> list[str]:
    parts = [
        f'<line x1="{_MARGIN}" y1="{_HEIGHT - _MARGIN}" x2="{_WIDTH - _MARGIN}" '
        f'y2="{_HEIGHT - _MARGIN}" stroke="black"/>',
        f'<line x1="{_MARGIN}" y1="{_MARGIN}" x2="{_MARGIN}" '
        f'y2="{_HEIGHT - _MARGIN}" stroke="black"/>',
        f'<text x="{_WIDTH / 2:.1f}" y="{_HEIGHT - 15}" text-anchor="middle" '
        f'font-size="13">{xlabel}</text>',
        f'<text x="18" y="{_HEIGHT / 2:.1f}" text-anchor="middle" '
        f'font-size="13" transform="rotate(-90 18 {_HEIGHT / 2:.1f})">{ylabel}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv = xmin + frac * (xmax - xmin)
        yv = ymin + frac * (ymax - ymin)
        parts.append(f'<text x="{_x_px(xv, xmin, xmax):.1f}" '
                     f'y="{_HEIGHT - _MARGIN + 18}" text-anchor="middle" '
                     f'font-size="11">{xv:.3g}</text>')
        parts.append(f'<text x="{_MARGIN - 8}" y="{_y_px(yv, ymin, ymax):.1f}" '
                     f'text-anchor="end" font-size="11">{yv:.3g}</text>')
    return parts


def _document(body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
            f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">')
    return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>']
                     + body + ["</svg>"])


def line_chart(x, series: dict[str, list[float]],
               xlabel: str = "x", ylabel: str = "y") -> str:
    """One polyline per series over a shared x axis."""
    if not series:
        raise PlotError("no series to plot")
    x = [float(v) for v in x]
    for name, ys in series.items():
        if len(ys) != len(x):
            raise PlotError(f"series {name!r} length does not match x")
    xmin, xmax = _scale(min(x), max(x))
    allv = [v for ys in series.values() for v in ys]
    ymin, ymax = _scale(min(allv), max(allv))
    body = _axes(xlabel, ylabel, xmin, xmax, ymin, ymax)
    for idx, (name, ys) in enumerate(series.items()):
        color = _COLORS[idx % len(_COLORS)]
        pts = " ".join(f"{_x_px(xv, xmin, xmax):.2f},{_y_px(yv, ymin, ymax):.2f}"
                       for xv, yv in zip(x, ys))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                    f'stroke-width="1.5"/>')
        body.append(f'<text x="{_WIDTH - _MARGIN + 4}" y="{_MARGIN + 16 * idx}" '
                    f'font-size="11" fill="{color}">{name}</text>')
    return _document(body)


def bar_chart(labels: list[str], means: list[float],
              stds: list[float] | None = None,
              ylabel: str = "value") -> str:
    """Bars with optional +-std whiskers."""
    if not labels or len(labels) != len(means):
        raise PlotError("labels and means must be equal-length and non-empty")
    stds = stds or [0.0] * len(means)
    if len(stds) != len(means):
        raise PlotError("stds length does not match means")
    top = max(m + s for m, s in zip(means, stds))
    bottom = min(0.0, min(means))
    ymin, ymax = _scale(bottom, top)
    body = _axes("", ylabel, 0, len(labels), ymin, ymax)
    span = _WIDTH - 2 * _MARGIN
    width = span / len(labels) * 0.6
    for idx, (label, mean, std) in enumerate(zip(labels, means, stds)):
        cx = _MARGIN + span * (idx + 0.5) / len(labels)
        y0 = _y_px(max(0.0, ymin), ymin, ymax)
        y1 = _y_px(mean, ymin, ymax)
        color = _COLORS[idx % len(_COLORS)]
        body.append(f'<rect x="{cx - width / 2:.2f}" y="{min(y0, y1):.2f}" '
                    f'width="{width:.2f}" height="{abs(y0 - y1):.2f}" '
                    f'fill="{color}" fill-opacity="0.8"/>')
        if std > 0:
            ylo = _y_px(mean - std, ymin, ymax)
            yhi = _y_px(mean + std, ymin, ymax)
            body.append(f'<line x1="{cx:.2f}" y1="{ylo:.2f}" x2="{cx:.2f}" '
                        f'y2="{yhi:.2f}" stroke="black"/>')
            for y in (ylo, yhi):
                body.append(f'<line x1="{cx - 5:.2f}" y1="{y:.2f}" '
                            f'x2="{cx + 5:.2f}" y2="{y:.2f}" stroke="black"/>')
        body.append(f'<text x="{cx:.2f}" y="{_HEIGHT - _MARGIN + 18}" '
                    f'text-anchor="middle" font-size="10">{label}</text>')
    return _document(body)
