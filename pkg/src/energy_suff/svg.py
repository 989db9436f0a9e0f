"""Minimal SVG line charts for traces, written as plain XML text."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .sim import Trace

WIDTH, HEIGHT = 640, 400
MARGIN = 56
PANELS = {
    "he": ("h_e", "energy barrier h_e [J]"),
    "E": ("E", "energy used E [J]"),
    "s": ("s", "path parameter s"),
    "L": ("L", "path length L [m]"),
}
PANEL_NAMES = tuple(PANELS) + ("traj",)


class _Frame:
    """Maps data coordinates into the plot area, y up."""

    def __init__(self, xlo, xhi, ylo, yhi, equal=False):
        if not xhi > xlo:
            xlo, xhi = xlo - 0.5, xhi + 0.5
        if not yhi > ylo:
            ylo, yhi = ylo - 0.5, yhi + 0.5
        self.w = WIDTH - 2 * MARGIN
        self.h = HEIGHT - 2 * MARGIN
        if equal:
            scale = min(self.w / (xhi - xlo), self.h / (yhi - ylo))
            cx, cy = 0.5 * (xlo + xhi), 0.5 * (ylo + yhi)
            xlo, xhi = cx - 0.5 * self.w / scale, cx + 0.5 * self.w / scale
            ylo, yhi = cy - 0.5 * self.h / scale, cy + 0.5 * self.h / scale
        self.xlo, self.xhi, self.ylo, self.yhi = xlo, xhi, ylo, yhi

    def px(self, x: float) -> float:
        return MARGIN + (x - self.xlo) / (self.xhi - self.xlo) * self.w

    def py(self, y: float) -> float:
        return HEIGHT - MARGIN - (y - self.ylo) / (self.yhi - self.ylo) * self.h

    def points(self, xs, ys) -> str:
        return " ".join(f"{self.px(x):.2f},{self.py(y):.2f}" for x, y in zip(xs, ys))


def _thin(xs: np.ndarray, ys: np.ndarray, limit: int = 2000) -> tuple[np.ndarray, np.ndarray]:
    keep = np.isfinite(xs) & np.isfinite(ys)
    xs, ys = xs[keep], ys[keep]
    if len(xs) > limit:
        idx = np.unique(np.linspace(0, len(xs) - 1, limit).astype(int))
        xs, ys = xs[idx], ys[idx]
    return xs, ys


def _document(frame: _Frame, title: str, xlabel: str, ylabel: str, body: list[str]) -> str:
    f = frame
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{f.w}" height="{f.h}" fill="none" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{MARGIN / 2}" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="14" y="{HEIGHT / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {HEIGHT / 2})">{escape(ylabel)}</text>',
    ]
    for v, anchor in ((f.xlo, "start"), (f.xhi, "end")):
        parts.append(
            f'<text x="{f.px(v):.2f}" y="{HEIGHT - MARGIN + 16}" text-anchor="{anchor}" font-size="10">{v:.4g}</text>'
        )
    for v in (f.ylo, f.yhi):
        parts.append(f'<text x="{MARGIN - 4}" y="{f.py(v):.2f}" text-anchor="end" font-size="10">{v:.4g}</text>')
    parts.extend(body)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def time_series_svg(trace: Trace, panel: str) -> str:
    column, label = PANELS[panel]
    t, y = _thin(trace.column("t"), trace.column(column))
    if len(t) == 0:
        t, y = np.zeros(1), np.zeros(1)
    frame = _Frame(float(t.min()), float(t.max()), float(y.min()), float(y.max()))
    body = [f'<polyline fill="none" stroke="#1f5fbf" stroke-width="1.5" points="{frame.points(t, y)}"/>']
    return _document(frame, label, "time [s]", label, body)


def trajectory_svg(trace: Trace) -> str:
    x, y = _thin(trace.column("x"), trace.column("y"))
    paths = [np.asarray(p, dtype=float).reshape(-1, 2) for p in trace.waypoints if len(p)]
    c, r = trace.station, trace.radius
    xs = [x, np.array([c[0] - r, c[0] + r])] + [p[:, 0] for p in paths]
    ys = [y, np.array([c[1] - r, c[1] + r])] + [p[:, 1] for p in paths]
    allx, ally = np.concatenate(xs), np.concatenate(ys)
    pad = 0.05 * max(float(np.ptp(allx)), float(np.ptp(ally)), 1.0)
    frame = _Frame(allx.min() - pad, allx.max() + pad, ally.min() - pad, ally.max() + pad, equal=True)
    scale = frame.w / (frame.xhi - frame.xlo)
    body = [
        f'<circle cx="{frame.px(c[0]):.2f}" cy="{frame.py(c[1]):.2f}" r="{r * scale:.2f}" '
        f'fill="#d8f0d8" stroke="#2a8a2a"/>'
    ]
    for p in paths:
        body.append(
            f'<polyline fill="none" stroke="#999999" stroke-dasharray="4 3" points="{frame.points(p[:, 0], p[:, 1])}"/>'
        )
        for px, py in p:
            if math.isfinite(px) and math.isfinite(py):
                body.append(f'<circle cx="{frame.px(px):.2f}" cy="{frame.py(py):.2f}" r="2" fill="#999999"/>')
    body.append(f'<polyline fill="none" stroke="#c0392b" stroke-width="1.5" points="{frame.points(x, y)}"/>')
    return _document(frame, "trajectory and paths", "x [m]", "y [m]", body)


def panel_svg(trace: Trace, panel: str) -> str:
    if panel == "traj":
        return trajectory_svg(trace)
    if panel not in PANELS:
        raise KeyError(panel)
    return time_series_svg(trace, panel)
