"""Minimal dependency-free SVG charts (scatter and line plots)."""
from __future__ import annotations

import math
from html import escape

WIDTH, HEIGHT = 640, 440
MARGIN = dict(left=70, right=20, top=40, bottom=55)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out, t = [], start
    while t <= hi + step * 1e-9:
        out.append(round(t, 12))
        t += step
    return out


def _extent(values: list[float]) -> tuple[float, float]:
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return 0.0, 1.0
    lo, hi = min(finite), max(finite)
    if lo == hi:
        pad = abs(lo) * 0.1 or 1.0
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


class Chart:
    def __init__(self, title: str, xlabel: str, ylabel: str):
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.series = []

    def scatter(self, xs, ys, label: str = "", radius: float = 2.0):
        self.series.append(("scatter", list(map(float, xs)), list(map(float, ys)), label, radius, None))
        return self

    def line(self, xs, ys, label: str = "", errors=None):
        errs = None if errors is None else list(map(float, errors))
        self.series.append(("line", list(map(float, xs)), list(map(float, ys)), label, 0, errs))
        return self

    def render(self) -> str:
        xs = [x for s in self.series for x in s[1]]
        ys = [y for s in self.series for y in s[2]]
        for s in self.series:
            if s[5]:
                ys += [y + e for y, e in zip(s[2], s[5])] + [y - e for y, e in zip(s[2], s[5])]
        x0, x1 = _extent(xs)
        y0, y1 = _extent(ys)
        pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
        px = lambda x: MARGIN["left"] + (x - x0) / (x1 - x0) * pw  # noqa: E731
        py = lambda y: MARGIN["top"] + ph - (y - y0) / (y1 - y0) * ph  # noqa: E731

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
               f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
               f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
               f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(self.title)}</text>',
               f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
               f'fill="none" stroke="#333"/>']
        for t in _ticks(x0, x1):
            X = px(t)
            out.append(f'<line x1="{X:.2f}" y1="{MARGIN["top"] + ph}" x2="{X:.2f}" '
                       f'y2="{MARGIN["top"] + ph + 5}" stroke="#333"/>')
            out.append(f'<text x="{X:.2f}" y="{MARGIN["top"] + ph + 18}" text-anchor="middle">{t:g}</text>')
        for t in _ticks(y0, y1):
            Y = py(t)
            out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{Y:.2f}" x2="{MARGIN["left"]}" '
                       f'y2="{Y:.2f}" stroke="#333"/>')
            out.append(f'<text x="{MARGIN["left"] - 8}" y="{Y + 4:.2f}" text-anchor="end">{t:g}</text>')
        out.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 12}" '
                   f'text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(f'<text transform="translate(18,{MARGIN["top"] + ph / 2:.1f}) rotate(-90)" '
                   f'text-anchor="middle">{escape(self.ylabel)}</text>')

        for k, (kind, sx, sy, label, radius, errs) in enumerate(self.series):
            color = PALETTE[k % len(PALETTE)]
            pts = [(px(x), py(y)) for x, y in zip(sx, sy) if math.isfinite(x) and math.isfinite(y)]
            if kind == "scatter":
                out.append(f'<g fill="{color}" fill-opacity="0.6">')
                out.extend(f'<circle cx="{X:.2f}" cy="{Y:.2f}" r="{radius}"/>' for X, Y in pts)
                out.append("</g>")
            else:
                if pts:
                    path = " ".join(f"{X:.2f},{Y:.2f}" for X, Y in pts)
                    out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>')
                    out.extend(f'<circle cx="{X:.2f}" cy="{Y:.2f}" r="3" fill="{color}"/>' for X, Y in pts)
                if errs:
                    for x, y, e in zip(sx, sy, errs):
                        if math.isfinite(x) and math.isfinite(y) and math.isfinite(e):
                            out.append(f'<line x1="{px(x):.2f}" y1="{py(y - e):.2f}" x2="{px(x):.2f}" '
                                       f'y2="{py(y + e):.2f}" stroke="{color}"/>')
            if label:
                ly = MARGIN["top"] + 16 + 16 * k
                out.append(f'<rect x="{MARGIN["left"] + 10}" y="{ly - 9}" width="10" height="10" fill="{color}"/>')
                out.append(f'<text x="{MARGIN["left"] + 25}" y="{ly}">{escape(label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.render())
