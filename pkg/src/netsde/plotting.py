"""Minimal self-contained SVG line charts."""
from __future__ import annotations

import math
from html import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not math.isfinite(lo) or not math.isfinite(hi) or hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


def _fmt(v: float) -> str:
    return f"{v:.3g}"


def line_chart(series, title: str = "", xlabel: str = "t", ylabel: str = "", logx: bool = False,
               logy: bool = False, width: int = 640, height: int = 400, bands=None) -> str:
    """Render ``series`` (mapping label -> (x, y)) as an SVG document string.

    ``bands`` optionally maps a label to (lo, hi) arrays drawn as a shaded
    interval behind the line.
    """
    bands = bands or {}
    ml, mr, mt, mb = 64, 150, 36, 48
    pw, ph = width - ml - mr, height - mt - mb

    def tx(v):
        return np.log10(v) if logx else v

    def ty(v):
        return np.log10(v) if logy else v

    xs, ys = [], []
    for label, (x, y) in series.items():
        x, y = np.asarray(x, float), np.asarray(y, float)
        ok = np.isfinite(x) & np.isfinite(y)
        if logx:
            ok &= x > 0
        if logy:
            ok &= y > 0
        xs.append(tx(x[ok]))
        ys.append(ty(y[ok]))
        if label in bands:
            lo, hi = (np.asarray(b, float)[ok] for b in bands[label])
            keep = (lo > 0) if logy else np.isfinite(lo)
            ys.append(ty(lo[keep]))
            ys.append(ty(hi[keep]))
    allx = np.concatenate(xs) if xs else np.zeros(0)
    ally = np.concatenate(ys) if ys else np.zeros(0)
    x0, x1 = (float(allx.min()), float(allx.max())) if allx.size else (0.0, 1.0)
    y0, y1 = (float(ally.min()), float(ally.max())) if ally.size else (0.0, 1.0)
    if x1 <= x0:
        x1 = x0 + 1
    if y1 <= y0:
        y1 = y0 + (abs(y0) or 1) * 0.1
    pad = 0.04 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def py(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    if title:
        out.append(f'<text x="{ml + pw / 2}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>')
    for v in _ticks(x0, x1):
        X = px(v)
        lab = _fmt(10 ** v) if logx else _fmt(v)
        out.append(f'<line x1="{X:.1f}" y1="{mt + ph}" x2="{X:.1f}" y2="{mt + ph + 4}" stroke="#444"/>')
        out.append(f'<text x="{X:.1f}" y="{mt + ph + 16}" text-anchor="middle">{lab}</text>')
    for v in _ticks(y0, y1):
        Y = py(v)
        lab = _fmt(10 ** v) if logy else _fmt(v)
        out.append(f'<line x1="{ml}" y1="{Y:.1f}" x2="{ml + pw}" y2="{Y:.1f}" stroke="#e4e4e4"/>')
        out.append(f'<text x="{ml - 6}" y="{Y + 4:.1f}" text-anchor="end">{lab}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text transform="translate(16 {mt + ph / 2}) rotate(-90)" text-anchor="middle">'
               f'{escape(ylabel)}</text>')
    for k, (label, (x, y)) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        x, y = np.asarray(x, float), np.asarray(y, float)
        ok = np.isfinite(x) & np.isfinite(y)
        if logx:
            ok &= x > 0
        if logy:
            ok &= y > 0
        if label in bands:
            lo, hi = (np.asarray(b, float) for b in bands[label])
            okb = ok & np.isfinite(lo) & np.isfinite(hi) & ((lo > 0) if logy else True)
            if okb.sum() > 1:
                up = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(tx(x[okb]), ty(hi[okb])))
                dn = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(tx(x[okb])[::-1], ty(lo[okb])[::-1]))
                out.append(f'<polygon points="{up} {dn}" fill="{color}" fill-opacity="0.15" stroke="none"/>')
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(tx(x[ok]), ty(y[ok])))
        if pts:
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.6"/>')
        ly = mt + 14 + 16 * k
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly - 4}" x2="{ml + pw + 30}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 34}" y="{ly}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def save_chart(path, series, **kw) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(line_chart(series, **kw))
