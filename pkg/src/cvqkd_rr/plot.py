"""Plain SVG rendering of the rate-versus-distance figure (no plotting dependency)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

W, H = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 70, 40, 50


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def rate_svg(rows, title: str = "") -> str:
    """Theoretical (dashed) and practical (solid) rates on a log axis, efficiency (dotted)
    on a linear secondary axis. Non-positive rates are drawn on the axis floor."""
    rows = sorted(rows, key=lambda r: r.distance_km)
    xs = [r.distance_km for r in rows]
    theo = [r.theoretical for r in rows]
    prac = [r.practical for r in rows]
    eff = [r.efficiency for r in rows]

    positive = [v for v in theo + prac if v > 0 and math.isfinite(v)]
    hi_dec = math.ceil(math.log10(max(positive))) if positive else 0
    lo_dec = math.floor(math.log10(min(positive))) if positive else -1
    if lo_dec == hi_dec:
        lo_dec -= 1
    finite_eff = [e for e in eff if math.isfinite(e)]
    eff_max = max(0.1, math.ceil(10 * max(finite_eff, default=0.1)) / 10)
    x_lo, x_hi = min(xs), max(xs)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def px(x):
        return LEFT + (x - x_lo) / (x_hi - x_lo) * pw

    def py_log(v):
        lv = math.log10(v) if v > 0 and math.isfinite(v) else lo_dec
        lv = min(max(lv, lo_dec), hi_dec)
        return TOP + (hi_dec - lv) / (hi_dec - lo_dec) * ph

    def py_lin(v):
        v = 0.0 if not math.isfinite(v) else min(max(v, 0.0), eff_max)
        return TOP + (1.0 - v / eff_max) * ph

    def path(ys, yfun):
        pts = [f"{_fmt(px(x))},{_fmt(yfun(y))}" for x, y in zip(xs, ys)]
        return "M " + " L ".join(pts)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>']
    if title:
        out.append(f'<text x="{W / 2}" y="20" text-anchor="middle">{escape(title)}</text>')
    x0, x1, y0, y1 = LEFT, LEFT + pw, TOP, TOP + ph
    out += [f'<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>',
            f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
            f'<line x1="{x1}" y1="{y0}" x2="{x1}" y2="{y1}" stroke="black"/>']
    for dec in range(lo_dec, hi_dec + 1):
        y = _fmt(py_log(10.0 ** dec))
        out.append(f'<line x1="{x0 - 4}" y1="{y}" x2="{x0}" y2="{y}" stroke="black"/>')
        out.append(f'<text x="{x0 - 6}" y="{y}" text-anchor="end" dy="4">1e{dec}</text>')
    for k in range(6):
        v = eff_max * k / 5
        y = _fmt(py_lin(v))
        out.append(f'<line x1="{x1}" y1="{y}" x2="{x1 + 4}" y2="{y}" stroke="black"/>')
        out.append(f'<text x="{x1 + 6}" y="{y}" dy="4">{v:.2g}</text>')
    for x in xs:
        out.append(f'<text x="{_fmt(px(x))}" y="{y1 + 16}" text-anchor="middle">{x:g}</text>')
    out.append(f'<text x="{LEFT + pw / 2}" y="{H - 10}" text-anchor="middle">distance (km)</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2}" transform="rotate(-90 16 {TOP + ph / 2})" '
               f'text-anchor="middle">key rate (bits/pulse)</text>')
    out.append(f'<text x="{W - 14}" y="{TOP + ph / 2}" transform="rotate(90 {W - 14} '
               f'{TOP + ph / 2})" text-anchor="middle">efficiency</text>')
    out.append(f'<path class="theoretical" d="{path(theo, py_log)}" fill="none" stroke="black" '
               f'stroke-dasharray="6,4"/>')
    out.append(f'<path class="practical" d="{path(prac, py_log)}" fill="none" stroke="black" '
               f'stroke-width="1.5"/>')
    out.append(f'<path class="efficiency" d="{path(eff, py_lin)}" fill="none" stroke="black" '
               f'stroke-dasharray="1,3"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
