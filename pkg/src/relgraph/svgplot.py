"""Minimal hand-written SVG line and box charts."""

from __future__ import annotations

import math
from typing import Mapping, Sequence

from xml.sax.saxutils import escape

W, H = 480, 320
PAD_L, PAD_R, PAD_T, PAD_B = 56, 16, 28, 40
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _range(vals):
    vals = [v for v in vals if v is not None and math.isfinite(v)]
    if not vals:
        return 0.0, 1.0
    lo, hi = min(vals), max(vals)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _frame(title, xlabel, ylabel, ylo, yhi):
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<line x1="{PAD_L}" y1="{H - PAD_B}" x2="{W - PAD_R}" y2="{H - PAD_B}" stroke="black"/>',
        f'<line x1="{PAD_L}" y1="{PAD_T}" x2="{PAD_L}" y2="{H - PAD_B}" stroke="black"/>',
        f'<text x="{W / 2:.1f}" y="{H - 6}" text-anchor="middle" font-size="11">{escape(xlabel)}</text>',
        f'<text x="12" y="{H / 2:.1f}" text-anchor="middle" font-size="11" '
        f'transform="rotate(-90 12 {H / 2:.1f})">{escape(ylabel)}</text>',
    ]
    for i in range(5):
        v = ylo + (yhi - ylo) * i / 4
        y = _sy(v, ylo, yhi)
        parts.append(f'<text x="{PAD_L - 4}" y="{y + 4:.1f}" text-anchor="end" font-size="10">{v:.3g}</text>')
    return parts


def _sx(i, n):
    span = W - PAD_L - PAD_R
    return PAD_L + (span * (i + 0.5) / n)


def _sy(v, lo, hi):
    return H - PAD_B - (H - PAD_T - PAD_B) * (v - lo) / (hi - lo)


def line_chart(x: Sequence, series: Mapping[str, Sequence[float]], title: str = "",
               xlabel: str = "", ylabel: str = "") -> str:
    ylo, yhi = _range([v for s in series.values() for v in s])
    parts = _frame(title, xlabel, ylabel, ylo, yhi)
    n = len(x)
    for i, xv in enumerate(x):
        parts.append(f'<text x="{_sx(i, n):.1f}" y="{H - PAD_B + 14}" text-anchor="middle" font-size="10">{xv}</text>')
    for idx, (name, ys) in enumerate(series.items()):
        color = COLORS[idx % len(COLORS)]
        pts = " ".join(f"{_sx(i, n):.1f},{_sy(v, ylo, yhi):.1f}" for i, v in enumerate(ys) if math.isfinite(v))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        parts.append(f'<text x="{W - PAD_R - 4}" y="{PAD_T + 12 * (idx + 1)}" text-anchor="end" '
                     f'font-size="10" fill="{color}">{escape(str(name))}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def box_chart(labels: Sequence, boxes: Sequence[tuple], title: str = "",
              xlabel: str = "", ylabel: str = "") -> str:
    """``boxes`` holds ``(q1, median, q3, mean)`` per category."""
    ylo, yhi = _range([v for b in boxes for v in b])
    parts = _frame(title, xlabel, ylabel, ylo, yhi)
    n = len(labels)
    half = 0.3 * (W - PAD_L - PAD_R) / max(n, 1)
    for i, (lab, (q1, med, q3, mean)) in enumerate(zip(labels, boxes)):
        cx = _sx(i, n)
        parts.append(f'<text x="{cx:.1f}" y="{H - PAD_B + 14}" text-anchor="middle" font-size="10">{escape(str(lab))}</text>')
        if not all(math.isfinite(v) for v in (q1, med, q3, mean)):
            continue
        top, bot = _sy(q3, ylo, yhi), _sy(q1, ylo, yhi)
        parts.append(f'<rect x="{cx - half:.1f}" y="{top:.1f}" width="{2 * half:.1f}" '
                     f'height="{max(bot - top, 0.5):.1f}" fill="#c6dbef" stroke="black"/>')
        ym = _sy(med, ylo, yhi)
        parts.append(f'<line x1="{cx - half:.1f}" y1="{ym:.1f}" x2="{cx + half:.1f}" y2="{ym:.1f}" stroke="black"/>')
        parts.append(f'<circle cx="{cx:.1f}" cy="{_sy(mean, ylo, yhi):.1f}" r="2.5" fill="#d62728"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(svg: str, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(svg)
