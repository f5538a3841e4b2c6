"""Minimal self-contained SVG plots of scan profiles and Monte Carlo counts."""

from __future__ import annotations

import math
from typing import List, Optional, Union
from xml.sax.saxutils import escape

import numpy as np

from .errors import ConfigurationError
from .montecarlo import CountsProfile
from .scans import ScanProfile

__all__ = ["emit_svg", "render_svg", "nice_ticks"]

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 78, 20, 40, 56


def nice_ticks(lo: float, hi: float, target: int = 6) -> List[float]:
    """Round tick values covering ``[lo, hi]``; steps follow the 1-2-5 decade sequence."""
    if hi <= lo:
        hi = lo + (abs(lo) or 1.0)
    raw = (hi - lo) / max(target - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _fmt(v):
    return f"{v:.4g}"


def render_svg(profile: Union[ScanProfile, CountsProfile], title: Optional[str] = None) -> str:
    """Render ``profile`` as an SVG document and return the text.

    Scan profiles draw as a polyline; counts draw as points with sqrt(N)
    error bars.
    """
    if len(profile) == 0:
        raise ConfigurationError("cannot plot an empty profile")
    x = np.asarray(profile.positions) * 1e3
    is_counts = isinstance(profile, CountsProfile)
    y = np.asarray(profile.counts if is_counts else profile.values, dtype=float)
    err = np.sqrt(y) if is_counts else np.zeros_like(y)
    if title is None:
        title = f"{profile.protocol.value}, offset {profile.fixed_offset * 1e3:+.3f} mm"

    xlo, xhi = float(x.min()), float(x.max())
    if xhi == xlo:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    ylo, yhi = 0.0, float((y + err).max())
    yhi = yhi * 1.05 if yhi > 0 else 1.0
    xt = nice_ticks(xlo, xhi)
    yt = nice_ticks(ylo, yhi)

    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def sx(v):
        return MARGIN_L + (v - xlo) / (xhi - xlo) * pw

    def sy(v):
        return MARGIN_T + ph - (v - ylo) / (yhi - ylo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f"<title>{escape(title)}</title>",
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in xt:
        if xlo <= t <= xhi:
            px = sx(t)
            out.append(f'<line x1="{px:.2f}" y1="{MARGIN_T + ph}" x2="{px:.2f}" y2="{MARGIN_T + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{px:.2f}" y="{MARGIN_T + ph + 18}" text-anchor="middle">{_fmt(t)}</text>')
    for t in yt:
        if ylo <= t <= yhi:
            py = sy(t)
            out.append(f'<line x1="{MARGIN_L - 5}" y1="{py:.2f}" x2="{MARGIN_L}" y2="{py:.2f}" stroke="black"/>')
            out.append(f'<text x="{MARGIN_L - 8}" y="{py + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
    out.append(
        f'<text x="{MARGIN_L + pw / 2}" y="{HEIGHT - 14}" text-anchor="middle">position (mm)</text>'
    )
    ylabel = "counts (arb. units)" if is_counts else "coincidences (arb. units)"
    if not is_counts and profile.protocol.value == "SinglesCalibration":
        ylabel = "singles (arb. units)"
    out.append(
        f'<text x="18" y="{MARGIN_T + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 18 {MARGIN_T + ph / 2})">{ylabel}</text>'
    )
    out.append(
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>'
    )
    if is_counts:
        for xi, yi, ei in zip(x, y, err):
            px, py = sx(xi), sy(yi)
            if ei > 0:
                out.append(
                    f'<line class="errorbar" x1="{px:.2f}" y1="{sy(yi - ei):.2f}" '
                    f'x2="{px:.2f}" y2="{sy(yi + ei):.2f}" stroke="#1f4e9c"/>'
                )
            out.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="2.5" fill="#1f4e9c"/>')
    else:
        pts = " ".join(f"{sx(xi):.2f},{sy(yi):.2f}" for xi, yi in zip(x, y))
        out.append(f'<polyline points="{pts}" fill="none" stroke="#b02318" stroke-width="1.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(profile: Union[ScanProfile, CountsProfile], path, title: Optional[str] = None) -> None:
    """Write :func:`render_svg` output to ``path``."""
    text = render_svg(profile, title)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
