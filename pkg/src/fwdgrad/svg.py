"""Minimal deterministic SVG line plots (no external renderer)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 190, 40, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


@dataclass(frozen=True)
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    dashed: bool = False
    step: bool = False


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float, log: bool) -> str:
    if log:
        return f"1e{int(round(v))}"
    return f"{v:.3g}"


class _Axis:
    def __init__(self, lo, hi, pix_lo, pix_hi, log):
        self.log = log
        if log:
            lo, hi = math.log10(lo), math.log10(hi)
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        self.lo, self.hi, self.pix_lo, self.pix_hi = lo, hi, pix_lo, pix_hi

    def __call__(self, v):
        if self.log:
            v = math.log10(v)
        return self.pix_lo + (v - self.lo) / (self.hi - self.lo) * (self.pix_hi - self.pix_lo)

    def ticks(self):
        if self.log:
            return [float(k) for k in range(math.ceil(self.lo), math.floor(self.hi) + 1)]
        return [self.lo + k * (self.hi - self.lo) / 4 for k in range(5)]


def line_plot(
    series: Sequence[Series],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    logx: bool = False,
    logy: bool = False,
    floor: float = 1e-12,
    ylim: tuple[float, float] | None = None,
) -> str:
    """Render series as an SVG document string.

    Log axes clamp values below ``floor``; non-finite points are dropped.
    """
    pts = []
    for s in series:
        xs, ys = [], []
        for x, y in zip(s.x, s.y):
            x, y = float(x), float(y)
            if not (math.isfinite(x) and math.isfinite(y)):
                continue
            if logx:
                x = max(x, floor)
            if logy:
                y = max(y, floor)
            xs.append(x)
            ys.append(y)
        pts.append((xs, ys))
    all_x = [x for xs, _ in pts for x in xs] or [1.0]
    all_y = [y for _, ys in pts for y in ys] or [1.0]
    ax = _Axis(min(all_x), max(all_x), MARGIN_L, WIDTH - MARGIN_R, logx)
    y_lo, y_hi = ylim if ylim is not None else (min(all_y), max(all_y))
    ay = _Axis(y_lo, y_hi, HEIGHT - MARGIN_B, MARGIN_T, logy)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2 - MARGIN_R / 2:.0f}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>',
    ]
    x0, x1 = MARGIN_L, WIDTH - MARGIN_R
    y0, y1 = HEIGHT - MARGIN_B, MARGIN_T
    out.append(f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" fill="none" stroke="black"/>')
    for t in ax.ticks():
        px = ax.pix_lo + (t - ax.lo) / (ax.hi - ax.lo) * (ax.pix_hi - ax.pix_lo)
        out.append(f'<line x1="{_fmt(px)}" y1="{y0}" x2="{_fmt(px)}" y2="{y0 + 4}" stroke="black"/>')
        out.append(f'<text x="{_fmt(px)}" y="{y0 + 16}" text-anchor="middle">{_tick_label(t, logx)}</text>')
    for t in ay.ticks():
        py = ay.pix_lo + (t - ay.lo) / (ay.hi - ay.lo) * (ay.pix_hi - ay.pix_lo)
        out.append(f'<line x1="{x0 - 4}" y1="{_fmt(py)}" x2="{x0}" y2="{_fmt(py)}" stroke="black"/>')
        out.append(f'<text x="{x0 - 6}" y="{_fmt(py + 4)}" text-anchor="end">{_tick_label(t, logy)}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.0f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{(y0 + y1) / 2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {(y0 + y1) / 2:.0f})">{escape(ylabel)}</text>'
    )

    for k, (s, (xs, ys)) in enumerate(zip(series, pts)):
        color = PALETTE[k % len(PALETTE)]
        coords = []
        for i, (x, y) in enumerate(zip(xs, ys)):
            if s.step and i > 0:
                coords.append(f"{_fmt(ax(x))},{_fmt(ay(ys[i - 1]))}")
            coords.append(f"{_fmt(ax(x))},{_fmt(ay(y))}")
        dash = ' stroke-dasharray="6,4"' if s.dashed else ""
        if coords:
            out.append(
                f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{" ".join(coords)}"/>'
            )
        ly = MARGIN_T + 14 * k + 6
        out.append(f'<line x1="{x1 + 10}" y1="{ly}" x2="{x1 + 34}" y2="{ly}" stroke="{color}" stroke-width="1.5"{dash}/>')
        out.append(f'<text x="{x1 + 40}" y="{ly + 4}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def convergence_plot(traces: dict[str, list[tuple[int, float]]], f_star: float, title: str = "") -> str:
    """Best objective gap vs evaluations; forward-gradient solvers are dashed."""
    series = [
        Series(label, [e for e, _ in tr], [b - f_star for _, b in tr], dashed="forward" in label)
        for label, tr in traces.items()
    ]
    return line_plot(series, title, "gradient evaluations", "best f - f*", logy=True)


def profile_plot(profile, title: str = "") -> str:
    """Step plot of rho_s(tau) on a log tau axis."""
    series = [
        Series(label, list(profile.tau), list(profile.rho[i]), dashed="forward" in label, step=True)
        for i, label in enumerate(profile.solvers)
    ]
    return line_plot(series, title, "tau", "rho(tau)", logx=True, ylim=(0.0, 1.0))
