"""Minimal static SVG plots. No plotting library; each plot is a single
file with one ``<path>`` per series, so tests can compare path data."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable
from xml.sax.saxutils import escape

import numpy as np

PLOT_KINDS = ("trajectories", "opinions", "separation", "bifurcation")
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")

W, H, PAD = 640, 480, 48


class _Frame:
    """Maps data coordinates onto the drawing area; ``equal`` keeps aspect."""

    def __init__(self, xs, ys, equal=False):
        xs = np.asarray([x for x in xs if math.isfinite(x)] or [0.0, 1.0])
        ys = np.asarray([y for y in ys if math.isfinite(y)] or [0.0, 1.0])
        x0, x1, y0, y1 = xs.min(), xs.max(), ys.min(), ys.max()
        if x1 - x0 < 1e-12:
            x0, x1 = x0 - 1, x1 + 1
        if y1 - y0 < 1e-12:
            y0, y1 = y0 - 1, y1 + 1
        sx = (W - 2 * PAD) / (x1 - x0)
        sy = (H - 2 * PAD) / (y1 - y0)
        if equal:
            sx = sy = min(sx, sy)
        self.x0, self.y0, self.sx, self.sy = x0, y0, sx, sy
        self.bounds = (x0, x1, y0, y1)

    def __call__(self, x, y):
        return PAD + (x - self.x0) * self.sx, H - PAD - (y - self.y0) * self.sy


def _polyline(frame, xs, ys, color, width=1.5, dash=None, stride=1) -> str:
    pts = []
    for k in range(0, len(xs), stride):
        if math.isfinite(xs[k]) and math.isfinite(ys[k]):
            pts.append(frame(xs[k], ys[k]))
    if len(xs) and (len(xs) - 1) % stride:
        pts.append(frame(xs[-1], ys[-1]))
    if not pts:
        return ""
    d = "M" + " L".join(f"{x:.2f},{y:.2f}" for x, y in pts)
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return f'<path d="{d}" fill="none" stroke="{color}" stroke-width="{width}"{extra}/>'


def _doc(title, body, xlabel="", ylabel="", frame=None) -> str:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.0f}" y="24" text-anchor="middle" font-size="16">{escape(title)}</text>',
        f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" fill="none" stroke="#888"/>',
    ]
    if frame is not None:
        x0, x1, y0, y1 = frame.bounds
        parts.append(f'<text x="{PAD}" y="{H - PAD + 16}" font-size="11">{x0:.3g}</text>')
        parts.append(f'<text x="{W - PAD}" y="{H - PAD + 16}" font-size="11" text-anchor="end">{x1:.3g}</text>')
        parts.append(f'<text x="{PAD - 4}" y="{H - PAD}" font-size="11" text-anchor="end">{y0:.3g}</text>')
        parts.append(f'<text x="{PAD - 4}" y="{PAD + 10}" font-size="11" text-anchor="end">{y1:.3g}</text>')
    if xlabel:
        parts.append(f'<text x="{W / 2:.0f}" y="{H - 12}" text-anchor="middle" font-size="13">{escape(xlabel)}</text>')
    if ylabel:
        parts.append(
            f'<text x="14" y="{H / 2:.0f}" text-anchor="middle" font-size="13" '
            f'transform="rotate(-90 14 {H / 2:.0f})">{escape(ylabel)}</text>'
        )
    parts.extend(b for b in body if b)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _stride(n, target=800):
    return max(1, n // target)


def trajectories_svg(log, scenario, title="trajectories") -> str:
    """Paths with a circle at each start and a square at each goal."""
    xs = [c for a in scenario.airplanes for c in (a.start[0], a.goal[0])] + list(log.column("x"))
    ys = [c for a in scenario.airplanes for c in (a.start[1], a.goal[1])] + list(log.column("y"))
    fr = _Frame(xs, ys, equal=True)
    body = []
    for k, a in enumerate(scenario.airplanes):
        col = PALETTE[k % len(PALETTE)]
        px = np.concatenate([[a.start[0]], log.column("x", a.id)])
        py = np.concatenate([[a.start[1]], log.column("y", a.id)])
        body.append(_polyline(fr, px, py, col, stride=_stride(len(px))))
        sx, sy = fr(*a.start)
        gx, gy = fr(*a.goal)
        body.append(f'<circle cx="{sx:.2f}" cy="{sy:.2f}" r="5" fill="{col}"/>')
        body.append(f'<rect x="{gx - 5:.2f}" y="{gy - 5:.2f}" width="10" height="10" fill="none" stroke="{col}" stroke-width="2"/>')
        body.append(f'<text x="{sx + 7:.2f}" y="{sy - 7:.2f}" font-size="12" fill="{col}">A{a.id}</text>')
    return _doc(title, body, "x", "y", fr)


def _time_series(log, scenario, column, title, ylabel, extra=()) -> str:
    t = log.column("t")
    vals = log.column(column)
    fr = _Frame(t, list(vals) + [e[1] for e in extra])
    body = []
    for k, a in enumerate(scenario.airplanes):
        tt, vv = log.column("t", a.id), log.column(column, a.id)
        body.append(_polyline(fr, tt, vv, PALETTE[k % len(PALETTE)], stride=_stride(len(tt))))
    for label, y in extra:
        body.append(_polyline(fr, [fr.bounds[0], fr.bounds[1]], [y, y], "#555", 1.0, "6,4"))
        _, py = fr(fr.bounds[0], y)
        body.append(f'<text x="{W - PAD - 4}" y="{py - 4:.2f}" font-size="11" text-anchor="end">{escape(label)}</text>')
    return _doc(title, body, "t", ylabel, fr)


def opinions_svg(log, scenario, title="opinions") -> str:
    return _time_series(log, scenario, "z", title, "z")


def separation_svg(log, scenario, title="separation") -> str:
    """Minimum pairwise separation against time, with the safe margin."""
    t = log.column("t", log.plane_ids()[0]) if len(log) else np.array([])
    sep = log.column("min_sep", log.plane_ids()[0]) if len(log) else np.array([])
    # rows after the last airplane but one lands carry inf
    sep = np.where(np.isfinite(sep), sep, np.nan)
    r = scenario.safety.r
    fr = _Frame(list(t), list(sep) + [0.0, r])
    body = [
        _polyline(fr, t, sep, PALETTE[0], stride=_stride(len(t))),
        _polyline(fr, [fr.bounds[0], fr.bounds[1]], [r, r], "#d62728", 1.0, "6,4"),
    ]
    return _doc(title, body, "t", "min separation", fr)


def bifurcation_svg(sweep, title="bifurcation") -> str:
    """Equilibria against attention; filled dots stable, hollow unstable."""
    rows = list(sweep.rows())
    fr = _Frame([r[0] for r in rows], [0.5 * (r[1] + r[2]) for r in rows])
    body = []
    for u, z1, z2, stable in rows:
        x, y = fr(u, 0.5 * (z1 + z2))
        fill = "#1f77b4" if stable else "white"
        body.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="{fill}" stroke="#1f77b4"/>')
    uc = sweep.predicted_critical
    if fr.bounds[0] <= uc <= fr.bounds[1]:
        body.append(_polyline(fr, [uc, uc], [fr.bounds[2], fr.bounds[3]], "#555", 1.0, "6,4"))
    return _doc(title, body, "u", "(z1 + z2) / 2", fr)


def write_run_svgs(out_dir, run_name, log, scenario, kinds: Iterable[str] = ("trajectories", "opinions", "separation")):
    """Write ``<run>_<kind>.svg`` for each kind; returns the paths."""
    makers = {"trajectories": trajectories_svg, "opinions": opinions_svg, "separation": separation_svg}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for kind in kinds:
        p = out / f"{run_name}_{kind}.svg"
        p.write_text(makers[kind](log, scenario, title=f"{run_name}: {kind}"), encoding="utf-8")
        paths.append(p)
    return paths


def write_bifurcation_svg(out_dir, run_name, sweep) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p = out / f"{run_name}_bifurcation.svg"
    p.write_text(bifurcation_svg(sweep, title=f"{run_name}: bifurcation"), encoding="utf-8")
    return p
