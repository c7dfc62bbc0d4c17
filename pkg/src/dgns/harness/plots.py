"""Minimal SVG line charts written by hand, so reports need no plotting library."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

WIDTH, HEIGHT, PAD = 640, 400, 56
COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _finite_points(xs, ys, log_y):
    pts = []
    for x, y in zip(xs, ys):
        if x is None or y is None:
            continue
        x, y = float(x), float(y)
        if not (math.isfinite(x) and math.isfinite(y)):
            continue
        if log_y:
            if y <= 0:
                continue
            y = math.log10(y)
        pts.append((x, y))
    return pts


def line_chart(series: dict, title: str, x_label: str, y_label: str, log_y: bool = False) -> str:
    """``series`` maps a legend label to an (xs, ys) pair."""
    curves = {name: _finite_points(xs, ys, log_y) for name, (xs, ys) in series.items()}
    every = [p for pts in curves.values() for p in pts]
    if every:
        x0, x1 = min(p[0] for p in every), max(p[0] for p in every)
        y0, y1 = min(p[1] for p in every), max(p[1] for p in every)
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def sx(x):
        return PAD + (x - x0) / (x1 - x0) * (WIDTH - 2 * PAD)

    def sy(y):
        return HEIGHT - PAD - (y - y0) / (y1 - y0) * (HEIGHT - 2 * PAD)

    y_fmt = (lambda v: f"1e{v:.1f}") if log_y else (lambda v: f"{v:.3g}")
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{PAD}" y1="{HEIGHT - PAD}" x2="{WIDTH - PAD}" y2="{HEIGHT - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{HEIGHT - PAD}" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 14}" text-anchor="middle">{escape(x_label)}</text>',
        f'<text x="14" y="{HEIGHT / 2}" text-anchor="middle" transform="rotate(-90 14 {HEIGHT / 2})">{escape(y_label)}</text>',
        f'<text x="{PAD}" y="{HEIGHT - PAD + 16}" text-anchor="middle">{x0:.3g}</text>',
        f'<text x="{WIDTH - PAD}" y="{HEIGHT - PAD + 16}" text-anchor="middle">{x1:.3g}</text>',
        f'<text x="{PAD - 4}" y="{HEIGHT - PAD}" text-anchor="end">{y_fmt(y0)}</text>',
        f'<text x="{PAD - 4}" y="{PAD + 4}" text-anchor="end">{y_fmt(y1)}</text>',
    ]
    for i, (name, pts) in enumerate(curves.items()):
        colour = COLOURS[i % len(COLOURS)]
        if pts:
            coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
            out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{coords}"/>')
        out.append(
            f'<text x="{WIDTH - PAD - 4}" y="{PAD + 14 * (i + 1)}" text-anchor="end" fill="{colour}">{escape(name)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_report_plots(report: dict, out_dir) -> list[Path]:
    """U_k against k, F and H against t, and the criterion densities against t."""
    plots = Path(out_dir) / "plots"
    plots.mkdir(parents=True, exist_ok=True)
    written = []

    u_vals = (report.get("ledger") or {}).get("U") or []
    ks = list(range(1, len(u_vals) + 1))
    svg = line_chart({"U_k": (ks, u_vals)}, "Level energies", "k", "U_k", log_y=True)
    written.append(_write(plots / "ledger.svg", svg))

    g = report.get("gronwall") or {}
    times = g.get("times") or []
    svg = line_chart(
        {"F": (times, g.get("F") or []), "H": (times, g.get("H") or [])},
        "Majorant comparison",
        "t",
        "value",
        log_y=True,
    )
    written.append(_write(plots / "gronwall.svg", svg))

    dens = report.get("densities") or {}
    t = dens.get("time") or []
    curves = {name: (t, dens.get(name) or []) for name in ("log_ps", "l5", "vorticity_l1")}
    svg = line_chart(curves, "Criterion densities", "t", "density", log_y=True)
    written.append(_write(plots / "densities.svg", svg))
    return written


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path
