"""Self-contained SVG line charts for profile comparisons.

No plotting dependency: each chart is a single static SVG file with axes,
tick labels, one polyline per series and a legend.  Good enough to eyeball
steady profiles and engine overlays; anything fancier belongs in the
reader's own tooling on top of the CSV output.
"""

import math

WIDTH, HEIGHT = 720, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 72, 24, 40, 48
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo, hi, target=6):
    """Round tick positions covering [lo, hi] at a 1/2/5 decade step."""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return [0.0, 1.0]
    if lo == hi:
        pad = abs(lo) if lo != 0 else 1.0
        lo, hi = lo - 0.5 * pad, hi + 0.5 * pad
    raw = (hi - lo) / max(target, 2)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        step = mult * mag
        if raw <= step:
            break
    first = math.ceil(lo / step) * step
    ticks = []
    value = first
    while value <= hi + 1e-12 * step:
        ticks.append(0.0 if abs(value) < 1e-12 * step else value)
        value += step
    return ticks or [lo, hi]


def _fmt(value):
    if value == 0:
        return "0"
    if abs(value) >= 1e4 or abs(value) < 1e-3:
        return f"{value:.2e}"
    return f"{value:.6g}"


def line_chart(path, x, series, title="", x_label="x", y_label=""):
    """Write one SVG with a polyline per (name -> y values) entry."""
    xs = list(x)
    ys_all = [v for values in series.values() for v in values]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if y_lo == y_hi:
        pad = abs(y_lo) if y_lo != 0 else 1.0
        y_lo, y_hi = y_lo - 0.5 * pad, y_hi + 0.5 * pad
    else:
        pad = 0.05 * (y_hi - y_lo)
        y_lo, y_hi = y_lo - pad, y_hi + pad
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def px(value):
        return MARGIN_L + (value - x_lo) / (x_hi - x_lo) * plot_w

    def py(value):
        return MARGIN_T + (y_hi - value) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
    ]
    for t in _ticks(x_lo, x_hi):
        if not x_lo <= t <= x_hi:
            continue
        xp = px(t)
        parts.append(f'<line x1="{xp:.1f}" y1="{MARGIN_T}" x2="{xp:.1f}" '
                     f'y2="{HEIGHT - MARGIN_B}" stroke="#dddddd"/>')
        parts.append(f'<text x="{xp:.1f}" y="{HEIGHT - MARGIN_B + 16}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{_fmt(t)}</text>')
    for t in _ticks(y_lo, y_hi):
        if not y_lo <= t <= y_hi:
            continue
        yp = py(t)
        parts.append(f'<line x1="{MARGIN_L}" y1="{yp:.1f}" '
                     f'x2="{WIDTH - MARGIN_R}" y2="{yp:.1f}" '
                     f'stroke="#dddddd"/>')
        parts.append(f'<text x="{MARGIN_L - 6}" y="{yp + 4:.1f}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="11">{_fmt(t)}</text>')
    parts.append(f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" '
                 f'height="{plot_h}" fill="none" stroke="#444444"/>')
    parts.append(f'<text x="{MARGIN_L + plot_w / 2:.0f}" y="{HEIGHT - 10}" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="12">{x_label}</text>')
    parts.append(f'<text x="18" y="{MARGIN_T + plot_h / 2:.0f}" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="12" transform="rotate(-90 18 '
                 f'{MARGIN_T + plot_h / 2:.0f})">{y_label}</text>')
    for k, (name, values) in enumerate(series.items()):
        color = COLORS[k % len(COLORS)]
        points = " ".join(f"{px(xv):.2f},{py(yv):.2f}"
                          for xv, yv in zip(xs, values))
        parts.append(f'<polyline points="{points}" fill="none" '
                     f'stroke="{color}" stroke-width="1.6"/>')
        ly = MARGIN_T + 14 + 16 * k
        lx = WIDTH - MARGIN_R - 150
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 26}" '
                     f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 32}" y="{ly}" '
                     f'font-family="sans-serif" font-size="12">{name}</text>')
    parts.append("</svg>")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")


def comparison_charts(out_dir, stem, x, snap_lbm, snap_fd,
                      fields=("alpha_g", "u_g", "u_l", "p_k")):
    """One engine-overlay chart per field; returns the written paths."""
    paths = []
    for name in fields:
        path = f"{out_dir}/{stem}_{name}.svg"
        line_chart(path, x,
                   {"lbm": snap_lbm[name], "fd": snap_fd[name]},
                   title=f"{stem}: {name} (final step {int(snap_lbm['step'])})",
                   x_label="x", y_label=name)
        paths.append(path)
    return paths
