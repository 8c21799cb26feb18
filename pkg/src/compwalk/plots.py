"""Minimal deterministic SVG figures for an evaluation report."""
from __future__ import annotations

import json
import logging
import os
from xml.sax.saxutils import escape

log = logging.getLogger(__name__)

W, H = 640, 420
PAD = 60


def _svg(body, width=W, height=H):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">\n'
            f'<rect width="{width}" height="{height}" fill="white"/>\n'
            + "\n".join(body) + "\n</svg>\n")


def _f(x):
    return f"{x:.2f}"


def _text(x, y, s, anchor="start", extra=""):
    return f'<text x="{_f(x)}" y="{_f(y)}" text-anchor="{anchor}"{extra}>{escape(str(s))}</text>'


def _scale(lo, hi, a, b):
    span = (hi - lo) or 1.0
    return lambda v: a + (v - lo) / span * (b - a)


def _axes(title, xlabel, ylabel):
    return [
        _text(W / 2, 24, title, "middle", ' font-size="14"'),
        f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - 20}" y2="{H - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{H - PAD}" x2="{PAD}" y2="30" stroke="black"/>',
        _text(W / 2, H - 15, xlabel, "middle"),
        _text(15, H / 2, ylabel, "middle", f' transform="rotate(-90 15 {H / 2})"'),
    ]


def coherence_bars(report):
    coh = report["coherence"]
    items = sorted(coh["per_pathway"].items(), key=lambda kv: -kv[1])
    lo = min(0.0, min(v for _, v in items), coh["random_baseline"])
    y = _scale(lo, 1.0, H - PAD, 40)
    bw = (W - PAD - 30) / max(len(items), 1)
    body = _axes(f"Pathway coherence ({report.get('model', '')})", "pathway", "mean pairwise cosine")
    for k, (name, v) in enumerate(items):
        x = PAD + 5 + k * bw
        top, base = y(max(v, 0)), y(min(v, 0))
        body.append(f'<rect x="{_f(x)}" y="{_f(top)}" width="{_f(bw * 0.8)}" '
                    f'height="{_f(base - top)}" fill="#4477aa"/>')
        body.append(_text(x + bw * 0.4, H - PAD + 12, name[:12], "middle", ' font-size="8"'))
    yb = y(coh["random_baseline"])
    body.append(f'<line x1="{PAD}" y1="{_f(yb)}" x2="{W - 20}" y2="{_f(yb)}" '
                f'stroke="#cc3311" stroke-dasharray="4 3"/>')
    body.append(_text(W - 22, yb - 4, f"random {coh['random_baseline']:.3f}", "end"))
    return _svg(body)


def norm_degree_scatter(report):
    nd = report["norm_degree"]
    table = nd["table"]
    hubs = set(report.get("hubs", {}).get("nodes", []))
    degs = [row[1] for row in table]
    norms = [row[2] for row in table]
    x = _scale(min(degs), max(degs), PAD + 5, W - 30)
    y = _scale(min(norms), max(norms), H - PAD - 5, 40)
    r = nd.get("pearson_r")
    title = f"Norm vs degree ({report.get('model', '')})" + (f", r = {r:.3f}" if r is not None else "")
    body = _axes(title, "degree", "embedding norm")
    for name, d, n in table:
        if name not in hubs:
            body.append(f'<circle cx="{_f(x(d))}" cy="{_f(y(n))}" r="2" fill="#999999"/>')
    for name, d, n in table:
        if name in hubs:
            body.append(f'<circle cx="{_f(x(d))}" cy="{_f(y(n))}" r="4" fill="#cc3311"/>')
    return _svg(body)


def _color(v):
    # diverging blue-white-red on [-1, 1]
    v = max(-1.0, min(1.0, v))
    if v >= 0:
        c = int(255 * (1 - v))
        return f"rgb(255,{c},{c})"
    c = int(255 * (1 + v))
    return f"rgb({c},{c},255)"


def centroid_heatmap(report):
    mat = report["heatmap"]["ordered"]
    labels, values = mat["labels"], mat["values"]
    n = len(labels)
    size = 420
    cell = (size - 140) / n
    body = [_text(size / 2, 20, f"Centroid similarity ({report.get('model', '')})", "middle",
                  ' font-size="14"')]
    for i in range(n):
        body.append(_text(115, 130 + (i + 0.6) * cell, labels[i][:16], "end", ' font-size="8"'))
        body.append(_text(125 + (i + 0.5) * cell, 120, labels[i][:16], "start",
                          f' font-size="8" transform="rotate(-60 {_f(125 + (i + 0.5) * cell)} 120)"'))
        for j in range(n):
            body.append(f'<rect x="{_f(125 + j * cell)}" y="{_f(130 + i * cell)}" width="{_f(cell)}" '
                        f'height="{_f(cell)}" fill="{_color(values[i][j])}"/>')
    return _svg(body, size, size + 140)


def drift_trajectories(report):
    drift = report["drift"]
    pts = [p for d in drift.values() for p in d["trajectory"]]
    xs = [p[0] for p in pts]
    ys = [p[1] if len(p) > 1 else 0.0 for p in pts]
    x = _scale(min(xs), max(xs), PAD + 5, W - 30)
    y = _scale(min(ys), max(ys), H - PAD - 5, 40)
    body = _axes(f"Embedding drift ({report.get('model', '')})", "PC1", "PC2")
    palette = ["#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377", "#bbbbbb"]
    for k, (name, d) in enumerate(sorted(drift.items())):
        col = palette[k % len(palette)]
        traj = [(p[0], p[1] if len(p) > 1 else 0.0) for p in d["trajectory"]]
        path = " ".join(f"{_f(x(a))},{_f(y(b))}" for a, b in traj)
        body.append(f'<polyline points="{path}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        a, b = traj[-1]
        body.append(_text(x(a) + 4, y(b), f"{name} PC1={d['pc1']:.2f}", extra=f' fill="{col}" font-size="8"'))
    return _svg(body)


FIGURES = [
    ("coherence", "coherence.svg", coherence_bars),
    ("norm_degree", "norm_degree.svg", norm_degree_scatter),
    ("heatmap", "heatmap.svg", centroid_heatmap),
    ("drift", "drift.svg", drift_trajectories),
]


def plot_report(report, out_dir, prefix=""):
    """Write every figure whose report section exists; returns ``(written, warnings)``."""
    if isinstance(report, (str, os.PathLike)):
        with open(report, "r", encoding="utf-8") as fh:
            report = json.load(fh)
    os.makedirs(out_dir, exist_ok=True)
    written, warnings = [], []
    for section, fname, fn in FIGURES:
        data = report.get(section)
        if not data or (section == "norm_degree" and not data.get("table")):
            msg = f"report has no usable '{section}' section; skipping {fname}"
            log.warning(msg)
            warnings.append(msg)
            continue
        path = os.path.join(out_dir, prefix + fname)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(fn(report))
        written.append(path)
    return written, warnings
