"""Atomic file output, run manifests and deterministic SVG line plots."""

from __future__ import annotations

import dataclasses
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

__all__ = ["atomic_write_text", "atomic_write_json", "RunManifest", "render_svg", "to_jsonable"]


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return str(path)


def to_jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def atomic_write_json(path, obj):
    return atomic_write_text(path, json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n")


@dataclasses.dataclass
class RunManifest:
    command: str
    model_hash: str | None = None
    seeds: dict = dataclasses.field(default_factory=dict)
    budgets: dict = dataclasses.field(default_factory=dict)
    version: str = ""
    wall_time: float = 0.0
    outputs: list = dataclasses.field(default_factory=list)
    warnings: list = dataclasses.field(default_factory=list)
    status: str = "running"
    exit_code: int | None = None
    error: str | None = None

    def add_output(self, path):
        path = str(path)
        if path not in self.outputs:
            self.outputs.append(path)
        return path

    def write(self, path):
        self.add_output(path)
        return atomic_write_json(path, self)


_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"]


def _nice_ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def render_svg(series, title="", x_label="", y_label="", width=640, height=420):
    """Line plot of ``[(label, curve), ...]`` as an SVG string.

    Non-finite points are skipped.  Points with a non-empty flag are drawn
    as hollow squares.  A legend is added when there are several series.
    Output depends only on the inputs.
    """
    ml, mr, mt, mb = 70, 20, 36, 50
    pw, ph = width - ml - mr, height - mt - mb
    xs = np.concatenate([np.asarray(c.x)[np.isfinite(c.y)] for _, c in series] or [np.zeros(0)])
    ys = np.concatenate([np.asarray(c.y)[np.isfinite(c.y)] for _, c in series] or [np.zeros(0)])
    if len(xs) == 0:
        xs, ys = np.array([0.0, 1.0]), np.array([0.0, 1.0])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.04 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def py(y):
        return mt + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _nice_ticks(x0, x1):
        X = px(t)
        out.append(f'<line x1="{X:.2f}" y1="{mt + ph}" x2="{X:.2f}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{mt + ph + 18}" text-anchor="middle">{t:.4g}</text>')
    for t in _nice_ticks(y0, y1):
        Y = py(t)
        out.append(f'<line x1="{ml - 5}" y1="{Y:.2f}" x2="{ml}" y2="{Y:.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{Y + 4:.2f}" text-anchor="end">{t:.4g}</text>')
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="13">{_esc(title)}</text>')
    if x_label:
        out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{_esc(x_label)}</text>')
    if y_label:
        out.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{_esc(y_label)}</text>')
    for k, (label, c) in enumerate(series):
        color = _PALETTE[k % len(_PALETTE)]
        fin = np.isfinite(c.y)
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(np.asarray(c.x)[fin], np.asarray(c.y)[fin]))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        flags = c.flags or [""] * len(c.x)
        for x, y, f in zip(c.x, c.y, flags):
            if f and math.isfinite(y):
                out.append(f'<rect x="{px(x) - 3:.2f}" y="{py(y) - 3:.2f}" width="6" height="6" '
                           f'fill="none" stroke="{color}"/>')
    if len(series) > 1:
        for k, (label, _) in enumerate(series):
            color = _PALETTE[k % len(_PALETTE)]
            Y = mt + 12 + 16 * k
            out.append(f'<line x1="{ml + pw - 130}" y1="{Y}" x2="{ml + pw - 110}" y2="{Y}" stroke="{color}" '
                       f'stroke-width="2"/>')
            out.append(f'<text x="{ml + pw - 104}" y="{Y + 4}">{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
