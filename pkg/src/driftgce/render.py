"""Render a drift report as a standalone SVG figure.

Reads nothing but the report dict, so the picture can never disagree
with the numbers. Four panels: (a) per-class feature means of both
windows, (b) disagreement, global and per matched group, (c) action
vector rotation per matched pair, (d) a map of group centroids and
action vectors, drawn only for 2-d features. Output is plain SVG built
from formatted strings; with timestamps disabled (the default) the
bytes depend only on the report contents.
"""

from __future__ import annotations

import math
import time

PANEL_W = 460
PANEL_H = 340
MARGIN = 20
WIDTH = 2 * PANEL_W + 3 * MARGIN
HEIGHT = 2 * PANEL_H + 3 * MARGIN

_PRE_COLOR = "#4878cf"
_POST_COLOR = "#d65f5f"
_GRID = "#cccccc"
_TEXT = "#222222"


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _text(x, y, s, size=11, anchor="start", color=_TEXT, style=""):
    return (
        f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{size}" font-family="sans-serif" '
        f'text-anchor="{anchor}" fill="{color}"{style}>{_esc(s)}</text>'
    )


def _rect(x, y, w, h, fill, opacity=1.0):
    return (
        f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(h)}" '
        f'fill="{fill}" opacity="{opacity}"/>'
    )


def _line(x1, y1, x2, y2, color, width=1.0, dash=""):
    d = f' stroke-dasharray="{dash}"' if dash else ""
    return (
        f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
        f'stroke="{color}" stroke-width="{width}"{d}/>'
    )


def _circle(x, y, r, fill):
    return f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{r}" fill="{fill}"/>'


def _arrow(x1, y1, x2, y2, color, width=1.5):
    """Line with a small manual arrowhead; no marker defs needed."""
    parts = [_line(x1, y1, x2, y2, color, width)]
    ang = math.atan2(y2 - y1, x2 - x1)
    for da in (2.6, -2.6):
        hx = x2 + 7.0 * math.cos(ang + da)
        hy = y2 + 7.0 * math.sin(ang + da)
        parts.append(_line(x2, y2, hx, hy, color, width))
    return "".join(parts)


def _panel(ox, oy, title):
    return [
        _rect(ox, oy, PANEL_W, PANEL_H, "#ffffff"),
        f'<rect x="{ox}" y="{oy}" width="{PANEL_W}" height="{PANEL_H}" fill="none" '
        f'stroke="#888888"/>',
        _text(ox + 8, oy + 16, title, size=13),
    ]


def _panel_means(report, ox, oy):
    out = _panel(ox, oy, "(a) per-class feature means")
    data = report["data_layer"]
    pre, post = data["class_means_pre"], data["class_means_post"]
    keys = sorted(set(pre) | set(post))
    dims = max((len(v) for v in list(pre.values()) + list(post.values())), default=0)
    slots = [(c, j) for c in keys for j in range(dims)]
    if not slots:
        out.append(_text(ox + 8, oy + 40, "no class means"))
        return out
    plot_x, plot_y = ox + 40, oy + 30
    plot_w, plot_h = PANEL_W - 60, PANEL_H - 70
    base = plot_y + plot_h
    for frac in (0.0, 0.5, 1.0):
        y = base - frac * plot_h
        out.append(_line(plot_x, y, plot_x + plot_w, y, _GRID))
        out.append(_text(plot_x - 4, y + 4, _fmt(frac), size=9, anchor="end"))
    slot_w = plot_w / len(slots)
    bar_w = min(14.0, slot_w / 3)
    for s, (c, j) in enumerate(slots):
        cx = plot_x + (s + 0.5) * slot_w
        for val, color, off in (
            (pre.get(c, [None] * dims)[j] if j < len(pre.get(c, [])) else None, _PRE_COLOR, -bar_w),
            (post.get(c, [None] * dims)[j] if j < len(post.get(c, [])) else None, _POST_COLOR, 1.0),
        ):
            if val is None:
                continue
            h = max(min(val, 1.0), 0.0) * plot_h
            out.append(_rect(cx + off, base - h, bar_w, h, color, 0.85))
        out.append(_text(cx, base + 12, f"c{c} x{j + 1}", size=9, anchor="middle"))
    out.append(_rect(plot_x, oy + 22, 10, 10, _PRE_COLOR))
    out.append(_text(plot_x + 14, oy + 31, "pre", size=10))
    out.append(_rect(plot_x + 50, oy + 22, 10, 10, _POST_COLOR))
    out.append(_text(plot_x + 64, oy + 31, "post", size=10))
    return out


def _panel_disagreement(report, ox, oy):
    out = _panel(ox, oy, "(b) model disagreement")
    gdmae = report["model_layer"]["global_dmae"]
    matched = report["explanation_layer"]["matched"]
    plot_x, plot_y = ox + 40, oy + 30
    plot_w, plot_h = PANEL_W - 60, PANEL_H - 90
    base = plot_y + plot_h
    top = max([gdmae] + [m["local_dmae"] for m in matched] + [0.1])
    scale = plot_h / (1.1 * top)
    for frac in (0.0, 0.5, 1.0):
        v = frac * top
        y = base - v * scale
        out.append(_line(plot_x, y, plot_x + plot_w, y, _GRID))
        out.append(_text(plot_x - 4, y + 4, f"{v:.2f}", size=9, anchor="end"))
    bars = [("global", gdmae, "#555555")] + [
        (m["pre_key"], m["local_dmae"], _PRE_COLOR) for m in matched
    ]
    slot_w = plot_w / len(bars)
    bar_w = min(26.0, slot_w * 0.6)
    for s, (label, val, color) in enumerate(bars):
        cx = plot_x + (s + 0.5) * slot_w
        h = val * scale
        out.append(_rect(cx - bar_w / 2, base - h, bar_w, h, color, 0.9))
        out.append(_text(cx, base - h - 4, f"{val:.3f}", size=9, anchor="middle"))
        short = label.replace("Class ", "C").replace(", Pair ", "P")
        out.append(_text(cx, base + 12, short, size=9, anchor="middle"))
    gy = base - gdmae * scale
    out.append(_line(plot_x, gy, plot_x + plot_w, gy, "#555555", 1.0, "4 3"))
    out.append(
        _text(plot_x + 4, oy + PANEL_H - 8, f"decision: {report['headline']['decision']}", size=11)
    )
    return out


def _panel_rotation(report, ox, oy):
    out = _panel(ox, oy, "(c) action vector rotation per matched pair")
    matched = report["explanation_layer"]["matched"]
    if not matched:
        out.append(_text(ox + 8, oy + 40, "no matched pairs"))
        return out
    slots = len(matched)
    cols = min(slots, 4)
    rows = (slots + cols - 1) // cols
    cell_w = (PANEL_W - 20) / cols
    cell_h = (PANEL_H - 50) / rows
    radius = 0.32 * min(cell_w, cell_h)
    norms = [
        max(
            math.hypot(*m["cfav_pre"][:2]) if len(m["cfav_pre"]) >= 2 else abs(m["cfav_pre"][0]),
            math.hypot(*m["cfav_post"][:2]) if len(m["cfav_post"]) >= 2 else abs(m["cfav_post"][0]),
            1e-12,
        )
        for m in matched
    ]
    for s, m in enumerate(matched):
        cx = ox + 10 + (s % cols + 0.5) * cell_w
        cy = oy + 30 + (s // cols + 0.55) * cell_h
        out.append(_circle(cx, cy, 2, "#555555"))
        for vec, color in ((m["cfav_pre"], _PRE_COLOR), (m["cfav_post"], _POST_COLOR)):
            vx = vec[0] if len(vec) >= 1 else 0.0
            vy = vec[1] if len(vec) >= 2 else 0.0
            r = radius / norms[s]
            # svg y axis points down
            out.append(_arrow(cx, cy, cx + vx * r, cy - vy * r, color))
        short = m["pre_key"].replace("Class ", "C").replace(", Pair ", "P")
        cos = m["cfav_cosine"]
        out.append(_text(cx, cy + radius + 16, f"{short} cos={cos:.2f}", size=9, anchor="middle"))
    return out


def _panel_map(report, ox, oy):
    out = _panel(ox, oy, "(d) group centroids and actions")
    ex = report["explanation_layer"]
    all_groups = ex["groups_pre"] + ex["groups_post"]
    if any(len(g["centroid"]) != 2 for g in all_groups) or not all_groups:
        out.append(_text(ox + 8, oy + 40, "drawn only for 2-d features"))
        return out
    plot_x, plot_y = ox + 35, oy + 28
    side = min(PANEL_W - 55, PANEL_H - 60)

    def to_px(pt):
        return plot_x + pt[0] * side, plot_y + (1.0 - pt[1]) * side

    out.append(
        f'<rect x="{plot_x}" y="{plot_y}" width="{side}" height="{side}" fill="none" '
        f'stroke="{_GRID}"/>'
    )
    for m in ex["matched"]:
        x1, y1 = to_px(m["centroid_pre"])
        x2, y2 = to_px(m["centroid_post"])
        out.append(_line(x1, y1, x2, y2, "#999999", 1.0, "3 3"))
    for groups, color, tag in ((ex["groups_pre"], _PRE_COLOR, "pre"), (ex["groups_post"], _POST_COLOR, "post")):
        for g in groups:
            x, y = to_px(g["centroid"])
            vx, vy = g["cfav"]
            tip = to_px((g["centroid"][0] + vx, g["centroid"][1] + vy))
            out.append(_arrow(x, y, tip[0], tip[1], color, 1.2))
            out.append(_circle(x, y, 4, color))
            short = g["key"].replace("Class ", "C").replace(", Pair ", "P")
            out.append(_text(x + 6, y - 5, short, size=9, color=color))
    for g in ex["disappeared"]:
        x, y = to_px(g["centroid"])
        out.append(_line(x - 5, y - 5, x + 5, y + 5, "#000000", 1.6))
        out.append(_line(x - 5, y + 5, x + 5, y - 5, "#000000", 1.6))
    for g in ex["appeared"]:
        x, y = to_px(g["centroid"])
        out.append(_line(x - 5, y, x + 5, y, "#000000", 1.6))
        out.append(_line(x, y - 5, x, y + 5, "#000000", 1.6))
    out.append(_text(plot_x, plot_y + side + 14, "x disappeared, + appeared", size=9))
    return out


def render_report(report: dict, path=None, include_timestamp: bool = False) -> str:
    """Build the SVG document; optionally write it to path. Returns the text."""
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
    ]
    if include_timestamp:
        parts.append(f"<!-- generated {time.strftime('%Y-%m-%d %H:%M:%S')} -->")
    parts.append(_rect(0, 0, WIDTH, HEIGHT, "#f7f7f7"))
    panels = (
        (_panel_means, MARGIN, MARGIN),
        (_panel_disagreement, 2 * MARGIN + PANEL_W, MARGIN),
        (_panel_rotation, MARGIN, 2 * MARGIN + PANEL_H),
        (_panel_map, 2 * MARGIN + PANEL_W, 2 * MARGIN + PANEL_H),
    )
    for fn, ox, oy in panels:
        parts.extend(fn(report, ox, oy))
    parts.append("</svg>")
    text = "\n".join(parts) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
