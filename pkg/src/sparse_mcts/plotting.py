"""Cost-versus-cost scatter plots written as standalone SVG."""

from __future__ import annotations

import csv
from pathlib import Path
from xml.sax.saxutils import escape

from .errors import MissingColumn

REQUIRED = ("baseline_cost", "mcts_cost")
# (x column, y column): the y method is plotted against the x method
PAIRS = (
    ("baseline_cost", "mcts_cost"),
    ("exact_cost", "mcts_cost"),
    ("exact_cost", "baseline_cost"),
    ("random_mcts_cost", "mcts_cost"),
)

SIZE = 400
MARGIN = 50


def _label(col: str) -> str:
    return col[: -len("_cost")].replace("_", "-")


def pair_name(x: str, y: str) -> str:
    return f"{_label(y)}-vs-{_label(x)}"


def scatter_svg(xs, ys, xlabel: str, ylabel: str, title: str = "") -> str:
    """One marker per point plus the dashed y = x reference line."""
    lo = min(min(xs), min(ys))
    hi = max(max(xs), max(ys))
    if hi <= lo:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    span = SIZE - 2 * MARGIN

    def px(v):
        return MARGIN + (v - lo) / (hi - lo) * span

    def py(v):
        return SIZE - MARGIN - (v - lo) / (hi - lo) * span

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">',
        f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{span}" height="{span}" fill="none" stroke="black"/>',
        f'<line class="identity" x1="{px(lo):.2f}" y1="{py(lo):.2f}" x2="{px(hi):.2f}" y2="{py(hi):.2f}" '
        'stroke="gray" stroke-dasharray="4 3"/>',
    ]
    for x, y in zip(xs, ys):
        out.append(f'<circle class="point" cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="steelblue"/>')
    for v in (lo + pad, hi - pad):
        out.append(f'<text x="{px(v):.2f}" y="{SIZE - MARGIN + 15}" font-size="10" text-anchor="middle">{v:g}</text>')
        out.append(f'<text x="{MARGIN - 5}" y="{py(v):.2f}" font-size="10" text-anchor="end">{v:g}</text>')
    out.append(f'<text x="{SIZE / 2}" y="{SIZE - 12}" font-size="12" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="14" y="{SIZE / 2}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 14 {SIZE / 2})">{escape(ylabel)}</text>'
    )
    if title:
        out.append(f'<text x="{SIZE / 2}" y="25" font-size="14" text-anchor="middle">{escape(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def read_results(path) -> tuple[list[str], list[dict]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        return list(reader.fieldnames or []), rows


def plot_results(csv_path, out_dir) -> list[Path]:
    """Write one SVG per method pair that has values on at least one row."""
    header, rows = read_results(csv_path)
    missing = [c for c in REQUIRED if c not in header]
    if missing:
        raise MissingColumn(f"{csv_path}: missing column(s) {', '.join(missing)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for x, y in PAIRS:
        if x not in header or y not in header:
            continue
        pts = [(float(r[x]), float(r[y])) for r in rows if r[x] != "" and r[y] != ""]
        if not pts:
            continue
        name = pair_name(x, y)
        path = out_dir / f"{name}.svg"
        xs, ys = zip(*pts)
        path.write_text(scatter_svg(xs, ys, _label(x), _label(y), name))
        written.append(path)
    return written
