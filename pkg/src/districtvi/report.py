"""Standalone SVG charts and the consolidated JSON run report.

Charts are plain SVG 1.1 text built with string formatting; every number is
printed with fixed precision so identical inputs give identical bytes.
Drawn elements carry a ``class`` attribute (``point``, ``bar``, ``member``,
``separator``...) so their counts can be checked against the inputs.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence
from xml.sax.saxutils import escape

from .vitality import LETTERS, TrendModel, predict

WIDTH, HEIGHT = 800, 600
FONT_SIZE = 12
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _f(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def _attr(value) -> str:
    return escape(str(value), {'"': "&quot;"})


class _Svg:
    def __init__(self, title: str = "", width: int = WIDTH, height: int = HEIGHT):
        self.width, self.height = width, height
        self.parts: list[str] = []
        if title:
            self.text(width / 2, 24, title, anchor="middle", size=FONT_SIZE + 4, cls="title")

    def add(self, tag: str, cls: Optional[str] = None, body: Optional[str] = None, **attrs) -> None:
        items = []
        if cls:
            items.append(f'class="{_attr(cls)}"')
        for k, v in attrs.items():
            if v is None:
                continue
            k = k.rstrip("_").replace("_", "-")
            items.append(f'{k}="{_attr(v)}"')
        head = f"<{tag} {' '.join(items)}"
        if body is None:
            self.parts.append(head + "/>")
        else:
            self.parts.append(f"{head}>{body}</{tag}>")

    def line(self, x1, y1, x2, y2, cls=None, stroke="#000", width=1.0, dash=None):
        self.add("line", cls, x1=_f(x1), y1=_f(y1), x2=_f(x2), y2=_f(y2),
                 stroke=stroke, stroke_width=_f(width), stroke_dasharray=dash)

    def text(self, x, y, content, anchor="start", size=FONT_SIZE, cls=None):
        self.add("text", cls, body=escape(str(content)), x=_f(x), y=_f(y),
                 font_size=size, font_family="sans-serif", text_anchor=anchor)

    def render(self) -> str:
        head = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
            f'width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}">\n'
            f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="#ffffff"/>\n'
        )
        return head + "\n".join(self.parts) + "\n</svg>\n"


class _Axes:
    """Linear data-to-pixel mapping for an x/y plot area."""

    def __init__(self, x_range, y_range, left=70, right=WIDTH - 30, top=50, bottom=HEIGHT - 60):
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        if self.x1 == self.x0:
            self.x0, self.x1 = self.x0 - 1, self.x1 + 1
        if self.y1 == self.y0:
            self.y0, self.y1 = self.y0 - 1, self.y1 + 1
        self.left, self.right, self.top, self.bottom = left, right, top, bottom

    def x(self, v):
        return self.left + (v - self.x0) / (self.x1 - self.x0) * (self.right - self.left)

    def y(self, v):
        return self.bottom - (v - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)

    def frame(self, svg: _Svg, x_label="", y_label="", y_ticks=(), x_ticks=()):
        svg.line(self.left, self.bottom, self.right, self.bottom, cls="axis")
        svg.line(self.left, self.top, self.left, self.bottom, cls="axis")
        for v in y_ticks:
            svg.line(self.left - 4, self.y(v), self.left, self.y(v), cls="tick")
            svg.text(self.left - 8, self.y(v) + 4, _tick(v), anchor="end", cls="tick-label")
        for v in x_ticks:
            svg.line(self.x(v), self.bottom, self.x(v), self.bottom + 4, cls="tick")
            svg.text(self.x(v), self.bottom + 18, _tick(v), anchor="middle", cls="tick-label")
        if x_label:
            svg.text((self.left + self.right) / 2, HEIGHT - 15, x_label, anchor="middle", cls="axis-label")
        if y_label:
            svg.text(16, (self.top + self.bottom) / 2, y_label, anchor="middle", cls="axis-label")


def _tick(v) -> str:
    if float(v).is_integer():
        return str(int(v))
    return f"{v:.2f}"


# -- radar charts ----------------------------------------------------------

RADAR_CENTER = (WIDTH / 2, HEIGHT / 2 + 10)
RADAR_RADIUS = 220.0
RADAR_RINGS = (0.25, 0.5, 0.75, 1.0)


def radar_point(value: float, axis: int, n_axes: int) -> tuple[float, float]:
    """Pixel position of ``value`` on axis ``axis``; axis 0 points to 12 o'clock, then clockwise."""
    theta = 2.0 * math.pi * axis / n_axes
    cx, cy = RADAR_CENTER
    r = RADAR_RADIUS * value
    return cx + r * math.sin(theta), cy - r * math.cos(theta)


def _check_row(row, d=None):
    row = [float(v) for v in row]
    if d is not None and len(row) != d:
        raise ValueError(f"row has {len(row)} values, expected {d}")
    if any(not (0.0 <= v <= 1.0) for v in row):
        raise ValueError("radar values must lie in [0, 1]")
    return row


def _radar_frame(svg: _Svg, labels: Sequence[str]):
    d = len(labels)
    for ring in RADAR_RINGS:
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in (radar_point(ring, i, d) for i in range(d)))
        svg.add("polygon", "ring", points=pts, fill="none", stroke="#cccccc", stroke_width="1")
    for i, label in enumerate(labels):
        x, y = radar_point(1.0, i, d)
        svg.line(RADAR_CENTER[0], RADAR_CENTER[1], x, y, cls="spoke", stroke="#999999")
        lx, ly = radar_point(1.12, i, d)
        anchor = "middle" if abs(lx - RADAR_CENTER[0]) < 1 else ("start" if lx > RADAR_CENTER[0] else "end")
        svg.text(lx, ly + 4, label, anchor=anchor, cls="axis-label")


def _radar_polygon(svg: _Svg, row, cls, color, opacity):
    d = len(row)
    pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in (radar_point(v, i, d) for i, v in enumerate(row)))
    svg.add("polygon", cls, points=pts, fill=color, fill_opacity=_f(opacity),
            stroke=color, stroke_width="1.5", stroke_opacity=_f(min(1.0, opacity * 2.5)))


def radar_svg(row: Sequence[float], labels: Sequence[str], title: str = "") -> str:
    if len(labels) < 3:
        raise ValueError("a radar chart needs at least 3 axes")
    row = _check_row(row, len(labels))
    svg = _Svg(title)
    _radar_frame(svg, labels)
    _radar_polygon(svg, row, "member", PALETTE[0], 0.35)
    return svg.render()


def stacked_radar_svg(rows: Sequence[Sequence[float]], labels: Sequence[str], title: str = "") -> str:
    """All rows overlaid on one frame with the same translucency."""
    if not rows:
        raise ValueError("stacked radar needs at least one row")
    if len(labels) < 3:
        raise ValueError("a radar chart needs at least 3 axes")
    rows = [_check_row(r, len(labels)) for r in rows]
    svg = _Svg(title)
    _radar_frame(svg, labels)
    for row in rows:
        _radar_polygon(svg, row, "member", PALETTE[0], 0.35 if len(rows) == 1 else 0.12)
    return svg.render()


# -- bar charts ------------------------------------------------------------

def _bars(svg: _Svg, ax: _Axes, heights, labels, color=PALETTE[0]):
    n = len(heights)
    slot = (ax.right - ax.left) / n
    for i, (h, label) in enumerate(zip(heights, labels)):
        x = ax.left + i * slot + slot * 0.15
        top = ax.y(h)
        svg.add("rect", "bar", x=_f(x), y=_f(min(top, ax.bottom)), width=_f(slot * 0.7),
                height=_f(abs(ax.bottom - top)), fill=color, data_value=repr(float(h)),
                data_label=label)
        svg.text(x + slot * 0.35, ax.bottom + 18, label, anchor="middle", cls="bar-label")


def cluster_histogram_svg(sizes: Sequence[int], letters: Sequence[str], title: str = "Clusters distribution") -> str:
    if not sizes:
        raise ValueError("no clusters to plot")
    if len(sizes) != len(letters):
        raise ValueError("sizes and letters differ in length")
    top = max(sizes)
    ax = _Axes((0, 1), (0, top))
    svg = _Svg(title)
    ax.frame(svg, "Cluster", "Number of dissemination areas", y_ticks=_int_ticks(top))
    _bars(svg, ax, sizes, letters)
    return svg.render()


def _int_ticks(top: int) -> list[int]:
    step = max(1, math.ceil(top / 8))
    return list(range(0, top + 1, step))


def weights_bar_svg(feature_ids: Sequence[int], weights: Sequence[float], ordering: Sequence[int] = (),
                    title: str = "Weights of feature") -> str:
    """One bar per feature in id order; the rank order is printed underneath."""
    if not feature_ids:
        raise ValueError("no features to plot")
    pairs = sorted(zip(feature_ids, weights))
    ymax = max(max(w for _, w in pairs), 1e-12)
    ax = _Axes((0, 1), (0, ymax), bottom=HEIGHT - 80)
    svg = _Svg(title)
    ticks = [ymax * i / 4 for i in range(5)]
    ax.frame(svg, "", "Weight", y_ticks=ticks)
    _bars(svg, ax, [w for _, w in pairs], [f"f{f}" for f, _ in pairs])
    if ordering:
        svg.text(WIDTH / 2, HEIGHT - 30, "Order: " + " > ".join(f"f{f}" for f in ordering),
                 anchor="middle", cls="ordering")
    return svg.render()


# -- scatter style charts --------------------------------------------------

def vitality_strip_svg(groups: Sequence[tuple[str, Sequence[float]]], title: str = "",
                       y_label: str = "Vitality (numeric part)", y_max: float = 100.0) -> str:
    """Points left to right in cluster order, red separators between clusters,
    dotted line at each cluster's mean."""
    if not groups:
        raise ValueError("no clusters to plot")
    n = sum(len(v) for _, v in groups)
    if n == 0:
        raise ValueError("no points to plot")
    ax = _Axes((0, n + 1), (0, y_max))
    svg = _Svg(title)
    ax.frame(svg, "Dissemination area", y_label, y_ticks=[y_max * i / 4 for i in range(5)])
    pos = 1
    for g, (letter, values) in enumerate(groups):
        start = pos
        for v in values:
            svg.add("circle", "point", cx=_f(ax.x(pos)), cy=_f(ax.y(v)), r="3",
                    fill=PALETTE[g % len(PALETTE)], data_value=repr(float(v)), data_cluster=letter)
            pos += 1
        if values:
            mean = sum(values) / len(values)
            svg.line(ax.x(start - 0.4), ax.y(mean), ax.x(pos - 0.6), ax.y(mean), cls="mean-line",
                     stroke="#333333", dash="4,3")
            svg.add("desc", "mean-value", body=f"{letter}:{mean!r}")
            svg.text(ax.x((start + pos - 1) / 2), ax.top - 6, letter, anchor="middle", cls="cluster-label")
        if g < len(groups) - 1:
            svg.line(ax.x(pos - 0.5), ax.top, ax.x(pos - 0.5), ax.bottom, cls="separator", stroke="#d62728")
    return svg.render()


def silhouette_svg(per_cluster_sorted: Sequence[Sequence[float]], mean_score: float,
                   letters: Optional[Sequence[str]] = None, title: str = "Silhouette") -> str:
    """Horizontal bar per point, grouped by cluster, dashed line at the mean score."""
    n = sum(len(c) for c in per_cluster_sorted)
    if n == 0:
        raise ValueError("empty silhouette report")
    letters = letters or [LETTERS[i] for i in range(len(per_cluster_sorted))]
    gap = 2
    rows = n + gap * (len(per_cluster_sorted) - 1)
    ax = _Axes((-1.0, 1.0), (0, rows))
    svg = _Svg(title)
    ax.frame(svg, "Silhouette value", "Cluster", x_ticks=[-1, -0.5, 0, 0.5, 1])
    band = (ax.bottom - ax.top) / rows
    row = 0
    for c, values in enumerate(per_cluster_sorted):
        start = row
        for v in values:
            y = ax.top + row * band
            x0, x1 = ax.x(0.0), ax.x(v)
            svg.add("rect", "bar", x=_f(min(x0, x1)), y=_f(y), width=_f(abs(x1 - x0)),
                    height=_f(max(band * 0.9, 0.1)), fill=PALETTE[c % len(PALETTE)],
                    data_value=repr(float(v)))
            row += 1
        if values:
            svg.text(ax.left - 8, ax.top + (start + row) / 2 * band + 4, letters[c], anchor="end",
                     cls="cluster-label")
        row += gap
    svg.line(ax.x(mean_score), ax.top, ax.x(mean_score), ax.bottom, cls="mean-line",
             stroke="#d62728", dash="6,4")
    svg.text(ax.x(mean_score) + 4, ax.top - 6, f"mean {mean_score:.3f}", cls="mean-label")
    return svg.render()


def ga_history_svg(max_fitness: Sequence[float], mean_fitness: Sequence[float],
                   title: str = "Silhouette score over generations") -> str:
    """Mean (red) and max (green, drawn last so it sits on top) per generation."""
    if not max_fitness or len(max_fitness) != len(mean_fitness):
        raise ValueError("history needs equal, non-empty max and mean series")
    g = len(max_fitness)
    lo = min(min(mean_fitness), min(max_fitness))
    hi = max(max(mean_fitness), max(max_fitness))
    lo, hi = min(lo, 0.0), max(hi, lo + 1e-9)
    ax = _Axes((0, max(g - 1, 1)), (lo, hi))
    svg = _Svg(title)
    ax.frame(svg, "Generation", "Silhouette score", y_ticks=[lo + (hi - lo) * i / 4 for i in range(5)],
             x_ticks=_int_ticks(max(g - 1, 1)))
    for cls, series, color in (("mean-curve", mean_fitness, "#d62728"), ("max-curve", max_fitness, "#2ca02c")):
        pts = " ".join(f"{_f(ax.x(i))},{_f(ax.y(v))}" for i, v in enumerate(series))
        svg.add("polyline", cls, points=pts, fill="none", stroke=color, stroke_width="2")
    return svg.render()


def regression_svg(points: Sequence[tuple[int, float]], t: TrendModel, targets: Sequence[int] = (),
                   title: str = "") -> str:
    """Observed points, the fitted line from the first observed to the last
    target year, and a marker per predicted target."""
    if not points:
        raise ValueError("no points to plot")
    years = [p[0] for p in points]
    x_lo = min(years)
    x_hi = max(years + list(targets))
    ax = _Axes((x_lo - 1, x_hi + 1), (0, 100))
    svg = _Svg(title or f"District {t.district_id}")
    ticks = sorted(set(years) | set(targets))
    ax.frame(svg, "Year", "Vitality (numeric part)", y_ticks=[0, 25, 50, 75, 100], x_ticks=ticks)
    svg.line(ax.x(x_lo), ax.y(t.value_at(x_lo)), ax.x(x_hi), ax.y(t.value_at(x_hi)),
             cls="trend-line", stroke="#d62728", width=2)
    for year, value in points:
        svg.add("circle", "point", cx=_f(ax.x(year)), cy=_f(ax.y(value)), r="4", fill="#1f77b4",
                data_year=year, data_value=repr(float(value)))
    for year in targets:
        value, clamped = predict(t, year)
        svg.add("rect", "prediction", x=_f(ax.x(year) - 5), y=_f(ax.y(value) - 5), width="10",
                height="10", fill="#ff7f0e", data_year=year, data_value=value,
                data_clamped=str(clamped).lower())
        svg.text(ax.x(year) + 8, ax.y(value) - 8, str(value), cls="prediction-label")
    return svg.render()


# -- run report ------------------------------------------------------------

@dataclass
class RunReport:
    """Everything one pipeline run produced, as JSON-native values.

    ``features`` maps year -> da_id -> normalized feature row and ``vitality``
    maps year -> da_id -> {cluster, letter, numeric, vi}. Year keys are strings
    so the structure survives a JSON round trip unchanged.
    """

    dataset: dict = field(default_factory=dict)
    preprocessing: dict = field(default_factory=dict)
    clustering: dict = field(default_factory=dict)
    features: dict = field(default_factory=dict)
    vitality: dict = field(default_factory=dict)
    silhouette: dict = field(default_factory=dict)
    ga: Optional[dict] = None
    weights: Optional[dict] = None
    trends: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls(**json.loads(text))

    def missing_references(self, da_ids, district_ids) -> list[str]:
        """Ids used in the report that the dataset does not define."""
        da_ids, district_ids = set(da_ids), set(district_ids)
        out = []
        for year, rows in self.vitality.items():
            out += [f"vitality[{year}]: unknown da_id {d!r}" for d in rows if d not in da_ids]
        for year, rows in self.features.items():
            out += [f"features[{year}]: unknown da_id {d!r}" for d in rows if d not in da_ids]
        for d in self.trends.get("districts", {}):
            if d not in district_ids:
                out.append(f"trends: unknown district_id {d!r}")
        for d in self.trends.get("errors", {}):
            if d not in district_ids:
                out.append(f"trends: unknown district_id {d!r}")
        return out


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", str(name))


def render_figures(r: RunReport) -> dict[str, str]:
    """File name -> SVG text for every chart the report supports."""
    files: dict[str, str] = {}
    names = r.dataset.get("feature_names", {})
    feature_ids = r.dataset.get("feature_ids", [])
    labels = [f"f{f}" for f in feature_ids]
    year = str(r.clustering.get("year", ""))
    letters_map = r.clustering.get("letters", {})
    ordered_letters = sorted(letters_map.values())

    feats = r.features.get(year, {})
    vit = r.vitality.get(year, {})
    if feats and len(labels) >= 3:
        for da_id in sorted(feats):
            files[f"radar/{_safe(da_id)}_{year}.svg"] = radar_svg(
                feats[da_id], labels, title=f"DA {da_id} ({year}) {vit.get(da_id, {}).get('vi', '')}")
    if vit:
        by_letter: dict[str, list[str]] = {}
        for da_id in sorted(vit):
            by_letter.setdefault(vit[da_id]["letter"], []).append(da_id)
        if feats and len(labels) >= 3:
            for letter in ordered_letters:
                rows = [feats[d] for d in by_letter.get(letter, [])]
                if rows:
                    files[f"stacked_radar/cluster_{letter}.svg"] = stacked_radar_svg(
                        rows, labels, title=f"Cluster {letter} ({year})")
        sizes = [len(by_letter.get(letter, [])) for letter in ordered_letters]
        files["cluster_histogram.svg"] = cluster_histogram_svg(
            sizes, ordered_letters, title=f"Clusters distribution ({year})")
        groups = [(letter, [vit[d]["numeric"] for d in by_letter.get(letter, [])])
                  for letter in ordered_letters]
        files["vitality_strip.svg"] = vitality_strip_svg(
            groups, title=f"Feature average per dissemination area ({year})")
        if feats:
            for j, fid in enumerate(feature_ids):
                fgroups = [(letter, [feats[d][j] for d in by_letter.get(letter, [])])
                           for letter in ordered_letters]
                files[f"features/feature_{fid}.svg"] = vitality_strip_svg(
                    fgroups, title=f"Feature {fid}: {names.get(str(fid), '')} ({year})",
                    y_label="Normalized value", y_max=1.0)
    if r.silhouette:
        inv = {int(k): v for k, v in letters_map.items()}
        sil_letters = [inv.get(lab, "?") for lab in r.silhouette["labels"]]
        # list clusters in letter order
        order = sorted(range(len(sil_letters)), key=lambda i: sil_letters[i])
        files["silhouette.svg"] = silhouette_svg(
            [r.silhouette["per_cluster_sorted"][i] for i in order], r.silhouette["mean_score"],
            [sil_letters[i] for i in order],
            title=f"Silhouette, {len(order)} clusters (mean {r.silhouette['mean_score']:.3f})")
    if r.ga:
        gens = r.ga["generations"]
        files["ga_history.svg"] = ga_history_svg(
            [g["max_fitness"] for g in gens], [g["mean_fitness"] for g in gens])
    if r.weights:
        files["weights.svg"] = weights_bar_svg(
            r.weights["feature_ids"], r.weights["weights"], r.weights["ordering"])
    targets = r.trends.get("targets", [])
    for district, t in sorted(r.trends.get("districts", {}).items()):
        model = TrendModel.from_dict(t["model"])
        pts = [tuple(p) for p in t["points"]]
        files[f"regression/{_safe(district)}.svg"] = regression_svg(
            pts, model, targets, title=f"District {district}")
    return files


def emit_report(r: RunReport, out_dir) -> dict:
    """Write report.json and every SVG under ``out_dir``; return the manifest."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        files = {"report.json": r.to_json()}
        files.update(render_figures(r))
        for name, text in files.items():
            path = out / name
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        manifest = {"files": sorted(files)}
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc}") from exc
    return manifest
