"""Three-panel SVG impact report.

Panels share the epoch axis: observed vs counterfactual, pointwise effect,
cumulative effect. Output is plain text with fixed number formatting so
identical inputs give byte-identical files.
"""

from __future__ import annotations

from typing import List, Sequence, Tuple
from xml.sax.saxutils import escape

import numpy as np

from .errors import MismatchError
from .impact import Band, ImpactReport
from .series import CoverageSeries

WIDTH = 820
PANEL_HEIGHT = 200
PANEL_GAP = 40
MARGIN_LEFT = 70
MARGIN_RIGHT = 20
MARGIN_TOP = 30
MARGIN_BOTTOM = 40

BAND_FILL = "#9ecae1"
OBSERVED = "#000000"
MODEL = "#d62728"


def check_consistent(series: CoverageSeries, report: ImpactReport) -> None:
    tau = report.intervention_index
    if tau >= len(series):
        raise MismatchError(f"intervention index {tau} is outside a series of length {len(series)}")
    post_epochs = series.epochs[tau:]
    if len(post_epochs) != len(report.epochs) or np.any(post_epochs != report.epochs):
        raise MismatchError(
            f"post-period epochs differ: series has {_span(post_epochs)}, impact report has {_span(report.epochs)}"
        )
    if int(series.epochs[tau - 1]) != report.intervention_epoch:
        raise MismatchError(
            f"intervention epoch {report.intervention_epoch} does not match series epoch {series.epochs[tau - 1]}"
        )
    if not np.allclose(series.values[tau:], report.observed, rtol=0, atol=1e-9):
        raise MismatchError("observed post-period values differ between the series and the impact report")


def _span(epochs) -> str:
    if len(epochs) == 0:
        return "no epochs"
    return f"{epochs[0]}..{epochs[-1]} ({len(epochs)} epochs)"


def _fmt(x: float) -> str:
    return "%.2f" % x


def _nice_ticks(lo: float, hi: float, count: int = 5) -> List[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / max(count - 1, 1)
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * abs(step):
        ticks.append(0.0 if abs(t) < 1e-12 * step else float(t))
        t += step
    return ticks


class _Panel:
    def __init__(self, index: int, title: str, x_range: Tuple[float, float], y_values: Sequence[np.ndarray]):
        self.index = index
        self.title = title
        self.top = MARGIN_TOP + (index - 1) * (PANEL_HEIGHT + PANEL_GAP)
        self.x0, self.x1 = x_range
        vals = np.concatenate([np.asarray(v, dtype=np.float64).ravel() for v in y_values])
        vals = vals[np.isfinite(vals)]
        lo, hi = (float(vals.min()), float(vals.max())) if vals.size else (0.0, 1.0)
        pad = 0.05 * (hi - lo) if hi > lo else max(abs(hi), 1.0) * 0.05
        self.y0, self.y1 = lo - pad, hi + pad
        self.parts: List[str] = []

    def px(self, x) -> float:
        span = self.x1 - self.x0 or 1.0
        return MARGIN_LEFT + (x - self.x0) / span * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)

    def py(self, y) -> float:
        span = self.y1 - self.y0 or 1.0
        return self.top + PANEL_HEIGHT - (y - self.y0) / span * PANEL_HEIGHT

    def _points(self, xs, ys) -> str:
        return " ".join(f"{_fmt(self.px(x))},{_fmt(self.py(y))}" for x, y in zip(xs, ys))

    def band(self, xs, band: Band, css: str):
        pts = self._points(list(xs) + list(xs[::-1]), list(band.upper) + list(band.lower[::-1]))
        self.parts.append(f'<polygon class="{css}" points="{pts}" fill="{BAND_FILL}" fill-opacity="0.5" stroke="none"/>')

    def line(self, xs, ys, css: str, color: str, dashed: bool = False):
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        self.parts.append(
            f'<polyline class="{css}" points="{self._points(xs, ys)}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>'
        )

    def hline(self, y: float, css: str):
        yy = _fmt(self.py(y))
        self.parts.append(
            f'<line class="{css}" x1="{_fmt(self.px(self.x0))}" y1="{yy}" x2="{_fmt(self.px(self.x1))}" y2="{yy}" stroke="#555555" stroke-width="1"/>'
        )

    def vrule(self, x: float):
        xx = _fmt(self.px(x))
        self.parts.append(
            f'<line class="intervention" x1="{xx}" y1="{_fmt(self.top)}" x2="{xx}" y2="{_fmt(self.top + PANEL_HEIGHT)}" '
            f'stroke="#444444" stroke-width="1" stroke-dasharray="2,3"/>'
        )

    def render(self, x_ticks: Sequence[int], x_labels: bool) -> str:
        frame = (
            f'<rect class="frame" x="{MARGIN_LEFT}" y="{_fmt(self.top)}" width="{WIDTH - MARGIN_LEFT - MARGIN_RIGHT}" '
            f'height="{PANEL_HEIGHT}" fill="none" stroke="#999999"/>'
        )
        out = [f'<g class="panel" id="panel-{self.index}">', frame,
               f'<text class="title" x="{MARGIN_LEFT}" y="{_fmt(self.top - 8)}" font-size="13">{escape(self.title)}</text>']
        for t in _nice_ticks(self.y0, self.y1):
            yy = _fmt(self.py(t))
            out.append(f'<text class="ytick" x="{MARGIN_LEFT - 6}" y="{yy}" font-size="10" text-anchor="end">{"%.4g" % t}</text>')
        if x_labels:
            base = _fmt(self.top + PANEL_HEIGHT + 14)
            for e in x_ticks:
                out.append(f'<text class="xtick" x="{_fmt(self.px(e))}" y="{base}" font-size="10" text-anchor="middle">{e}</text>')
        out.extend(self.parts)
        out.append("</g>")
        return "\n".join(out)


def _x_ticks(epochs: np.ndarray, max_ticks: int = 10) -> List[int]:
    step = max(1, int(np.ceil(len(epochs) / max_ticks)))
    return [int(e) for e in epochs[::step]]


def render_report(series: CoverageSeries, report: ImpactReport) -> str:
    check_consistent(series, report)
    x_all = series.epochs.astype(np.float64)
    x_post = report.epochs.astype(np.float64)
    x_range = (float(x_all[0]), float(x_all[-1]))
    cut = float(report.intervention_epoch)

    p1 = _Panel(1, "Observed (solid) and counterfactual (dashed)", x_range,
                [series.values, report.counterfactual.lower, report.counterfactual.upper])
    p1.band(x_post, report.counterfactual, "band counterfactual")
    p1.line(x_all, series.values, "observed", OBSERVED)
    p1.line(x_post, report.counterfactual.mean, "counterfactual", MODEL, dashed=True)

    p2 = _Panel(2, "Pointwise effect", x_range, [report.point_effect.lower, report.point_effect.upper, [0.0]])
    p2.band(x_post, report.point_effect, "band effect")
    p2.hline(0.0, "zero")
    p2.line(x_post, report.point_effect.mean, "effect", MODEL, dashed=True)

    p3 = _Panel(3, "Cumulative effect", x_range,
                [report.cumulative_effect.lower, report.cumulative_effect.upper, [0.0]])
    p3.band(x_post, report.cumulative_effect, "band cumulative")
    p3.hline(0.0, "zero")
    p3.line(x_post, report.cumulative_effect.mean, "cumulative", MODEL, dashed=True)

    panels = [p1, p2, p3]
    for p in panels:
        p.vrule(cut)

    height = MARGIN_TOP + 3 * PANEL_HEIGHT + 2 * PANEL_GAP + MARGIN_BOTTOM
    ticks = _x_ticks(series.epochs)
    level = int(round(report.credible_level * 100))
    body = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">',
        f"<desc>Intervention after epoch {report.intervention_epoch}; shaded bands are {level}% credible intervals.</desc>",
        f'<rect x="0" y="0" width="{WIDTH}" height="{height}" fill="#ffffff"/>',
    ]
    body += [p.render(ticks, x_labels=(p.index == 3)) for p in panels]
    body.append("</svg>")
    return "\n".join(body) + "\n"
