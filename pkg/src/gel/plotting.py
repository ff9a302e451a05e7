"""Minimal hand-rolled SVG line plots (no plotting dependency).

Diagnostic quality only: a fixed 800x500 canvas, one polyline per series,
an optional dashed horizontal reference line, and plain text labels.  The
output is a deterministic function of the inputs, so plots can be golden-
tested byte for byte on one platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError

WIDTH = 800
HEIGHT = 500

# plot frame inside the canvas
_LEFT = 70.0
_RIGHT = 770.0
_TOP = 50.0
_BOTTOM = 440.0

_PALETTE = ("#1f6fb4", "#c0392b", "#2c8a4b", "#8e44ad", "#b8860b")


@dataclass(frozen=True)
class Series:
    """One named curve; x runs over 0..len(values)-1 (step index)."""

    label: str
    values: np.ndarray = field()

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if vals.size < 2:
            raise ValidationError(
                f"series {self.label!r} needs at least two points, got {vals.size}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValidationError(f"series {self.label!r} contains non-finite values")
        object.__setattr__(self, "values", vals)


def _fmt(x: float) -> str:
    # short fixed-point keeps files small; plots are diagnostic, not data
    return f"{x:.2f}"


def _tick_label(x: float) -> str:
    return f"{x:.4g}"


def _x_to_px(x: float, xmax: float) -> float:
    return _LEFT + (x / xmax) * (_RIGHT - _LEFT)


def _y_to_px(y: float, ymin: float, ymax: float) -> float:
    return _BOTTOM - (y - ymin) / (ymax - ymin) * (_BOTTOM - _TOP)


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def line_plot(
    series: Sequence[Series],
    *,
    title: str = "",
    ylabel: str = "",
    xlabel: str = "step",
    reference: float | None = None,
    reference_label: str = "",
) -> str:
    """Render step-indexed curves as a complete SVG document string."""
    if not series:
        raise ValidationError("line_plot needs at least one series")
    xmax = float(max(s.values.size - 1 for s in series))
    lo = min(float(s.values.min()) for s in series)
    hi = max(float(s.values.max()) for s in series)
    if reference is not None:
        lo = min(lo, float(reference))
        hi = max(hi, float(reference))
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.06 * (hi - lo)
    ymin, ymax = lo - pad, hi + pad

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'width="{WIDTH}" height="{HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
    ]

    # frame and ticks
    out.append(
        f'<rect x="{_fmt(_LEFT)}" y="{_fmt(_TOP)}" '
        f'width="{_fmt(_RIGHT - _LEFT)}" height="{_fmt(_BOTTOM - _TOP)}" '
        'fill="none" stroke="#444444" stroke-width="1"/>'
    )
    for i in range(5):
        frac = i / 4.0
        xv = frac * xmax
        xp = _x_to_px(xv, xmax)
        out.append(
            f'<line x1="{_fmt(xp)}" y1="{_fmt(_BOTTOM)}" x2="{_fmt(xp)}" '
            f'y2="{_fmt(_BOTTOM + 5)}" stroke="#444444" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{_fmt(xp)}" y="{_fmt(_BOTTOM + 20)}" font-size="12" '
            f'font-family="monospace" text-anchor="middle">{_tick_label(xv)}</text>'
        )
        yv = ymin + frac * (ymax - ymin)
        yp = _y_to_px(yv, ymin, ymax)
        out.append(
            f'<line x1="{_fmt(_LEFT - 5)}" y1="{_fmt(yp)}" x2="{_fmt(_LEFT)}" '
            f'y2="{_fmt(yp)}" stroke="#444444" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{_fmt(_LEFT - 9)}" y="{_fmt(yp + 4)}" font-size="12" '
            f'font-family="monospace" text-anchor="end">{_tick_label(yv)}</text>'
        )

    if reference is not None:
        yp = _y_to_px(float(reference), ymin, ymax)
        out.append(
            f'<line x1="{_fmt(_LEFT)}" y1="{_fmt(yp)}" x2="{_fmt(_RIGHT)}" '
            f'y2="{_fmt(yp)}" stroke="#888888" stroke-width="1" '
            'stroke-dasharray="6,4"/>'
        )
        if reference_label:
            out.append(
                f'<text x="{_fmt(_RIGHT - 4)}" y="{_fmt(yp - 6)}" font-size="12" '
                f'font-family="monospace" text-anchor="end" fill="#666666">'
                f"{_escape(reference_label)}</text>"
            )

    for idx, s in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        pts = " ".join(
            f"{_fmt(_x_to_px(k, xmax))},{_fmt(_y_to_px(float(v), ymin, ymax))}"
            for k, v in enumerate(s.values)
        )
        out.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            'stroke-width="1.5"/>'
        )
        # legend entry, top-left corner of the frame
        ly = _TOP + 18 + 18 * idx
        out.append(
            f'<line x1="{_fmt(_LEFT + 10)}" y1="{_fmt(ly - 4)}" '
            f'x2="{_fmt(_LEFT + 34)}" y2="{_fmt(ly - 4)}" stroke="{color}" '
            'stroke-width="1.5"/>'
        )
        out.append(
            f'<text x="{_fmt(_LEFT + 40)}" y="{_fmt(ly)}" font-size="12" '
            f'font-family="monospace">{_escape(s.label)}</text>'
        )

    if title:
        out.append(
            f'<text x="{_fmt((_LEFT + _RIGHT) / 2)}" y="28" font-size="15" '
            f'font-family="monospace" text-anchor="middle">{_escape(title)}</text>'
        )
    if xlabel:
        out.append(
            f'<text x="{_fmt((_LEFT + _RIGHT) / 2)}" y="{_fmt(HEIGHT - 14)}" '
            f'font-size="13" font-family="monospace" text-anchor="middle">'
            f"{_escape(xlabel)}</text>"
        )
    if ylabel:
        yc = (_TOP + _BOTTOM) / 2
        out.append(
            f'<text x="18" y="{_fmt(yc)}" font-size="13" font-family="monospace" '
            f'text-anchor="middle" transform="rotate(-90 18 {_fmt(yc)})">'
            f"{_escape(ylabel)}</text>"
        )

    out.append("</svg>")
    return "\n".join(out) + "\n"
