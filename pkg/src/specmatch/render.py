"""Deterministic image and plot writers.

PGM heatmaps encode a nonnegative weight matrix with pixel values
round(255 * w / max(w)), so zero weight renders black and the largest
weight renders white. SVG output is hand-assembled with fixed geometry
and no timestamps, so repeated runs are byte-identical.
"""

import numpy as np

from .errors import DimensionError

__all__ = ["write_pgm", "write_line_plot", "write_scatter_plot"]

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"]

_WIDTH, _HEIGHT = 640.0, 420.0
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 62.0, 16.0, 30.0, 46.0


def write_pgm(path, weights):
    """Write a matrix as an ASCII PGM image, one pixel per entry."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 2 or w.size == 0:
        raise DimensionError("weights must be a nonempty 2-D array")
    if not np.all(np.isfinite(w)) or w.min() < 0:
        raise ValueError("weights must be finite and nonnegative")
    top = w.max()
    pixels = np.zeros(w.shape, dtype=np.int64) if top == 0 else np.rint(
        255.0 * w / top
    ).astype(np.int64)
    lines = ["P2", "%d %d" % (w.shape[1], w.shape[0]), "255"]
    lines.extend(" ".join(str(v) for v in row) for row in pixels)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _fmt(x):
    return "%.6g" % x


def _axis_range(values, log_scale):
    v = np.asarray(values, dtype=np.float64)
    if log_scale:
        v = v[v > 0]
        if v.size == 0:
            return 1.0, 10.0
        v = np.log10(v)
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def _project(v, lo, hi, out_lo, out_hi):
    return out_lo + (v - lo) * (out_hi - out_lo) / (hi - lo)


class _Canvas:
    def __init__(self, title, x_label, y_label, x_vals, y_vals, log_y):
        self.log_y = log_y
        self.x_lo, self.x_hi = _axis_range(x_vals, False)
        self.y_lo, self.y_hi = _axis_range(y_vals, log_y)
        self.parts = [
            '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
            'viewBox="0 0 %d %d">' % (_WIDTH, _HEIGHT, _WIDTH, _HEIGHT),
            '<rect width="%d" height="%d" fill="white"/>' % (_WIDTH, _HEIGHT),
        ]
        if title:
            self.parts.append(
                '<text x="%s" y="20" font-family="sans-serif" font-size="14" '
                'text-anchor="middle">%s</text>' % (_fmt(_WIDTH / 2), title)
            )
        x0, x1 = _MARGIN_L, _WIDTH - _MARGIN_R
        y0, y1 = _HEIGHT - _MARGIN_B, _MARGIN_T
        self.parts.append(
            '<path d="M %s %s L %s %s L %s %s" fill="none" stroke="black"/>'
            % (_fmt(x0), _fmt(y1), _fmt(x0), _fmt(y0), _fmt(x1), _fmt(y0))
        )
        for frac in (0.0, 0.5, 1.0):
            xv = self.x_lo + frac * (self.x_hi - self.x_lo)
            yv = self.y_lo + frac * (self.y_hi - self.y_lo)
            self.parts.append(
                '<text x="%s" y="%s" font-family="sans-serif" font-size="11" '
                'text-anchor="middle">%s</text>'
                % (_fmt(self.px(xv)), _fmt(y0 + 16), _fmt(xv))
            )
            label = 10.0**yv if self.log_y else yv
            self.parts.append(
                '<text x="%s" y="%s" font-family="sans-serif" font-size="11" '
                'text-anchor="end">%s</text>'
                % (_fmt(x0 - 6), _fmt(self._py_raw(yv) + 4), _fmt(label))
            )
        if x_label:
            self.parts.append(
                '<text x="%s" y="%s" font-family="sans-serif" font-size="12" '
                'text-anchor="middle">%s</text>'
                % (_fmt((x0 + x1) / 2), _fmt(_HEIGHT - 10), x_label)
            )
        if y_label:
            self.parts.append(
                '<text x="14" y="%s" font-family="sans-serif" font-size="12" '
                'text-anchor="middle" transform="rotate(-90 14 %s)">%s</text>'
                % (_fmt((y0 + y1) / 2), _fmt((y0 + y1) / 2), y_label)
            )

    def px(self, v):
        return _project(v, self.x_lo, self.x_hi, _MARGIN_L, _WIDTH - _MARGIN_R)

    def _py_raw(self, v):
        return _project(v, self.y_lo, self.y_hi, _HEIGHT - _MARGIN_B, _MARGIN_T)

    def py(self, v):
        if self.log_y:
            v = np.log10(max(v, 1e-300))
        return self._py_raw(v)

    def legend(self, names):
        for i, name in enumerate(names):
            y = _MARGIN_T + 14 + 16 * i
            self.parts.append(
                '<rect x="%s" y="%s" width="10" height="10" fill="%s"/>'
                % (_fmt(_MARGIN_L + 10), _fmt(y - 9), _PALETTE[i % len(_PALETTE)])
            )
            self.parts.append(
                '<text x="%s" y="%s" font-family="sans-serif" '
                'font-size="11">%s</text>'
                % (_fmt(_MARGIN_L + 24), _fmt(y), name)
            )

    def finish(self, path):
        self.parts.append("</svg>")
        with open(path, "w") as fh:
            fh.write("\n".join(self.parts) + "\n")


def write_line_plot(path, x, series, title="", x_label="", y_label="",
                    log_y=False):
    """Write line series sharing one x axis as an SVG file.

    series : mapping name -> y array (same length as x).
    """
    x = np.asarray(x, dtype=np.float64)
    all_y = np.concatenate([np.asarray(y, dtype=np.float64) for y in series.values()])
    canvas = _Canvas(title, x_label, y_label, x, all_y, log_y)
    for i, (name, y) in enumerate(series.items()):
        y = np.asarray(y, dtype=np.float64)
        if y.shape != x.shape:
            raise DimensionError("series %r length differs from x" % name)
        pts = " ".join(
            "%s,%s" % (_fmt(canvas.px(xv)), _fmt(canvas.py(yv)))
            for xv, yv in zip(x, y)
        )
        canvas.parts.append(
            '<polyline points="%s" fill="none" stroke="%s" stroke-width="1.5"/>'
            % (pts, _PALETTE[i % len(_PALETTE)])
        )
    canvas.legend(list(series.keys()))
    canvas.finish(path)


def write_scatter_plot(path, groups, title="", x_label="", y_label=""):
    """Write grouped scatter points as an SVG file.

    groups : mapping name -> (x array, y array).
    """
    all_x = np.concatenate([np.asarray(g[0], dtype=np.float64) for g in groups.values()])
    all_y = np.concatenate([np.asarray(g[1], dtype=np.float64) for g in groups.values()])
    canvas = _Canvas(title, x_label, y_label, all_x, all_y, False)
    for i, (name, (gx, gy)) in enumerate(groups.items()):
        color = _PALETTE[i % len(_PALETTE)]
        for xv, yv in zip(np.asarray(gx, dtype=np.float64),
                          np.asarray(gy, dtype=np.float64)):
            canvas.parts.append(
                '<circle cx="%s" cy="%s" r="2.5" fill="%s" fill-opacity="0.6"/>'
                % (_fmt(canvas.px(xv)), _fmt(canvas.py(yv)), color)
            )
    canvas.legend(list(groups.keys()))
    canvas.finish(path)
