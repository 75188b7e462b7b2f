"""
Stability regions over two fixed dwell times.

A sweep evaluates the stability test at every lattice point
``lo + k * step`` (endpoints included) of two chosen dwell-time axes and
records verdict, relative margin and a marginal flag per cell. Output is a
CSV table, the source of truth, and an SVG picture of the stable set.
"""

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .sim import default_workers
from .stability import check_stochastic_stability

__all__ = [
    "Axis",
    "SweepConfig",
    "RegionGrid",
    "parse_axis",
    "sweep",
    "render_region",
    "write_region_csv",
    "read_region_csv",
    "region_svg",
    "DEFAULT_MARGINAL_BAND",
]

DEFAULT_MARGINAL_BAND = 1e-3
CSV_COLUMNS = ("d1", "d2", "verdict", "margin", "marginal")


@dataclass(frozen=True)
class Axis:
    mode: int
    lo: float
    hi: float
    step: float

    def __post_init__(self):
        if not self.lo >= 0:
            raise ValueError(f"axis lower bound must be >= 0, got {self.lo}")
        if not self.step > 0:
            raise ValueError(f"axis step must be > 0, got {self.step}")
        if self.hi < self.lo:
            raise ValueError(f"axis upper bound {self.hi} below lower bound {self.lo}")

    def points(self):
        count = int(np.floor((self.hi - self.lo) / self.step + 1e-9)) + 1
        # Rounding keeps 0.1-steps printable as 0.3 instead of 0.30000000000000004.
        return np.round(self.lo + self.step * np.arange(count), 12)


def parse_axis(text, mode):
    """Parse ``lo:hi:step``."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"axis {text!r} must look like lo:hi:step")
    lo, hi, step = (float(p) for p in parts)
    return Axis(mode, lo, hi, step)


@dataclass(frozen=True)
class SweepConfig:
    base: object
    axes: tuple
    workers: int | None = None
    marginal_band: float = DEFAULT_MARGINAL_BAND
    tol_scale: float = 1.0

    def __post_init__(self):
        if len(self.axes) != 2:
            raise ValueError("a sweep needs exactly two axes")
        modes = [ax.mode for ax in self.axes]
        if modes[0] == modes[1]:
            raise ValueError("axis modes must differ")
        for mode in modes:
            if not 0 <= mode < self.base.m:
                raise ValueError(f"axis mode {mode} outside [0, {self.base.m})")


@dataclass(frozen=True)
class RegionGrid:
    """Verdict lattice. Arrays are indexed ``[i, j]`` with ``i`` along the
    first axis and ``j`` along the second."""

    axes: tuple
    x: np.ndarray
    y: np.ndarray
    stable: np.ndarray
    margin: np.ndarray
    marginal: np.ndarray

    @property
    def shape(self):
        return self.stable.shape

    def cells(self):
        for i, dx in enumerate(self.x):
            for j, dy in enumerate(self.y):
                yield dx, dy, bool(self.stable[i, j]), float(self.margin[i, j]), bool(self.marginal[i, j])


def _evaluate(base, axes, dx, dy, band, tol_scale):
    d = np.array(base.d, dtype=float)
    d[axes[0].mode] = dx
    d[axes[1].mode] = dy
    v = check_stochastic_stability(base.with_dwell(d), tol_scale=tol_scale)
    margin = float(v.relative_margin)
    marginal = bool(v.marginal or abs(margin) <= band)
    return v.stable, margin, marginal


def sweep(config):
    """Evaluate the stability test on every lattice point of ``config``.

    Cells are evaluated concurrently (threads) and written back by index, so
    the result does not depend on the worker count. A singular operator
    yields an unstable, marginal cell rather than an error.
    """
    ax, ay = config.axes
    xs, ys = ax.points(), ay.points()
    workers = default_workers() if config.workers is None else max(1, int(config.workers))
    base = config.base

    def row(i):
        return [_evaluate(base, config.axes, xs[i], dy, config.marginal_band, config.tol_scale) for dy in ys]

    if workers == 1:
        rows = [row(i) for i in range(len(xs))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, range(len(xs))))

    stable = np.array([[c[0] for c in r] for r in rows], dtype=bool)
    margin = np.array([[c[1] for c in r] for r in rows], dtype=float)
    marginal = np.array([[c[2] for c in r] for r in rows], dtype=bool)
    return RegionGrid(axes=(ax, ay), x=xs, y=ys, stable=stable, margin=margin, marginal=marginal)


def _fmt(v):
    return f"{v:.17g}"


def write_region_csv(grid, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for dx, dy, stable, margin, marginal in grid.cells():
            w.writerow([_fmt(dx), _fmt(dy), "Stable" if stable else "Unstable", _fmt(margin), int(marginal)])


def read_region_csv(path, axes=None):
    """Rebuild a :class:`RegionGrid` from its CSV table."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty region table")
    xs = sorted({float(r["d1"]) for r in rows})
    ys = sorted({float(r["d2"]) for r in rows})
    xi = {v: i for i, v in enumerate(xs)}
    yi = {v: j for j, v in enumerate(ys)}
    shape = (len(xs), len(ys))
    stable = np.zeros(shape, dtype=bool)
    margin = np.full(shape, np.nan)
    marginal = np.zeros(shape, dtype=bool)
    for r in rows:
        i, j = xi[float(r["d1"])], yi[float(r["d2"])]
        stable[i, j] = r["verdict"] == "Stable"
        margin[i, j] = float(r["margin"])
        marginal[i, j] = r["marginal"] in ("1", "True", "true")
    return RegionGrid(axes=axes, x=np.array(xs), y=np.array(ys), stable=stable, margin=margin, marginal=marginal)


def _ticks(values, target=6):
    stride = max(1, int(np.ceil(len(values) / target)))
    return list(range(0, len(values), stride))


def region_svg(grid, title=None, cell=8):
    """SVG text: stable cells shaded, marginal cells hatched."""
    nx, ny = grid.shape
    left, top, bottom, right = 56, 28 if title else 12, 44, 12
    w, h = nx * cell, ny * cell
    width, height = left + w + right, top + h + bottom
    xlabel = f"d{grid.axes[0].mode + 1}" if grid.axes else "d1"
    ylabel = f"d{grid.axes[1].mode + 1}" if grid.axes else "d2"

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        "<defs>"
        '<pattern id="hatch" width="4" height="4" patternUnits="userSpaceOnUse" patternTransform="rotate(45)">'
        '<line x1="0" y1="0" x2="0" y2="4" stroke="#c0392b" stroke-width="1.5"/></pattern>'
        "</defs>",
        f'<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="#ffffff" stroke="none"/>',
    ]
    if title:
        out.append(f'<text x="{left + w / 2}" y="16" text-anchor="middle">{escape(title)}</text>')
    for i in range(nx):
        for j in range(ny):
            x0 = left + i * cell
            y0 = top + (ny - 1 - j) * cell
            if grid.stable[i, j]:
                out.append(f'<rect x="{x0}" y="{y0}" width="{cell}" height="{cell}" fill="#7f9fc9"/>')
            if grid.marginal[i, j]:
                out.append(f'<rect x="{x0}" y="{y0}" width="{cell}" height="{cell}" fill="url(#hatch)"/>')
    out.append(f'<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="#000000"/>')
    for i in _ticks(grid.x):
        cx = left + (i + 0.5) * cell
        out.append(f'<line x1="{cx}" y1="{top + h}" x2="{cx}" y2="{top + h + 4}" stroke="#000000"/>')
        out.append(f'<text x="{cx}" y="{top + h + 16}" text-anchor="middle">{grid.x[i]:g}</text>')
    for j in _ticks(grid.y):
        cy = top + (ny - 1 - j + 0.5) * cell
        out.append(f'<line x1="{left - 4}" y1="{cy}" x2="{left}" y2="{cy}" stroke="#000000"/>')
        out.append(f'<text x="{left - 6}" y="{cy + 4}" text-anchor="end">{grid.y[j]:g}</text>')
    out.append(f'<text x="{left + w / 2}" y="{height - 8}" text-anchor="middle">{xlabel}</text>')
    out.append(
        f'<text x="14" y="{top + h / 2}" text-anchor="middle" transform="rotate(-90 14 {top + h / 2})">{ylabel}</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_region(grid, out_prefix, title=None):
    """Write ``<prefix>.csv`` and ``<prefix>.svg``; returns both paths."""
    if grid.stable.size == 0:
        raise ValueError("cannot render an empty grid")
    prefix = Path(out_prefix)
    csv_path = prefix.with_name(prefix.name + ".csv")
    svg_path = prefix.with_name(prefix.name + ".svg")
    write_region_csv(grid, csv_path)
    svg_path.write_text(region_svg(grid, title=title))
    return csv_path, svg_path
