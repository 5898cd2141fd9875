"""Static SVG figures: ternary diagrams and PNS biplot paths.

Both emitters return the SVG text together with the coordinates that
were drawn so the same numbers can be written to CSV.
"""
from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .pns import PnsModel, biplot_paths, fit_pns, pns_mean, scores_to_sphere
from .simplex import inverse_power_transform, power_transform, project_to_orthant

SQRT3_2 = np.sqrt(3.0) / 2.0
PALETTE = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02",
           "#a6761d", "#666666", "#1f78b4", "#b2df8a")


class FigureError(ValueError):
    pass


def ternary_xy(comp) -> np.ndarray:
    """Planar coordinates of 3-part compositions.

    Corners: part 1 at (0, 0), part 2 at (1, 0), part 3 at (1/2, sqrt(3)/2).
    Each part equals the scaled distance to the edge opposite its corner.
    """
    c = np.atleast_2d(np.asarray(comp, dtype=float))
    if c.shape[1] != 3:
        raise FigureError("ternary coordinates need 3-part compositions")
    c = c / c.sum(axis=1, keepdims=True)
    return np.column_stack([c[:, 1] + 0.5 * c[:, 2], SQRT3_2 * c[:, 2]])


@dataclass
class Curve:
    label: str
    compositions: np.ndarray
    inside: np.ndarray          # sampled point was already in the orthant
    color: str = "#000000"


@dataclass
class TernaryFigure:
    points: np.ndarray
    labels: Tuple[str, str, str] = ("x1", "x2", "x3")
    curves: List[Curve] = field(default_factory=list)
    means: List[Tuple[str, np.ndarray, str]] = field(default_factory=list)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise FigureError("ternary figure needs 3-part compositions")
        if np.any(pts < 0) or np.any(np.abs(pts.sum(axis=1) - 1) > 1e-9):
            raise FigureError("points must be valid compositions")
        self.points = pts


def fitted_circle(model: PnsModel, n_grid: int = 200):
    """Sample the fitted nested circle of a model on ``S^2``.

    Returns compositions (after truncation to the orthant and the inverse
    power map) and a mask of samples that were inside the orthant.
    """
    if model.dim != 2:
        raise FigureError("fitted circles are drawn for 3-part data only")
    rad = model.radius
    t = np.linspace(-np.pi * rad, np.pi * rad, n_grid, endpoint=False)
    s = np.zeros((n_grid, 2))
    s[:, 0] = t
    q = scores_to_sphere(s, model, use_first_k=1)
    inside = np.all(q >= -1e-12, axis=1)
    comps = inverse_power_transform(project_to_orthant(q), model.alpha)
    # start the closed curve at an orthant exit so inside runs are contiguous
    if not inside.all() and inside.any():
        shift = int(np.argmax(~inside))
        comps, inside = np.roll(comps, -shift, axis=0), np.roll(inside, -shift)
    return comps, inside


def ternary_from_data(Y, alphas=(0.5,), kinds=("great", "small"), labels=None,
                      n_grid: int = 200) -> TernaryFigure:
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[1] != 3:
        raise FigureError("plot-ternary needs exactly 3 response parts")
    fig = TernaryFigure(Y, tuple(labels) if labels else ("x1", "x2", "x3"))
    colors = iter(PALETTE * 4)
    for alpha in alphas:
        for kind in kinds:
            model, _ = fit_pns(power_transform(Y, alpha), method=kind, alpha=alpha)
            comps, inside = fitted_circle(model, n_grid)
            color = next(colors)
            label = f"{kind} alpha={alpha:g}"
            fig.curves.append(Curve(label, comps, inside, color))
            mean = inverse_power_transform(project_to_orthant(pns_mean(model)), alpha)
            fig.means.append((label, mean, color))
    return fig


class _Frame:
    """Affine map from data coordinates to SVG pixels (y axis flipped)."""

    def __init__(self, xlim, ylim, box):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self.left, self.top, self.width, self.height = box

    def __call__(self, xy):
        xy = np.atleast_2d(xy)
        sx = self.left + (xy[:, 0] - self.x0) / (self.x1 - self.x0) * self.width
        sy = self.top + (self.y1 - xy[:, 1]) / (self.y1 - self.y0) * self.height
        return np.column_stack([sx, sy])


def _path_d(pts, breaks=None) -> str:
    """SVG path data; a new subpath starts wherever ``breaks`` is True."""
    parts = []
    pen_up = True
    for i, (x, y) in enumerate(pts):
        if breaks is not None and breaks[i]:
            pen_up = True
            continue
        parts.append(f"{'M' if pen_up else 'L'}{x:.4f},{y:.4f}")
        pen_up = False
    return " ".join(parts)


def _svg_root(width, height):
    root = ET.Element("svg", xmlns="http://www.w3.org/2000/svg",
                      width=str(width), height=str(height),
                      viewBox=f"0 0 {width} {height}")
    ET.SubElement(root, "rect", x="0", y="0", width=str(width), height=str(height),
                  fill="white")
    return root


def _text(parent, x, y, s, **kw):
    el = ET.SubElement(parent, "text", x=f"{x:.2f}", y=f"{y:.2f}",
                       attrib={"font-size": "12", "font-family": "sans-serif", **kw})
    el.text = s
    return el


def render_ternary(fig: TernaryFigure, size: int = 520):
    """SVG text and a table of drawn curve coordinates.

    One ``<path>`` is emitted per fitted curve; samples outside the
    orthant split the path into subpaths.
    """
    margin = 50
    frame = _Frame((0.0, 1.0), (0.0, SQRT3_2),
                   (margin, margin, size - 2 * margin, (size - 2 * margin) * SQRT3_2))
    height = int(np.ceil((size - 2 * margin) * SQRT3_2 + 2 * margin + 20 * len(fig.curves)))
    root = _svg_root(size, height)
    corners = frame(np.array([[0, 0], [1, 0], [0.5, SQRT3_2]]))
    ET.SubElement(root, "polygon", points=" ".join(f"{x:.4f},{y:.4f}" for x, y in corners),
                  fill="none", stroke="black", attrib={"stroke-width": "1"})
    for (x, y), lab, (dx, dy) in zip(corners, fig.labels, [(-30, 18), (8, 18), (-8, -8)]):
        _text(root, x + dx, y + dy, lab)

    for x, y in frame(ternary_xy(fig.points)):
        ET.SubElement(root, "circle", cx=f"{x:.4f}", cy=f"{y:.4f}", r="2.5",
                      fill="#d62728", attrib={"fill-opacity": "0.7"})

    rows = []
    for ci, curve in enumerate(fig.curves):
        xy = ternary_xy(curve.compositions)
        sxy = frame(xy)
        ET.SubElement(root, "path", d=_path_d(sxy, ~curve.inside), fill="none",
                      stroke=curve.color, attrib={"stroke-width": "1.5"})
        for i in range(len(xy)):
            rows.append([curve.label, i, int(curve.inside[i]), *curve.compositions[i],
                         *xy[i], *sxy[i]])
        ly = frame(np.array([[0, 0]]))[0, 1] + 30 + 20 * ci
        ET.SubElement(root, "line", x1=f"{margin}", y1=f"{ly - 4}", x2=f"{margin + 24}",
                      y2=f"{ly - 4}", stroke=curve.color, attrib={"stroke-width": "2"})
        _text(root, margin + 30, ly, curve.label)

    for label, mean, color in fig.means:
        (x, y), = frame(ternary_xy(mean))
        ET.SubElement(root, "rect", x=f"{x - 4:.4f}", y=f"{y - 4:.4f}", width="8",
                      height="8", fill=color, stroke="black")
    header = ["curve", "index", "inside", *fig.labels, "tern_x", "tern_y", "svg_x", "svg_y"]
    return ET.tostring(root, encoding="unicode"), header, rows


def biplot_grid(model: PnsModel, score_index: int, n_grid: int = 101,
                extent: float = 0.9) -> np.ndarray:
    """Symmetric grid covering ``extent`` of the valid half-range of a score."""
    if not 0 < extent <= 1:
        raise FigureError("extent must be in (0, 1]")
    lo, hi = model.score_range(score_index)
    half = min(-lo, hi) * extent
    if score_index == 1:
        half *= 1 - 1e-9
    return np.linspace(-half, half, n_grid)


def render_biplot(model: PnsModel, part_labels: Sequence[str] = (), n_grid: int = 101,
                  extent: float = 0.9, width: int = 720, panel_height: int = 300):
    """One panel per score (1 and 2); one path per composition part."""
    indices = [k for k in (1, 2) if k <= model.dim]
    D = model.dim + 1
    labels = list(part_labels) if part_labels else [f"x{j + 1}" for j in range(D)]
    if len(labels) != D:
        raise FigureError(f"{len(labels)} part labels for {D} parts")
    margin = 60
    root = _svg_root(width, panel_height * len(indices) + 40)
    rows = []
    for pi, k in enumerate(indices):
        grid = biplot_grid(model, k, n_grid, extent)
        paths = biplot_paths(model, k, grid)
        top = pi * panel_height + 30
        lo = min(paths.min(), 0.0)
        hi = max(paths.max(), 1e-12)
        frame = _Frame((grid[0], grid[-1]), (lo, hi),
                       (margin, top, width - 2 * margin - 80, panel_height - 60))
        left, bottom = frame(np.array([[grid[0], lo]]))[0]
        right, _ = frame(np.array([[grid[-1], lo]]))[0]
        ET.SubElement(root, "line", x1=f"{left:.2f}", y1=f"{bottom:.2f}", x2=f"{right:.2f}",
                      y2=f"{bottom:.2f}", stroke="black")
        _text(root, left, top - 8, f"PNS score {k}: sphere coordinate paths")
        for j in range(D):
            sxy = frame(np.column_stack([grid, paths[:, j]]))
            color = PALETTE[j % len(PALETTE)]
            ET.SubElement(root, "path", d=_path_d(sxy), fill="none", stroke=color,
                          attrib={"stroke-width": "1.5"})
            _text(root, sxy[-1, 0] + 6, sxy[-1, 1] + 4, labels[j], fill=color)
            for i in range(grid.size):
                rows.append([k, grid[i], labels[j], paths[i, j], sxy[i, 0], sxy[i, 1]])
    header = ["score_index", "t", "part", "value", "svg_x", "svg_y"]
    return ET.tostring(root, encoding="unicode"), header, rows
