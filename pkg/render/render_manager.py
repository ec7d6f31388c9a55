"""Poincaré-disc SVG drawings of d=1 radial spanning trees."""
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from jinja2 import Environment, FileSystemLoader, select_autoescape

from errors import ConfigError
from geometry.hypgeom import HPoint, geodesic_poincare, to_poincare_many
from tree.arcs import arc_directions, arc_for_edge
from tree.rst import ROOT, root_branch

logger = logging.getLogger(__name__)

TEMPLATE_DIR = Path(__file__).parent / "templates"
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939",
)
MONO = "#333333"
PAD = 8
DECIMALS = 3


@dataclass(frozen=True)
class RenderSpec:
    size: int = 800
    edge_style: str = "arc"
    color: bool = True
    samples: int = 32
    stroke: float = 0.6

    def __post_init__(self):
        if self.size < 64:
            raise ConfigError(f"image size must be >= 64 px, got {self.size}")
        if self.samples < 2:
            raise ConfigError(f"need at least 2 samples per edge, got {self.samples}")
        if self.edge_style not in ("arc", "geodesic"):
            raise ConfigError(f"edge style must be 'arc' or 'geodesic', got {self.edge_style!r}")
        if self.stroke <= 0:
            raise ConfigError(f"stroke width must be positive, got {self.stroke}")


def _fmt(x):
    return f"{x:.{DECIMALS}f}"


class RenderManager:
    def __init__(self, spec=None):
        self.spec = spec or RenderSpec()
        self.env = Environment(
            loader=FileSystemLoader(TEMPLATE_DIR),
            autoescape=select_autoescape(["svg", "xml", "j2"]),
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
        )
        self.center = self.spec.size / 2.0
        self.disc = self.center - PAD

    def to_pixels(self, xy):
        """Disc coordinates to pixels; y grows downward in SVG."""
        xy = np.atleast_2d(xy)
        return np.column_stack([self.center + self.disc * xy[:, 0], self.center - self.disc * xy[:, 1]])

    def edge_polyline(self, tree, v):
        """Poincaré-disc samples of the edge from v to its parent."""
        n = self.spec.samples
        if self.spec.edge_style == "geodesic":
            p = int(tree.parent[v])
            end = HPoint.origin(1) if p == ROOT else tree.cloud.point(p)
            return geodesic_poincare(tree.cloud.point(v), end, n)
        arc = arc_for_edge(tree, v)
        t = np.linspace(0.0, 1.0, n)
        radii = (1.0 - t) * arc.r1 + t * arc.r2
        return to_poincare_many(radii, arc_directions(arc, t))

    def _colors(self, tree):
        if not self.spec.color:
            return [MONO] * len(tree)
        branch = root_branch(tree)
        # palette slot by rank of the branch root, so labels stay stable across runs
        ranks = {int(b): k for k, b in enumerate(np.unique(branch))}
        return [PALETTE[ranks[int(b)] % len(PALETTE)] for b in branch]

    def render(self, tree):
        if tree.d != 1:
            raise ConfigError(f"only d=1 trees can be drawn in the Poincaré disc, got d={tree.d}")
        colors = self._colors(tree)
        edges, dots = [], []
        pixels = self.to_pixels(to_poincare_many(tree.cloud.radii, tree.cloud.directions)) if len(tree) else []
        for v in range(len(tree)):
            line = self.to_pixels(self.edge_polyline(tree, v))
            edges.append({"points": " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in line), "color": colors[v]})
            dots.append({"x": _fmt(pixels[v][0]), "y": _fmt(pixels[v][1]), "color": colors[v]})
        return self.env.get_template("tree.svg.j2").render(
            size=self.spec.size,
            center=_fmt(self.center),
            disc=_fmt(self.disc),
            stroke=_fmt(self.spec.stroke),
            radius=_fmt(max(1.0, 2.0 * self.spec.stroke)),
            edges=edges,
            dots=dots,
        )

    def save(self, tree, path):
        svg = self.render(tree)
        Path(path).write_text(svg)
        logger.info(f"✅ Rendered {len(tree)} vertices to {path}")
        return svg
