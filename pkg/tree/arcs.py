"""Radially monotone arcs for RST edges and the level sets L_r.

An edge z1 → z2 (child → parent) is drawn as the path whose radius is
(1−t)·r1 + t·r2 and whose direction walks the spherical geodesic from u1 to
u2. The direction at t is that of

    (1−t)·sinh r1·u1 + t·sinh r2·u2,

the spatial part of the chord between the two hyperboloid points, so φ(t) is
its angle from u1 over θ and stays in [0, 1]. The closed form

    φ(t) = (1/θ)·arccos( ((1−t)·sinh r1 + t·cos θ·sinh r2) / sinh((1−t)·r1 + t·r2) )

divides by sinh of the interpolated radius instead of the chord's norm. Its
arccos argument exceeds 1 on most bent RST arcs, so it is only evaluated as a
diagnostic (sinh_ratio, arc_formula_check).

Along an arc the distance to the origin is affine, so every sphere S(r) is
crossed at most once.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from errors import AntipodalArcError
from geometry.hypgeom import HPoint, angles_between
from tree.rst import ROOT

logger = logging.getLogger(__name__)

RADIAL_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class Arc:
    child: int
    parent: int
    r1: float
    u1: np.ndarray
    r2: float
    u2: np.ndarray

    @property
    def theta(self):
        if self.parent == ROOT:
            return 0.0
        return float(angles_between(self.u1, self.u2))

    def is_radial(self):
        return self.theta < RADIAL_EPS

    def start(self):
        return HPoint(self.r1, self.u1)

    def end(self):
        return HPoint(self.r2, self.u2)


@dataclass(frozen=True, eq=False)
class LevelCrossing:
    level: float
    location: HPoint
    arc: Arc
    t: float

    @property
    def down(self):
        """z_↓: the child endpoint of the generating arc."""
        return self.arc.child

    @property
    def up(self):
        """z_↑: the parent endpoint, ROOT for the origin."""
        return self.arc.parent


def arc_for_edge(tree, v):
    p = int(tree.parent[v])
    u1 = tree.cloud.directions[v]
    if p == ROOT:
        return Arc(v, ROOT, float(tree.cloud.radii[v]), u1, 0.0, u1)
    return Arc(v, p, float(tree.cloud.radii[v]), u1, float(tree.cloud.radii[p]), tree.cloud.directions[p])


def edge_arcs(tree):
    return [arc_for_edge(tree, v) for v in range(len(tree))]


def arc_between(z1, z2):
    """Arc joining two arbitrary points, outside any tree."""
    return Arc(-2, -3, z1.radius, np.asarray(z1.direction), z2.radius, np.asarray(z2.direction))


def _phi(r1, r2, theta, t):
    """Vectorized φ: angle of (1−t)·sinh r1·u1 + t·sinh r2·u2 from u1, over θ."""
    a = (1.0 - t) * np.sinh(r1)
    b = t * np.sinh(r2)
    phi = np.arctan2(b * np.sin(theta), a + b * np.cos(theta)) / theta
    return np.where(t == 0.0, 0.0, np.where(t == 1.0, 1.0, phi))


def sinh_ratio(r1, r2, theta, t):
    """Argument of arccos in the closed-form φ."""
    rt = (1.0 - t) * r1 + t * r2
    with np.errstate(invalid="ignore", divide="ignore"):
        return ((1.0 - t) * np.sinh(r1) + t * np.cos(theta) * np.sinh(r2)) / np.sinh(rt)


def ratio_out_of_range(r1, r2, theta, t, tol=1e-12):
    """Where the closed-form φ is undefined (ratio > 1) or overshoots u2 (ratio < cos θ)."""
    x = sinh_ratio(r1, r2, theta, t)
    return (x > 1.0 + tol) | (x < np.cos(theta) - tol)


def arc_formula_check(tree, samples=9):
    """Count bent edges on which the closed-form φ leaves [0, 1] at interior t.

    Returns {"bent_arcs", "violating_arcs", "worst_ratio"}; the arcs themselves
    always use the chord direction and are unaffected.
    """
    cloud = tree.cloud
    child = np.flatnonzero(tree.parent != ROOT)
    parent = tree.parent[child]
    theta = angles_between(cloud.directions[child], cloud.directions[parent]) if child.size else np.zeros(0)
    bent = theta >= RADIAL_EPS
    child, parent, theta = child[bent], parent[bent], theta[bent]
    t = np.linspace(0.0, 1.0, samples + 2)[1:-1]
    r1, r2 = cloud.radii[child][:, None], cloud.radii[parent][:, None]
    x = sinh_ratio(r1, r2, theta[:, None], t[None, :])
    bad = ratio_out_of_range(r1, r2, theta[:, None], t[None, :]).any(axis=1)
    logger.debug(f"Closed-form φ out of range on {int(bad.sum())}/{child.size} bent arcs")
    return {
        "bent_arcs": int(child.size),
        "violating_arcs": int(np.count_nonzero(bad)),
        "worst_ratio": float(x.max()) if x.size else None,
    }


def _check_arc(arc):
    theta = arc.theta
    if theta > math.pi - RADIAL_EPS:
        raise AntipodalArcError(f"arc {arc.child}→{arc.parent} joins antipodal directions")
    return theta


def _slerp(u1, u2, theta, s):
    """Constant-speed great-circle walk from u1 to u2; s may be an array."""
    s = np.asarray(s, dtype=float)[..., None]
    dirs = (np.sin((1.0 - s) * theta) * u1 + np.sin(s * theta) * u2) / math.sin(theta)
    return dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)


def arc_phi(arc, t):
    theta = _check_arc(arc)
    t = np.asarray(t, dtype=float)
    if theta < RADIAL_EPS:
        return t.copy() if t.ndim else float(t)
    phi = _phi(arc.r1, arc.r2, theta, t)
    return phi if phi.ndim else float(phi)


def arc_directions(arc, t):
    """Directions along the arc for an array of t values."""
    theta = _check_arc(arc)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any((t < 0.0) | (t > 1.0)):
        raise ValueError("arc parameter t must lie in [0, 1]")
    if theta < RADIAL_EPS:
        dirs = np.tile(arc.u1, (t.size, 1))
    else:
        dirs = _slerp(arc.u1, arc.u2, theta, arc_phi(arc, t))
    dirs[t == 0.0] = arc.u1
    if arc.parent != ROOT:
        dirs[t == 1.0] = arc.u2
    return dirs


def arc_point(arc, t):
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"arc parameter t must lie in [0, 1], got {t}")
    if t == 0.0:
        return arc.start()
    if t == 1.0:
        return arc.end()
    return HPoint((1.0 - t) * arc.r1 + t * arc.r2, arc_directions(arc, t)[0])


def level_crossing(arc, r):
    """The unique crossing of S(r), or None when r is not strictly between the endpoint radii."""
    lo, hi = min(arc.r1, arc.r2), max(arc.r1, arc.r2)
    if not lo < r < hi:
        return None
    t = (r - arc.r1) / (arc.r2 - arc.r1)
    return LevelCrossing(float(r), HPoint(r, arc_directions(arc, t)[0]), arc, float(t))


def crossing_table(tree, r, children=None):
    """Vectorized crossings of S(r) by tree edges.

    Returns (child indices, parent indices, t values, crossing directions) for
    every edge with parent radius < r < child radius, restricted to `children`
    when given.
    """
    cloud = tree.cloud
    idx = np.arange(len(tree)) if children is None else np.asarray(children, dtype=np.int64)
    parents = tree.parent[idx]
    r1 = cloud.radii[idx]
    r2 = np.where(parents == ROOT, 0.0, cloud.radii[np.maximum(parents, 0)])
    keep = (r2 < r) & (r < r1)
    idx, parents, r1, r2 = idx[keep], parents[keep], r1[keep], r2[keep]
    t = (r - r1) / (r2 - r1)
    u1 = cloud.directions[idx]
    u2 = np.where((parents == ROOT)[:, None], u1, cloud.directions[np.maximum(parents, 0)])
    theta = angles_between(u1, u2)
    if np.any(theta > math.pi - RADIAL_EPS):
        raise AntipodalArcError("an edge joins antipodal directions")
    radial = theta < RADIAL_EPS
    safe = np.where(radial, 1.0, theta)
    s = np.where(radial, 0.0, _phi(r1, r2, safe, t))[:, None]
    sin_t = np.sin(safe)[:, None]
    dirs = (np.sin((1.0 - s) * safe[:, None]) * u1 + np.sin(s * safe[:, None]) * u2) / sin_t
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True) if dirs.size else dirs.reshape(0, tree.d + 1)
    return idx, parents, t, dirs


def level_set(tree, r):
    """L_r with multiplicity: one crossing per edge straddling S(r), ordered by child index."""
    if not 0.0 < r < tree.cloud.radius:
        raise ValueError(f"level must lie in (0, {tree.cloud.radius}), got {r}")
    idx, _, t, dirs = crossing_table(tree, r)
    return [
        LevelCrossing(float(r), HPoint(r, u), arc_for_edge(tree, int(i)), float(ti))
        for i, ti, u in zip(idx, t, dirs)
    ]


def level_count(tree, r):
    radii = tree.cloud.radii
    parent_r = np.where(tree.parent == ROOT, 0.0, radii[np.maximum(tree.parent, 0)])
    return int(np.count_nonzero((parent_r < r) & (r < radii)))


def is_in_level_set(tree, crossing):
    arc = crossing.arc
    if not 0 <= arc.child < len(tree) or int(tree.parent[arc.child]) != arc.parent:
        return False
    return arc.r2 < crossing.level < arc.r1 and crossing.location.radius == crossing.level


def crossing_in_cap(dirs, center, angular_radius):
    return angles_between(dirs, center) < angular_radius

