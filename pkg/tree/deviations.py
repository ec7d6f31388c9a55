"""Angular deviation functionals of the RST and finite-horizon trace proxies.

CFD is the total angle, seen from the origin, that a path turns through between
two levels. MBD is the largest CFD over the descendants of a level crossing.
Traces at infinity are read at a horizon sphere S(R_h) strictly inside the
cloud, so every arc crossing S(R_h) has both endpoints in the cloud.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
from scipy.interpolate import PchipInterpolator
from scipy.spatial import cKDTree

import config
from errors import CensoredError, NotInLevelSetError
from geometry.hypgeom import angles_between, angular_diameter, cap_measure
from sampling.ppp import Stream
from tree.arcs import LevelCrossing, arc_for_edge, crossing_table, is_in_level_set, level_crossing
from tree.rst import ROOT, descendants

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HorizonConfig:
    horizon: float
    margin: float = 2.0
    kappa: float = 1.0
    mc_samples: int = 4000
    seed: int = 0

    def __post_init__(self):
        if self.margin <= 0:
            raise ValueError(f"censor margin must be positive, got {self.margin}")
        if self.horizon - self.margin <= 0:
            raise ValueError(f"horizon {self.horizon} leaves no room for margin {self.margin}")
        if self.kappa <= 0:
            raise ValueError(f"cap scale kappa must be positive, got {self.kappa}")

    @classmethod
    def for_tree(cls, tree, margin=2.0, shell=None, **kwargs):
        shell = config.SHELL if shell is None else shell
        return cls(tree.cloud.radius - shell, margin, **kwargs)

    @property
    def trusted_level(self):
        return self.horizon - self.margin

    @property
    def cap_radius(self):
        return self.kappa * math.exp(-self.horizon)

    def check(self, tree, level):
        if self.horizon >= tree.cloud.radius:
            raise ValueError(f"horizon {self.horizon} must sit strictly inside the cloud radius {tree.cloud.radius}")
        if level > self.trusted_level:
            raise CensoredError(f"level {level:.4g} is above the trusted level {self.trusted_level:.4g}")


@dataclass(frozen=True, eq=False)
class TraceEstimate:
    level: float
    base_vertex: int
    survived: bool
    horizon_directions: np.ndarray
    angular_extent: float
    sigma_proxy: float
    ang: float = 0.0
    mbd: Optional[float] = None
    crossing: Optional[LevelCrossing] = field(default=None)

    @property
    def thick(self):
        return self.survived and len(self.horizon_directions) >= 2

    def as_row(self):
        return {
            "baseLevel": self.level,
            "baseVertex": self.base_vertex,
            "survived": self.survived,
            "crossings": int(len(self.horizon_directions)),
            "angularExtent": self.angular_extent,
            "sigmaProxy": self.sigma_proxy,
            "ang": self.ang,
            "mbd": self.mbd,
            "thick": self.thick,
        }


# --- CFD ---

def _dir(tree, v):
    return tree.cloud.directions[v]


def _angle(u, v):
    return float(angles_between(u, v))


def _walk_from_vertex(tree, u, v, r):
    """Angle turned from direction u through vertex v and down the tree to S(r).

    Returns (angle, bottom) with bottom the crossing of S(r), or the vertex index
    when the path meets S(r) exactly at a vertex.
    """
    total = _angle(u, _dir(tree, v))
    while True:
        arc = arc_for_edge(tree, v)
        if arc.r2 < r:
            bottom = level_crossing(arc, r)
            return total + _angle(_dir(tree, v), bottom.location.direction), bottom
        p = arc.parent
        total += _angle(_dir(tree, v), _dir(tree, p))
        if arc.r2 == r:
            return total, p
        v = p


def _cfd_walk(tree, start, r):
    if isinstance(start, LevelCrossing):
        top = start.level
    else:
        top = tree.radius_of(start)
    if r > top:
        raise ValueError(f"target level {r} is above the starting level {top}")
    if r <= 0:
        raise ValueError(f"target level must be positive, got {r}")
    if r == top:
        return 0.0, start
    if not isinstance(start, LevelCrossing):
        return _walk_from_vertex(tree, _dir(tree, start), start, r)
    arc = start.arc
    u = start.location.direction
    if arc.r2 < r:
        bottom = level_crossing(arc, r)
        return _angle(u, bottom.location.direction), bottom
    if arc.r2 == r:
        return _angle(u, _dir(tree, arc.parent)), arc.parent
    return _walk_from_vertex(tree, u, arc.parent, r)


def cfd(tree, crossing, r):
    """CFD between the crossing at level r' and the level r <= r' below it."""
    return _cfd_walk(tree, crossing, r)[0]


def telescoping_check(tree, crossing, mid, base):
    """|CFD_base^top − CFD_mid^top − CFD_base^mid| along the path from the crossing."""
    if not base <= mid <= crossing.level:
        raise ValueError("levels must satisfy base <= mid <= top")
    whole, _ = _cfd_walk(tree, crossing, base)
    upper, mid_point = _cfd_walk(tree, crossing, mid)
    lower, _ = _cfd_walk(tree, mid_point, base)
    return abs(whole - upper - lower)


# --- MBD and horizon traces ---

def _require_level_set(tree, crossing):
    if not is_in_level_set(tree, crossing):
        raise NotInLevelSetError(f"crossing at level {crossing.level} is not generated by tree edge {crossing.arc.child}")


def mbd(tree, crossing, up_to):
    """Sup of CFD over the descendants of the crossing at every level in [r, up_to].

    The sup runs over the subtree vertices with radius <= up_to and the subtree
    crossings of S(up_to).
    """
    _require_level_set(tree, crossing)
    r = crossing.level
    if up_to < r:
        raise ValueError(f"upper level {up_to} is below the base level {r}")
    if up_to >= tree.cloud.radius:
        raise ValueError(f"upper level {up_to} must be inside the cloud radius {tree.cloud.radius}")
    root = crossing.down
    loc = crossing.location.direction
    members = sorted(descendants(tree, root).members)
    radii = tree.cloud.radii
    acc = {}
    best = 0.0
    for v in members:
        if v == root:
            acc[v] = _angle(loc, _dir(tree, v))
        else:
            p = int(tree.parent[v])
            acc[v] = acc[p] + _angle(_dir(tree, v), _dir(tree, p))
        if radii[v] <= up_to:
            best = max(best, acc[v])
    idx, parents, _, q = crossing_table(tree, up_to, members)
    for i, p, u in zip(idx, parents, q):
        if i == root:
            cand = _angle(loc, u)
        else:
            cand = acc[int(p)] + _angle(_dir(tree, p), u)
        best = max(best, cand)
    return best


def _sample_cap_angles(width, d, n, rng):
    u = rng.random(n)
    if d == 2:
        return 2.0 * np.arcsin(np.sqrt(u) * math.sin(width / 2.0))
    grid = np.linspace(0.0, width, 2049)
    x = (cap_measure(grid, d) / cap_measure(width, d)) ** (1.0 / d)
    return PchipInterpolator(x, grid)(u ** (1.0 / d))


def _sample_in_caps(centers, width, d, rng):
    alpha = _sample_cap_angles(width, d, len(centers), rng)[:, None]
    g = rng.standard_normal(centers.shape)
    g -= np.sum(g * centers, axis=1, keepdims=True) * centers
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return np.cos(alpha) * centers + np.sin(alpha) * g


def cap_union_measure(dirs, width, d, rng=None, samples=4000):
    """σ-measure of the union of caps of angular radius `width` around dirs.

    d=1 is exact: each circular gap between consecutive centres contributes
    min(gap, 2·width). Other dimensions use the Karp–Luby estimator.
    """
    dirs = np.asarray(dirs, dtype=float).reshape(-1, d + 1)
    if not len(dirs):
        return 0.0
    if width >= math.pi:
        return 1.0
    if d == 1:
        theta = np.sort(np.arctan2(dirs[:, 1], dirs[:, 0]))
        gaps = np.diff(np.concatenate([theta, [theta[0] + 2.0 * math.pi]]))
        return float(min(1.0, np.minimum(gaps, 2.0 * width).sum() / (2.0 * math.pi)))
    if rng is None:
        raise ValueError("cap-union Monte Carlo needs an rng for d >= 2")
    pick = rng.integers(len(dirs), size=samples)
    points = _sample_in_caps(dirs[pick], width, d, rng)
    chord = 2.0 * math.sin(width / 2.0)
    counts = cKDTree(dirs).query_ball_point(points, chord * (1.0 + 1e-12), return_length=True)
    estimate = len(dirs) * cap_measure(width, d) * float(np.mean(1.0 / np.maximum(counts, 1)))
    return float(min(1.0, estimate))


def _trace_from_hits(tree, level, base_vertex, center, hits, cfg, rng, mbd_value=None, crossing=None):
    survived = len(hits) > 0
    if not survived:
        return TraceEstimate(level, base_vertex, False, hits, 0.0, 0.0, 0.0, mbd_value, crossing)
    ang_value = float(np.max(angles_between(hits, center)))
    sigma = cap_union_measure(hits, cfg.cap_radius, tree.d, rng, cfg.mc_samples)
    return TraceEstimate(level, base_vertex, True, hits, angular_diameter(hits), sigma, ang_value,
                         mbd_value, crossing)


def _rng_for(cfg, tree):
    return Stream(cfg.seed, 0, (7,)).generator() if tree.d >= 2 else None


def trace_estimate(tree, base, cfg):
    """Horizon trace of D(base) for a vertex or a level crossing (D(z) := D(z_↓))."""
    if isinstance(base, LevelCrossing):
        _require_level_set(tree, base)
        root, level, center = base.down, base.level, base.location.direction
    else:
        root = int(base)
        level, center = tree.radius_of(root), _dir(tree, root)
    cfg.check(tree, level)
    members = np.array(sorted(descendants(tree, root).members), dtype=np.int64)
    _, _, _, hits = crossing_table(tree, cfg.horizon, members)
    mbd_value = mbd(tree, base, cfg.horizon) if isinstance(base, LevelCrossing) else None
    crossing = base if isinstance(base, LevelCrossing) else None
    return _trace_from_hits(tree, level, root, center, hits, cfg, _rng_for(cfg, tree), mbd_value, crossing)


def ang(tree, crossing, cfg):
    _require_level_set(tree, crossing)
    return trace_estimate(tree, crossing, cfg).ang


def level_functionals(tree, r, cfg, rng=None):
    """Every crossing of L_r with its MBD up to the horizon and its horizon trace.

    One pass over the tree: each vertex above S(r) inherits the crossing it
    descends from and the angle accumulated since that crossing. Rows follow
    the order of level_set(tree, r).
    """
    cfg.check(tree, r)
    radii, dirs, parent = tree.cloud.radii, tree.cloud.directions, tree.parent
    idx_c, _, _, loc = crossing_table(tree, r)
    m = len(idx_c)
    if not m:
        return []
    parent_dirs = np.where((parent == ROOT)[:, None], dirs, dirs[np.maximum(parent, 0)])
    edge_angle = angles_between(dirs, parent_dirs)
    anchor = np.full(len(tree), -1, dtype=np.int64)
    acc = np.zeros(len(tree))
    anchor[idx_c] = np.arange(m)
    acc[idx_c] = angles_between(loc, dirs[idx_c])
    pending = (anchor < 0) & (parent != ROOT) & (radii > r)
    safe_parent = np.maximum(parent, 0)
    while True:
        ready = pending & (anchor[safe_parent] >= 0)
        if not ready.any():
            break
        anchor[ready] = anchor[safe_parent[ready]]
        acc[ready] = acc[safe_parent[ready]] + edge_angle[ready]
        pending &= ~ready

    mbd_values = np.zeros(m)
    inside = (anchor >= 0) & (radii <= cfg.horizon)
    np.maximum.at(mbd_values, anchor[inside], acc[inside])

    hi_idx, hi_par, _, q = crossing_table(tree, cfg.horizon)
    owner = anchor[hi_idx]
    keep = owner >= 0
    hi_idx, hi_par, q, owner = hi_idx[keep], hi_par[keep], q[keep], owner[keep]
    own_arc = idx_c[owner] == hi_idx
    via_parent = acc[np.maximum(hi_par, 0)] + angles_between(dirs[np.maximum(hi_par, 0)], q)
    top = np.where(own_arc, angles_between(loc[owner], q), via_parent)
    np.maximum.at(mbd_values, owner, top)

    rng = rng if rng is not None else _rng_for(cfg, tree)
    order = np.argsort(owner, kind="stable")
    bounds = np.searchsorted(owner[order], np.arange(m + 1))
    rows = []
    for k in range(m):
        hits = q[order[bounds[k]:bounds[k + 1]]]
        rows.append(_trace_from_hits(tree, float(r), int(idx_c[k]), loc[k], hits, cfg, rng, float(mbd_values[k])))
    return rows


def write_trace_csv(rows, path):
    pd.DataFrame([row.as_row() for row in rows]).to_csv(path, index=False)
    logger.info(f"✅ Wrote {len(rows)} trace rows to {path}")
