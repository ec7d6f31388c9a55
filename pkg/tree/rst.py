"""Radial Spanning Tree: every point links to its nearest point among the origin
and the points strictly closer to the origin.

Vertices are cloud indices. Clouds are radius-sorted, so a parent always has a
smaller index than its child. The origin is the sentinel ROOT = -1, which also
makes it win distance ties under the (distance, index) order.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

import config
from errors import DegenerateCloudError
from geometry.hypgeom import HPoint, angular_diameter, distances, geodesic_poincare
from sampling.ppp import cloud_from_dict, cloud_to_dict

logger = logging.getLogger(__name__)

ROOT = -1
AUTO_INDEX_THRESHOLD = 5000
SEED_NEIGHBOURS = 16


@dataclass(frozen=True, eq=False)
class RadialTree:
    cloud: object
    parent: np.ndarray
    ancestor_distance: np.ndarray
    ties: int = 0

    def __post_init__(self):
        parent = np.asarray(self.parent, dtype=np.int64)
        dist = np.asarray(self.ancestor_distance, dtype=float)
        if parent.shape != (len(self.cloud),) or dist.shape != parent.shape:
            raise ValueError("parent and ancestor_distance must have one entry per cloud point")
        parent.setflags(write=False)
        dist.setflags(write=False)
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "ancestor_distance", dist)

    def __len__(self):
        return self.parent.size

    @property
    def d(self):
        return self.cloud.d

    def radius_of(self, v):
        return 0.0 if v == ROOT else float(self.cloud.radii[v])

    def direction_of(self, v):
        return None if v == ROOT else self.cloud.directions[v]

    @cached_property
    def _child_index(self):
        # CSR layout keyed by parent + 1 so ROOT lands in slot 0
        order = np.argsort(self.parent, kind="stable")
        counts = np.bincount(self.parent + 1, minlength=len(self) + 1)
        starts = np.concatenate([[0], np.cumsum(counts)])
        return order, starts

    def children(self, v):
        order, starts = self._child_index
        return order[starts[v + 1]:starts[v + 2]]


@dataclass(frozen=True)
class DescendantSet:
    root_vertex: int
    members: frozenset = field(default_factory=frozenset)

    def __contains__(self, v):
        return v in self.members

    def __len__(self):
        return len(self.members)


# --- ancestor search ---

class _Argmin:
    """Running argmin under the (distance, index) order, counting exact ties."""

    def __init__(self, radius):
        self.best = radius
        self.best_j = ROOT
        self.ties = 0

    def offer(self, dists, js):
        if not dists.size:
            return
        k = int(np.argmin(dists))
        dmin = float(dists[k])
        if dmin == 0.0:
            raise DegenerateCloudError(f"points {int(js[k])} and the query point coincide")
        equal = js[dists == dmin]
        if dmin < self.best:
            self.best, self.best_j = dmin, int(equal.min())
            self.ties += equal.size - 1
        elif dmin == self.best:
            # the indexed search may offer the current best twice
            fresh = equal[equal != self.best_j]
            if fresh.size:
                self.ties += fresh.size
                self.best_j = min(self.best_j, int(fresh.min()))


def _check_radius_ties(radii, dirs):
    same = np.flatnonzero(np.diff(radii) == 0.0)
    for k in same:
        if np.array_equal(dirs[k], dirs[k + 1]):
            raise DegenerateCloudError(f"points {k} and {k + 1} coincide")
    if same.size:
        logger.warning(f"⚠️ {same.size} exact radius ties in the cloud")
    return int(same.size)


def _below(radii, i):
    """Number of points with radius strictly below radii[i]."""
    return int(np.searchsorted(radii, radii[i], side="left"))


def _scan_parent(i, radii, dirs, chunk=32):
    """Descending radial scan with early exit once r_i − r_j exceeds the best distance."""
    r_i = radii[i]
    search = _Argmin(r_i)
    hi = _below(radii, i)
    while hi > 0:
        lo = max(0, hi - chunk)
        js = np.arange(lo, hi)
        search.offer(distances(r_i, dirs[i], radii[lo:hi], dirs[lo:hi]), js)
        if r_i - radii[lo] > search.best:
            break
        hi = lo
        chunk = min(chunk * 2, 4096)
    return search


def brute_force_parents(cloud):
    """O(n²) argmin oracle over the origin and every strictly smaller radius."""
    radii, dirs = cloud.radii, cloud.directions
    _check_radius_ties(radii, dirs)
    parent = np.full(len(cloud), ROOT, dtype=np.int64)
    best = np.array(radii, dtype=float)
    for i in range(len(cloud)):
        hi = _below(radii, i)
        search = _Argmin(radii[i])
        search.offer(distances(radii[i], dirs[i], radii[:hi], dirs[:hi]), np.arange(hi))
        parent[i], best[i] = search.best_j, search.best
    return parent, best


class _ShellIndex:
    """KD-trees over the directions of each unit radial shell [k, k+1)."""

    def __init__(self, radii, dirs):
        self.radii = radii
        self.dirs = dirs
        top = int(math.floor(radii[-1])) if radii.size else 0
        shell = np.floor(radii).astype(int)
        self.members = [np.flatnonzero(shell == k) for k in range(top + 1)]
        self.trees = [cKDTree(dirs[m]) if m.size else None for m in self.members]

    def seed(self, i, search):
        k = int(math.floor(self.radii[i]))
        for s in (k, k - 1):
            if s < 0 or self.trees[s] is None:
                continue
            m = self.members[s]
            _, local = self.trees[s].query(self.dirs[i], k=min(SEED_NEIGHBOURS, m.size))
            js = np.sort(m[np.atleast_1d(local)])
            js = js[self.radii[js] < self.radii[i]]
            search.offer(distances(self.radii[i], self.dirs[i], self.radii[js], self.dirs[js]), js)

    def parent(self, i):
        r_i, u_i = self.radii[i], self.dirs[i]
        search = _Argmin(r_i)
        self.seed(i, search)
        k = int(math.floor(r_i))
        while k >= 0 and k + 1 > r_i - search.best:
            tree = self.trees[k]
            if tree is not None:
                rho_lo = max(float(k), r_i - search.best)
                denom = math.sqrt(math.sinh(r_i) * math.sinh(rho_lo)) if rho_lo > 0 else 0.0
                bound = 2.0 if denom == 0.0 else min(2.0, 2.0 * math.sinh(search.best / 2.0) / denom)
                local = tree.query_ball_point(u_i, bound * (1.0 + 1e-9) + 1e-15)
                if local:
                    js = np.sort(self.members[k][local])
                    js = js[self.radii[js] < r_i]
                    search.offer(distances(r_i, u_i, self.radii[js], self.dirs[js]), js)
            k -= 1
        return search


def build(cloud, method="auto"):
    """RST of the cloud. Methods: scan, indexed, brute, auto."""
    if method == "auto":
        method = "indexed" if len(cloud) > AUTO_INDEX_THRESHOLD else "scan"
    radii, dirs = cloud.radii, cloud.directions
    n = len(cloud)
    if method == "brute":
        parent, best = brute_force_parents(cloud)
        return RadialTree(cloud, parent, best)
    radius_ties = _check_radius_ties(radii, dirs)
    parent = np.full(n, ROOT, dtype=np.int64)
    best = np.empty(n)
    ties = 0
    if method == "scan":
        for i in range(n):
            search = _scan_parent(i, radii, dirs)
            parent[i], best[i] = search.best_j, search.best
            ties += search.ties
    elif method == "indexed":
        index = _ShellIndex(radii, dirs)
        for i in range(n):
            search = index.parent(i)
            parent[i], best[i] = search.best_j, search.best
            ties += search.ties
    else:
        raise ValueError(f"unknown build method {method!r}")
    if ties:
        logger.warning(f"⚠️ {ties} argmin ties broken by smaller index")
    logger.debug(f"Built RST on {n} points ({method}), {radius_ties} radius ties")
    return RadialTree(cloud, parent, best, ties)


def rebuild_outside(tree, new_cloud, r):
    """RST of a cloud that agrees with tree.cloud outside B(r).

    Outer vertices keep their (shifted) parent unless their half-lens
    B⁺(z, d(z, A(z))) can reach B(r), that is d(z, A(z)) >= r_z − r.
    """
    old = tree.cloud
    n_old_in = int(np.searchsorted(old.radii, r, side="left"))
    n_new_in = int(np.searchsorted(new_cloud.radii, r, side="left"))
    if len(old) - n_old_in != len(new_cloud) - n_new_in:
        raise ValueError("clouds differ outside B(r)")
    offset = n_new_in - n_old_in
    radii, dirs = new_cloud.radii, new_cloud.directions
    _check_radius_ties(radii, dirs)
    parent = np.full(len(new_cloud), ROOT, dtype=np.int64)
    best = np.empty(len(new_cloud))
    ties = 0
    recomputed = 0
    for i in range(len(new_cloud)):
        if i >= n_new_in:
            i_old = i - offset
            d_old = tree.ancestor_distance[i_old]
            if d_old < radii[i] - r:
                parent[i] = tree.parent[i_old] + offset
                best[i] = d_old
                continue
        search = _scan_parent(i, radii, dirs)
        parent[i], best[i] = search.best_j, search.best
        ties += search.ties
        recomputed += 1
    logger.debug(f"Rebuilt {recomputed}/{len(new_cloud)} ancestors after resampling B({r})")
    return RadialTree(new_cloud, parent, best, ties)


# --- queries ---

def descendants(tree, v):
    members = {v}
    stack = [v]
    while stack:
        kids = tree.children(stack.pop())
        members.update(int(k) for k in kids)
        stack.extend(int(k) for k in kids)
    return DescendantSet(v, frozenset(members))


def path_to_root(tree, v):
    path = [v]
    while path[-1] != ROOT:
        path.append(int(tree.parent[path[-1]]))
    return path


def max_in_degree(tree):
    if not len(tree):
        return 0
    return int(np.bincount(tree.parent + 1, minlength=len(tree) + 1)[1:].max())


def root_branch(tree):
    """Label of the child-of-root subtree holding each vertex."""
    label = np.arange(len(tree))
    for i in range(len(tree)):
        if tree.parent[i] != ROOT:
            label[i] = label[tree.parent[i]]
    return label


def good_vertices(tree, delta, r_lo, r_hi):
    """G(δ) vertices with radius in [r_lo, r_hi): the ancestor sits at distance >= δ."""
    radii = tree.cloud.radii
    mask = (radii >= r_lo) & (radii < r_hi) & (tree.ancestor_distance >= delta)
    return np.flatnonzero(mask)


# --- structural checks ---

def _orient(a, b, c):
    return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])


def _polylines_cross(p, q, tol):
    p1, p2 = p[:-1, None, :], p[1:, None, :]
    q1, q2 = q[None, :-1, :], q[None, 1:, :]
    o1, o2 = _orient(p1, p2, q1), _orient(p1, p2, q2)
    o3, o4 = _orient(q1, q2, p1), _orient(q1, q2, p2)
    split_q = ((o1 > tol) & (o2 < -tol)) | ((o1 < -tol) & (o2 > tol))
    split_p = ((o3 > tol) & (o4 < -tol)) | ((o3 < -tol) & (o4 > tol))
    return bool(np.any(split_q & split_p))


def edge_polylines(tree, samples=64):
    origin = HPoint.origin(tree.d)
    lines = []
    for i in range(len(tree)):
        p = int(tree.parent[i])
        lines.append(geodesic_poincare(tree.cloud.point(i), origin if p == ROOT else tree.cloud.point(p), samples))
    return lines


def check_planarity_d1(tree, samples=64, tol=1e-9):
    """Edge pairs whose Poincaré-disc geodesics cross at interior points.

    Edges sharing an endpoint are skipped: two distinct geodesics meet at most once.
    """
    if tree.d != 1:
        raise ValueError("planarity is only defined for d=1")
    lines = edge_polylines(tree, samples)
    if not lines:
        return []
    lo = np.array([line.min(axis=0) for line in lines])
    hi = np.array([line.max(axis=0) for line in lines])
    order = np.argsort(lo[:, 0], kind="stable")
    crossings = []
    for a_pos, a in enumerate(order):
        for b in order[a_pos + 1:]:
            if lo[b, 0] > hi[a, 0]:
                break
            if lo[b, 1] > hi[a, 1] or lo[a, 1] > hi[b, 1]:
                continue
            ends_a = {int(a), int(tree.parent[a])}
            ends_b = {int(b), int(tree.parent[b])}
            if ends_a & ends_b:
                continue
            if _polylines_cross(lines[a], lines[b], tol):
                crossings.append((min(int(a), int(b)), max(int(a), int(b))))
    if crossings:
        logger.warning(f"⚠️ {len(crossings)} crossing edge pairs")
    return sorted(crossings)


def _unwrapped_angles(tree):
    """d=1 polar angles unwrapped along tree paths, so subtree spans are differences."""
    dirs = tree.cloud.directions
    theta = np.arctan2(dirs[:, 1], dirs[:, 0])
    out = np.empty(len(tree))
    for i in range(len(tree)):
        p = tree.parent[i]
        if p == ROOT:
            out[i] = theta[i]
        else:
            step = (theta[i] - theta[p] + math.pi) % (2.0 * math.pi) - math.pi
            out[i] = out[p] + step
    return out


def subtree_angular_diameter(tree):
    """Max pairwise origin angle inside D(z) for every vertex z.

    d=1 aggregates unwrapped angle ranges bottom-up; a range below π is the
    diameter itself. Wider subtrees, and other dimensions, measure each
    descendant set directly.
    """
    n = len(tree)
    if tree.d == 1:
        angles = _unwrapped_angles(tree)
        lo, hi = angles.copy(), angles.copy()
        for i in range(n - 1, -1, -1):
            p = tree.parent[i]
            if p != ROOT:
                lo[p] = min(lo[p], lo[i])
                hi[p] = max(hi[p], hi[i])
        diam = hi - lo
        wide = np.flatnonzero(diam >= math.pi)
    else:
        diam = np.zeros(n)
        wide = range(n)
    for v in wide:
        members = np.fromiter(descendants(tree, int(v)).members, dtype=np.int64)
        diam[v] = angular_diameter(tree.cloud.directions[members])
    return diam


def straightness_profile(tree, epsilon, levels, horizon=None, margin=2.0):
    """Fraction of vertices per unit radius bin whose subtree leaves the cone of aperture e^{−(1−ε)r}."""
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    horizon = tree.cloud.radius - config.SHELL if horizon is None else horizon
    diam = subtree_angular_diameter(tree)
    radii = tree.cloud.radii
    rows = []
    for level in levels:
        mask = (radii >= level) & (radii < level + 1) & (radii <= horizon - margin)
        flagged = diam[mask] > np.exp(-(1.0 - epsilon) * radii[mask])
        count = int(mask.sum())
        rows.append({
            "level": float(level),
            "vertices": count,
            "flagged": int(flagged.sum()),
            "fraction": float(flagged.mean()) if count else 0.0,
        })
    return rows


# --- persistence ---

def save_tree(tree, path):
    data = {
        "cloud": cloud_to_dict(tree.cloud),
        "parent": tree.parent.tolist(),
        "ancestorDistance": tree.ancestor_distance.tolist(),
        "ties": tree.ties,
    }
    Path(path).write_text(json.dumps(data))
    logger.info(f"✅ Wrote tree with {len(tree)} vertices to {path}")


def load_tree(path):
    data = json.loads(Path(path).read_text())
    return RadialTree(cloud_from_dict(data["cloud"]), data["parent"], data["ancestorDistance"], data.get("ties", 0))
