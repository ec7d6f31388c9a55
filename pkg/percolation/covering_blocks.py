"""Cap coverings of S^d, the block decomposition of annuli and δ-bad block clusters.

A block B_{k,m} is C(k, k+1) ∩ Cone(c_m, e^{−k}) for an integer level k and a
centre c_m of the level-k covering. It is δ-bad when it holds a point whose
ancestor is closer than δ.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import pandas as pd
from scipy import stats
from scipy.spatial import cKDTree

from errors import CoveringError, VerificationError
from geometry.hypgeom import annulus_volume, ball_volume, cap_constant, cap_measure, unit_vector
from geometry.radial import uniform_directions
from geometry.regions import Annulus, Cone, Intersection, region_volume_mc
from percolation.union_find import UnionFind
from sampling.ppp import Stream

logger = logging.getLogger(__name__)

GOLDEN_RATIO = (1 + np.sqrt(5)) / 2
VERIFY_SAMPLES = 100_000
D1_OVERLAP = 3


def chord_of(angle):
    return 2.0 * math.sin(min(angle, math.pi) / 2.0)


@dataclass(frozen=True, eq=False)
class Covering:
    level: float
    d: int
    centers: np.ndarray
    cap_radius: float
    overlap_bound: int
    experimental: bool = False

    def __len__(self):
        return len(self.centers)

    def multiplicity(self, dirs):
        tree = cKDTree(self.centers)
        return tree.query_ball_point(dirs, chord_of(self.cap_radius), return_length=True)


def fibonacci_sphere(n, offset=0.5):
    t = np.arange(n) + offset
    x0, _ = np.modf(t / GOLDEN_RATIO)
    theta = 2 * np.pi * x0
    phi = np.arccos(1 - 2 * t / n)
    return np.column_stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])


def _centers(r, d, rng):
    if d == 1:
        n = math.ceil(math.pi * math.exp(r))
        angles = 2.0 * math.pi * np.arange(n) / n
        return np.column_stack([np.cos(angles), np.sin(angles)]), False
    if d == 2:
        # twice the area-matching count keeps the lattice's polar gaps inside the caps
        return fibonacci_sphere(math.ceil(8.0 * math.pi * math.exp(2.0 * r))), False
    logger.warning(f"⚠️ d={d} covering uses random centres and is experimental")
    return uniform_directions(rng, math.ceil(4.0 * math.exp(d * r)), d), True


@lru_cache(maxsize=64)
def build_covering(r, d, samples=VERIFY_SAMPLES, seed=0):
    """Caps of angular radius e^{−r} covering S^d, verified on uniform samples."""
    if r <= 0:
        raise ValueError(f"covering level must be positive, got {r}")
    rng = Stream(seed, 0, (11,)).generator()
    centers, experimental = _centers(r, d, rng)
    cap = math.exp(-r)
    probe = Covering(r, d, centers, cap, 0, experimental)
    test_dirs = uniform_directions(rng, samples, d)
    counts = probe.multiplicity(test_dirs)
    if np.any(counts == 0):
        witness = test_dirs[int(np.argmin(counts))]
        raise CoveringError(f"direction {np.round(witness, 6).tolist()} is not covered at level {r}", witness)
    observed = int(counts.max())
    if d == 1 and observed > D1_OVERLAP:
        raise VerificationError(f"overlap {observed} exceeds {D1_OVERLAP} at level {r}")
    bound = D1_OVERLAP if d == 1 else observed
    logger.debug(f"Covering level {r} d={d}: {len(centers)} caps, max overlap {observed}")
    return Covering(r, d, centers, cap, bound, experimental)


def covering_growth(levels, d, samples=VERIFY_SAMPLES):
    """Fit log N(r) against r; returns (slope, fitted C with N(r) <= C e^{dr})."""
    levels = np.asarray(levels, dtype=float)
    counts = np.array([len(build_covering(float(r), d, samples)) for r in levels])
    fit = stats.linregress(levels, np.log(counts))
    return float(fit.slope), float(np.max(counts * np.exp(-d * levels)))


# --- blocks ---

def block_volume(k, d):
    """Exact rescaled volume of C(k, k+1) ∩ Cone(c, e^{−k})."""
    return annulus_volume(k, k + 1, d) * cap_measure(min(math.exp(-k), math.pi), d)


def fit_block_constant(d, levels, method="analytic", samples=200_000, rng=None):
    """C1 with Vol(B_{k,m}) <= C1 for every block."""
    if method == "analytic":
        return cap_constant(d) / d * (math.exp(d) - 1.0)
    if method == "exact":
        return max(block_volume(k, d) for k in levels)
    if method == "mc":
        rng = rng if rng is not None else Stream(0, 0, (13,)).generator()
        estimates = []
        for k in levels:
            block = Intersection((Annulus(k, k + 1), Cone(unit_vector(d), min(math.exp(-k), math.pi))))
            estimates.append(region_volume_mc(block, samples, rng, d)[0])
        return 1.1 * max(estimates)
    raise ValueError(f"unknown block constant method {method!r}")


def bad_probability_bound(delta, lam, d, c1=None):
    """p(δ) = λ·C1·(1 − e^{−λ·Vol(B(δ))})."""
    c1 = fit_block_constant(d, ()) if c1 is None else c1
    return lam * c1 * (1.0 - math.exp(-lam * ball_volume(delta, d)))


@dataclass(frozen=True, eq=False)
class BlockGraph:
    levels: np.ndarray
    centers: np.ndarray
    delta: float
    bad: np.ndarray
    adjacency: np.ndarray
    components: list

    def __len__(self):
        return self.levels.size

    @property
    def degrees(self):
        return np.bincount(self.adjacency.ravel(), minlength=len(self)) if self.adjacency.size else np.zeros(len(self), int)

    def component_sizes(self):
        return sorted((len(c) for c in self.components), reverse=True)

    def largest_component(self):
        return max((len(c) for c in self.components), default=0)


def adjacency_angle(k, k2, delta):
    """Centre separation below which blocks at integer levels k, k2 >= 1 may hold points closer than δ."""
    reach = math.sinh(delta / 2.0) / math.sqrt(math.sinh(k) * math.sinh(k2))
    return math.exp(-k) + math.exp(-k2) + 2.0 * math.asin(min(1.0, reach))


def build_block_graph(tree, delta, r_min, r_max):
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if r_min < 1 or r_min > r_max:
        raise ValueError(f"block levels need 1 <= r_min <= r_max, got [{r_min}, {r_max}]")
    if r_max + 1 > tree.cloud.radius:
        raise ValueError(f"blocks up to level {r_max} need a cloud of radius >= {r_max + 1}")
    d = tree.d
    radii, dirs = tree.cloud.radii, tree.cloud.directions
    levels = list(range(int(r_min), int(r_max) + 1))
    coverings = {k: build_covering(float(k), d) for k in levels}
    offsets = np.cumsum([0] + [len(coverings[k]) for k in levels])
    start = dict(zip(levels, offsets[:-1]))
    kdtrees = {k: cKDTree(coverings[k].centers) for k in levels}

    bad = np.zeros(offsets[-1], dtype=bool)
    is_bad_point = tree.ancestor_distance < delta
    for k in levels:
        pts = np.flatnonzero((radii >= k) & (radii < k + 1) & is_bad_point)
        if pts.size:
            hits = kdtrees[k].query_ball_point(dirs[pts], chord_of(math.exp(-k)))
            for local in hits:
                bad[start[k] + np.asarray(local, dtype=np.int64)] = True

    pairs = []
    for k in levels:
        for k2 in (k, k + 1):
            if k2 not in kdtrees:
                continue
            reach = chord_of(adjacency_angle(k, k2, delta))
            if k2 == k:
                found = kdtrees[k].query_pairs(reach, output_type="ndarray")
            else:
                found = kdtrees[k].sparse_distance_matrix(kdtrees[k2], reach, output_type="ndarray")
                found = np.column_stack([found["i"], found["j"]]) if found.size else np.empty((0, 2), int)
            if len(found):
                pairs.append(np.column_stack([found[:, 0] + start[k], found[:, 1] + start[k2]]))
    adjacency = np.vstack(pairs).astype(np.int64) if pairs else np.empty((0, 2), dtype=np.int64)

    bad_ids = np.flatnonzero(bad)
    clusters = UnionFind(int(b) for b in bad_ids)
    for a, b in adjacency:
        if bad[a] and bad[b]:
            clusters.union(int(a), int(b))
    block_levels = np.repeat(levels, [len(coverings[k]) for k in levels])
    block_centers = np.concatenate([np.arange(len(coverings[k])) for k in levels])
    logger.debug(f"Block graph δ={delta}: {bad_ids.size}/{block_levels.size} bad, {clusters.n_clusters} clusters")
    return BlockGraph(block_levels, block_centers, delta, bad, adjacency, clusters.components())


def badness_frequency(graph):
    """Fraction of δ-bad blocks with its binomial standard error."""
    n = len(graph)
    if not n:
        return 0.0, 0.0
    p = float(graph.bad.mean())
    return p, math.sqrt(p * (1.0 - p) / n)


def component_rows(graph, r_min, r_max):
    sizes = pd.Series(graph.component_sizes(), dtype=int).value_counts().sort_index()
    return [
        {"delta": graph.delta, "rMin": r_min, "rMax": r_max, "componentSize": int(size), "count": int(count)}
        for size, count in sizes.items()
    ]


def write_component_csv(graphs, path):
    """graphs: iterable of (BlockGraph, r_min, r_max)."""
    rows = [row for graph, r_min, r_max in graphs for row in component_rows(graph, r_min, r_max)]
    pd.DataFrame(rows, columns=["delta", "rMin", "rMax", "componentSize", "count"]).to_csv(path, index=False)
    logger.info(f"✅ Wrote {len(rows)} component-size rows to {path}")
