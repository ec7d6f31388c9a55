import math

import numpy as np
import pandas as pd
import pytest

from geometry.hypgeom import angles_between, ball_volume, unit_vector
from geometry.radial import uniform_directions
from geometry.regions import Annulus, Cone, Intersection, region_volume_mc
from percolation.covering_blocks import (
    D1_OVERLAP,
    adjacency_angle,
    bad_probability_bound,
    badness_frequency,
    block_volume,
    build_block_graph,
    build_covering,
    component_rows,
    covering_growth,
    fibonacci_sphere,
    fit_block_constant,
    write_component_csv,
)
from percolation.union_find import UnionFind


@pytest.mark.parametrize("r", [2.0, 3.0, 4.0])
def test_d1_covering(r):
    cover = build_covering(r, 1)
    assert len(cover) == math.ceil(math.pi * math.exp(r))
    assert cover.overlap_bound == D1_OVERLAP
    counts = cover.multiplicity(uniform_directions(np.random.default_rng(0), 10_000, 1))
    assert counts.min() >= 1 and counts.max() <= D1_OVERLAP


def test_d2_covering():
    cover = build_covering(1.0, 2)
    assert not cover.experimental
    assert cover.multiplicity(uniform_directions(np.random.default_rng(1), 5000, 2)).min() >= 1


def test_covering_growth_matches_dimension():
    slope, constant = covering_growth([2.0, 3.0, 4.0], 1)
    assert slope == pytest.approx(1.0, abs=0.05)
    assert constant > 0


def test_fibonacci_sphere_is_unit():
    pts = fibonacci_sphere(500)
    assert pts.shape == (500, 3)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)


def test_block_volume_against_monte_carlo():
    k = 2
    block = Intersection((Annulus(k, k + 1), Cone(unit_vector(1), math.exp(-k))))
    est, se = region_volume_mc(block, 200_000, np.random.default_rng(4), 1)
    assert abs(est - block_volume(k, 1)) < 5 * se


def test_block_constant_bounds_every_block():
    analytic = fit_block_constant(1, range(1, 7), "analytic")
    exact = fit_block_constant(1, range(1, 7), "exact")
    assert exact <= analytic
    assert all(block_volume(k, 1) <= analytic for k in range(1, 7))
    with pytest.raises(ValueError):
        fit_block_constant(1, range(1, 3), "guess")


def test_bad_probability_bound():
    values = [bad_probability_bound(delta, 1.0, 1) for delta in (0.05, 0.1, 0.2, 0.4)]
    assert all(0 < a < b for a, b in zip(values, values[1:]))
    c1 = fit_block_constant(1, ())
    assert values[0] == pytest.approx(c1 * (1 - math.exp(-ball_volume(0.05, 1))))


def test_adjacency_angle_shrinks_outward():
    assert adjacency_angle(2, 2, 0.1) > adjacency_angle(3, 3, 0.1) > adjacency_angle(3, 4, 0.1)
    assert adjacency_angle(1, 1, 0.5) > 2 * math.exp(-1)


def test_block_graph(tree_d1):
    graph = build_block_graph(tree_d1, 0.2, 1, 4)
    assert len(graph) == sum(len(build_covering(float(k), 1)) for k in range(1, 5))
    clustered = sorted(v for comp in graph.components for v in comp)
    assert clustered == np.flatnonzero(graph.bad).tolist()
    assert graph.largest_component() == max(graph.component_sizes(), default=0)
    assert graph.degrees.sum() == 2 * len(graph.adjacency)

    # every point with a close ancestor lands in some bad block
    radii, dirs = tree_d1.cloud.radii, tree_d1.cloud.directions
    close = np.flatnonzero((tree_d1.ancestor_distance < 0.2) & (radii >= 1) & (radii < 5))
    for v in close:
        k = int(math.floor(radii[v]))
        mask = graph.levels == k
        cover = build_covering(float(k), 1)
        angles = angles_between(cover.centers, dirs[v])
        hit = graph.centers[mask][angles < math.exp(-k)]
        assert graph.bad[np.flatnonzero(mask)[hit]].all()

    p, se = badness_frequency(graph)
    assert 0.0 <= p <= 1.0 and se >= 0.0


def test_block_graph_validation(tree_d1):
    with pytest.raises(ValueError):
        build_block_graph(tree_d1, 1.5, 1, 3)
    with pytest.raises(ValueError):
        build_block_graph(tree_d1, 0.1, 0, 3)
    with pytest.raises(ValueError):
        build_block_graph(tree_d1, 0.1, 1, 6.5)


def test_component_csv(tmp_path, tree_d1):
    graphs = [(build_block_graph(tree_d1, delta, 1, 4), 1, 4) for delta in (0.1, 0.4)]
    path = tmp_path / "components.csv"
    write_component_csv(graphs, path)
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["delta", "rMin", "rMax", "componentSize", "count"]
    rows = component_rows(graphs[1][0], 1, 4)
    assert sum(row["count"] * row["componentSize"] for row in rows) == int(graphs[1][0].bad.sum())


def test_union_find():
    uf = UnionFind(range(6))
    uf.union(0, 1)
    uf.union(1, 2)
    uf.union(4, 5)
    uf.union(2, 0)
    assert uf.n_clusters == 3
    assert uf.size(2) == 3
    assert uf.find(0) == uf.find(2)
    assert uf.components() == [[0, 1, 2], [3], [4, 5]]
    assert 5 in uf and 9 not in uf
