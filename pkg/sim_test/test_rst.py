import math

import numpy as np
import pytest

from errors import DegenerateCloudError
from geometry.hypgeom import angular_diameter, distances
from sampling.ppp import Stream, resample_inside, sample_ball
from tree.rst import (
    ROOT,
    RadialTree,
    brute_force_parents,
    build,
    check_planarity_d1,
    descendants,
    good_vertices,
    load_tree,
    max_in_degree,
    path_to_root,
    rebuild_outside,
    root_branch,
    save_tree,
    straightness_profile,
    subtree_angular_diameter,
)


def test_scan_matches_brute_force_on_random_clouds():
    mismatches = 0
    for seed in range(100):
        cloud = sample_ball(1, 1.0, 4.0 + seed % 3, Stream(seed))
        parent, _ = brute_force_parents(cloud)
        mismatches += int(np.count_nonzero(build(cloud, "scan").parent != parent))
    assert mismatches == 0


@pytest.mark.parametrize("d, radius", [(1, 6.0), (2, 3.0), (3, 2.5)])
def test_indexed_matches_brute_force(d, radius):
    cloud = sample_ball(d, 1.0, radius, Stream(31, d))
    parent, dist = brute_force_parents(cloud)
    tree = build(cloud, "indexed")
    assert np.array_equal(tree.parent, parent)
    assert np.allclose(tree.ancestor_distance, dist, rtol=1e-12, atol=0.0)


def test_tree_structure(tree_d1):
    cloud = tree_d1.cloud
    idx = np.arange(len(tree_d1))
    linked = tree_d1.parent != ROOT
    assert np.all(tree_d1.parent[linked] < idx[linked])
    assert tree_d1.parent[0] == ROOT
    assert tree_d1.ancestor_distance[0] == cloud.radii[0]
    # the recorded distance is the distance to the recorded parent
    p = tree_d1.parent[linked]
    d = distances(cloud.radii[linked], cloud.directions[linked], cloud.radii[p], cloud.directions[p])
    assert np.allclose(tree_d1.ancestor_distance[linked], d)
    assert np.all(tree_d1.ancestor_distance[~linked] == cloud.radii[~linked])
    assert np.all(tree_d1.ancestor_distance <= cloud.radii)


def test_ties_prefer_the_smaller_index(polar):
    cloud = polar([(1.0, 30.0), (1.0, -30.0), (2.5, 0.0)])
    tree = build(cloud, "scan")
    assert tree.parent[2] == 0
    assert tree.ties >= 1
    assert brute_force_parents(cloud)[0][2] == 0


def test_coincident_points_are_rejected(polar):
    with pytest.raises(DegenerateCloudError):
        build(polar([(1.0, 10.0), (1.0, 10.0), (2.0, 0.0)]))


def test_empty_and_single_point_clouds(polar):
    empty = build(sample_ball(1, 0.0, 3.0, Stream(0)))
    assert len(empty) == 0
    assert max_in_degree(empty) == 0
    single = build(polar([(1.5, 45.0)]))
    assert single.parent.tolist() == [ROOT]
    assert single.ancestor_distance[0] == 1.5


def test_rebuild_outside_matches_a_full_build():
    cloud = sample_ball(1, 1.0, 6.0, Stream(5))
    tree = build(cloud)
    for j in range(3):
        fresh = resample_inside(cloud, 3.0, Stream(5).child(j))
        rebuilt = rebuild_outside(tree, fresh, 3.0)
        assert np.array_equal(rebuilt.parent, build(fresh).parent)


def test_queries(tree_d1):
    members = descendants(tree_d1, 0)
    assert 0 in members
    for v in members.members - {0}:
        assert 0 in path_to_root(tree_d1, v)
    assert path_to_root(tree_d1, len(tree_d1) - 1)[-1] == ROOT
    assert max_in_degree(tree_d1) >= 1

    branch = root_branch(tree_d1)
    roots = np.flatnonzero(tree_d1.parent == ROOT)
    assert set(np.unique(branch)) == set(roots)
    assert sum(len(descendants(tree_d1, int(r))) for r in roots) == len(tree_d1)

    good = good_vertices(tree_d1, 0.5, 2.0, 4.0)
    assert np.all(tree_d1.ancestor_distance[good] >= 0.5)
    assert np.all((tree_d1.cloud.radii[good] >= 2.0) & (tree_d1.cloud.radii[good] < 4.0))


def test_children_partition_the_tree(tree_d1):
    counted = sum(len(tree_d1.children(v)) for v in range(-1, len(tree_d1)))
    assert counted == len(tree_d1)
    for v in range(len(tree_d1)):
        assert np.all(tree_d1.parent[tree_d1.children(v)] == v)


def test_random_tree_is_planar():
    tree = build(sample_ball(1, 1.0, 5.0, Stream(77)))
    assert check_planarity_d1(tree) == []


def test_crossing_edges_are_detected(polar):
    cloud = polar([(1.0, 0.0), (1.01, 90.0), (2.0, 80.0), (2.01, 10.0)])
    corrupted = RadialTree(cloud, [ROOT, ROOT, 0, 1], [1.0, 1.01, 1.0, 1.0])
    assert check_planarity_d1(corrupted) == [(2, 3)]


def test_planarity_needs_d1(tree_d2):
    with pytest.raises(ValueError):
        check_planarity_d1(tree_d2)


def test_subtree_angular_diameter(tree_d1, tree_d2):
    for tree in (tree_d1, tree_d2):
        diam = subtree_angular_diameter(tree)
        leaves = [v for v in range(len(tree)) if not len(tree.children(v))]
        assert np.all(diam[leaves] == 0.0)
        assert np.all(diam <= math.pi + 1e-12)
        for v in range(len(tree)):
            p = tree.parent[v]
            if p != ROOT:
                assert diam[p] >= diam[v] - 1e-12


def test_subtree_angular_diameter_matches_each_descendant_set(tree_d1, tree_d2):
    for tree in (tree_d1, tree_d2):
        diam = subtree_angular_diameter(tree)
        for v in range(len(tree)):
            members = sorted(descendants(tree, v).members)
            assert diam[v] == pytest.approx(angular_diameter(tree.cloud.directions[members]), abs=1e-9)


def test_subtree_spread_past_the_antipode(polar):
    cloud = polar([(1.0, 0.0), (2.0, 170.0), (2.01, -170.0)])
    fan = RadialTree(cloud, [ROOT, 0, 0], [1.0, 2.0, 2.0])
    diam = subtree_angular_diameter(fan)
    assert diam[0] == pytest.approx(math.radians(170.0), abs=1e-12)
    assert diam[1] == diam[2] == 0.0

    pair = RadialTree(polar([(1.0, 170.0), (2.0, -170.0)]), [ROOT, 0], [1.0, 1.2])
    assert subtree_angular_diameter(pair)[0] == pytest.approx(math.radians(20.0), abs=1e-12)


def test_radial_chain_queries(polar):
    chain = build(polar([(1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]))
    assert chain.parent.tolist() == [ROOT, 0, 1]
    assert descendants(chain, 1).members == {1, 2}
    assert path_to_root(chain, 2) == [2, 1, 0, ROOT]
    assert np.all(subtree_angular_diameter(chain) == 0.0)


def test_straightness_profile(tree_d1):
    rows = straightness_profile(tree_d1, 0.5, [2.0, 3.0], horizon=6.0, margin=2.0)
    assert [row["level"] for row in rows] == [2.0, 3.0]
    for row in rows:
        assert 0 <= row["flagged"] <= row["vertices"]
        assert 0.0 <= row["fraction"] <= 1.0
    with pytest.raises(ValueError):
        straightness_profile(tree_d1, 1.5, [2.0])


def test_tree_json_round_trip(tmp_path, tree_d1):
    path = tmp_path / "tree.json"
    save_tree(tree_d1, path)
    back = load_tree(path)
    assert np.array_equal(back.parent, tree_d1.parent)
    assert np.array_equal(back.ancestor_distance, tree_d1.ancestor_distance)
    assert np.array_equal(back.cloud.radii, tree_d1.cloud.radii)


def test_unknown_method(tree_d1):
    with pytest.raises(ValueError):
        build(tree_d1.cloud, "magic")
