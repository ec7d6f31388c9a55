import math

import mpmath
import numpy as np
import pytest

from errors import AntipodalArcError
from geometry.hypgeom import HPoint, angles_between
from tree.arcs import (
    Arc,
    LevelCrossing,
    arc_between,
    arc_directions,
    arc_for_edge,
    arc_formula_check,
    arc_phi,
    arc_point,
    crossing_in_cap,
    crossing_table,
    edge_arcs,
    is_in_level_set,
    level_count,
    level_crossing,
    level_set,
    ratio_out_of_range,
    sinh_ratio,
)
from tree.rst import ROOT


def _bent_arcs(tree):
    return [arc for arc in edge_arcs(tree) if arc.parent != ROOT and not arc.is_radial()]


def test_endpoints_are_reproduced_exactly(tree_d1, tree_d2):
    for tree in (tree_d1, tree_d2):
        for arc in edge_arcs(tree)[:200]:
            start, end = arc_point(arc, 0.0), arc_point(arc, 1.0)
            assert start.radius == arc.r1 and np.array_equal(start.direction, arc.u1)
            assert end.radius == arc.r2
            if arc.parent != ROOT:
                assert np.array_equal(end.direction, arc.u2)


def test_radius_is_affine_and_direction_stays_on_the_geodesic(tree_d1, tree_d2):
    worst = 0.0
    for tree in (tree_d1, tree_d2):
        for arc in _bent_arcs(tree)[:500]:
            t = np.array([0.1, 0.25, 0.5, 0.75, 0.9])
            for ti in t:
                assert arc_point(arc, ti).radius == (1.0 - ti) * arc.r1 + ti * arc.r2
            dirs = arc_directions(arc, t)
            residual = angles_between(arc.u1, dirs) + angles_between(dirs, arc.u2) - arc.theta
            worst = max(worst, float(np.abs(residual).max()))
    assert worst <= 1e-9


def _mp_chord_angle(r1, r2, theta, t):
    """Angle from u1 of (1−t)·sinh r1·u1 + t·sinh r2·u2 at 50 digits, with u1 = e_0."""
    with mpmath.workdps(50):
        r1, r2, theta, t = (mpmath.mpf(x) for x in (r1, r2, theta, t))
        x = (1 - t) * mpmath.sinh(r1) + t * mpmath.sinh(r2) * mpmath.cos(theta)
        y = t * mpmath.sinh(r2) * mpmath.sin(theta)
        return mpmath.atan2(y, x)


def test_bent_arc_direction_against_high_precision():
    theta = math.radians(20.0)
    arc = arc_between(HPoint.from_angle(3.0, 0.0), HPoint.from_angle(2.0, theta))
    point = arc_point(arc, 0.5)
    assert point.radius == 2.5
    assert point.angle == pytest.approx(float(_mp_chord_angle(3.0, 2.0, theta, 0.5)), abs=1e-12)
    assert 0.0 < arc_phi(arc, 0.5) < 1.0
    for t in (0.1, 0.3, 0.7, 0.9):
        expected = float(_mp_chord_angle(3.0, 2.0, theta, t) / mpmath.mpf(theta))
        assert arc_phi(arc, t) == pytest.approx(expected, abs=1e-12)


def test_closed_form_ratio_exceeds_one_on_a_typical_arc():
    theta = math.radians(20.0)
    with mpmath.workdps(50):
        r1, r2, th, t = mpmath.mpf(3), mpmath.mpf(2), mpmath.radians(20), mpmath.mpf("0.5")
        exact = ((1 - t) * mpmath.sinh(r1) + t * mpmath.cos(th) * mpmath.sinh(r2)) / mpmath.sinh((1 - t) * r1 + t * r2)
    assert float(exact) == pytest.approx(1.1096, abs=1e-4)
    assert sinh_ratio(3.0, 2.0, theta, 0.5) == pytest.approx(float(exact), rel=1e-12)
    assert ratio_out_of_range(3.0, 2.0, theta, 0.5)


def test_phi_is_monotone_on_arcs_where_the_closed_form_breaks(tree_d1):
    check = arc_formula_check(tree_d1)
    assert check["violating_arcs"] > 0
    assert check["worst_ratio"] > 1.0

    t = np.linspace(0.0, 1.0, 101)
    broken = 0
    for arc in _bent_arcs(tree_d1)[:200]:
        phi = arc_phi(arc, t)
        assert phi[0] == 0.0 and phi[-1] == 1.0
        assert np.all((phi >= 0.0) & (phi <= 1.0 + 1e-12))
        assert np.all(np.diff(phi) > 0.0)
        broken += bool(np.any(ratio_out_of_range(arc.r1, arc.r2, arc.theta, t[1:-1])))
    assert broken > 0


def test_radial_arcs(tree_d1):
    root_edges = [arc for arc in edge_arcs(tree_d1) if arc.parent == ROOT]
    assert root_edges
    arc = root_edges[0]
    assert arc.is_radial()
    dirs = arc_directions(arc, np.linspace(0.0, 1.0, 5))
    assert np.allclose(dirs, arc.u1)
    assert arc_point(arc, 1.0).is_origin()


def test_antipodal_arc_is_rejected():
    arc = arc_between(HPoint.from_angle(1.0, 0.0), HPoint.from_angle(2.0, math.pi))
    with pytest.raises(AntipodalArcError):
        arc_directions(arc, [0.5])
    with pytest.raises(ValueError):
        arc_point(arc_between(HPoint.from_angle(1.0, 0.0), HPoint.from_angle(2.0, 1.0)), 1.5)


def test_each_straddled_sphere_is_crossed_once(tree_d1):
    for arc in edge_arcs(tree_d1)[:300]:
        for r in (0.5, 1.0, 2.0, 3.0, 4.5):
            crossing = level_crossing(arc, r)
            if arc.r2 < r < arc.r1:
                assert crossing is not None
                assert crossing.location.radius == r
                assert arc_point(arc, crossing.t).radius == pytest.approx(r, abs=1e-12)
            else:
                assert crossing is None


def test_level_set_matches_crossing_table(tree_d1, tree_d2):
    for tree in (tree_d1, tree_d2):
        for r in (1.0, 2.0, 2.5):
            crossings = level_set(tree, r)
            idx, parents, t, dirs = crossing_table(tree, r)
            assert len(crossings) == len(idx) == level_count(tree, r)
            assert [c.down for c in crossings] == idx.tolist()
            assert [c.up for c in crossings] == parents.tolist()
            for c, u in zip(crossings, dirs):
                assert np.allclose(c.location.direction, u, atol=1e-12)
                assert is_in_level_set(tree, c)


def test_level_set_bounds(tree_d1):
    with pytest.raises(ValueError):
        level_set(tree_d1, 0.0)
    with pytest.raises(ValueError):
        level_set(tree_d1, tree_d1.cloud.radius)


def test_fabricated_crossing_is_not_in_level_set(tree_d1):
    v = int(np.flatnonzero(tree_d1.parent != ROOT)[0])
    arc = arc_for_edge(tree_d1, v)
    wrong = Arc(v, ROOT, arc.r1, arc.u1, 0.0, arc.u1)
    r = (arc.r1 + arc.r2) / 2.0
    assert not is_in_level_set(tree_d1, LevelCrossing(r, HPoint(r, arc.u1), wrong, 0.5))
    assert is_in_level_set(tree_d1, level_crossing(arc, r))


def test_crossing_in_cap():
    dirs = np.array([[1.0, 0.0], [0.0, 1.0], [math.cos(0.1), math.sin(0.1)]])
    assert crossing_in_cap(dirs, np.array([1.0, 0.0]), 0.2).tolist() == [True, False, True]
