import re

import pytest

from errors import ConfigError
from render.render_manager import RenderManager, RenderSpec
from sampling.ppp import Stream, sample_ball
from tree.rst import build, load_tree, save_tree


def test_empty_tree_draws_the_boundary_only():
    svg = RenderManager().render(build(sample_ball(1, 0.0, 4.0, Stream(0))))
    assert svg.startswith("<?xml")
    assert "<polyline" not in svg
    assert svg.count("<circle") == 2


def test_render_is_deterministic(tree_d1):
    first = RenderManager().render(tree_d1)
    second = RenderManager(RenderSpec()).render(tree_d1)
    assert first == second
    assert first.count("<polyline") == len(tree_d1)


@pytest.mark.parametrize("style", ["arc", "geodesic"])
def test_render_of_a_reloaded_tree_is_byte_identical(tmp_path, tree_d1, style):
    spec = RenderSpec(edge_style=style)
    save_tree(tree_d1, tmp_path / "tree.json")
    RenderManager(spec).save(tree_d1, tmp_path / "a.svg")
    RenderManager(spec).save(load_tree(tmp_path / "tree.json"), tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


@pytest.mark.parametrize("style", ["arc", "geodesic"])
def test_radial_chain_is_a_diameter(polar, style):
    tree = build(polar([(1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]))
    svg = RenderManager(RenderSpec(size=200, edge_style=style, samples=8)).render(tree)
    for points in re.findall(r'points="([^"]+)"', svg):
        ys = {pair.split(",")[1] for pair in points.split()}
        assert ys == {"100.000"}


def test_subtree_colors(tree_d1):
    colored = RenderManager(RenderSpec(color=True)).render(tree_d1)
    plain = RenderManager(RenderSpec(color=False)).render(tree_d1)
    assert len(set(re.findall(r'stroke="(#[0-9a-f]{6})"', colored))) > 2
    assert set(re.findall(r'<polyline[^>]*stroke="(#[0-9a-f]{6})"', plain)) == {"#333333"}


def test_render_spec_validation():
    with pytest.raises(ConfigError):
        RenderSpec(size=32)
    with pytest.raises(ConfigError):
        RenderSpec(samples=1)
    with pytest.raises(ConfigError):
        RenderSpec(edge_style="spline")


def test_higher_dimensions_are_rejected(tree_d2):
    with pytest.raises(ConfigError):
        RenderManager().render(tree_d2)


def test_save(tmp_path, tree_d1):
    path = tmp_path / "render.svg"
    svg = RenderManager().save(tree_d1, path)
    assert path.read_text() == svg
