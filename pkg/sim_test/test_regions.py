import math

import numpy as np
import pytest
from scipy import stats

from errors import UnboundedRegionError
from geometry.hypgeom import HPoint, ball_volume, unit_vector
from geometry.radial import RadialSampler, radial_sampler, uniform_directions
from geometry.regions import (
    Annulus,
    Ball,
    Cone,
    Difference,
    HalfLens,
    Intersection,
    enclosing_radius,
    half_lens_profile,
    region_contains,
    region_volume_mc,
)


def test_radial_sampler_d1_is_exact_inverse():
    sampler = RadialSampler(1, 5.0)
    u = np.array([0.0, 0.1, 0.5, 0.9])
    r = sampler.inverse(u)
    assert r[0] == 0.0
    assert np.allclose([ball_volume(x, 1) / ball_volume(5.0, 1) for x in r], u, atol=1e-12)
    assert sampler.inverse(1.0) < 5.0


@pytest.mark.parametrize("d", [2, 3])
def test_radial_sampler_inverse_cdf(d):
    sampler = radial_sampler(d, 4.0)
    assert sampler.max_error < 1e-6
    u = np.linspace(0.01, 0.99, 25)
    cdf = np.array([ball_volume(r, d) for r in sampler.inverse(u)]) / ball_volume(4.0, d)
    assert np.allclose(cdf, u, atol=1e-6)


def test_radial_samples_follow_the_volume_law():
    rng = np.random.default_rng(5)
    radius = 4.0
    samples = radial_sampler(1, radius).sample(rng, 20_000)
    result = stats.kstest(samples, lambda r: (np.cosh(r) - 1.0) / (math.cosh(radius) - 1.0))
    assert result.pvalue > 1e-3
    assert samples.max() < radius


def test_uniform_directions_are_unit():
    dirs = uniform_directions(np.random.default_rng(0), 1000, 3)
    assert dirs.shape == (1000, 4)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)


def test_membership():
    e0 = unit_vector(1)
    origin = HPoint.origin(1)
    on_sphere = HPoint(2.0, e0)
    assert region_contains(Ball(origin, 2.0, closed=True), on_sphere)
    assert not region_contains(Ball(origin, 2.0), on_sphere)
    assert region_contains(Annulus(2.0, 3.0), on_sphere)
    assert not region_contains(Annulus(1.0, 2.0), on_sphere)
    assert region_contains(Cone(e0, 0.1), HPoint.from_angle(5.0, 0.05))
    assert not region_contains(Cone(e0, 0.1), HPoint.from_angle(5.0, 0.2))
    assert region_contains(Cone(e0, math.pi), HPoint.from_angle(5.0, math.pi))

    lens = HalfLens(HPoint(3.0, e0), 1.0)
    assert region_contains(lens, HPoint(2.5, e0))
    assert not region_contains(lens, HPoint(3.5, e0))

    shell = Difference(Annulus(1.0, 4.0), (Ball(HPoint(2.0, e0), 0.5),))
    assert not region_contains(shell, HPoint(2.0, e0))
    assert region_contains(shell, HPoint(2.0, -e0))
    both = Intersection((shell, Cone(e0, 0.5)))
    assert not region_contains(both, HPoint(2.0, -e0))
    assert both.dim() == 1


def test_region_validation():
    with pytest.raises(ValueError):
        Annulus(3.0, 2.0)
    with pytest.raises(ValueError):
        Cone(unit_vector(1), 0.0)
    with pytest.raises(ValueError):
        Ball(HPoint.origin(1), -1.0)
    with pytest.raises(UnboundedRegionError):
        enclosing_radius(Cone(unit_vector(1), 1.0))
    assert enclosing_radius(Intersection((Cone(unit_vector(1), 1.0), Annulus(0.0, 3.0)))) == 3.0


def test_region_volume_monte_carlo():
    rng = np.random.default_rng(17)
    est, se = region_volume_mc(Annulus(1.0, 2.0), 20_000, rng, d=1)
    assert abs(est - (math.cosh(2.0) - math.cosh(1.0))) < 5 * se

    half = Intersection((Ball(HPoint.origin(2), 2.0), Cone(unit_vector(2), math.pi / 2)))
    est, se = region_volume_mc(half, 20_000, rng)
    assert abs(est - ball_volume(2.0, 2) / 2) < 5 * se
    with pytest.raises(ValueError):
        region_volume_mc(Annulus(1.0, 2.0), 10, rng, d=1)


def test_half_lens_profile():
    profile = half_lens_profile(1, [2.0, 3.0, 4.0], 1.0, 5000, np.random.default_rng(2))
    assert profile["c"] > 0
    assert len(profile["volumes"]) == 3
    assert all(v > 0 for v in profile["volumes"])
