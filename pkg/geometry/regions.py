"""Regions of H^{d+1} with vectorized membership and Monte Carlo volumes."""
import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import stats

from errors import UnboundedRegionError
from geometry.hypgeom import HPoint, angles_between, ball_volume, distances, unit_vector
from geometry.radial import radial_sampler, uniform_directions

logger = logging.getLogger(__name__)


def _positive(name, value):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")


@dataclass(frozen=True, eq=False)
class Ball:
    center: HPoint
    radius: float
    closed: bool = False

    def __post_init__(self):
        _positive("ball radius", self.radius)

    def contains_many(self, radii, dirs):
        if self.center.is_origin():
            dist = np.asarray(radii, dtype=float)
        else:
            dist = distances(radii, dirs, self.center.radius, self.center.direction)
        return dist <= self.radius if self.closed else dist < self.radius

    def dim(self):
        return self.center.dim


@dataclass(frozen=True)
class Annulus:
    """C(inner, outer) = {inner <= |z| < outer}."""
    inner: float
    outer: float

    def __post_init__(self):
        if not 0 <= self.inner < self.outer:
            raise ValueError(f"annulus needs 0 <= inner < outer, got ({self.inner}, {self.outer})")

    def contains_many(self, radii, dirs):
        radii = np.asarray(radii)
        return (radii >= self.inner) & (radii < self.outer)

    def dim(self):
        return None


@dataclass(frozen=True, eq=False)
class Cone:
    axis: np.ndarray
    aperture: float

    def __post_init__(self):
        if not 0 < self.aperture <= math.pi:
            raise ValueError(f"cone aperture must lie in (0, π], got {self.aperture}")
        axis = np.asarray(self.axis, dtype=float)
        object.__setattr__(self, "axis", axis / np.linalg.norm(axis))

    def contains_many(self, radii, dirs):
        inside = angles_between(dirs, self.axis) < self.aperture
        if self.aperture == math.pi:
            inside = np.ones_like(inside, dtype=bool)
        return inside

    def dim(self):
        return self.axis.size - 1


@dataclass(frozen=True, eq=False)
class HalfLens:
    """B⁺(z, ρ) = B(z, ρ) ∩ B(0, d(0, z))."""
    point: HPoint
    radius: float

    def __post_init__(self):
        _positive("half-lens radius", self.radius)

    def contains_many(self, radii, dirs):
        near = distances(radii, dirs, self.point.radius, self.point.direction) < self.radius
        return near & (np.asarray(radii) < self.point.radius)

    def dim(self):
        return self.point.dim


@dataclass(frozen=True)
class Intersection:
    parts: Tuple

    def __post_init__(self):
        if not self.parts:
            raise ValueError("an intersection needs at least one region")
        object.__setattr__(self, "parts", tuple(self.parts))

    def contains_many(self, radii, dirs):
        inside = self.parts[0].contains_many(radii, dirs)
        for part in self.parts[1:]:
            inside = inside & part.contains_many(radii, dirs)
        return inside

    def dim(self):
        return next((p.dim() for p in self.parts if p.dim() is not None), None)


@dataclass(frozen=True)
class Difference:
    """base minus the union of removed."""
    base: object
    removed: Tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "removed", tuple(self.removed))

    def contains_many(self, radii, dirs):
        inside = self.base.contains_many(radii, dirs)
        for part in self.removed:
            inside = inside & ~part.contains_many(radii, dirs)
        return inside

    def dim(self):
        if self.base.dim() is not None:
            return self.base.dim()
        return next((p.dim() for p in self.removed if p.dim() is not None), None)


def region_contains(reg, z):
    return bool(reg.contains_many(np.array([z.radius]), z.direction[None, :])[0])


def enclosing_radius(reg):
    """Radius of an origin-centred ball containing the region."""
    if isinstance(reg, Ball):
        return reg.center.radius + reg.radius
    if isinstance(reg, Annulus):
        return reg.outer
    if isinstance(reg, HalfLens):
        return reg.point.radius
    if isinstance(reg, Intersection):
        bounds = []
        for part in reg.parts:
            try:
                bounds.append(enclosing_radius(part))
            except UnboundedRegionError:
                continue
        if not bounds:
            raise UnboundedRegionError("no part of the intersection is bounded")
        return min(bounds)
    if isinstance(reg, Difference):
        return enclosing_radius(reg.base)
    raise UnboundedRegionError(f"{type(reg).__name__} has no enclosing ball")


def region_volume_mc(reg, samples, rng, d=None):
    """Rejection estimate of the rescaled volume from the enclosing origin ball.

    Returns (estimate, stderr).
    """
    if samples < 1000:
        raise ValueError(f"region_volume_mc needs at least 1000 samples, got {samples}")
    d = d if d is not None else reg.dim()
    if d is None:
        raise ValueError("dimension cannot be inferred from the region, pass d")
    outer = enclosing_radius(reg)
    radii = radial_sampler(d, outer).sample(rng, samples)
    dirs = uniform_directions(rng, samples, d)
    hits = reg.contains_many(radii, dirs)
    frac = float(np.mean(hits))
    total = ball_volume(outer, d)
    return frac * total, total * math.sqrt(frac * (1.0 - frac) / samples)


def half_lens_profile(d, radii, rhos, samples, rng):
    """Monte Carlo volumes of B⁺((r'; e_0), ρ) and the fitted c of Vol >= c e^{d(r'∧ρ)/2}."""
    radii = np.asarray(radii, dtype=float)
    rhos = np.broadcast_to(np.asarray(rhos, dtype=float), radii.shape)
    volumes, errors = [], []
    for r, rho in zip(radii, rhos):
        est, se = region_volume_mc(HalfLens(HPoint(r, unit_vector(d)), rho), samples, rng)
        volumes.append(est)
        errors.append(se)
    volumes = np.array(volumes)
    scale = np.minimum(radii, rhos)
    c = float(np.min(volumes * np.exp(-d * scale / 2.0)))
    profile = {
        "radii": radii.tolist(),
        "rhos": rhos.tolist(),
        "volumes": volumes.tolist(),
        "stderr": errors,
        "c": c,
        "slope": None,
    }
    if np.unique(scale).size >= 2 and np.all(volumes > 0):
        profile["slope"] = float(stats.linregress(scale, np.log(volumes)).slope)
    return profile
