"""Homogeneous Poisson point processes in balls and bounded regions of H^{d+1}."""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

import config
from errors import SampleCapError
from geometry.hypgeom import HPoint, ball_volume
from geometry.radial import radial_sampler, uniform_directions
from geometry.regions import enclosing_radius

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Stream:
    """Counter-based RNG stream keyed by (master seed, index, sub-path)."""
    master_seed: int
    index: int = 0
    path: Tuple[int, ...] = ()

    def generator(self):
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.index, *self.path))
        return np.random.Generator(np.random.Philox(seq))

    def child(self, k):
        return Stream(self.master_seed, self.index, self.path + (int(k),))

    def describe(self):
        return {"master": self.master_seed, "index": self.index, "path": list(self.path)}


def _resolve(rng):
    if isinstance(rng, Stream):
        return rng.generator(), rng.describe()
    return rng, None


@dataclass(frozen=True, eq=False)
class PointCloud:
    d: int
    intensity: float
    radius: float
    radii: np.ndarray
    directions: np.ndarray
    seed: Optional[dict] = field(default=None)

    def __post_init__(self):
        radii = np.asarray(self.radii, dtype=float).reshape(-1)
        dirs = np.asarray(self.directions, dtype=float).reshape(radii.size, self.d + 1)
        if radii.size and (radii.min() < 0 or radii.max() >= self.radius):
            raise ValueError(f"every radius must lie in [0, {self.radius})")
        order = np.argsort(radii, kind="stable")
        radii, dirs = radii[order], dirs[order]
        if radii.size:
            norms = np.linalg.norm(dirs, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-12):
                dirs = dirs / norms[:, None]
        radii.setflags(write=False)
        dirs.setflags(write=False)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "directions", dirs)

    def __len__(self):
        return self.radii.size

    def point(self, i):
        return HPoint(self.radii[i], self.directions[i])

    @property
    def points(self):
        return [self.point(i) for i in range(len(self))]

    @classmethod
    def from_points(cls, d, intensity, radius, points, seed=None):
        radii = np.array([p.radius for p in points], dtype=float)
        dirs = np.array([p.direction for p in points], dtype=float).reshape(len(points), d + 1)
        return cls(d, intensity, radius, radii, dirs, seed)

    def restrict(self, r):
        """N ∩ B(r), itself a Poisson sample on B(r)."""
        if not 0 < r <= self.radius:
            raise ValueError(f"restriction radius must lie in (0, {self.radius}], got {r}")
        keep = self.radii < r
        return PointCloud(self.d, self.intensity, r, self.radii[keep], self.directions[keep],
                          {"restrict": r, "base": self.seed})

    def without(self, indices):
        keep = np.ones(len(self), dtype=bool)
        keep[list(indices)] = False
        return PointCloud(self.d, self.intensity, self.radius, self.radii[keep], self.directions[keep],
                          {"deleted": sorted(int(i) for i in indices), "base": self.seed})


def _check_cap(expected, cap):
    cap = config.SAMPLE_CAP if cap is None else cap
    if expected > cap:
        raise SampleCapError(f"expected point count {expected:.3g} exceeds the cap {cap:.3g}")


def sample_ball(d, lam, radius, rng, cap=None):
    if lam < 0:
        raise ValueError(f"intensity must be >= 0, got {lam}")
    if radius <= 0:
        raise ValueError(f"ball radius must be positive, got {radius}")
    gen, seed = _resolve(rng)
    expected = lam * ball_volume(radius, d)
    _check_cap(expected, cap)
    n = int(gen.poisson(expected)) if lam > 0 else 0
    radii = radial_sampler(d, radius).sample(gen, n)
    dirs = uniform_directions(gen, n, d)
    logger.debug(f"Sampled {n} points (expected {expected:.1f}) in B({radius}) d={d}")
    return PointCloud(d, lam, radius, radii, dirs, seed)


def sample_region(d, lam, reg, rng, cap=None):
    """PPP restricted to a bounded region by thinning a ball sample."""
    cloud = sample_ball(d, lam, enclosing_radius(reg), rng, cap)
    if not len(cloud):
        return cloud
    keep = reg.contains_many(cloud.radii, cloud.directions)
    return PointCloud(d, lam, cloud.radius, cloud.radii[keep], cloud.directions[keep], cloud.seed)


def resample_inside(cloud, r, rng, cap=None):
    """Keep the points outside B(r) and draw a fresh PPP inside it.

    Inner points come first in the result, so an outer point's index moves by
    (#new inner − #old inner).
    """
    if not 0 < r < cloud.radius:
        raise ValueError(f"resampling radius must lie in (0, {cloud.radius}), got {r}")
    inner = sample_ball(cloud.d, cloud.intensity, r, rng, cap) if cloud.intensity > 0 else None
    outer = cloud.radii >= r
    radii = cloud.radii[outer]
    dirs = cloud.directions[outer]
    seed = {"resample": r, "base": cloud.seed}
    if inner is not None and len(inner):
        radii = np.concatenate([inner.radii, radii])
        dirs = np.concatenate([inner.directions, dirs])
        seed["inner"] = inner.seed
    return PointCloud(cloud.d, cloud.intensity, cloud.radius, radii, dirs, seed)


def cloud_to_dict(cloud):
    return {
        "d": cloud.d,
        "lambda": cloud.intensity,
        "R": cloud.radius,
        "seed": cloud.seed,
        "points": [[float(r), *map(float, u)] for r, u in zip(cloud.radii, cloud.directions)],
    }


def cloud_from_dict(data):
    d = int(data["d"])
    pts = np.asarray(data["points"], dtype=float).reshape(-1, d + 2)
    return PointCloud(d, float(data["lambda"]), float(data["R"]), pts[:, 0], pts[:, 1:], data.get("seed"))


def save_cloud(cloud, path):
    Path(path).write_text(json.dumps(cloud_to_dict(cloud)))
    logger.info(f"✅ Wrote {len(cloud)} points to {path}")


def load_cloud(path):
    return cloud_from_dict(json.loads(Path(path).read_text()))
