"""Exact geometry of H^{d+1} in polar coordinates.

A point is (radius; direction) with the direction a unit vector of R^{d+1}, so
d=1 and d>=2 share every code path. Volumes use the rescaled measure
dVol = sinh^d(r) dr dσ(u) with σ(S^d) = 1, hence intensities everywhere in the
package are per unit of rescaled volume.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special
from scipy.spatial.distance import cdist

logger = logging.getLogger(__name__)

UNIT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class HPoint:
    radius: float
    direction: np.ndarray

    def __post_init__(self):
        radius = float(self.radius)
        if not math.isfinite(radius) or radius < 0:
            raise ValueError(f"radius must be finite and >= 0, got {self.radius}")
        u = np.array(self.direction, dtype=float).reshape(-1)
        if u.size < 2:
            raise ValueError("direction must live in R^{d+1} with d >= 1")
        norm = np.linalg.norm(u)
        if not np.isfinite(norm) or norm == 0:
            raise ValueError("direction must be a nonzero finite vector")
        if abs(norm - 1.0) > UNIT_TOL:
            u = u / norm
        u.setflags(write=False)
        object.__setattr__(self, "radius", radius)
        object.__setattr__(self, "direction", u)

    @classmethod
    def from_angle(cls, radius, angle):
        """d=1 convenience constructor: direction (cos angle, sin angle)."""
        return cls(radius, np.array([math.cos(angle), math.sin(angle)]))

    @classmethod
    def origin(cls, d):
        return cls(0.0, unit_vector(d))

    @property
    def dim(self):
        return self.direction.size - 1

    @property
    def angle(self):
        if self.dim != 1:
            raise ValueError("polar angle is only defined for d=1")
        return math.atan2(self.direction[1], self.direction[0])

    def is_origin(self):
        return self.radius == 0.0

    def __repr__(self):
        coords = ", ".join(f"{c:.6g}" for c in self.direction)
        return f"HPoint({self.radius:.6g}; ({coords}))"


def unit_vector(d, axis=0):
    e = np.zeros(d + 1)
    e[axis] = 1.0
    return e


# --- vectorized kernels (broadcast over leading axes) ---

def angles_between(u, v):
    """Angle between unit vectors; 2·atan2(|u−v|, |u+v|) stays exact near 0 and π."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return 2.0 * np.arctan2(np.linalg.norm(u - v, axis=-1), np.linalg.norm(u + v, axis=-1))


def angular_diameter(dirs):
    """Max pairwise origin angle among dirs.

    For d=1 each direction is paired with its neighbours around the antipode
    in sorted polar order; other dimensions take the largest chord.
    """
    dirs = np.asarray(dirs, dtype=float)
    if len(dirs) < 2:
        return 0.0
    if dirs.shape[1] == 2:
        a = np.sort(np.arctan2(dirs[:, 1], dirs[:, 0]))
        anti = np.mod(a + 2.0 * math.pi, 2.0 * math.pi) - math.pi
        j = np.searchsorted(a, anti)
        partners = np.stack([j % a.size, (j - 1) % a.size], axis=1)
        gap = np.abs(a[partners] - a[:, None])
        return float(np.minimum(gap, 2.0 * math.pi - gap).max())
    chord = float(cdist(dirs, dirs).max())
    return 2.0 * math.asin(min(1.0, chord / 2.0))


def distances(r_a, u_a, r_b, u_b):
    """Hyperbolic distance between (r_a; u_a) and (r_b; u_b).

    Law of cosines in half-angle form:
    sinh²(d/2) = sinh²((r_a−r_b)/2) + sinh r_a sinh r_b |u_a−u_b|²/4.
    """
    r_a = np.asarray(r_a, dtype=float)
    r_b = np.asarray(r_b, dtype=float)
    chord2 = np.sum((np.asarray(u_a, dtype=float) - np.asarray(u_b, dtype=float)) ** 2, axis=-1)
    half = np.sinh((r_a - r_b) / 2.0)
    s = half * half + np.sinh(r_a) * np.sinh(r_b) * chord2 / 4.0
    return 2.0 * np.arcsinh(np.sqrt(s))


def distance(a, b):
    return float(distances(a.radius, a.direction, b.radius, b.direction))


def angle_at_origin(a, b):
    if a.is_origin() or b.is_origin():
        raise ValueError("angle at the origin is undefined when one point is the origin")
    return float(angles_between(a.direction, b.direction))


# --- volumes and caps ---

def _check_dim(d):
    if int(d) != d or d < 1:
        raise ValueError(f"dimension d must be an integer >= 1, got {d}")
    return int(d)


def ball_volume(r, d):
    """Vol(B(r)) = ∫₀^r sinh^d(ρ) dρ under σ(S^d) = 1."""
    d = _check_dim(d)
    r = float(r)
    if r < 0:
        raise ValueError(f"radius must be >= 0, got {r}")
    if r == 0:
        return 0.0
    if d == 1:
        return 2.0 * math.sinh(r / 2.0) ** 2
    if d == 2 and r >= 0.1:
        return (math.sinh(2.0 * r) - 2.0 * r) / 4.0
    if d == 3:
        h = 2.0 * math.sinh(r / 2.0) ** 2
        return h * h * (math.cosh(r) + 2.0) / 3.0
    value, _ = integrate.quad(lambda x: math.sinh(x) ** d, 0.0, r, epsabs=0.0, epsrel=1e-12, limit=200)
    return value


def ball_volumes(radii, d):
    return np.array([ball_volume(r, d) for r in np.ravel(radii)]).reshape(np.shape(radii))


def annulus_volume(inner, outer, d):
    if not inner < outer:
        raise ValueError(f"annulus needs inner < outer, got {inner} >= {outer}")
    return ball_volume(outer, d) - ball_volume(inner, d)


def cap_measure(theta, d):
    """σ-measure of a cap of angular radius θ on S^d, with σ(S^d) = 1."""
    d = _check_dim(d)
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0) or np.any(theta > math.pi):
        raise ValueError("cap angular radius must lie in [0, π]")
    if d == 1:
        value = theta / math.pi
    elif d == 2:
        value = np.sin(theta / 2.0) ** 2
    else:
        half = 0.5 * special.betainc(d / 2.0, 0.5, np.sin(theta) ** 2)
        value = np.where(theta <= math.pi / 2.0, half, 1.0 - half)
    return float(value) if value.ndim == 0 else value


@lru_cache(maxsize=None)
def cap_constant(d):
    """Smallest C with cap_measure(θ, d) <= C θ^d on a θ-grid over (0, π]."""
    grid = np.geomspace(1e-4, math.pi, 2000)
    ratio = cap_measure(grid, d) / grid ** d
    return float(ratio.max()) * (1.0 + 1e-9)


@lru_cache(maxsize=None)
def volume_constants(d):
    """Fitted (c, ν) with c e^{dr} <= Vol(B(r)) <= ν e^{dr} for r in [1, 20]."""
    grid = np.linspace(1.0, 20.0, 400)
    ratio = ball_volumes(grid, d) * np.exp(-d * grid)
    return float(ratio.min()) * (1.0 - 1e-9), float(ratio.max()) * (1.0 + 1e-9)


# --- Poincaré ball ---

def to_poincare(z):
    return math.tanh(z.radius / 2.0) * np.asarray(z.direction)


def from_poincare(x):
    x = np.asarray(x, dtype=float).reshape(-1)
    norm = float(np.linalg.norm(x))
    if norm >= 1.0:
        raise ValueError("point is not inside the open unit ball")
    if norm == 0.0:
        return HPoint(0.0, unit_vector(x.size - 1))
    return HPoint(2.0 * math.atanh(norm), x / norm)


def to_poincare_many(radii, directions):
    return np.tanh(np.asarray(radii, dtype=float) / 2.0)[:, None] * np.asarray(directions, dtype=float)


def _hyperboloid(z):
    return math.cosh(z.radius), math.sinh(z.radius) * np.asarray(z.direction)


def _geodesic_hyperboloid(a, b, n):
    if n < 2:
        raise ValueError("a geodesic needs at least 2 samples")
    length = distance(a, b)
    s = np.linspace(0.0, 1.0, n)
    t0_a, x_a = _hyperboloid(a)
    t0_b, x_b = _hyperboloid(b)
    if length == 0.0:
        return np.full(n, t0_a), np.tile(x_a, (n, 1))
    w_a = np.sinh((1.0 - s) * length) / math.sinh(length)
    w_b = np.sinh(s * length) / math.sinh(length)
    t0 = w_a * t0_a + w_b * t0_b
    x = w_a[:, None] * x_a + w_b[:, None] * x_b
    return t0, x


def geodesic_poincare(a, b, n):
    """n Poincaré-ball samples of the geodesic [a, b], endpoints anchored exactly."""
    t0, x = _geodesic_hyperboloid(a, b, n)
    pts = x / (1.0 + t0)[:, None]
    pts[0] = to_poincare(a)
    pts[-1] = to_poincare(b)
    return pts

