import logging
import math
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from geometry.hypgeom import ball_volume, ball_volumes

logger = logging.getLogger(__name__)


class RadialSampler:
    """Inverse-CDF sampler for radii with density sinh^d(ρ) / Vol(B(R)) on [0, R).

    d=1 has the exact inverse r = 2·asinh(sqrt(U)·sinh(R/2)). Other dimensions
    interpolate ρ as a monotone function of x = F(ρ)^{1/(d+1)}, which removes the
    infinite slope of the inverse at U=0.
    """

    MAX_KNOTS = 1 << 18

    def __init__(self, d, radius, tol=1e-8, knots=4096):
        if radius <= 0:
            raise ValueError(f"sampling radius must be positive, got {radius}")
        self.d = int(d)
        self.radius = float(radius)
        self.tol = tol
        self.top = np.nextafter(self.radius, 0.0)
        self.knots = 0
        self.max_error = 0.0
        self._interp = None
        if self.d >= 2:
            self._fit(knots)

    def _cdf_grid(self, rho):
        if self.d <= 3:
            vol = ball_volumes(rho, self.d)
        else:
            steps = [
                integrate.quad(lambda x: math.sinh(x) ** self.d, a, b, epsabs=0.0, epsrel=1e-12)[0]
                for a, b in zip(rho[:-1], rho[1:])
            ]
            vol = np.concatenate([[0.0], np.cumsum(steps)])
        return vol / ball_volume(self.radius, self.d)

    def _fit(self, knots):
        expo = 1.0 / (self.d + 1)
        while True:
            # odd grid of 2k+1 points: even entries are knots, odd ones check the fit
            rho = np.linspace(0.0, self.radius, 2 * knots + 1)
            x = np.clip(self._cdf_grid(rho), 0.0, 1.0) ** expo
            interp = PchipInterpolator(x[::2], rho[::2])
            err = float(np.max(np.abs(interp(x[1::2]) - rho[1::2])))
            if err < self.tol or knots >= self.MAX_KNOTS:
                break
            knots *= 2
        if err >= self.tol:
            logger.warning(f"⚠️ Radial inverse error {err:.2e} above {self.tol:.0e} at {knots} knots (d={self.d}, R={self.radius})")
        self._interp = interp
        self.knots = knots
        self.max_error = err
        logger.debug(f"Radial sampler d={self.d} R={self.radius}: {knots} knots, max error {err:.2e}")

    def inverse(self, u):
        u = np.asarray(u, dtype=float)
        if self.d == 1:
            r = 2.0 * np.arcsinh(np.sqrt(u) * math.sinh(self.radius / 2.0))
        else:
            r = self._interp(u ** (1.0 / (self.d + 1)))
        return np.clip(r, 0.0, self.top)

    def sample(self, rng, n):
        return self.inverse(rng.random(n))


@lru_cache(maxsize=64)
def radial_sampler(d, radius):
    return RadialSampler(d, radius)


def uniform_directions(rng, n, d):
    """n i.i.d. uniform unit vectors of S^d from normalized Gaussians."""
    g = rng.standard_normal((n, d + 1))
    norms = np.linalg.norm(g, axis=1)
    return g / norms[:, None]
