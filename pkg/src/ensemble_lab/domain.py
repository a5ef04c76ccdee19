"""Domains and prior probability measures."""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

from .errors import ConfigError

__all__ = [
    "Domain",
    "Ball",
    "FullSpace",
    "ball_volume",
    "sphere_area",
    "PriorMeasure",
    "GaussianPrior",
    "UniformBallPrior",
    "RadialDensityPrior",
    "DensityPrior",
]


def ball_volume(d, R=1.0):
    return math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0) * R**d


def sphere_area(d):
    """Surface area of the unit sphere in ``R^d``."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


class Domain:
    d: int
    R: float = math.inf

    def contains(self, x):
        raise NotImplementedError


class Ball(Domain):
    def __init__(self, d, R=1.0):
        if int(d) < 1:
            raise ConfigError("d must be >= 1", "domain.d")
        if not float(R) > 0:
            raise ConfigError("R must be positive", "domain.R")
        self.d = int(d)
        self.R = float(R)

    def contains(self, x):
        return np.sum(np.asarray(x, dtype=float) ** 2, axis=-1) <= self.R**2

    def to_dict(self):
        return {"type": "ball", "d": self.d, "R": self.R}

    def __repr__(self):
        return f"Ball(d={self.d}, R={self.R:g})"


class FullSpace(Domain):
    def __init__(self, d):
        if int(d) < 1:
            raise ConfigError("d must be >= 1", "domain.d")
        self.d = int(d)
        self.R = math.inf

    def contains(self, x):
        return np.all(np.isfinite(np.asarray(x, dtype=float)), axis=-1)

    def to_dict(self):
        return {"type": "full", "d": self.d}

    def __repr__(self):
        return f"FullSpace(d={self.d})"


def _random_directions(rng, size, d):
    g = rng.standard_normal(tuple(size) + (d,))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


class PriorMeasure:
    """Probability measure ``mu0 = exp(-psi0) dx`` on a domain."""

    domain: Domain
    radial = False

    @property
    def d(self):
        return self.domain.d

    def log_density_neg(self, x):
        raise NotImplementedError

    def log_density(self, x):
        return -self.log_density_neg(x)

    def sample(self, rng, size):
        """Draw i.i.d. points; returns an array of shape ``size + (d,)``."""
        raise NotImplementedError

    def psi0_radial(self, r):
        """``psi0`` as a function of ``|x|`` (rotation-invariant priors only)."""
        raise ConfigError("prior is not rotation invariant", "prior")

    def radial_cdf(self, r):
        raise ConfigError("prior is not rotation invariant", "prior")

    def radial_density(self, r):
        """Density of ``|x|`` on ``(0, R)``."""
        r = np.asarray(r, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            return sphere_area(self.d) * r ** (self.d - 1) * np.exp(-self.psi0_radial(r))

    def total_mass(self):
        """Quadrature of the density over the domain (should be 1)."""
        if self.radial:
            R = self.domain.R
            val, _ = integrate.quad(self.radial_density, 0.0, R, limit=200, epsabs=1e-13, epsrel=1e-12)
            return val
        raise NotImplementedError


class GaussianPrior(PriorMeasure):
    """Centered isotropic Gaussian with standard deviation ``sigma`` per coordinate."""

    radial = True

    def __init__(self, d, sigma=1.0):
        if not float(sigma) > 0:
            raise ConfigError("sigma must be positive", "prior.params.sigma")
        self.domain = FullSpace(d)
        self.sigma = float(sigma)
        self._logz = 0.5 * self.d * math.log(2.0 * math.pi * self.sigma**2)

    def psi0_radial(self, r):
        r = np.asarray(r, dtype=float)
        return r * r / (2.0 * self.sigma**2) + self._logz

    def log_density_neg(self, x):
        x = np.asarray(x, dtype=float)
        return np.sum(x * x, axis=-1) / (2.0 * self.sigma**2) + self._logz

    def radial_cdf(self, r):
        r = np.asarray(r, dtype=float)
        return special.gammainc(self.d / 2.0, r * r / (2.0 * self.sigma**2))

    def sample(self, rng, size):
        size = (size,) if np.isscalar(size) else tuple(size)
        return self.sigma * rng.standard_normal(size + (self.d,))

    def total_mass(self):
        return float(self.radial_cdf(np.inf))

    def to_dict(self):
        return {"family": "gaussian", "params": {"sigma": self.sigma}}

    def __repr__(self):
        return f"GaussianPrior(d={self.d}, sigma={self.sigma:g})"


class UniformBallPrior(PriorMeasure):
    """Normalized Lebesgue measure on a ball."""

    radial = True

    def __init__(self, d, R=1.0):
        self.domain = Ball(d, R)
        self._logv = math.log(ball_volume(self.d, self.domain.R))

    def psi0_radial(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= self.domain.R, self._logv, np.inf)

    def log_density_neg(self, x):
        return np.where(self.domain.contains(x), self._logv, np.inf)

    def radial_cdf(self, r):
        r = np.asarray(r, dtype=float)
        return np.clip(r / self.domain.R, 0.0, 1.0) ** self.d

    def sample(self, rng, size):
        size = (size,) if np.isscalar(size) else tuple(size)
        u = _random_directions(rng, size, self.d)
        rad = self.domain.R * rng.random(size) ** (1.0 / self.d)
        return u * rad[..., None]

    def total_mass(self):
        return 1.0

    def to_dict(self):
        return {"family": "uniform", "params": {}}

    def __repr__(self):
        return f"UniformBallPrior(d={self.d}, R={self.domain.R:g})"


class RadialDensityPrior(PriorMeasure):
    """Rotation-invariant prior with unnormalized density ``exp(-psi(|x|))``.

    The radius is sampled through a tabulated inverse CDF.
    """

    radial = True

    def __init__(self, domain, psi, table_size=4097, r_max=None):
        self.domain = domain
        self._psi = psi
        R = domain.R if math.isfinite(domain.R) else (r_max or self._auto_rmax())
        self._rtab_max = R
        dens = lambda r: sphere_area(self.d) * r ** (self.d - 1) * np.exp(-psi(np.asarray(r, float)))
        z, _ = integrate.quad(dens, 0.0, R, limit=200, epsabs=1e-14, epsrel=1e-12)
        if not (z > 0 and math.isfinite(z)):
            raise ConfigError("prior density is not integrable", "prior")
        self._logz = math.log(z)
        rs = np.linspace(0.0, R, table_size)
        pieces = [integrate.quad(dens, a, b, epsabs=1e-15)[0] for a, b in zip(rs[:-1], rs[1:])]
        cdf = np.concatenate([[0.0], np.cumsum(pieces)]) / z
        self._rs, self._cdf = rs, np.minimum(cdf, 1.0)

    def _auto_rmax(self):
        r = 1.0
        while np.exp(-self._psi(np.array(r))) * r ** (self.d - 1) > 1e-300 and r < 1e6:
            r *= 2.0
        return r

    def psi0_radial(self, r):
        return np.asarray(self._psi(np.asarray(r, dtype=float)), dtype=float) + self._logz

    def log_density_neg(self, x):
        r = np.sqrt(np.sum(np.asarray(x, dtype=float) ** 2, axis=-1))
        out = self.psi0_radial(r)
        return np.where(self.domain.contains(x), out, np.inf)

    def radial_cdf(self, r):
        return np.interp(np.asarray(r, dtype=float), self._rs, self._cdf, right=1.0)

    def sample(self, rng, size):
        size = (size,) if np.isscalar(size) else tuple(size)
        u = _random_directions(rng, size, self.d)
        rad = np.interp(rng.random(size), self._cdf, self._rs)
        return u * rad[..., None]

    def to_dict(self):
        return {"family": "radial_density", "params": {}}


class DensityPrior(PriorMeasure):
    """General prior ``exp(-psi0)`` on a ball, sampled by rejection from the uniform law.

    ``psi0_min`` must be a lower bound of the unnormalized ``psi0`` on the
    ball; the acceptance probability is ``exp(psi0_min - psi0(x))``.
    """

    def __init__(self, domain, psi0, psi0_min, pilot=20000, seed=0):
        if not isinstance(domain, Ball):
            raise ConfigError("rejection priors need a bounded domain", "domain.type")
        self.domain = domain
        self._psi = psi0
        self.psi0_min = float(psi0_min)
        self._uniform = UniformBallPrior(domain.d, domain.R)
        rng = np.random.default_rng(seed)
        x = self._uniform.sample(rng, pilot)
        acc = np.exp(self.psi0_min - self._psi(x))
        if np.any(acc > 1.0 + 1e-12):
            raise ConfigError("psi0_min is not a lower bound of psi0", "prior.psi0_min")
        self.acceptance = float(acc.mean())
        if self.acceptance < 1e-3:
            raise ConfigError(
                f"rejection acceptance {self.acceptance:.2e} < 1e-3; supply a tighter envelope", "prior"
            )
        self._logz = self._log_normalizer()

    def _log_normalizer(self):
        d, R = self.d, self.domain.R
        f = lambda *xs: float(np.exp(-self._psi(np.array(xs))))
        if d == 1:
            z = integrate.quad(lambda x: f(x), -R, R, epsabs=1e-13)[0]
        elif d == 2:
            g = lambda t, r: r * float(np.exp(-self._psi(np.array([r * math.cos(t), r * math.sin(t)]))))
            z = integrate.dblquad(g, 0.0, R, 0.0, 2.0 * math.pi, epsabs=1e-12, epsrel=1e-10)[0]
        else:
            raise ConfigError("density priors support d <= 2", "domain.d")
        return math.log(z)

    def log_density_neg(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(self.domain.contains(x), self._psi(x) + self._logz, np.inf)

    def sample(self, rng, size):
        size = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(size))
        out = np.empty((n, self.d))
        filled = 0
        while filled < n:
            batch = max(64, int(1.2 * (n - filled) / self.acceptance))
            x = self._uniform.sample(rng, batch)
            keep = rng.random(batch) < np.exp(self.psi0_min - self._psi(x))
            x = x[keep][: n - filled]
            out[filled : filled + len(x)] = x
            filled += len(x)
        return out.reshape(size + (self.d,))

    def total_mass(self):
        d, R = self.d, self.domain.R
        if d == 1:
            return integrate.quad(lambda x: math.exp(-float(self.log_density_neg(np.array([x])))), -R, R)[0]
        g = lambda t, r: r * math.exp(-float(self.log_density_neg(np.array([r * math.cos(t), r * math.sin(t)]))))
        return integrate.dblquad(g, 0.0, R, 0.0, 2.0 * math.pi, epsabs=1e-12, epsrel=1e-10)[0]

    def to_dict(self):
        return {"family": "density", "params": {"psi0_min": self.psi0_min}}
