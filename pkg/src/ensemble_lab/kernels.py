"""Radial profiles, pair kernels, exterior potentials and regularizations.

Profiles are vectorized callables ``r -> w(r)``.  Kernels act on points
stored in arrays of shape ``(..., d)`` and are exactly symmetric: the
value for ``(x, y)`` is bitwise equal to the value for ``(y, x)``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError

__all__ = [
    "RadialProfile",
    "log_profile",
    "log2pi_profile",
    "monomial_profile",
    "power_profile",
    "inverse_power_profile",
    "exponential_profile",
    "gaussian_profile",
    "loglog_profile",
    "zero_profile",
    "PairKernel",
    "RadialKernel",
    "TranslationInvariantKernel",
    "RegularizedKernel",
    "NegatedKernel",
    "TableKernel",
    "regularize",
    "ExteriorPotential",
    "ZeroPotential",
    "RadialPotential",
    "GeneralPotential",
    "mollifier_rule",
]

REGULARIZATION_SCHEMES = ("shift", "cap", "mollify", "soften")


class RadialProfile:
    """A function ``w`` of the distance ``r > 0``.

    ``family`` and ``params`` identify built-in profiles so that
    discretizations can use closed-form angular averages; custom
    profiles use ``family="custom"``.
    """

    def __init__(self, fn, limit_at_zero, label, family="custom", params=None):
        self._fn = fn
        self.limit_at_zero = float(limit_at_zero)
        self.label = str(label)
        self.family = family
        self.params = dict(params or {})

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = np.asarray(self._fn(r), dtype=float)
        if out.shape != r.shape:
            out = np.broadcast_to(out, r.shape).copy()
        return out

    @property
    def is_singular(self):
        return not math.isfinite(self.limit_at_zero)

    def transformed(self, scheme, delta):
        """Profile of the regularized kernel for ``shift``, ``cap`` or ``soften``."""
        delta = float(delta)
        base = self
        if scheme == "shift":
            fn = lambda r: base(r + delta)
            lim = float(base(np.array(delta)))
        elif scheme == "cap":
            fn = lambda r: base(np.maximum(r, delta))
            lim = float(base(np.array(delta)))
        elif scheme == "soften":
            fn = lambda r: base(np.sqrt(r * r + delta * delta))
            lim = float(base(np.array(delta)))
        else:
            raise ConfigError(f"unknown profile transform {scheme!r}", "regularization.scheme")
        return RadialProfile(
            fn, lim, f"{self.label}|{scheme}({delta:g})", family=f"{scheme}",
            params={"base": self.to_dict(), "delta": delta},
        )

    def negated(self):
        base = self
        lim = -self.limit_at_zero
        params = {"base": self.to_dict()}
        return RadialProfile(lambda r: -base(r), lim, f"-({self.label})", "negated", params)

    def to_dict(self):
        return {"family": self.family, "label": self.label, "params": _jsonable(self.params)}

    def __repr__(self):
        return f"RadialProfile({self.label!r})"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def log_profile(scale=1.0):
    """``w(r) = -scale * log r``; the default point-vortex profile has scale 1."""
    scale = float(scale)
    label = "-log r" if scale == 1.0 else f"-{scale:g} log r"
    return RadialProfile(lambda r: -scale * np.log(r), math.inf, label, "log", {"scale": scale})


def log2pi_profile():
    """``w(r) = -(1/2pi) log r``, the Green-function normalization."""
    p = log_profile(1.0 / (2.0 * math.pi))
    p.label = "-(1/2pi) log r"
    return p


def monomial_profile(exponent, coef=1.0):
    """``w(r) = coef * r**exponent``."""
    p, c = float(exponent), float(coef)
    if p > 0:
        lim = 0.0
    elif p == 0:
        lim = c
    else:
        lim = math.copysign(math.inf, c) if c != 0 else 0.0
    return RadialProfile(lambda r: c * r**p, lim, f"{c:g} r^{p:g}", "monomial",
                         {"exponent": p, "coef": c})


def power_profile(a):
    """Continuous repulsive power law ``w(r) = -r**a``."""
    prof = monomial_profile(a, -1.0)
    prof.label = f"-r^{float(a):g}"
    return prof


def inverse_power_profile(alpha, coef=1.0):
    """Singular power law ``w(r) = coef * r**(-alpha)``."""
    prof = monomial_profile(-float(alpha), coef)
    prof.label = f"{float(coef):g} r^-{float(alpha):g}"
    return prof


def exponential_profile(a):
    """Born-Mayer profile ``w(r) = exp(-a r)``."""
    a = float(a)
    return RadialProfile(lambda r: np.exp(-a * r), 1.0, f"exp(-{a:g} r)", "exponential", {"a": a})


def gaussian_profile(a=1.0):
    a = float(a)
    return RadialProfile(lambda r: np.exp(-a * r * r), 1.0, f"exp(-{a:g} r^2)", "gaussian", {"a": a})


def loglog_profile():
    """``w(r) = log log(1/r)``, defined for ``0 < r < 1``."""
    return RadialProfile(lambda r: np.log(np.log(1.0 / r)), math.inf, "log log(1/r)", "loglog", {})


def zero_profile():
    return RadialProfile(lambda r: np.zeros_like(r), 0.0, "0", "zero", {})


def _norm(z):
    return np.sqrt(np.sum(np.asarray(z, dtype=float) ** 2, axis=-1))


class PairKernel:
    """Base class for pair interactions ``W(x, y)``."""

    profile = None

    @property
    def is_radial(self):
        return self.profile is not None

    @property
    def is_singular(self):
        raise NotImplementedError

    def of_displacement(self, z):
        """Value as a function of ``z = x - y`` (not symmetrized)."""
        raise NotImplementedError

    def __call__(self, x, y):
        z = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return 0.5 * (self.of_displacement(z) + self.of_displacement(-z))

    def radial(self, r):
        if self.profile is None:
            raise ConfigError("kernel is not radial", "kernel")
        return self.profile(r)

    def negated(self):
        return NegatedKernel(self)

    def to_dict(self):
        raise NotImplementedError


class RadialKernel(PairKernel):
    def __init__(self, profile):
        self.profile = profile

    @property
    def is_singular(self):
        return self.profile.is_singular

    def of_displacement(self, z):
        return self.profile(_norm(z))

    def __call__(self, x, y):
        # |x - y| and |y - x| agree bitwise, so no symmetrization is needed
        return self.profile(_norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))

    def to_dict(self):
        return {"variant": "radial", "profile": self.profile.to_dict()}

    def __repr__(self):
        return f"RadialKernel({self.profile.label!r})"


class TranslationInvariantKernel(PairKernel):
    """``W(x, y) = -Psi(x - y)``, symmetrized over the sign of ``x - y``."""

    def __init__(self, psi, label="-Psi(x-y)"):
        self.psi = psi
        self.label = label

    @property
    def is_singular(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            v = float(np.asarray(self.psi(np.zeros((1, 2))))[0])
        return not math.isfinite(v)

    def of_displacement(self, z):
        return -np.asarray(self.psi(np.asarray(z, dtype=float)), dtype=float)

    def to_dict(self):
        return {"variant": "translation_invariant", "label": self.label}


class NegatedKernel(PairKernel):
    def __init__(self, base):
        self.base = base
        self.profile = base.profile.negated() if base.profile is not None else None

    @property
    def is_singular(self):
        return self.base.is_singular

    def of_displacement(self, z):
        return -self.base.of_displacement(z)

    def __call__(self, x, y):
        return -self.base(x, y)

    def negated(self):
        return self.base

    def to_dict(self):
        return {"variant": "negated", "base": self.base.to_dict()}


def _bump(t):
    """Unnormalized smooth bump on ``[0, 1)``: ``exp(-1/(1 - t^2))``."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = t < 1
    out[m] = np.exp(-1.0 / (1.0 - t[m] ** 2))
    return out


def mollifier_rule(d, delta, points=64):
    """Fixed product Gauss rule for the radial bump of width ``delta`` in ``R^d``.

    Returns ``(offsets, weights)`` with ``offsets`` of shape ``(points, d)``
    and weights summing to one.
    """
    delta = float(delta)
    if d == 1:
        x, w = np.polynomial.legendre.leggauss(points)
        w = w * _bump(np.abs(x))
        return (delta * x)[:, None], w / w.sum()
    if d == 2:
        nr = int(round(math.sqrt(points)))
        nt = points // nr
        x, w = np.polynomial.legendre.leggauss(nr)
        rho = 0.5 * (x + 1.0)
        wr = 0.5 * w * _bump(rho) * rho
        th = 2.0 * math.pi * (np.arange(nt) + 0.5) / nt
        pts = np.stack([np.outer(rho, np.cos(th)), np.outer(rho, np.sin(th))], axis=-1).reshape(-1, 2)
        ww = np.repeat(wr, nt)
        return delta * pts, ww / ww.sum()
    if d == 3:
        n = int(round(points ** (1.0 / 3.0)))
        x, w = np.polynomial.legendre.leggauss(n)
        rho = 0.5 * (x + 1.0)
        wr = 0.5 * w * _bump(rho) * rho**2
        ct, wct = np.polynomial.legendre.leggauss(n)
        ph = 2.0 * math.pi * (np.arange(n) + 0.5) / n
        R, C, P = np.meshgrid(rho, ct, ph, indexing="ij")
        S = np.sqrt(1.0 - C**2)
        pts = np.stack([R * S * np.cos(P), R * S * np.sin(P), R * C], axis=-1).reshape(-1, 3)
        W3 = (wr[:, None, None] * wct[None, :, None] * np.ones(n)[None, None, :]).reshape(-1)
        return delta * pts, W3 / W3.sum()
    raise ConfigError(f"mollify supports d in (1, 2, 3), got {d}", "domain.d")


def _mollified_profile(profile, delta, d):
    offs, wts = mollifier_rule(d, delta)

    def fn(r):
        r = np.asarray(r, dtype=float)
        shape = r.shape
        rr = r.reshape(-1, 1)
        # place the evaluation point on the first axis
        dist = np.sqrt((rr + offs[None, :, 0]) ** 2 + np.sum(offs[None, :, 1:] ** 2, axis=-1))
        return (profile(dist) @ wts).reshape(shape)

    lim = float(fn(np.array([0.0]))[0])
    return RadialProfile(fn, lim, f"{profile.label}|mollify({delta:g})", "mollify",
                         {"base": profile.to_dict(), "delta": float(delta), "d": int(d)})


class RegularizedKernel(PairKernel):
    """A kernel made finite on the diagonal by ``shift``, ``cap``, ``mollify`` or ``soften``.

    ``soften`` replaces ``r`` by ``sqrt(r^2 + delta^2)``; it keeps weak
    positive definiteness for log and inverse-power kernels and is what
    the validator uses on singular kernels.
    """

    def __init__(self, base, scheme, delta, d=2):
        if scheme not in REGULARIZATION_SCHEMES:
            raise ConfigError(f"unknown scheme {scheme!r}", "regularization.scheme")
        if not delta > 0:
            raise ConfigError("delta must be positive", "regularization.delta")
        self.base = base
        self.scheme = scheme
        self.delta = float(delta)
        self.d = int(d)
        if base.profile is not None:
            if scheme == "mollify":
                self.profile = _mollified_profile(base.profile, self.delta, self.d)
            else:
                self.profile = base.profile.transformed(scheme, self.delta)
        elif scheme == "mollify":
            self._offs, self._wts = mollifier_rule(self.d, self.delta)

    @property
    def is_singular(self):
        return False

    def of_displacement(self, z):
        if self.profile is not None:
            return self.profile(_norm(z))
        z = np.asarray(z, dtype=float)
        if self.scheme == "mollify":
            zz = z[..., None, :] + self._offs
            return self.base.of_displacement(zz) @ self._wts
        r = _norm(z)
        unit = np.zeros_like(z)
        unit[..., 0] = 1.0
        safe = np.where(r[..., None] > 0, z / np.where(r > 0, r, 1.0)[..., None], unit)
        if self.scheme == "shift":
            rn = r + self.delta
        elif self.scheme == "cap":
            rn = np.maximum(r, self.delta)
        else:
            rn = np.sqrt(r * r + self.delta**2)
        return self.base.of_displacement(safe * rn[..., None])

    def __call__(self, x, y):
        if self.profile is not None:
            return self.profile(_norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))
        return super().__call__(x, y)

    def to_dict(self):
        return {"variant": "regularized", "scheme": self.scheme, "delta": self.delta,
                "base": self.base.to_dict()}

    def __repr__(self):
        return f"RegularizedKernel({self.base!r}, {self.scheme!r}, {self.delta:g})"


class TableKernel(PairKernel):
    """Precomputed kernel values on a finite node set.

    Points passed to ``__call__`` are matched to their nearest node.
    """

    def __init__(self, nodes, matrix):
        self.nodes = np.asarray(nodes, dtype=float)
        self.matrix = np.asarray(matrix, dtype=float)
        if self.matrix.shape != (len(self.nodes), len(self.nodes)):
            raise ConfigError("matrix shape does not match node count", "kernel.matrix")
        if not np.array_equal(self.matrix, self.matrix.T):
            raise ConfigError("matrix is not symmetric", "kernel.matrix")

    @property
    def is_singular(self):
        return not np.all(np.isfinite(np.diag(self.matrix)))

    def index(self, x):
        x = np.asarray(x, dtype=float)
        d2 = np.sum((x[..., None, :] - self.nodes) ** 2, axis=-1)
        return np.argmin(d2, axis=-1)

    def __call__(self, x, y):
        return self.matrix[self.index(x), self.index(y)]

    def of_displacement(self, z):
        raise ConfigError("table kernels are not translation invariant", "kernel")

    def to_dict(self):
        return {"variant": "table", "size": len(self.nodes)}


def regularize(W, scheme, delta, d=2):
    """Return a diagonal-finite version of ``W``."""
    if isinstance(W, TableKernel):
        raise ConfigError("table kernels cannot be regularized", "regularization")
    return RegularizedKernel(W, scheme, delta, d=d)


class ExteriorPotential:
    profile = None

    def __call__(self, x):
        raise NotImplementedError

    def negated(self):
        base = self
        out = GeneralPotential(lambda x: -base(x), label=f"-({self.to_dict()})")
        if self.profile is not None:
            out.profile = self.profile.negated()
        return out

    @property
    def is_zero(self):
        return False


class ZeroPotential(ExteriorPotential):
    profile = zero_profile()

    def __call__(self, x):
        return np.zeros(np.shape(x)[:-1])

    def negated(self):
        return self

    @property
    def is_zero(self):
        return True

    def to_dict(self):
        return {"variant": "zero"}


class RadialPotential(ExteriorPotential):
    def __init__(self, profile):
        self.profile = profile

    def __call__(self, x):
        return self.profile(_norm(x))

    def to_dict(self):
        return {"variant": "radial", "profile": self.profile.to_dict()}


class GeneralPotential(ExteriorPotential):
    def __init__(self, fn, label="V(x)"):
        self.fn = fn
        self.label = label

    def __call__(self, x):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)

    def to_dict(self):
        return {"variant": "general", "label": self.label}
