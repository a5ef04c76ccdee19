"""Model specification and its JSON representation.

A model document looks like::

    {
      "name": "vortex-gaussian",
      "domain": {"type": "full", "d": 2},
      "kernel": {"family": "log", "params": {},
                 "regularization": {"scheme": "shift", "delta": 0.1}},
      "potential": {"family": "zero"},
      "prior": {"family": "gaussian", "params": {"sigma": 1.0}},
      "N": 8,
      "seed": 12345
    }

Kernel and potential families: ``zero``, ``log`` (``scale``), ``log2pi``,
``power`` (``a``, gives ``-r^a``), ``inverse_power`` (``alpha``, ``coef``),
``monomial`` (``exponent``, ``coef``), ``exponential`` (``a``),
``gaussian`` (``a``), ``loglog``.  Priors: ``gaussian`` (``sigma``) and
``uniform`` (ball domains only).

An optional ``assumptions`` object records hypotheses that have no finite
certificate, e.g. ``{"energy_approximation": true, "affine_continuity": true,
"notes": "..."}``.  They are carried as metadata and never checked.
"""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
import math

from . import kernels as K
from .domain import Ball, FullSpace, GaussianPrior, RadialDensityPrior, UniformBallPrior
from .errors import ConfigError

__all__ = ["ModelSpec", "profile_from_dict", "model_from_dict", "load_model", "canonical_json", "ASSUMPTION_FLAGS"]

ASSUMPTION_FLAGS = ("energy_approximation", "affine_continuity")


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclasses.dataclass
class ModelSpec:
    domain: object
    W: object
    V: object
    prior: object
    N: int | None = None
    name: str = ""
    seed: int | None = None
    source: dict | None = None
    assumptions: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.prior.d != self.domain.d:
            raise ConfigError("prior dimension differs from domain dimension", "prior")
        if self.N is not None and int(self.N) < 1:
            raise ConfigError("N must be >= 1", "N")
        if self.W is None:
            self.W = K.RadialKernel(K.zero_profile())
        if self.V is None:
            self.V = K.ZeroPotential()

    @property
    def d(self):
        return self.domain.d

    def with_N(self, N):
        src = None
        if self.source is not None:
            src = copy.deepcopy(self.source)
            src["N"] = int(N)
        return dataclasses.replace(self, N=int(N), source=src)

    def negated(self):
        """The model with Hamiltonian ``-H`` (exactly negated terms)."""
        src = None
        if self.source is not None:
            src = copy.deepcopy(self.source)
            src["negated"] = not src.get("negated", False)
        return dataclasses.replace(self, W=self.W.negated(), V=self.V.negated(), source=src)

    @property
    def is_rotation_invariant(self):
        return self.W.is_radial and self.V.profile is not None and self.prior.radial

    def to_dict(self):
        if self.source is not None:
            return copy.deepcopy(self.source)
        return {
            "name": self.name,
            "domain": self.domain.to_dict(),
            "kernel": self.W.to_dict(),
            "potential": self.V.to_dict(),
            "prior": self.prior.to_dict(),
            "N": self.N,
            "seed": self.seed,
        }

    def model_hash(self):
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()[:16]


def _num(params, key, where, default=None, positive=False):
    if key not in params:
        if default is None:
            raise ConfigError(f"missing parameter {key!r}", f"{where}.params.{key}")
        return float(default)
    val = params[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise ConfigError(f"parameter {key!r} must be a finite number", f"{where}.params.{key}")
    if positive and not val > 0:
        raise ConfigError(f"parameter {key!r} must be positive", f"{where}.params.{key}")
    return float(val)


def profile_from_dict(doc, where="kernel"):
    if not isinstance(doc, dict):
        raise ConfigError("expected an object", where)
    family = doc.get("family")
    params = doc.get("params", {}) or {}
    if not isinstance(params, dict):
        raise ConfigError("params must be an object", f"{where}.params")
    if family == "zero":
        return K.zero_profile()
    if family == "log":
        return K.log_profile(_num(params, "scale", where, 1.0))
    if family == "log2pi":
        return K.log2pi_profile()
    if family == "power":
        return K.power_profile(_num(params, "a", where, positive=True))
    if family == "inverse_power":
        return K.inverse_power_profile(_num(params, "alpha", where, positive=True),
                                       _num(params, "coef", where, 1.0))
    if family == "monomial":
        return K.monomial_profile(_num(params, "exponent", where), _num(params, "coef", where, 1.0))
    if family == "exponential":
        return K.exponential_profile(_num(params, "a", where, positive=True))
    if family == "gaussian":
        return K.gaussian_profile(_num(params, "a", where, 1.0, positive=True))
    if family == "loglog":
        return K.loglog_profile()
    raise ConfigError(f"unknown family {family!r}", f"{where}.family")


def model_from_dict(doc, require_seed=False):
    """Build a :class:`ModelSpec` from a parsed JSON document."""
    if not isinstance(doc, dict):
        raise ConfigError("model document must be a JSON object", "<root>")
    for key in ("domain", "kernel", "prior"):
        if key not in doc:
            raise ConfigError("missing required section", key)

    dom = doc["domain"]
    if not isinstance(dom, dict):
        raise ConfigError("expected an object", "domain")
    d = dom.get("d")
    if isinstance(d, bool) or not isinstance(d, int) or d < 1:
        raise ConfigError("d must be a positive integer", "domain.d")
    dtype = dom.get("type")
    if dtype == "ball":
        R = dom.get("R", 1.0)
        if isinstance(R, bool) or not isinstance(R, (int, float)) or not R > 0:
            raise ConfigError("R must be a positive number", "domain.R")
        domain = Ball(d, float(R))
    elif dtype == "full":
        domain = FullSpace(d)
    else:
        raise ConfigError(f"unknown domain type {dtype!r}", "domain.type")

    kdoc = doc["kernel"]
    W = K.RadialKernel(profile_from_dict(kdoc, "kernel"))
    reg = kdoc.get("regularization") if isinstance(kdoc, dict) else None
    if reg:
        if not isinstance(reg, dict):
            raise ConfigError("expected an object", "kernel.regularization")
        scheme = reg.get("scheme")
        if scheme not in K.REGULARIZATION_SCHEMES:
            raise ConfigError(f"unknown scheme {scheme!r}", "kernel.regularization.scheme")
        delta = reg.get("delta")
        if isinstance(delta, bool) or not isinstance(delta, (int, float)) or not delta > 0:
            raise ConfigError("delta must be a positive number", "kernel.regularization.delta")
        W = K.regularize(W, scheme, float(delta), d=d)

    pdoc = doc.get("potential", {"family": "zero"})
    if pdoc.get("family", "zero") == "zero":
        V = K.ZeroPotential()
    else:
        V = K.RadialPotential(profile_from_dict(pdoc, "potential"))

    prdoc = doc["prior"]
    if not isinstance(prdoc, dict):
        raise ConfigError("expected an object", "prior")
    fam = prdoc.get("family")
    pparams = prdoc.get("params", {}) or {}
    if fam == "gaussian":
        sigma = _num(pparams, "sigma", "prior", 1.0, positive=True)
        if isinstance(domain, FullSpace):
            prior = GaussianPrior(d, sigma)
        else:
            prior = RadialDensityPrior(domain, lambda r, s=sigma: r * r / (2.0 * s * s))
    elif fam == "uniform":
        if not isinstance(domain, Ball):
            raise ConfigError("uniform prior requires a ball domain", "prior.family")
        prior = UniformBallPrior(d, domain.R)
    else:
        raise ConfigError(f"unknown prior family {fam!r}", "prior.family")

    N = doc.get("N")
    if N is not None and (isinstance(N, bool) or not isinstance(N, int) or N < 1):
        raise ConfigError("N must be a positive integer", "N")
    seed = doc.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
        raise ConfigError("seed must be a non-negative integer", "seed")
    if require_seed and seed is None:
        raise ConfigError("a seed is required", "seed")

    assumptions = doc.get("assumptions", {}) or {}
    if not isinstance(assumptions, dict):
        raise ConfigError("expected an object", "assumptions")
    for key, val in assumptions.items():
        if key == "notes":
            if not isinstance(val, str):
                raise ConfigError("notes must be a string", "assumptions.notes")
        elif key not in ASSUMPTION_FLAGS:
            raise ConfigError(f"unknown assumption {key!r}; known: {list(ASSUMPTION_FLAGS)}", f"assumptions.{key}")
        elif not isinstance(val, bool):
            raise ConfigError("assumption flags must be true or false", f"assumptions.{key}")

    model = ModelSpec(domain, W, V, prior, N=N, name=str(doc.get("name", "")), seed=seed,
                      source=copy.deepcopy(doc), assumptions=dict(assumptions))
    if doc.get("negated"):
        model = dataclasses.replace(model, W=model.W.negated(), V=model.V.negated())
    return model


def load_model(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}", str(path)) from exc
    except OSError as exc:
        raise ConfigError(f"cannot read model file: {exc}", str(path)) from exc
    return model_from_dict(doc)
