"""Sampled curves, CSV round-tripping and the concavity test."""

from __future__ import annotations

import dataclasses
import io
import math

import numpy as np

from .checks import CheckResult, ValidationReport
from .errors import ConfigError, InsufficientDataError

__all__ = ["SampledCurve", "TailCurve", "concavity_check", "second_differences", "curve_to_csv", "curve_from_csv"]


@dataclasses.dataclass
class SampledCurve:
    """Values on a strictly increasing grid, with optional standard errors and flags.

    Points that could not be estimated carry a non-empty flag and a NaN
    (or infinite) value.
    """

    x: np.ndarray
    y: np.ndarray
    stderr: np.ndarray | None = None
    flags: list | None = None
    meta: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).copy()
        self.y = np.asarray(self.y, dtype=float).copy()
        if self.x.ndim != 1 or self.x.shape != self.y.shape:
            raise ConfigError("x and y must be 1-d arrays of equal length")
        if np.any(np.diff(self.x) <= 0):
            raise ConfigError("abscissae must be strictly increasing")
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float).copy()
            if self.stderr.shape != self.x.shape:
                raise ConfigError("stderr length differs from grid")
            if np.any(self.stderr[np.isfinite(self.stderr)] < 0):
                raise ConfigError("stderr must be non-negative")
        self.flags = list(self.flags) if self.flags is not None else [""] * len(self.x)
        if len(self.flags) != len(self.x):
            raise ConfigError("flags length differs from grid")

    def __len__(self):
        return len(self.x)

    @property
    def finite(self):
        return np.isfinite(self.y)

    def finite_part(self):
        m = self.finite
        se = self.stderr[m] if self.stderr is not None else None
        return SampledCurve(self.x[m], self.y[m], se, [f for f, k in zip(self.flags, m) if k], dict(self.meta))

    def to_csv(self, x_name="e"):
        return curve_to_csv(self, x_name)


@dataclasses.dataclass
class TailCurve(SampledCurve):
    """Estimated ``S_+^(N)`` (direction ``upper``) or ``S_-^(N)`` (``lower``)."""

    direction: str = "upper"
    N: int = 1
    M: int = 0
    seed: int | None = None

    def __post_init__(self):
        super().__post_init__()
        if self.direction not in ("upper", "lower"):
            raise ConfigError("direction must be 'upper' or 'lower'", "direction")

    def is_monotone(self):
        y = self.y[self.finite]
        d = np.diff(y)
        return bool(np.all(d <= 0)) if self.direction == "upper" else bool(np.all(d >= 0))


def _fmt(v):
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def curve_to_csv(curve, x_name="e"):
    buf = io.StringIO()
    buf.write(f"{x_name},value,stderr,flag\n")
    se = curve.stderr if curve.stderr is not None else np.full(len(curve), np.nan)
    for x, y, s, f in zip(curve.x, curve.y, se, curve.flags):
        buf.write(f"{_fmt(x)},{_fmt(y)},{_fmt(s)},{f}\n")
    return buf.getvalue()


def curve_from_csv(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2:
        raise ConfigError("CSV has no data rows")
    header = [h.strip() for h in lines[0].split(",")]
    if len(header) < 2 or header[1] != "value":
        raise ConfigError("CSV header must start with '<x>,value'")
    xs, ys, ses, flags = [], [], [], []
    for k, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        try:
            xs.append(float(parts[0]))
            ys.append(float(parts[1]))
            ses.append(float(parts[2]) if len(parts) > 2 and parts[2] != "" else math.nan)
        except ValueError as exc:
            raise ConfigError(f"line {k}: {exc}") from exc
        flags.append(parts[3].strip() if len(parts) > 3 else "")
    se = np.array(ses)
    return SampledCurve(np.array(xs), np.array(ys), None if np.all(np.isnan(se)) else se, flags,
                        {"x_name": header[0]})


def second_differences(x, y):
    """``2 * (middle - chord)`` at interior points and the chord weights.

    On a uniform grid this is the usual ``y[i-1] - 2 y[i] + y[i+1]``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lam = (x[2:] - x[1:-1]) / (x[2:] - x[:-2])
    chord = lam * y[:-2] + (1.0 - lam) * y[2:]
    return 2.0 * (chord - y[1:-1]), lam


def concavity_check(curve, mode="weak", eps_strict=1e-9, tol=1e-12):
    """Second-difference concavity test on the finite points of ``curve``.

    ``weak`` passes when every second difference is at most twice its
    pooled standard error (or ``tol`` times the value scale for noiseless
    curves); ``strict`` additionally requires each to be below
    ``-eps_strict``.
    """
    if mode not in ("weak", "strict"):
        raise ConfigError("mode must be 'weak' or 'strict'", "mode")
    m = np.isfinite(curve.y)
    if m.sum() < 4:
        raise InsufficientDataError("concavity check needs at least 4 finite points")
    x, y = curve.x[m], curve.y[m]
    d2, lam = second_differences(x, y)
    if curve.stderr is not None and np.any(np.nan_to_num(curve.stderr[m]) > 0):
        se = np.nan_to_num(curve.stderr[m])
        pooled = np.sqrt((2 * lam * se[:-2]) ** 2 + (2 * se[1:-1]) ** 2 + (2 * (1 - lam) * se[2:]) ** 2)
        allow = 2.0 * pooled
    else:
        pooled = np.zeros_like(d2)
        scale = np.maximum.reduce([np.abs(y[:-2]), np.abs(y[1:-1]), np.abs(y[2:]), np.ones_like(d2)])
        allow = tol * scale
    bound = allow if mode == "weak" else np.minimum(allow, -eps_strict)
    viol = d2 > bound
    idx = np.flatnonzero(m)
    triples = [[int(idx[i]), int(idx[i + 1]), int(idx[i + 2])] for i in np.flatnonzero(viol)]
    margin = bound - d2
    k = int(np.argmin(margin))
    ok = not triples
    witness = None if ok else {"triple": [int(idx[k]), int(idx[k + 1]), int(idx[k + 2])],
                               "x": x[k : k + 3].tolist()}
    entry = CheckResult(f"concavity_{mode}", ok, witness, float(margin[k]),
                        {"violating_triples": triples, "second_differences": d2.tolist(),
                         "pooled_stderr": pooled.tolist(), "points": int(m.sum())})
    return ValidationReport([entry])
