"""Structural validity checks on model data.

Every checker returns a :class:`ValidationReport`.  A failing entry always
carries a witness (the grid index, point or pair where the violation was
largest) and a signed margin (negative means violated).
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy import linalg

from .errors import DataError, ModelError, PreconditionError

__all__ = [
    "CheckResult",
    "ValidationReport",
    "WeightVector",
    "log_chord_defects",
    "check_homogeneous_assumptions",
    "check_complete_monotonicity",
    "check_weak_positive_definiteness",
    "zero_sum_min_eigenvalue",
    "check_psh_radial",
    "check_psh_hessian",
    "complex_hessian",
    "check_s1_invariance",
    "disc_green_hessian",
    "disc_green_psh_check",
    "dot_w",
    "check_kernel_symmetry",
    "check_prior",
    "validate_model",
]

PROFILE_TOL = 1e-8
HESSIAN_TOL = 1e-6


def _clean(v):
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (np.floating, float)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


@dataclasses.dataclass
class CheckResult:
    name: str
    passed: bool
    witness: object = None
    margin: float | None = None
    details: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        self.passed = bool(self.passed)
        if not self.passed and self.witness is None:
            raise ValueError(f"failing check {self.name!r} has no witness")

    def to_dict(self):
        return {
            "name": self.name,
            "passed": self.passed,
            "witness": _clean(self.witness),
            "margin": _clean(self.margin),
            "details": _clean(self.details),
        }


@dataclasses.dataclass
class ValidationReport:
    entries: list = dataclasses.field(default_factory=list)

    @property
    def passed(self):
        return all(e.passed for e in self.entries)

    def add(self, entry):
        self.entries.append(entry)
        return entry

    def extend(self, other):
        self.entries.extend(other.entries)
        return self

    def __getitem__(self, name):
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def failures(self):
        return [e for e in self.entries if not e.passed]

    def to_dict(self):
        return {"passed": self.passed, "checks": [e.to_dict() for e in self.entries]}


@dataclasses.dataclass(frozen=True)
class WeightVector:
    a: tuple

    def __post_init__(self):
        a = tuple(float(x) for x in self.a)
        if not a or any(not x > 0 for x in a):
            raise PreconditionError("weight vector components must be strictly positive")
        object.__setattr__(self, "a", a)

    def __len__(self):
        return len(self.a)


def _eval_on_grid(fn, grid):
    grid = np.asarray(grid, dtype=float)
    vals = np.asarray(fn(grid), dtype=float)
    bad = np.isnan(vals)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise DataError(f"evaluation returned NaN at r={grid[i]:.6g}", witness={"index": i, "r": grid[i]})
    return vals


def log_chord_defects(values, grid):
    """Height of each interior point above the chord of its neighbours in ``t = log r``.

    Non-negative defects everywhere mean concavity in ``log r``; returns
    ``(defects, scales)`` where ``scales`` is the local value magnitude.
    """
    t = np.log(np.asarray(grid, dtype=float))
    f = np.asarray(values, dtype=float)
    lam = (t[2:] - t[1:-1]) / (t[2:] - t[:-2])
    chord = lam * f[:-2] + (1.0 - lam) * f[2:]
    defects = f[1:-1] - chord
    scales = np.maximum.reduce([np.abs(f[:-2]), np.abs(f[1:-1]), np.abs(f[2:]), np.ones_like(chord)])
    return defects, scales


def _check_log_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 8:
        raise PreconditionError("grid needs at least 8 radii")
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise PreconditionError("grid must be positive and strictly increasing")
    if math.log10(grid[-1] / grid[0]) < 4 - 1e-12:
        raise PreconditionError("grid must span at least 4 decades")
    return grid


def _convexity_entry(name, values, grid, sign, tol):
    # sign=+1 tests concavity, sign=-1 convexity (defects of -f)
    defects, scales = log_chord_defects(sign * values, grid)
    margins = defects + tol * scales
    i = int(np.argmin(margins))
    ok = bool(margins[i] >= 0)
    witness = None if ok else {"triple": [i, i + 1, i + 2], "r": grid[i : i + 3].tolist()}
    return CheckResult(name, ok, witness, float(defects[i]),
                       {"violations": int(np.sum(margins < 0)), "tol_rel": tol})


def check_homogeneous_assumptions(w, grid, tol=PROFILE_TOL):
    """Concavity of ``t -> w(e^t)`` on the grid and boundedness below near ``r = 0``."""
    grid = _check_log_grid(grid)
    vals = _eval_on_grid(w, grid)
    report = ValidationReport()
    report.add(_convexity_entry("concave_in_log_r", vals, grid, +1, tol))
    # a concave function of t stays bounded below as t -> -inf iff its slope there is <= 0
    t = np.log(grid)
    s0 = (vals[1] - vals[0]) / (t[1] - t[0])
    scale = max(1.0, abs(vals[0]), abs(vals[1]))
    finite = bool(np.isfinite(vals[0]) or vals[0] > 0)
    ok = finite and s0 <= tol * scale / (t[1] - t[0])
    report.add(CheckResult("bounded_below_at_zero", ok, None if ok else {"index": 0, "r": grid[0]},
                           float(-s0), {"lowest_slope": float(s0)}))
    return report


def check_psh_radial(psi, grid, tol=PROFILE_TOL):
    """Rotation-invariant psh test: ``t -> psi(e^t)`` convex on the grid."""
    grid = _check_log_grid(grid)
    vals = _eval_on_grid(psi, grid)
    return ValidationReport([_convexity_entry("convex_in_log_r", vals, grid, -1, tol)])


def _divided_difference_coeffs(x):
    m = len(x)
    c = np.empty(m)
    for k in range(m):
        c[k] = 1.0 / np.prod([x[k] - x[j] for j in range(m) if j != k])
    return c


def check_complete_monotonicity(w, m_max, grid, tol=PROFILE_TOL):
    """Alternating-sign test of ``f(r) = w(sqrt r)`` with divided differences up to order ``m_max``."""
    if m_max < 3:
        raise PreconditionError("m_max must be >= 3")
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise PreconditionError("grid must be positive and strictly increasing")
    f = _eval_on_grid(lambda r: w(np.sqrt(r)), grid)
    if not np.all(np.isfinite(f)):
        i = int(np.argmax(~np.isfinite(f)))
        raise PreconditionError(f"domain error: infinite value at r={grid[i]:.6g}")
    report = ValidationReport()
    for m in range(m_max + 1):
        worst, where, nviol = math.inf, None, 0
        for i in range(len(grid) - m):
            xs = grid[i : i + m + 1]
            c = _divided_difference_coeffs(xs) if m > 0 else np.ones(1)
            terms = c * f[i : i + m + 1]
            val = (-1) ** m * terms.sum()
            mag = np.abs(terms).sum()
            margin = val + tol * mag
            rel = val / mag if mag > 0 else 0.0
            if margin < 0:
                nviol += 1
            if rel < worst:
                worst, where = rel, i
        ok = nviol == 0
        report.add(CheckResult(f"order_{m}", ok,
                               None if ok else {"order": m, "index": where, "r": grid[where]},
                               float(worst), {"violations": nviol}))
    return report


def zero_sum_min_eigenvalue(G):
    """Smallest eigenvalue of ``G`` restricted to ``{sum(a) = 0}`` and its eigenvector."""
    G = np.asarray(G, dtype=float)
    n = len(G)
    P = linalg.null_space(np.ones((1, n)))
    M = P.T @ G @ P
    M = 0.5 * (M + M.T)
    vals, vecs = np.linalg.eigh(M)
    return float(vals[0]), P @ vecs[:, 0]


def check_weak_positive_definiteness(W, points, trials=0, tol=PROFILE_TOL, seed=0):
    """Zero-sum positivity of the Gram matrix of ``W`` on ``points``."""
    X = np.asarray(points, dtype=float)
    if X.ndim != 2 or len(X) < 2:
        raise PreconditionError("need at least two points of shape (n, d)")
    diff = X[:, None, :] - X[None, :, :]
    dist = np.sqrt(np.sum(diff**2, axis=-1))
    iu = np.triu_indices(len(X), 1)
    if np.any(dist[iu] == 0):
        raise PreconditionError("points must be pairwise distinct")
    G = np.asarray(W(X[:, None, :], X[None, :, :]), dtype=float)
    if not np.all(np.isfinite(np.diag(G))):
        raise PreconditionError("kernel is infinite on the diagonal; apply regularize() first")
    if not np.all(np.isfinite(G)):
        raise DataError("kernel Gram matrix has non-finite entries")
    norm = float(np.linalg.norm(G, 2))
    lam, vec = zero_sum_min_eigenvalue(G)
    details = {"norm": norm, "n": len(X)}
    if trials:
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((trials, len(X)))
        A -= A.mean(axis=1, keepdims=True)
        A /= np.linalg.norm(A, axis=1, keepdims=True)
        details["min_random_form"] = float(np.min(np.einsum("ti,ij,tj->t", A, G, A)))
    ok = lam >= -tol * norm
    entry = CheckResult("weak_positive_definite", ok, None if ok else {"coefficients": vec}, lam, details)
    return ValidationReport([entry])


def complex_hessian(f, z, h=1e-4):
    """Finite-difference complex Hessian ``d^2 f / dz_i dzbar_j`` at ``z`` (shape ``(n,)``)."""
    z = np.asarray(z, dtype=complex)
    n = len(z)
    x0 = np.concatenate([z.real, z.imag])
    m = 2 * n
    E = np.eye(m) * h
    # all stencil points for the real Hessian, evaluated in one call
    pts = []
    for i in range(m):
        for j in range(i, m):
            for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                pts.append(x0 + si * E[i] + sj * E[j])
    P = np.array(pts)
    vals = np.asarray(f(P[:, :n] + 1j * P[:, n:]), dtype=float)
    if np.any(np.isnan(vals)):
        raise DataError("evaluation returned NaN", witness={"z": z})
    H = np.empty((m, m))
    k = 0
    for i in range(m):
        for j in range(i, m):
            v = vals[k : k + 4]
            H[i, j] = H[j, i] = (v[0] - v[1] - v[2] + v[3]) / (4.0 * h * h)
            k += 4
    Hxx, Hyy = H[:n, :n], H[n:, n:]
    Hxy = H[:n, n:]
    L = 0.25 * ((Hxx + Hyy) + 1j * (Hxy - Hxy.T))
    return 0.5 * (L + L.conj().T)


def check_psh_hessian(f, points, h=1e-4, tol=HESSIAN_TOL):
    """Sampled psh test; ``f`` maps complex arrays of shape ``(m, n)`` to ``(m,)``."""
    Z = np.atleast_2d(np.asarray(points, dtype=complex))
    worst, where = math.inf, None
    nviol = 0
    for k, z in enumerate(Z):
        ev = float(np.linalg.eigvalsh(complex_hessian(f, z, h))[0])
        if ev < -tol:
            nviol += 1
        if ev < worst:
            worst, where = ev, k
    ok = nviol == 0
    w = None if ok else {"index": where, "z": [complex(c) for c in Z[where]]}
    return ValidationReport([CheckResult("psh_hessian", ok, w, worst, {"violations": nviol, "h": h})])


def check_s1_invariance(f, a, points, angles, tol=1e-10):
    """``|f(e^{i a theta} z) - f(z)| <= tol * max(1, |f(z)|)`` on all samples."""
    a = a if isinstance(a, WeightVector) else WeightVector(tuple(a))
    Z = np.atleast_2d(np.asarray(points, dtype=complex))
    if Z.shape[1] != len(a):
        raise PreconditionError("weight vector length differs from point dimension")
    base = np.asarray(f(Z), dtype=float)
    if np.any(np.isnan(base)):
        raise DataError("evaluation returned NaN")
    worst, where = -math.inf, None
    for th in np.atleast_1d(angles):
        rot = Z * np.exp(1j * np.asarray(a.a) * th)
        dev = np.abs(np.asarray(f(rot), dtype=float) - base) / np.maximum(1.0, np.abs(base))
        k = int(np.argmax(dev))
        if dev[k] > worst:
            worst, where = float(dev[k]), {"index": k, "z": [complex(c) for c in Z[k]], "theta": float(th)}
    ok = worst <= tol
    return ValidationReport([CheckResult("s1_invariance", ok, None if ok else where, tol - worst, {})])


def disc_green_hessian(lam, z, w):
    """Closed-form complex Hessian of ``psi(z,w) + lam (phi(z) + phi(w))`` on ``D x D``.

    ``psi = log(|z-w|^2 / |1 - z wbar|^2)`` and ``phi = -log((1-|z|^2)^2)``.
    Returns arrays ``(a, b, c)`` with the matrix ``[[a, conj(b)], [b, c]]``.
    """
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    a = 2.0 * lam / (1.0 - np.abs(z) ** 2) ** 2
    c = 2.0 * lam / (1.0 - np.abs(w) ** 2) ** 2
    b = (1.0 - z * np.conj(w)) ** -2
    return a, b, c


def disc_green_psh_check(lam, pairs, tol=1e-12):
    """Psh test of the disc Green function plus ``lam`` times the boundary weight.

    The margin is the determinant normalized by the product of the diagonal
    entries, ``1 - q / (4 lam^2)`` with
    ``q = (1-|z|^2)^2 (1-|w|^2)^2 / |1 - z wbar|^4``.  The witness of a
    failure is the violating pair closest to ``(0, 0)``.
    """
    P = np.asarray(pairs, dtype=complex).reshape(-1, 2)
    z, w = P[:, 0], P[:, 1]
    if np.any(np.abs(z) >= 1) or np.any(np.abs(w) >= 1):
        raise PreconditionError("pairs must lie in the open unit bidisc")
    if np.any(z == w):
        raise PreconditionError("pairs on the diagonal are excluded")
    a, b, c = disc_green_hessian(lam, z, w)
    trace = a + c
    q = (1.0 - np.abs(z) ** 2) ** 2 * (1.0 - np.abs(w) ** 2) ** 2 / np.abs(1.0 - z * np.conj(w)) ** 4
    if lam == 0:
        margin = -q
    else:
        margin = 1.0 - q / (4.0 * lam * lam)
    bad = (trace < 0) | (margin < -tol)
    ok = not np.any(bad)
    witness = None
    if not ok:
        idx = np.flatnonzero(bad)
        k = int(idx[np.argmin(np.abs(z[idx]) ** 2 + np.abs(w[idx]) ** 2)])
        witness = {"index": k, "z": complex(z[k]), "w": complex(w[k]),
                   "distance_to_origin": float(math.hypot(abs(z[k]), abs(w[k])))}
    i = int(np.argmin(margin))
    return ValidationReport([CheckResult(
        "disc_green_psh", ok, witness, float(margin[i]),
        {"lambda": lam, "violations": int(bad.sum()), "pairs": len(P),
         "most_negative_pair": [complex(z[i]), complex(w[i])]},
    )])


def dot_w(w, t_min=-60.0, h=1e-3, tol=1e-6):
    """Limiting log-slope ``lim_{t -> -inf} d w(e^t) / dt``.

    Forward-difference slopes are taken at ``t = -1, -2, ..., t_min``.
    When successive slopes agree within ``tol`` the last one is returned;
    otherwise a ``c / |t|`` tail model is Richardson-extrapolated.  Values
    within ``tol`` of zero are returned as exactly 0.  Returns ``-inf`` for
    slopes that keep decreasing geometrically.
    """
    ks = np.arange(1, int(-t_min) + 1, dtype=float)
    t = -ks
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        s = (w(np.exp(t + h)) - w(np.exp(t))) / h
    s = np.asarray(s, dtype=float)
    if np.any(np.isnan(s)):
        raise DataError("profile returned NaN near r = 0")
    if np.isneginf(s[-1]) or (s[-1] < -1e3 and s[-1] < 2.0 * s[-11]):
        return -math.inf
    if np.isposinf(s[-1]):
        return math.inf
    diffs = np.diff(s)
    scale = max(1.0, float(np.max(np.abs(s))))
    # under the homogeneous assumptions slopes increase as t decreases
    if np.any(diffs < -1e-7 * scale) and np.any(diffs > 1e-7 * scale):
        raise ModelError("no limit detected: slope sequence is not monotone")
    for k in range(1, len(s)):
        if abs(s[k] - s[k - 1]) < tol and (k + 1 >= len(s) or abs(s[k + 1] - s[k]) < tol):
            val = float(s[k])
            break
    else:
        # s_k ~ L + c / k
        k1, k2 = ks[-1], ks[-2]
        val = float((k1 * s[-1] - k2 * s[-2]) / (k1 - k2))
        k3 = ks[-3]
        prev = float((k2 * s[-2] - k3 * s[-3]) / (k2 - k3))
        if abs(val - prev) > 1e-4 * max(1.0, abs(val)):
            raise ModelError("no limit detected: extrapolation did not stabilize")
    if abs(val) < tol:
        return 0.0
    if abs(val - round(val)) < tol:
        val = float(round(val))
    return val


def check_kernel_symmetry(W, d, n_pairs=1000, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    x = scale * rng.standard_normal((n_pairs, d))
    y = scale * rng.standard_normal((n_pairs, d))
    a, b = np.asarray(W(x, y)), np.asarray(W(y, x))
    diff = np.where(np.isnan(a) & np.isnan(b), 0.0, np.abs(a - b))
    diff = np.where(a == b, 0.0, diff)
    k = int(np.argmax(diff))
    ok = bool(np.all(diff == 0))
    return CheckResult("kernel_symmetry", ok, None if ok else {"x": x[k], "y": y[k]}, -float(diff[k]),
                       {"pairs": n_pairs})


def check_prior(prior, n=100_000, seed=0):
    """Prior mass equals one and sampler moments match quadrature."""
    report = ValidationReport()
    mass = float(prior.total_mass())
    ok = abs(mass - 1.0) <= 1e-6
    report.add(CheckResult("prior_mass", ok, None if ok else {"mass": mass}, 1e-6 - abs(mass - 1.0)))
    if prior.radial:
        from scipy import integrate

        rng = np.random.default_rng(seed)
        x = prior.sample(rng, n)
        r = np.linalg.norm(x, axis=-1)
        R = prior.domain.R
        upper = R if math.isfinite(R) else np.inf
        m1 = integrate.quad(lambda s: s * float(prior.radial_density(np.array(s))), 0.0, upper, limit=200)[0]
        m2 = integrate.quad(lambda s: s * s * float(prior.radial_density(np.array(s))), 0.0, upper, limit=200)[0]
        se = math.sqrt(max(m2 - m1 * m1, 0.0) / n)
        z = abs(r.mean() - m1) / se if se > 0 else 0.0
        zc = float(np.max(np.abs(x.mean(axis=0))) / (math.sqrt(m2 / prior.d / n)))
        ok = z <= 4 and zc <= 4
        report.add(CheckResult("prior_sampler_moments", ok, None if ok else {"z_radius": z, "z_center": zc},
                               4.0 - max(z, zc), {"mean_radius": float(r.mean()), "quadrature": m1}))
    return report


def _profile_grid(R):
    if math.isfinite(R):
        hi = 2.0 * R
        return np.geomspace(hi * 1e-6, hi, 61)
    return np.geomspace(1e-6, 1e3, 91)


def validate_model(model, checks=None, n_points=64, seed=0):
    """Run every applicable structural check on ``model``."""
    from .kernels import RegularizedKernel

    report = ValidationReport()
    wanted = set(checks) if checks else None

    def want(name):
        return wanted is None or name in wanted

    R = model.domain.R
    grid = _profile_grid(R)
    if want("kernel_symmetry"):
        report.add(check_kernel_symmetry(model.W, model.d, seed=seed, scale=R if math.isfinite(R) else 1.0))
    if want("prior"):
        report.extend(check_prior(model.prior, seed=seed))
    if model.W.is_radial and want("homogeneous_w"):
        sub = check_homogeneous_assumptions(model.W.profile, grid)
        for e in sub.entries:
            e.name = f"w_{e.name}"
        report.extend(sub)
    if model.V.profile is not None and not model.V.is_zero and want("homogeneous_v"):
        sub = check_homogeneous_assumptions(model.V.profile, grid)
        for e in sub.entries:
            e.name = f"v_{e.name}"
        report.extend(sub)
    if model.prior.radial and want("psh_prior"):
        prior = model.prior
        rg = grid[grid <= R] if math.isfinite(R) else grid
        e = check_psh_radial(prior.psi0_radial, rg).entries[0]
        e.name = "psi0_convex_in_log_r"
        report.add(e)
    if want("weak_pd"):
        rng = np.random.default_rng(seed)
        if math.isfinite(R):
            pts = R * rng.random((n_points, 1)) ** (1.0 / model.d) * _unit(rng, n_points, model.d)
        else:
            pts = model.prior.sample(rng, n_points)
        W = model.W
        note = None
        if W.is_singular:
            scale = R if math.isfinite(R) else 1.0
            W = RegularizedKernel(W, "soften", 1e-3 * scale, d=model.d)
            note = "softened by sqrt(r^2 + delta^2), delta = 1e-3 * R"
        e = check_weak_positive_definiteness(W, pts).entries[0]
        if note:
            e.details["regularization"] = note
        report.add(e)
    return report


def _unit(rng, n, d):
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)
