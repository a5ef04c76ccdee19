"""Macroscopic functionals on discretized measures and the mean-field solver.

Two discretizations are available for planar (``d = 2``) rotation-invariant
models:

``radial``
    Annular shells.  Off-diagonal kernel entries use the angular average
    of the kernel, in closed form for the log and monomial families
    (``-log max(r, s)`` and a hypergeometric expression).  Other
    profiles use a 128-point periodic trapezoid rule.  Diagonal entries
    are the self-energy of the cell's own mass distribution.

``planar``
    Square cells clipped to a disc, with point evaluation off the
    diagonal and the exact self-energy of a uniform square on it.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
import warnings

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate, optimize, special

from .curves import SampledCurve
from .errors import BracketError, ConfigError, PreconditionError

__all__ = [
    "GridMeasure",
    "DiscretizedModel",
    "MeanFieldResult",
    "angular_average",
    "discretize",
    "energy",
    "entropy",
    "free_energy_functional",
    "solve_mean_field",
    "free_energy_curve",
    "beta_for_energy",
    "entropy_curve_direct",
    "entropy_curve_from_sweep",
    "energy_range",
    "catastrophe_family",
    "core_halo_family",
    "uniform_disc_power_energy",
    "DIAG_SENTINEL",
]

DIAG_SENTINEL = 1e100


@dataclasses.dataclass
class GridMeasure:
    weights: np.ndarray
    prior_weights: np.ndarray
    grid_id: str

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.prior_weights = np.asarray(self.prior_weights, dtype=float)
        if self.weights.shape != self.prior_weights.shape:
            raise ConfigError("weights and prior weights differ in length")
        if np.any(self.weights < 0):
            raise ConfigError("weights must be non-negative")
        if abs(self.weights.sum() - 1.0) > 1e-10:
            raise ConfigError(f"weights sum to {self.weights.sum():.15g}, not 1")


@dataclasses.dataclass
class DiscretizedModel:
    mode: str
    W: np.ndarray
    V: np.ndarray
    prior_weights: np.ndarray
    nodes: np.ndarray
    edges: np.ndarray | None
    grid_id: str
    truncated_mass: float = 0.0
    warnings: list = dataclasses.field(default_factory=list)

    @property
    def size(self):
        return len(self.prior_weights)

    @property
    def has_interaction(self):
        return bool(np.any(self.W != 0))

    def measure(self, weights):
        return GridMeasure(weights, self.prior_weights, self.grid_id)

    def prior_measure(self):
        return GridMeasure(self.prior_weights.copy(), self.prior_weights, self.grid_id)


def angular_average(profile, r, s, n_theta=128):
    """Mean of ``w(|x - y|)`` over the relative angle for ``|x| = r``, ``|y| = s`` in the plane."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    hi = np.maximum(r, s)
    lo = np.minimum(r, s)
    fam = profile.family
    with np.errstate(divide="ignore", invalid="ignore"):
        if fam == "zero":
            return np.zeros(np.broadcast(r, s).shape)
        if fam == "log":
            return -profile.params["scale"] * np.log(hi)
        if fam == "monomial":
            p, c = profile.params["exponent"], profile.params["coef"]
            rho2 = np.where(hi > 0, (lo / np.where(hi > 0, hi, 1.0)) ** 2, 0.0)
            return c * hi**p * special.hyp2f1(-p / 2.0, -p / 2.0, 1.0, rho2)
    th = 2.0 * np.pi * (np.arange(n_theta) + 0.5) / n_theta
    cos = np.cos(th)
    rr, ss = np.broadcast_arrays(r, s)
    dist2 = rr[..., None] ** 2 + ss[..., None] ** 2 - 2.0 * rr[..., None] * ss[..., None] * cos
    return np.mean(profile(np.sqrt(np.maximum(dist2, 0.0))), axis=-1)


def _grid_id(mode, arr):
    return f"{mode}-{hashlib.sha1(np.ascontiguousarray(arr).tobytes()).hexdigest()[:12]}"


def _radial_edges(prior, R, K, spacing, r_min, extra_edges):
    if spacing == "geometric":
        r_min = R * 1e-5 if r_min is None else float(r_min)
        edges = np.concatenate([[0.0], np.geomspace(r_min, R, K)])
    elif spacing == "uniform":
        edges = np.linspace(0.0, R, K + 1)
    elif spacing == "mass":
        total = float(prior.radial_cdf(R))
        rs = np.linspace(0.0, R, 200 * K + 1)
        cdf = prior.radial_cdf(rs)
        edges = np.interp(np.linspace(0.0, total, K + 1), cdf, rs)
        edges[0], edges[-1] = 0.0, R
    else:
        raise ConfigError(f"unknown spacing {spacing!r}", "spacing")
    if extra_edges is not None:
        extra = np.asarray(extra_edges, dtype=float)
        extra = extra[(extra > 0) & (extra < R)]
        edges = np.unique(np.concatenate([edges, extra]))
    return edges


def _cell_rules(prior, edges, n):
    """Per-cell Gauss rules in ``u = r^2`` weighted by the prior density."""
    x, w = leggauss(n)
    a, b = edges[:-1] ** 2, edges[1:] ** 2
    u = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * x[None, :]
    # in the plane dmu0 = pi exp(-psi0) du
    dens = np.exp(-(prior.psi0_radial(np.sqrt(u)) - prior.psi0_radial(np.sqrt(u[:, :1]))))
    wt = 0.5 * (b - a)[:, None] * w[None, :] * dens
    wt = wt / wt.sum(axis=1, keepdims=True)
    return np.sqrt(u), wt


def _diag_singular_monomial(profile, prior, edges, n=24):
    """Cell self-energies for an integrable singular monomial.

    The inner integral is split at ``r = s`` and graded with ``r = s -+ L t^2``,
    which absorbs the logarithmic singularity of the angular average.
    """
    x, w = leggauss(n)
    t, wt = 0.5 * (x + 1.0), 0.5 * w
    out = np.empty(len(edges) - 1)
    for k in range(len(out)):
        a, b = edges[k], edges[k + 1]
        mass = float(prior.radial_cdf(b) - prior.radial_cdf(a))
        if mass <= 0:
            out[k] = 0.0
            continue
        s = a + (b - a) * t
        ws = (b - a) * wt * prior.radial_density(s) / mass
        total = np.zeros(n)
        for L, sign in ((s - a, -1.0), (b - s, 1.0)):
            r = s[:, None] + sign * L[:, None] * t[None, :] ** 2
            jac = 2.0 * L[:, None] * t[None, :] * wt[None, :]
            dens = prior.radial_density(r) / mass
            total += np.sum(angular_average(profile, r, s[:, None]) * dens * jac, axis=1)
        out[k] = float(ws @ total)
    return out


def _radial_discretize(model, K, R, spacing, r_min, extra_edges, gl_points):
    prior = model.prior
    prof = model.W.profile
    edges = _radial_edges(prior, R, K, spacing, r_min, extra_edges)
    K = len(edges) - 1
    total = float(prior.radial_cdf(R))
    cdf = prior.radial_cdf(edges)
    mass = np.diff(cdf) / total
    rq, wq = _cell_rules(prior, edges, gl_points)
    nodes = np.sum(wq * rq, axis=1)
    V = np.sum(wq * model.V.profile(rq), axis=1) if not model.V.is_zero else np.zeros(K)
    notes = []
    W = np.zeros((K, K))
    fam = prof.family
    if fam == "log":
        c = prof.params["scale"]
        mlog = np.sum(wq * np.log(rq), axis=1)
        idx = np.maximum.outer(np.arange(K), np.arange(K))
        W = -c * mlog[idx]
        # F_k(s): prior mass of the cell below s, from the exact radial CDF
        Fk = (prior.radial_cdf(rq) - cdf[:-1, None]) / np.diff(cdf)[:, None]
        W[np.arange(K), np.arange(K)] = -2.0 * c * np.sum(wq * np.log(rq) * Fk, axis=1)
    elif fam == "zero":
        pass
    elif fam == "monomial":
        rq8, wq8 = _cell_rules(prior, edges, 8)
        for j in range(K):
            # cell averages over 8 x 8 Gauss nodes
            vals = angular_average(prof, rq8[j][None, :, None], rq8[j:][:, None, :])
            W[j, j:] = np.einsum("p,kpq,kq->k", wq8[j], vals, wq8[j:])
        W = np.triu(W, 1)
        W = W + W.T
        p = prof.params["exponent"]
        if prof.is_singular and p <= -2:
            W[np.arange(K), np.arange(K)] = DIAG_SENTINEL
            notes.append("non-integrable singularity: atoms have infinite energy; diagonal set to sentinel")
        elif prof.is_singular and p <= -1:
            W[np.arange(K), np.arange(K)] = _diag_singular_monomial(prof, prior, edges)
        else:
            W[np.arange(K), np.arange(K)] = _diag_offset_rule(prof, prior, edges)
    else:
        for j in range(K):
            W[j, j + 1 :] = angular_average(prof, nodes[j], nodes[j + 1 :])
        W = W + W.T
        if prof.is_singular:
            notes.append("singular non-closed-form profile: diagonal from offset Gauss rules (approximate)")
        W[np.arange(K), np.arange(K)] = _diag_offset_rule(prof, prior, edges)
    if not np.all(np.isfinite(W)):
        raise ConfigError("kernel matrix has non-finite entries on the domain", "kernel")
    for n in notes:
        warnings.warn(n, RuntimeWarning, stacklevel=3)
    return DiscretizedModel("radial", W, V, mass, nodes, edges, _grid_id("radial", edges),
                            truncated_mass=1.0 - total, warnings=notes)


def _diag_offset_rule(prof, prior, edges):
    r16, w16 = _cell_rules(prior, edges, 16)
    r17, w17 = _cell_rules(prior, edges, 17)
    out = np.empty(len(edges) - 1)
    for k in range(len(out)):
        vals = angular_average(prof, r16[k][:, None], r17[k][None, :])
        out[k] = w16[k] @ vals @ w17[k]
    return out


def _square_self_energy(profile, h):
    """Mean of ``w(|x - y|)`` for independent uniform points in a square of side ``h``."""

    def integrand(rho, th):
        z1, z2 = rho * math.cos(th), rho * math.sin(th)
        return float(profile(np.array(rho))) * (h - z1) * (h - z2) * rho

    def upper(th):
        return min(h / max(math.cos(th), 1e-300), h / max(math.sin(th), 1e-300))

    parts = []
    for lo, hi in ((0.0, math.pi / 4), (math.pi / 4, math.pi / 2)):
        parts.append(integrate.dblquad(integrand, lo, hi, 0.0, upper, epsabs=1e-12, epsrel=1e-10)[0])
    return 4.0 * sum(parts) / h**4


def _planar_discretize(model, n, R, sub=8):
    prior = model.prior
    h = 2.0 * R / n
    c1 = -R + h * (np.arange(n) + 0.5)
    off = h * ((np.arange(sub) + 0.5) / sub - 0.5)
    cx, cy = np.meshgrid(c1, c1, indexing="ij")
    cx, cy = cx.ravel(), cy.ravel()
    px = cx[:, None, None] + off[None, :, None]
    py = cy[:, None, None] + off[None, None, :]
    px, py = np.broadcast_arrays(px, py)
    pts = np.stack([px, py], axis=-1).reshape(len(cx), sub * sub, 2)
    inside = np.sum(pts**2, axis=-1) <= R * R
    dens = np.where(inside, np.exp(-prior.log_density_neg(pts)), 0.0)
    cell_mass = dens.mean(axis=1) * h * h
    keep = cell_mass > 0
    pts, dens, cell_mass = pts[keep], dens[keep], cell_mass[keep]
    total = cell_mass.sum()
    wts = dens / dens.sum(axis=1, keepdims=True)
    nodes = np.einsum("kq,kqd->kd", wts, pts)
    V = np.einsum("kq,kq->k", wts, model.V(pts)) if not model.V.is_zero else np.zeros(len(nodes))
    W = np.asarray(model.W(nodes[:, None, :], nodes[None, :, :]), dtype=float)
    diag = _square_self_energy(model.W.profile, h) if model.W.is_radial else float(model.W(np.zeros(2), np.zeros(2)))
    W[np.arange(len(W)), np.arange(len(W))] = diag
    W = 0.5 * (W + W.T)
    return DiscretizedModel("planar", W, V, cell_mass / total, nodes, None, _grid_id("planar", nodes),
                            truncated_mass=max(0.0, 1.0 - total))


def discretize(model, resolution=512, mode="radial", R_trunc=None, spacing="geometric", r_min=None,
               extra_edges=None, gl_points=24):
    """Discretize a planar model.

    ``resolution`` is the number of shells (radial) or of cells across the
    diameter (planar).  Full-space models need a truncation radius.
    """
    if model.d != 2:
        raise ConfigError("discretization supports planar models (d = 2) only", "domain.d")
    R = model.domain.R
    if R_trunc is not None:
        R = min(R, float(R_trunc))
    if not math.isfinite(R):
        raise ConfigError("full-space models need a truncation radius", "R_trunc")
    if mode == "radial":
        if not model.is_rotation_invariant:
            raise PreconditionError("radial mode requires rotation-invariant W, V and prior")
        return _radial_discretize(model, int(resolution), R, spacing, r_min, extra_edges, gl_points)
    if mode == "planar":
        return _planar_discretize(model, int(resolution), R)
    raise ConfigError(f"unknown mode {mode!r}", "mode")


def _check_grid(dm, mu):
    if mu.grid_id != dm.grid_id:
        raise ConfigError("measure and model live on different grids", "grid")


def energy(dm, mu):
    """``1/2 mu' W mu + V' mu``."""
    _check_grid(dm, mu)
    w = mu.weights
    return float(0.5 * w @ (dm.W @ w) + dm.V @ w)


def entropy(mu):
    """``-sum mu log(mu / mu0)`` with ``0 log 0 = 0``."""
    w, p = mu.weights, mu.prior_weights
    pos = w > 0
    if np.any(p[pos] <= 0):
        return -math.inf
    return float(-np.sum(w[pos] * np.log(w[pos] / p[pos]))) + 0.0


def free_energy_functional(dm, beta, mu):
    s = entropy(mu)
    if s == -math.inf:
        return math.inf
    return float(beta * energy(dm, mu) - s) + 0.0


@dataclasses.dataclass
class MeanFieldResult:
    measure: GridMeasure
    beta: float
    converged: bool
    residual: float
    iterations: int
    diverged: bool
    energy: float
    entropy: float
    free_energy: float
    history: list
    message: str = ""


def _gibbs(dm, beta, w, logp):
    if beta == 0:
        return dm.prior_weights.copy(), True
    phi = dm.W @ w + dm.V if dm.has_interaction else dm.V
    a = logp - beta * phi
    amax = np.max(a)
    if not np.isfinite(amax):
        return None, False
    g = np.exp(a - amax)
    z = g.sum()
    if not (np.isfinite(z) and z > 0):
        return None, False
    return g / z, True


def _fval(dm, beta, w, logp):
    pos = w > 0
    s = -np.sum(w[pos] * (np.log(w[pos]) - logp[pos]))
    return beta * (0.5 * w @ (dm.W @ w) + dm.V @ w) - s


def solve_mean_field(dm, beta, init=None, damping=1.0, tol=1e-10, max_iter=20000, theta_min=2.0**-40):
    """Damped fixed-point iteration ``mu <- (1 - theta) mu + theta G(mu)``.

    ``G(mu) = mu0 exp(-beta (W mu + V)) / Z``.  A step is accepted only if
    it does not increase ``F_beta``; otherwise ``theta`` is halved.  The
    iteration count is the number of accepted updates.
    """
    beta = float(beta)
    if not 0 < damping <= 1:
        raise ConfigError("damping must lie in (0, 1]", "damping")
    with np.errstate(divide="ignore"):
        logp = np.log(dm.prior_weights)
    w = (init.weights if isinstance(init, GridMeasure) else
         (np.asarray(init, dtype=float) if init is not None else dm.prior_weights)).copy()
    f = _fval(dm, beta, w, logp)
    history = [float(f)]
    theta = damping
    g, ok = _gibbs(dm, beta, w, logp)
    it = 0
    residual = math.inf
    diverged = not ok
    message = ""
    while ok and it < max_iter:
        while True:
            cand = g if theta == 1.0 else (1.0 - theta) * w + theta * g
            fc = _fval(dm, beta, cand, logp)
            if fc <= f + 1e-13 * (1.0 + abs(f)):
                break
            theta *= 0.5
            if theta < theta_min:
                break
        if theta < theta_min:
            message = "step size underflow; F_beta cannot decrease further"
            residual = float(np.abs(g - w).sum())
            break
        w, f = cand, fc
        it += 1
        history.append(float(f))
        g, ok = _gibbs(dm, beta, w, logp)
        if not ok:
            diverged = True
            message = "partition function overflow (beta below the stability threshold?)"
            break
        residual = float(np.abs(g - w).sum())
        if residual <= tol:
            break
        theta = min(damping, 2.0 * theta)
    w = np.maximum(w, 0.0)
    w = w / w.sum()
    if beta == 0:
        w = dm.prior_weights.copy()
        residual = 0.0
    mu = dm.measure(w)
    converged = residual <= tol and not diverged
    if not converged and not message:
        message = "max_iter reached"
    e = energy(dm, mu)
    s = entropy(mu)
    return MeanFieldResult(mu, beta, converged, residual, it, diverged, e, s, beta * e - s, history, message)


def free_energy_curve(dm, beta_grid, warm_start=True, **solver):
    """``F(beta) = F_beta(mu_beta)`` on a grid, continuing from the point nearest 0.

    Returns ``(curve, results)``; the curve meta holds energies, entropies
    and solver diagnostics, and non-converged points are flagged.
    """
    betas = np.asarray(beta_grid, dtype=float)
    if np.any(np.diff(betas) <= 0):
        raise ConfigError("beta grid must be strictly increasing", "beta_grid")
    results = [None] * len(betas)
    i0 = int(np.argmin(np.abs(betas)))
    for order in (range(i0, len(betas)), range(i0 - 1, -1, -1)):
        prev = results[i0] if warm_start and results[i0] is not None else None
        for i in order:
            init = prev.measure if (warm_start and prev is not None and not prev.diverged) else None
            res = solve_mean_field(dm, betas[i], init=init, **solver)
            results[i] = res
            prev = res
    F = np.array([r.free_energy if not r.diverged else np.nan for r in results])
    flags = ["" if r.converged else ("diverged" if r.diverged else "nonconverged") for r in results]
    meta = {
        "energies": [r.energy for r in results],
        "entropies": [r.entropy for r in results],
        "iterations": [r.iterations for r in results],
        "residuals": [r.residual for r in results],
        "grid_id": dm.grid_id,
    }
    return SampledCurve(betas, F, None, flags, meta), results


def entropy_curve_from_sweep(curve):
    """``(E(mu_beta), S(mu_beta))`` pairs of a free-energy sweep as a curve in ``e``.

    Non-converged points are dropped; repeated energies keep the first point.
    """
    E = np.asarray(curve.meta["energies"], dtype=float)
    S = np.asarray(curve.meta["entropies"], dtype=float)
    ok = np.array([f == "" for f in curve.flags]) & np.isfinite(E) & np.isfinite(S)
    E, S, B = E[ok], S[ok], curve.x[ok]
    order = np.argsort(E, kind="stable")
    E, S, B = E[order], S[order], B[order]
    keep = np.concatenate([[True], np.diff(E) > 0])
    return SampledCurve(E[keep], S[keep], None, None, {"betas": B[keep].tolist(), "source": "macro"})


class _EnergySolver:
    """``beta -> E(mu_beta)`` with warm starts from the nearest solved beta."""

    def __init__(self, dm, **solver):
        self.dm = dm
        self.solver = solver
        self.cache = {}

    def __call__(self, beta):
        beta = float(beta)
        if beta in self.cache:
            return self.cache[beta]
        init = None
        if self.cache:
            near = min(self.cache, key=lambda b: abs(b - beta))
            if not self.cache[near].diverged:
                init = self.cache[near].measure
        res = solve_mean_field(self.dm, beta, init=init, **self.solver)
        self.cache[beta] = res
        return res


def _auto_bracket(es, e, e0, beta_limit):
    sign = -1.0 if e > e0 else 1.0
    lo = 0.0
    b = 1.0
    while abs(b) <= beta_limit:
        res = es(sign * b)
        if res.diverged or not res.converged:
            break
        if (sign < 0 and res.energy >= e) or (sign > 0 and res.energy <= e):
            return (sign * b, lo) if sign < 0 else (lo, sign * b)
        lo = sign * b
        b *= 2.0
    side = "e_max" if sign < 0 else "e_min"
    raise BracketError(f"energy {e:.6g} not reached for |beta| <= {b / 2:g}; likely beyond {side}")


def beta_for_energy(dm, e, beta_bracket=None, tol_e=1e-10, beta_limit=1e4, solver=None, **solver_kw):
    """Solve ``E(mu_beta) = e`` for ``beta`` by bracketing root finding.

    Returns ``(beta, result)``.
    """
    es = solver if solver is not None else _EnergySolver(dm, **solver_kw)
    e = float(e)
    e0 = es(0.0).energy
    if abs(e - e0) <= tol_e:
        return 0.0, es(0.0)
    if beta_bracket is None:
        lo, hi = _auto_bracket(es, e, e0, beta_limit)
    else:
        lo, hi = map(float, beta_bracket)
        elo, ehi = es(lo).energy, es(hi).energy
        if not (elo >= e >= ehi):
            raise BracketError(f"bracket [{lo:g}, {hi:g}] gives energies [{ehi:.6g}, {elo:.6g}] not containing "
                               f"{e:.6g}; widen it or e lies outside (e_min, e_max)")
    fn = lambda b: es(b).energy - e
    beta = optimize.brentq(fn, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
    res = es(beta)
    if abs(res.energy - e) > max(tol_e, 1e-9 * abs(e)) * 10:
        # polish with secant steps when the bracket collapsed before the energy tolerance
        try:
            beta = optimize.newton(fn, beta, x1=beta * (1 + 1e-9) + 1e-12, tol=1e-15, maxiter=20)
            res = es(beta)
        except RuntimeError:
            pass
    return float(beta), res


def entropy_curve_direct(dm, e_grid, beta_bracket=None, tol_e=1e-10, on_error="raise", **solver_kw):
    """``S(e)`` as the entropy of the free-energy minimizer with ``E = e``.

    With ``on_error="flag"`` unreachable energies get ``-inf`` and a flag
    instead of raising.  Returns ``(curve, results)``.
    """
    e_grid = np.asarray(e_grid, dtype=float)
    es = _EnergySolver(dm, **solver_kw)
    e0 = es(0.0).energy
    order = np.argsort(np.abs(e_grid - e0))
    S = np.full(len(e_grid), np.nan)
    betas = np.full(len(e_grid), np.nan)
    flags = [""] * len(e_grid)
    results = [None] * len(e_grid)
    for i in order:
        try:
            b, res = beta_for_energy(dm, e_grid[i], beta_bracket, tol_e, solver=es)
        except BracketError as exc:
            if on_error == "raise":
                raise
            S[i] = -math.inf
            flags[i] = "below_e_min" if e_grid[i] < e0 else "above_e_max"
            results[i] = exc
            continue
        S[i], betas[i], results[i] = res.entropy, b, res
        if not res.converged:
            flags[i] = "nonconverged"
    meta = {"betas": betas.tolist(), "e0": e0, "grid_id": dm.grid_id}
    return SampledCurve(e_grid, S, None, flags, meta), results


def energy_range(dm, starts=8, iters=3000, seed=0, step=0.5):
    """Grid estimates of ``(e_min, e_max)``.

    ``e_max`` is a lower bound from the best of the vertices and a few
    multiplicative ascent runs.  ``e_min`` is an upper bound from descent
    runs; when the kernel matrix is positive semidefinite on zero-sum
    vectors the energy is convex and a Frank-Wolfe gap also certifies a
    lower bound ``e_min_lower``.
    """
    from .checks import zero_sum_min_eigenvalue

    rng = np.random.default_rng(seed)
    Wm, V = dm.W, dm.V
    K = dm.size

    def E(w):
        return 0.5 * w @ (Wm @ w) + V @ w

    def run(sign, w):
        for _ in range(iters):
            g = Wm @ w + V
            a = np.log(np.maximum(w, 1e-300)) + sign * step * g / max(1.0, np.max(np.abs(g)))
            a -= a.max()
            w = np.exp(a)
            w /= w.sum()
        return w

    vert = 0.5 * np.diag(Wm) + V
    best_max = float(np.max(vert))
    best_min_w = None
    best_min = math.inf
    for k in range(starts):
        w0 = rng.dirichlet(np.ones(K)) if k else dm.prior_weights.copy()
        best_max = max(best_max, float(E(run(+1.0, w0.copy()))))
        wmin = run(-1.0, w0.copy())
        if E(wmin) < best_min:
            best_min, best_min_w = float(E(wmin)), wmin
    lam, _ = zero_sum_min_eigenvalue(Wm) if K <= 2000 else (math.nan, None)
    convex = bool(lam >= -1e-10 * np.linalg.norm(Wm, 2)) if K <= 2000 else False
    lower = None
    if convex:
        g = Wm @ best_min_w + V
        lower = float(best_min + np.min(g) - g @ best_min_w)
    return {"e_min_upper": best_min, "e_min_lower": lower, "e_max_lower": best_max, "convex": convex,
            "min_zero_sum_eigenvalue": lam}


def uniform_disc_power_energy(alpha):
    """``E(mu0) = 1/2 E|X - Y|^(-alpha)`` for uniform points in the unit disc, by 1-d quadrature.

    Uses the density of the distance between two uniform points of the unit disc,
    ``f(s) = (4 s / pi) (arccos(s/2) - (s/2) sqrt(1 - s^2/4))`` on ``[0, 2]``.
    """
    f = lambda s: (4.0 * s / math.pi) * (math.acos(s / 2.0) - (s / 2.0) * math.sqrt(1.0 - s * s / 4.0))
    val, _ = integrate.quad(lambda s: s ** (-alpha) * f(s), 0.0, 2.0, limit=200, epsabs=1e-13, epsrel=1e-12)
    return 0.5 * val


def _catastrophe_model(alpha):
    from .domain import Ball, UniformBallPrior
    from .kernels import RadialKernel, ZeroPotential, inverse_power_profile
    from .model import ModelSpec

    return ModelSpec(Ball(2, 1.0), RadialKernel(inverse_power_profile(alpha)), ZeroPotential(),
                     UniformBallPrior(2, 1.0))


def _scaled_weights(dm, eps):
    """Cell weights of the push-forward of the uniform disc under ``x -> eps x``."""
    e = dm.edges
    inner = np.clip(e, 0.0, eps)
    return np.diff(inner**2) / eps**2


@dataclasses.dataclass
class CatastrophePoint:
    eps: float
    E_lower_bound: float
    S_lower_bound: float
    E: float
    S: float
    E_scaled: float
    scaled_ratio: float


def catastrophe_family(alpha, e0=None, d=2, eps_grid=(0.5, 0.1, 0.02), resolution=384, dm=None):
    """Diagnostics of ``nu_eps = eps^(alpha/4) (T_eps)_* mu0 + (1 - eps^(alpha/4)) mu0``.

    ``T_eps(x) = eps x`` and ``mu0`` is uniform on the unit disc with
    ``W = |x - y|^(-alpha)``.  Closed-form lower bounds
    ``E >= eps^(alpha/2 - alpha) e0`` and ``S >= eps^(alpha/4) d log eps`` are
    returned with the values computed on a radial grid containing each
    ``eps`` as a shell edge.
    """
    if d != 2:
        raise ConfigError("the catastrophe family is implemented in the plane", "d")
    eps_grid = [float(x) for x in eps_grid]
    if e0 is None:
        e0 = uniform_disc_power_energy(alpha)
    if dm is None:
        dm = discretize(_catastrophe_model(alpha), resolution, r_min=1e-4 * min(eps_grid), extra_edges=eps_grid)
    mu0 = dm.prior_weights
    E0 = float(0.5 * mu0 @ dm.W @ mu0)
    out = []
    for eps in eps_grid:
        t = eps ** (alpha / 4.0)
        ws = _scaled_weights(dm, eps)
        nu = t * ws + (1.0 - t) * mu0
        nu = nu / nu.sum()
        Es = float(0.5 * ws @ dm.W @ ws)
        m = dm.measure(nu)
        out.append(CatastrophePoint(eps, eps ** (alpha / 2.0 - alpha) * e0, t * d * math.log(eps),
                                    energy(dm, m), entropy(m), Es, Es / E0))
    return out


@dataclasses.dataclass
class CoreHaloPoint:
    eps: float
    lam: float
    E: float
    S: float


def core_halo_family(alpha, target, eps_grid, resolution=384, dm=None):
    """Measures ``lam (T_eps)_* mu0 + (1 - lam) mu0`` with ``E = target``.

    For each ``eps`` the mixing weight ``lam`` solves the quadratic energy
    equation; the entropy is evaluated exactly on the grid.
    """
    eps_grid = [float(x) for x in eps_grid]
    if dm is None:
        dm = discretize(_catastrophe_model(alpha), resolution, r_min=1e-4 * min(eps_grid), extra_edges=eps_grid)
    mu0 = dm.prior_weights
    out = []
    for eps in eps_grid:
        ws = _scaled_weights(dm, eps)
        a = 0.5 * ws @ dm.W @ ws
        b = 0.5 * mu0 @ dm.W @ mu0
        c = 0.5 * ws @ dm.W @ mu0
        # E(lam) = lam^2 a + 2 lam (1 - lam) c + (1 - lam)^2 b
        fn = lambda lam: lam * lam * a + 2 * lam * (1 - lam) * c + (1 - lam) ** 2 * b - target
        if fn(0.0) * fn(1.0) > 0:
            out.append(CoreHaloPoint(eps, math.nan, math.nan, math.nan))
            continue
        lam = optimize.brentq(fn, 0.0, 1.0, xtol=1e-15)
        nu = lam * ws + (1 - lam) * mu0
        m = dm.measure(nu / nu.sum())
        out.append(CoreHaloPoint(eps, lam, energy(dm, m), entropy(m)))
    return out
