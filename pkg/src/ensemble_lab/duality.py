"""Concave analysis on sampled curves and critical inverse temperatures.

The concave Legendre transform is ``f*(y) = inf_x (x y - f(x))``; for
sampled ``f`` the infimum runs over the sample points, which is exact for
the piecewise-linear model through them.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.special import logsumexp

from .checks import check_homogeneous_assumptions, dot_w
from .curves import SampledCurve
from .errors import ConfigError, InsufficientDataError, ModelError, PreconditionError

__all__ = [
    "legendre_concave",
    "concave_envelope",
    "superdifferential",
    "equivalence_gap",
    "asymptotic_slope",
    "beta_c_analytic",
    "z_divergence_diagnostic",
    "critical_beta_crosscheck",
    "Superdifferential",
    "AsymptoticSlope",
    "EquivalenceGap",
    "CriticalBetaReport",
    "CrossCheckConfig",
]


def _finite_core(curve):
    """Finite points of ``curve`` plus the indices of dropped end sentinels.

    ``-inf`` values are allowed only in runs touching either end.
    """
    y = curve.y
    fin = np.isfinite(y)
    if np.any(np.isnan(y)):
        raise ConfigError("curve contains NaN values; drop or flag them first")
    if not fin.any():
        raise InsufficientDataError("curve has no finite points")
    idx = np.flatnonzero(fin)
    first, last = idx[0], idx[-1]
    if not fin[first : last + 1].all():
        raise ConfigError("interior -inf values are not allowed")
    if np.any(y == math.inf):
        raise ConfigError("+inf values are not allowed")
    dropped = [int(i) for i in range(len(y)) if not fin[i]]
    return curve.x[first : last + 1], y[first : last + 1], dropped


def _secant_slopes(x, y):
    return np.diff(y) / np.diff(x)


def legendre_concave(curve, dual_grid=None, padding=0.0):
    """``f*(y) = min_i (x_i y - f(x_i))`` on a dual grid.

    The default dual grid is the sorted set of secant slopes together with
    the edge slopes of the upper hull; the latter are the exact breakpoints
    of the transform of the piecewise-linear interpolant.
    ``padding`` extends it by that fraction of its span on each side.
    Points where the minimum sits at an end sample with ``y`` outside the
    slope range are flagged ``left_boundary`` / ``right_boundary``: there
    the true transform of an extended curve may be smaller.
    """
    x, f, dropped = _finite_core(curve)
    if len(x) < 3:
        raise InsufficientDataError("Legendre transform needs at least 3 finite points")
    s = _secant_slopes(x, f)
    if dual_grid is None:
        hull = _upper_hull(x, f)
        ys = np.unique(np.concatenate([s, _secant_slopes(x[hull], f[hull])]))
        if padding > 0:
            span = max(ys[-1] - ys[0], 1.0)
            ys = np.concatenate([[ys[0] - padding * span], ys, [ys[-1] + padding * span]])
    else:
        ys = np.asarray(dual_grid, dtype=float)
        if ys.ndim != 1 or np.any(np.diff(ys) <= 0):
            raise ConfigError("dual grid must be strictly increasing", "dual_grid")
    vals = np.empty(len(ys))
    arg = np.empty(len(ys), dtype=int)
    for lo in range(0, len(ys), 2048):
        block = np.outer(ys[lo : lo + 2048], x) - f[None, :]
        arg[lo : lo + 2048] = np.argmin(block, axis=1)
        vals[lo : lo + 2048] = block[np.arange(len(block)), arg[lo : lo + 2048]]
    smax, smin = np.max(s), np.min(s)
    flags = []
    for y, a in zip(ys, arg):
        if a == 0 and y > smax:
            flags.append("left_boundary")
        elif a == len(x) - 1 and y < smin:
            flags.append("right_boundary")
        else:
            flags.append("")
    meta = {"transform": "concave_legendre", "argmin_x": x[arg].tolist(), "excluded_sentinels": dropped,
            "source": curve.meta.get("source", "")}
    return SampledCurve(ys, vals, None, flags, meta)


def _upper_hull(x, y):
    hull = []
    for i in range(len(x)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b only when strictly below the chord from a to i
            cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a])
            if cross > 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def concave_envelope(curve):
    """Upper concave hull of the finite sample points, evaluated at every abscissa.

    End ``-inf`` sentinels are skipped and keep their value; their indices
    are listed in ``meta["excluded_sentinels"]``.
    """
    x, f, dropped = _finite_core(curve)
    hull = _upper_hull(x, f)
    env = np.interp(x, x[hull], f[hull])
    env[hull] = f[hull]
    out = curve.y.copy()
    first = np.flatnonzero(np.isfinite(curve.y))[0]
    out[first : first + len(x)] = env
    meta = dict(curve.meta)
    meta.update({"transform": "concave_envelope", "hull_indices": [int(first + h) for h in hull],
                 "excluded_sentinels": dropped})
    return SampledCurve(curve.x, out, None, list(curve.flags), meta)


@dataclasses.dataclass
class Superdifferential:
    slope_right: float
    slope_left: float
    one_sided: bool = False

    @property
    def interval(self):
        return (self.slope_right, self.slope_left)


def superdifferential(curve, x0):
    """``[f'(x0+), f'(x0-)]`` from secant slopes of the adjacent samples."""
    x, f, _ = _finite_core(curve)
    x0 = float(x0)
    if x0 < x[0] or x0 > x[-1]:
        raise PreconditionError(f"x0 = {x0:g} outside the finite range [{x[0]:g}, {x[-1]:g}]")
    s = _secant_slopes(x, f)
    k = int(np.searchsorted(x, x0))
    if k < len(x) and x[k] == x0:
        right = float(s[k]) if k < len(s) else math.nan
        left = float(s[k - 1]) if k > 0 else math.nan
        return Superdifferential(right, left, one_sided=(k == 0 or k == len(x) - 1))
    return Superdifferential(float(s[k - 1]), float(s[k - 1]))


@dataclasses.dataclass
class EquivalenceGap:
    gap: float
    argmax_e: float
    verdict: bool
    tol: float
    e: list
    S: list
    F_star: list
    status: list

    def to_dict(self):
        return dataclasses.asdict(self)


def equivalence_gap(S_curve, F_curve, tol_equiv=1e-3):
    """Largest ``|S(e) - F*(e)|`` over the abscissae of ``S_curve``.

    ``F*`` is evaluated exactly at each ``e``.  Per-point status:

    ``finite``
        both sides finite; contributes to the gap.
    ``both_infinite``
        ``S(e) = -inf`` and the dual infimum keeps decreasing past the
        end of the ``beta`` grid, i.e. ``e`` lies outside the range of ``F'``.
    ``mismatch``
        one side finite and the other not; the verdict fails.
    """
    e_all = S_curve.x
    Fs = legendre_concave(F_curve, dual_grid=e_all)
    status, gaps = [], []
    for s, fv, fl in zip(S_curve.y, Fs.y, Fs.flags):
        if np.isfinite(s) and not fl:
            status.append("finite")
            gaps.append(abs(s - fv))
        elif s == -math.inf and fl:
            status.append("both_infinite")
            gaps.append(-math.inf)
        elif np.isnan(s):
            status.append("unresolved")
            gaps.append(-math.inf)
        else:
            status.append("mismatch")
            gaps.append(math.inf)
    gaps = np.array(gaps)
    if not any(st == "finite" for st in status):
        raise PreconditionError("no overlap between S(e) and the range of F'(beta)")
    k = int(np.argmax(gaps))
    gap = float(gaps[k])
    verdict = bool(gap <= tol_equiv and "mismatch" not in status and "unresolved" not in status)
    return EquivalenceGap(gap, float(e_all[k]), verdict, float(tol_equiv), e_all.tolist(),
                          S_curve.y.tolist(), Fs.y.tolist(), status)


@dataclasses.dataclass
class AsymptoticSlope:
    value: float
    limit: float
    slopes: list
    midpoints: list
    monotone: bool
    stabilizing: bool
    consistent_with_minus_inf: bool
    warnings: list

    def to_dict(self):
        return dataclasses.asdict(self)


def asymptotic_slope(curve, window=5):
    """Slope of ``curve`` at its upper end.

    ``value`` is the last secant slope; ``limit`` fits ``slope = L + c / x``
    to the last ``window`` secant slopes (x at interval midpoints).  The
    slopes of a concave curve are non-increasing; violations beyond twice
    their standard error produce a warning.  A window whose slope changes
    per unit ``x`` do not shrink is reported as consistent with ``-inf``.
    """
    fin = np.isfinite(curve.y)
    x, y = curve.x[fin], curve.y[fin]
    if len(x) < window + 1:
        raise InsufficientDataError(f"need at least {window + 1} finite points, have {len(x)}")
    xs, ys = x[-(window + 1):], y[-(window + 1):]
    s = _secant_slopes(xs, ys)
    mid = 0.5 * (xs[1:] + xs[:-1])
    notes = []
    d = np.diff(s)
    if curve.stderr is not None:
        se = np.nan_to_num(curve.stderr[fin][-(window + 1):])
        sse = np.sqrt(se[1:] ** 2 + se[:-1] ** 2) / np.diff(xs)
        noise = 2.0 * np.sqrt(sse[1:] ** 2 + sse[:-1] ** 2)
    else:
        noise = 1e-10 * np.maximum(1.0, np.abs(s[1:]))
    monotone = bool(np.all(d <= noise))
    if not monotone:
        notes.append("slope sequence increases beyond noise; curve not concave at its upper end")
    if window >= 2 and np.all(mid != 0):
        A = np.column_stack([np.ones(window), 1.0 / mid])
        limit = float(np.linalg.lstsq(A, s, rcond=None)[0][0])
    else:
        limit = float(s[-1])
    rates = -d / np.diff(mid) if window >= 2 else np.array([0.0])
    stabilizing = bool(len(rates) < 2 or rates[-1] < 0.8 * rates[0] or np.all(np.abs(d) <= noise))
    minus_inf = bool(monotone and not stabilizing and np.all(rates > 0))
    if minus_inf:
        notes.append("slopes decrease without stabilizing; consistent with -inf")
    return AsymptoticSlope(float(s[-1]), limit, s.tolist(), mid.tolist(), monotone, stabilizing, minus_inf, notes)


def beta_c_analytic(w, d, grid=None):
    """``2 d / w_dot`` with ``w_dot`` the limiting log-slope of the profile at 0.

    Returns ``-inf`` when ``w_dot = 0`` (bounded-type kernels).
    """
    grid = np.geomspace(1e-8, 1.0, 81) if grid is None else grid
    rep = check_homogeneous_assumptions(w, grid)
    if not rep.passed:
        raise PreconditionError(f"homogeneous assumptions fail for {getattr(w, 'label', w)}: "
                                f"{[e.name for e in rep.failures()]}")
    wd = dot_w(w)
    if wd > 0:
        raise ModelError("profile increases near r = 0 (w_dot > 0)")
    if wd == 0:
        return -math.inf
    if wd == -math.inf:
        return -0.0
    return 2.0 * d / wd


def z_divergence_diagnostic(model, beta, sizes=(10**4, 10**5, 10**6), seed=0, N=2, kappa=0.1, r_max=None):
    """Nested-size importance-sampling estimates of ``Z_{N,beta} = E[exp(-beta H)]``.

    The proposal is an even mixture of the prior and a collision proposal
    that places one particle of a random pair at distance ``r`` from the
    other with ``P(r <= rho) = (rho / r_max)^kappa``.  The collided pair's
    distance is used exactly, so arbitrarily close encounters keep full
    precision.  ``unbounded`` means the estimate grew by more than a factor
    10 across the sizes while its standard error did not shrink.
    """
    if not model.W.is_radial:
        raise PreconditionError("the collision proposal needs a radial kernel")
    sizes = sorted(int(n) for n in sizes)
    n = sizes[-1]
    prior = model.prior
    dim = model.d
    if r_max is None:
        r_max = model.domain.R if math.isfinite(model.domain.R) else getattr(prior, "sigma", 1.0)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(23,)))
    X = prior.sample(rng, (n, N))
    pairs = [(i, j) for i in range(N) for j in range(i + 1, N)]
    P = len(pairs)
    coll = rng.random(n) < 0.5
    pk = rng.integers(P, size=n)
    base_first = rng.random(n) < 0.5
    logr = math.log(r_max) + np.log(rng.random(n)) / kappa
    u = rng.standard_normal((n, dim))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    pi = np.array([p[0] for p in pairs])[pk]
    pj = np.array([p[1] for p in pairs])[pk]
    b = np.where(base_first, pi, pj)
    o = np.where(base_first, pj, pi)
    ar = np.arange(n)
    moved = X[ar, b] + np.exp(logr)[:, None] * u
    X[ar, o] = np.where(coll[:, None], moved, X[ar, o])

    logd = np.empty((n, P))
    for k, (i, j) in enumerate(pairs):
        with np.errstate(divide="ignore"):
            logd[:, k] = np.log(np.linalg.norm(X[:, i] - X[:, j], axis=1))
    logd[ar[coll], pk[coll]] = logr[coll]
    prof = model.W.profile
    pair_vals = prof(np.exp(logd))
    if prof.family == "log":
        pair_vals = -prof.params["scale"] * logd
    H = pair_vals.sum(axis=1) / N
    if not model.V.is_zero:
        H = H + model.V(X).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lp_each = -prior.log_density_neg(X)
    lp = lp_each.sum(axis=1)
    log_rmax = math.log(r_max)
    sa = math.log(2 * math.pi) if dim == 2 else math.log(2 * math.pi ** (dim / 2) / math.gamma(dim / 2))
    lg = np.where(logd <= log_rmax, math.log(kappa) + (kappa - dim) * logd - kappa * log_rmax - sa, -np.inf)
    comp = []
    for k, (i, j) in enumerate(pairs):
        a = lp - lp_each[:, j] + lg[:, k]
        c = lp - lp_each[:, i] + lg[:, k]
        comp.append(np.logaddexp(a, c) - math.log(2))
    lq_coll = logsumexp(np.stack(comp, axis=1), axis=1) - math.log(P)
    lq = np.logaddexp(math.log(0.5) + lp, math.log(0.5) + lq_coll)
    with np.errstate(invalid="ignore"):
        lw = np.where(np.isfinite(lp), -beta * H + lp - lq, -np.inf)
    est, se = [], []
    for m in sizes:
        part = lw[:m]
        lmean = logsumexp(part) - math.log(m)
        lsq = logsumexp(2 * part) - math.log(m)
        var_rel = max(math.exp(min(lsq - 2 * lmean, 700.0)) - 1.0, 0.0)
        est.append(float(lmean))
        se.append(float(lmean + 0.5 * math.log(var_rel / m)) if var_rel > 0 else -math.inf)
    growth = est[-1] - est[0]
    unbounded = bool(growth > math.log(10.0) and se[-1] >= se[0])
    return {
        "beta": float(beta),
        "N": N,
        "sizes": sizes,
        "log10_estimate": [v / math.log(10) for v in est],
        "log10_stderr": [v / math.log(10) for v in se],
        "log10_growth": growth / math.log(10),
        "unbounded": unbounded,
    }


@dataclasses.dataclass
class CrossCheckConfig:
    seed: int = 0
    resolution: int = 512
    truncations: tuple = (4.0, 6.0, 8.0)
    beta_stop_fraction: float = 0.9875
    beta_floor: float = -60.0
    n_betas: int = 40
    micro_N: int = 8
    micro_M: int = 200_000
    micro_span: float = 1.2
    micro_points: int = 20
    window: int = 5
    rel_tol: float = 0.1
    z_offset: float = 0.1
    z_sizes: tuple = (10**4, 10**5, 10**6)
    dos: bool = True


@dataclasses.dataclass
class CriticalBetaReport:
    beta_analytic: float
    beta_macro: dict
    beta_micro: dict
    agreement: dict
    z_diagnostics: list
    errors: dict
    notes: list

    def to_dict(self):
        return dataclasses.asdict(self)


def _macro_pipeline(model, beta_a, cfg):
    from .macroscopic import discretize, entropy_curve_from_sweep, free_energy_curve

    stop = beta_a * cfg.beta_stop_fraction if math.isfinite(beta_a) else cfg.beta_floor
    betas = np.concatenate([np.linspace(stop, 0.0, cfg.n_betas, endpoint=False), [0.0]])
    scale = getattr(model.prior, "sigma", 1.0)
    out = {"per_truncation": []}
    truncs = cfg.truncations if not math.isfinite(model.domain.R) else (None,)
    for t in truncs:
        dm = discretize(model, cfg.resolution, R_trunc=None if t is None else t * scale)
        fc, _ = free_energy_curve(dm, betas)
        sc = entropy_curve_from_sweep(fc)
        sl = asymptotic_slope(sc, cfg.window)
        out["per_truncation"].append({"truncation": t, "slope": sl.value, "limit": sl.limit,
                                      "consistent_with_minus_inf": sl.consistent_with_minus_inf,
                                      "e_max_sampled": float(sc.x[-1]),
                                      "nonconverged": sum(1 for f in fc.flags if f)})
    vals = [p["slope"] for p in out["per_truncation"]]
    out["value"] = vals[-1]
    out["consistent_with_minus_inf"] = all(p["consistent_with_minus_inf"] for p in out["per_truncation"])
    return out


def _micro_pipeline(model, cfg):
    from .microcanonical import hamiltonian_batch, tail_curve
    from .wanglandau import WLParams

    N = cfg.micro_N
    m = model.with_N(N)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(31,)))
    h = hamiltonian_batch(m, m.prior.sample(rng, (20000, N))) / N
    lo = float(np.quantile(h, 0.5))
    grid = np.linspace(lo, lo + cfg.micro_span, cfg.micro_points)
    curve = tail_curve(m, grid, cfg.micro_M, cfg.seed, dos_params=WLParams() if cfg.dos else None)
    sl = asymptotic_slope(curve, cfg.window)
    return {"N": N, "value": sl.value, "limit": sl.limit, "slopes": sl.slopes,
            "consistent_with_minus_inf": sl.consistent_with_minus_inf, "e_grid": grid.tolist(),
            "values": curve.y.tolist(), "stderr": curve.stderr.tolist()}


def critical_beta_crosscheck(model, config=None, workers=None):
    """Analytic, macroscopic and finite-N critical inverse temperatures side by side.

    The macro and micro pipelines (and the ``Z_{N,beta}`` diagnostics when
    ``beta_c`` is finite) run concurrently.  A failing pipeline leaves its
    entry empty and records the error.
    """
    cfg = config or CrossCheckConfig()
    if not model.W.is_radial:
        raise PreconditionError("critical-beta cross-check needs a radial kernel")
    errors, notes = {}, []
    beta_a = beta_c_analytic(model.W.profile, model.d)
    jobs = {"macro": lambda: _macro_pipeline(model, beta_a, cfg),
            "micro": lambda: _micro_pipeline(model, cfg)}
    if math.isfinite(beta_a) and beta_a < 0:
        for sgn in (-1.0, 1.0):
            b = beta_a * (1.0 + sgn * cfg.z_offset)
            jobs[f"z{sgn:+.0f}"] = (lambda b=b: z_divergence_diagnostic(model, b, cfg.z_sizes, cfg.seed))
    results = {}
    with ThreadPoolExecutor(max_workers=max(1, min(len(jobs), workers or len(jobs)))) as pool:
        futs = {k: pool.submit(fn) for k, fn in jobs.items()}
        for k, fut in futs.items():
            try:
                results[k] = fut.result()
            except Exception as exc:  # noqa: BLE001 - partial report by design
                errors[k] = f"{type(exc).__name__}: {exc}"
    macro = results.get("macro", {})
    micro = results.get("micro", {})
    agreement = {}
    if math.isfinite(beta_a):
        for name, res in (("macro", macro), ("micro", micro)):
            if "value" in res:
                agreement[name] = bool(abs(res["value"] - beta_a) <= cfg.rel_tol * abs(beta_a))
    else:
        for name, res in (("macro", macro), ("micro", micro)):
            if res:
                agreement[name] = bool(res.get("consistent_with_minus_inf"))
        notes.append("beta_c = -inf: slope estimates are checked for decrease without stabilization")
    notes.append("sign convention beta_c = 2d / w_dot (negative for repulsive kernels)")
    z = [results[k] for k in sorted(results) if k.startswith("z")]
    return CriticalBetaReport(beta_a, macro, micro, agreement, z, errors, notes)

