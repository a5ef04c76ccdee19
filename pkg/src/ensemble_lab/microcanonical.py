"""Finite-N Hamiltonian, prior sampling and microcanonical tail estimates.

``S_+^(N)(e) = (1/N) log mu0^{(x)N}{H/N > e}`` and ``S_-^(N)`` uses ``<``.
Lower tails are computed as upper tails of the negated model, so the
two directions agree exactly by construction.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from . import parallel
from .curves import TailCurve, concavity_check
from .errors import ConfigError, PreconditionError
from .wanglandau import DosEstimate, WLParams, run_wang_landau

__all__ = [
    "hamiltonian",
    "hamiltonian_batch",
    "sample_prior_configs",
    "tail_logprob_direct",
    "tail_logprob_dos",
    "tail_from_dos",
    "tail_curve",
    "exact_sublevel_volume_powerlaw",
    "sublevel_constant",
    "concavity_check",
]


def _require_N(model, N=None):
    N = N if N is not None else model.N
    if N is None or N < 1:
        raise ConfigError("particle count N is required", "N")
    return int(N)


def hamiltonian_batch(model, X):
    """Mean-field energies of configurations ``X`` with shape ``(..., N, d)``.

    Pair and potential terms are summed in sorted order, which makes the
    result exactly invariant under permutations of the particles.
    """
    X = np.asarray(X, dtype=float)
    N = X.shape[-2]
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        if N > 1:
            iu, ju = np.triu_indices(N, 1)
            pv = np.asarray(model.W(X[..., iu, :], X[..., ju, :]), dtype=float)
            pair = np.sum(np.sort(pv, axis=-1), axis=-1) / N
        else:
            pair = np.zeros(X.shape[:-2])
        if model.V.is_zero:
            pot = 0.0
        else:
            pot = np.sum(np.sort(np.asarray(model.V(X), dtype=float), axis=-1), axis=-1)
        return pair + pot


def hamiltonian(model, config):
    """``(1/N) sum_{i<j} W(x_i, x_j) + sum_i V(x_i)`` for one configuration."""
    X = np.asarray(config, dtype=float)
    if X.ndim != 2 or len(X) < 1:
        raise ConfigError("configuration must have shape (N, d) with N >= 1")
    return float(hamiltonian_batch(model, X[None])[0])


def sample_prior_configs(model, M, seed, N=None, chunk=parallel.CHUNK):
    """Yield i.i.d. configurations from ``mu0^{(x)N}`` in chunks of shape ``(m, N, d)``."""
    N = _require_N(model, N)
    for k, m in enumerate(parallel.chunk_sizes(M, chunk)):
        rng = parallel.chunk_rng(seed, k)
        yield model.prior.sample(rng, (m, N))


def _chunk_counts(model, N, e_grid, seed, k, m):
    rng = parallel.chunk_rng(seed, k)
    X = model.prior.sample(rng, (m, N))
    h = hamiltonian_batch(model, X) / N
    nan = int(np.isnan(h).sum())
    h = np.sort(h[~np.isnan(h)])
    return len(h) - np.searchsorted(h, e_grid, side="right"), nan


def tail_logprob_direct(model, e_grid, M, seed, direction="upper", N=None, workers=None, min_hits=25):
    """Direct Monte Carlo estimate of the microcanonical tail curve.

    Points with no hits get value NaN and flag ``needs_dos``; points with
    fewer than ``min_hits`` hits are flagged ``low_hits``.
    """
    N = _require_N(model, N)
    e_grid = np.asarray(e_grid, dtype=float)
    if e_grid.ndim != 1 or np.any(np.diff(e_grid) <= 0):
        raise ConfigError("e_grid must be strictly increasing", "e_grid")
    if M < 1000:
        raise PreconditionError("M must be at least 1000")
    if direction == "lower":
        up = tail_logprob_direct(model.negated(), -e_grid[::-1], M, seed, "upper", N, workers, min_hits)
        return TailCurve(e_grid, up.y[::-1], up.stderr[::-1], up.flags[::-1],
                         {**up.meta, "hits": up.meta["hits"][::-1]}, "lower", N, M, seed)
    if direction != "upper":
        raise ConfigError("direction must be 'upper' or 'lower'", "direction")

    sizes = parallel.chunk_sizes(M)
    parts = parallel.map_ordered(lambda km: _chunk_counts(model, N, e_grid, seed, *km),
                                 list(enumerate(sizes)), workers)
    hits = np.sum([p[0] for p in parts], axis=0)
    nan = sum(p[1] for p in parts)
    p = hits / M
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.where(hits > 0, np.log(p) / N, np.nan)
        se = np.where(hits > 0, np.sqrt((1.0 - p) / np.maximum(hits, 1)) / N, np.nan)
    flags = ["needs_dos" if k == 0 else ("low_hits" if k < min_hits else "") for k in hits]
    meta = {"estimator": "direct", "hits": hits.tolist(), "nan_energies": nan}
    return TailCurve(e_grid, val, se, flags, meta, "upper", N, M, seed)


def tail_logprob_dos(model, e_range, bins, wl_params=None, seed=0, direction="upper", N=None, workers=None):
    """Wang-Landau density of states of ``H/N`` on ``e_range`` (plus two overflow bins)."""
    N = _require_N(model, N)
    lo, hi = map(float, e_range)
    if not hi > lo:
        raise ConfigError("e_range must be increasing", "e_range")
    params = wl_params or WLParams()
    if direction == "lower":
        dos = run_wang_landau(model.negated(), N, -hi, -lo, bins, params, seed, workers)
        dos.direction = "lower"
        return dos
    if direction != "upper":
        raise ConfigError("direction must be 'upper' or 'lower'", "direction")
    return run_wang_landau(model, N, lo, hi, bins, params, seed, workers)


def tail_from_dos(dos: DosEstimate, e_grid, anchor=None, min_anchor_hits=100):
    """Tail curve from a DOS estimate, anchored to a direct curve on the overlap.

    Without an anchor the overflow-bin normalization is used as is.  The
    reported standard error is the spread over independent replicas.
    """
    e_grid = np.asarray(e_grid, dtype=float)
    N = dos.N
    if dos.direction == "lower":
        e_eval = -e_grid[::-1]
        anc = None
        if anchor is not None:
            anc = TailCurve(-anchor.x[::-1], anchor.y[::-1], anchor.stderr[::-1], anchor.flags[::-1],
                            {"hits": anchor.meta.get("hits", [0] * len(anchor))[::-1]}, "upper", N)
        up = _tail_from_dos_upper(dos, e_eval, anc, min_anchor_hits)
        return TailCurve(e_grid, up.y[::-1], up.stderr[::-1], up.flags[::-1], up.meta, "lower", N,
                         up.M, up.seed)
    return _tail_from_dos_upper(dos, e_grid, anchor, min_anchor_hits)


def _tail_from_dos_upper(dos, e_grid, anchor, min_anchor_hits):
    N = dos.N
    lo, hi = dos.edges[0], dos.edges[-1]
    logtails = np.array([dos.log_tail_at(e_grid, r) for r in range(dos.replicas)])
    shifts = np.zeros(dos.replicas)
    overlap = None
    if anchor is not None:
        hits = np.asarray(anchor.meta.get("hits", np.zeros(len(anchor))))
        ok = np.isfinite(anchor.y) & (hits >= min_anchor_hits) & (anchor.x >= lo) & (anchor.x <= hi)
        if ok.sum() < 3:
            raise PreconditionError("DOS window must overlap the direct-MC region in at least 3 points")
        overlap = anchor.x[ok]
        w = 1.0 / np.maximum(anchor.stderr[ok], 1e-300) ** 2
        for r in range(dos.replicas):
            lt = dos.log_tail_at(overlap, r)
            shifts[r] = np.sum(w * (N * anchor.y[ok] - lt)) / np.sum(w)
    vals = (logtails + shifts[:, None]) / N
    inside = (e_grid >= lo) & (e_grid <= hi)
    mean = vals.mean(axis=0)
    R = dos.replicas
    se = vals.std(axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.full(len(e_grid), np.nan)
    mean = np.where(inside, mean, np.nan)
    se = np.where(inside, se, np.nan)
    flags = ["dos" if k else "outside_dos_window" for k in inside]
    meta = {"estimator": "dos", "anchor_shift": shifts.tolist(),
            "overlap": None if overlap is None else overlap.tolist(), "replicas": R}
    return TailCurve(e_grid, mean, se, flags, meta, "upper", N, 0, dos.seed)


def tail_curve(model, e_grid, M, seed, direction="upper", N=None, dos_params=None, bins_per_interval=2,
               workers=None, dos_window=None):
    """Direct estimate on ``e_grid`` completed by an anchored DOS estimate.

    Grid points inside the DOS window take the DOS value (which is monotone
    by construction); points outside keep the direct value.
    """
    N = _require_N(model, N)
    e_grid = np.asarray(e_grid, dtype=float)
    direct = tail_logprob_direct(model, e_grid, M, seed, direction, N, workers)
    if dos_params is None:
        return direct
    lo, hi = dos_window if dos_window is not None else (e_grid[0], e_grid[-1])
    # bin edges land on grid points when the grid is uniform
    bins = bins_per_interval * max(1, int(round((hi - lo) / np.min(np.diff(e_grid)))))
    dos = tail_logprob_dos(model, (lo, hi), bins, dos_params, seed + 1, direction, N, workers)
    dcurve = tail_from_dos(dos, e_grid, direct)
    use = np.isfinite(dcurve.y)
    y = np.where(use, dcurve.y, direct.y)
    se = np.where(use, dcurve.stderr, direct.stderr)
    flags = [f if u else g for f, g, u in zip(dcurve.flags, direct.flags, use)]
    meta = {"estimator": "direct+dos", "direct": direct.meta, "dos": dcurve.meta,
            "direct_values": direct.y.tolist(), "direct_stderr": direct.stderr.tolist(),
            "dos_summary": dos.summary()}
    return TailCurve(e_grid, y, se, flags, meta, direction, N, M, seed)


def sublevel_constant(alpha, n, N):
    """Volume of ``{sum_i |z_i|^alpha <= 1}`` in ``(C^n)^N = R^{2nN}``.

    Closed form from the Dirichlet integral:
    ``(m omega_m Gamma(m/alpha) / alpha)^N / Gamma(m N / alpha + 1)`` with
    ``m = 2n`` and ``omega_m`` the unit-ball volume in ``R^m``.
    """
    m = 2 * n
    log_omega = 0.5 * m * math.log(math.pi) - special.gammaln(0.5 * m + 1.0)
    per = math.log(m) + log_omega + special.gammaln(m / alpha) - math.log(alpha)
    return math.exp(N * per - special.gammaln(m * N / alpha + 1.0))


def _sublevel_constant_mc(alpha, n, N, samples, seed):
    # uniform points in the cube [-1, 1]^{2nN}; the set sits inside the unit
    # cube only when it lies in the product of unit balls, which it does
    m = 2 * n
    rng = np.random.default_rng(seed)
    hits = 0
    total = 0
    for k in parallel.chunk_sizes(samples, 1 << 18):
        z = rng.uniform(-1.0, 1.0, size=(k, N, m))
        s = np.sum(np.sum(z * z, axis=-1) ** (alpha / 2.0), axis=-1)
        hits += int(np.sum(s <= 1.0))
        total += k
    p = hits / total
    vol = 2.0 ** (m * N)
    return vol * p, vol * math.sqrt(p * (1 - p) / total)


def exact_sublevel_volume_powerlaw(alpha, n, N, e, R=None, method="closed", samples=4_000_000, seed=0):
    """Lebesgue volume of ``{sum_i |z_i|^alpha <= e}`` in ``R^{2nN}``: ``K e^{2nN/alpha}``.

    ``K`` comes from the closed-form Dirichlet integral (``method="closed"``)
    or from Monte Carlo (``method="mc"``, returns ``(value, stderr)``).
    ``R`` is the radius of the ambient ball; the sublevel set must fit
    inside it.
    """
    if not alpha > 0:
        raise PreconditionError("alpha must be positive")
    if e < 0:
        raise PreconditionError("e must be non-negative")
    if R is not None and e ** (1.0 / alpha) > R * (1 + 1e-12):
        raise PreconditionError("sublevel set exits the ball")
    scale = e ** (2.0 * n * N / alpha)
    if method == "closed":
        return sublevel_constant(alpha, n, N) * scale
    if method == "mc":
        k, se = _sublevel_constant_mc(alpha, n, N, samples, seed)
        return k * scale, se * scale
    raise ConfigError(f"unknown method {method!r}", "method")
