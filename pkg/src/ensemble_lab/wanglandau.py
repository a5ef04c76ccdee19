"""Wang-Landau density of states for ``H/N`` under the prior product measure.

Several walkers share one log-DOS table.  Proposals:

* single-particle Gaussian steps whose scale is drawn log-uniformly over
  ``step_decades`` decades below an adaptive maximum, and
* collective dilations about the centroid, ``x -> c + e^eta (x - c)``,
  whose Jacobian ``e^{d (N-1) eta}`` enters the acceptance ratio.

Moves leaving a ball domain are rejected.  Proposal scales adapt towards
30-50% acceptance during burn-in and are frozen afterwards.  The
modification factor is halved whenever the histogram over the bins
visited so far is flat; bins never visited get zero weight.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy.special import logsumexp

from . import parallel
from .errors import ConvergenceError

__all__ = ["WLParams", "DosEstimate", "run_wang_landau"]


@dataclasses.dataclass
class WLParams:
    walkers: int = 32
    replicas: int = 4
    lnf_initial: float = 1.0
    lnf_final: float = 1e-4
    flatness: float = 0.7
    check_every: int = 500
    burn_in: int = 2000
    max_steps: int = 400_000
    p_dilation: float = 0.25
    step_decades: float = 4.0
    step_max: float = 1.0
    eta_max: float = 0.3
    acceptance: tuple = (0.3, 0.5)

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclasses.dataclass
class DosEstimate:
    """Per-bin log-probabilities on ``(-inf, e0), [e0, e1), ..., [e_B, inf)``.

    ``log_g[r]`` holds replica ``r``, normalized so that each replica sums
    to one; ``edges`` are the uniform interior edges.
    """

    edges: np.ndarray
    log_g: np.ndarray
    N: int
    seed: int
    direction: str = "upper"
    flatness_history: list = dataclasses.field(default_factory=list)
    lnf_schedule: list = dataclasses.field(default_factory=list)
    steps: list = dataclasses.field(default_factory=list)
    step_scale: list = dataclasses.field(default_factory=list)
    eta_scale: list = dataclasses.field(default_factory=list)
    acceptance: list = dataclasses.field(default_factory=list)

    @property
    def replicas(self):
        return self.log_g.shape[0]

    @property
    def bin_width(self):
        return float(self.edges[1] - self.edges[0])

    def log_tail_edges(self, r):
        """``log P(H/N >= edges[k])`` for replica ``r``."""
        lg = self.log_g[r]
        rev = np.logaddexp.accumulate(lg[::-1])[::-1]
        return rev[1:]

    def log_tail_at(self, e, r):
        """Log upper tail at arbitrary energies, linear in ``e`` between edges."""
        lt = self.log_tail_edges(r)
        e = np.asarray(e, dtype=float)
        return np.interp(e, self.edges, lt, left=np.nan, right=np.nan)

    def summary(self):
        return {
            "bins": len(self.edges) - 1,
            "window": [float(self.edges[0]), float(self.edges[-1])],
            "replicas": self.replicas,
            "steps_per_walker": self.steps,
            "step_scale": self.step_scale,
            "eta_scale": self.eta_scale,
            "acceptance": self.acceptance,
        }


def _bin_index(h, lo, width, nb):
    idx = np.floor((h - lo) / width).astype(np.int64) + 1
    idx = np.where(h < lo, 0, idx)
    idx = np.where(np.isnan(h), nb + 1, idx)
    return np.clip(idx, 0, nb + 1)


def _single_replica(model, N, lo, hi, nb, params, seed):
    from .microcanonical import hamiltonian_batch

    rng = parallel.chunk_rng(seed, 0, stream=7)
    prior = model.prior
    d = model.d
    B = params.walkers
    width = (hi - lo) / nb
    nbins = nb + 2
    bounded = math.isfinite(model.domain.R)
    R2 = model.domain.R ** 2 if bounded else math.inf

    X = prior.sample(rng, (B, N))
    psi = prior.log_density_neg(X)
    h = hamiltonian_batch(model, X) / N
    b = _bin_index(h, lo, width, nb)

    lng = np.zeros(nbins)
    hist = np.zeros(nbins)
    seen = np.zeros(nbins, dtype=bool)
    lnf = params.lnf_initial
    smax = params.step_max * (model.domain.R if bounded else getattr(prior, "sigma", 1.0))
    eta = params.eta_max
    use_dil = N > 1 and params.p_dilation > 0
    acc_s = tried_s = acc_d = tried_d = 0
    history, schedule = [], []
    ar = np.arange(B)
    step = 0
    lo_acc, hi_acc = params.acceptance

    while lnf >= params.lnf_final:
        if step >= params.max_steps:
            raise ConvergenceError(
                "Wang-Landau flatness not reached within the step budget",
                {"histogram": hist.tolist(), "lnf": lnf, "log_g": lng.tolist(), "edges": [lo, hi, nb]},
            )
        dil = use_dil and rng.random() < params.p_dilation
        if dil:
            ev = rng.uniform(-eta, eta, size=B)
            c = X.mean(axis=1, keepdims=True)
            Xn = c + np.exp(ev)[:, None, None] * (X - c)
            psin = prior.log_density_neg(Xn)
            logr = np.sum(psi - psin, axis=1) + d * (N - 1) * ev
        else:
            i = rng.integers(N, size=B)
            s = smax * 10.0 ** (-params.step_decades * rng.random(B))
            Xn = X.copy()
            Xn[ar, i] += s[:, None] * rng.standard_normal((B, d))
            psin = psi.copy()
            psin[ar, i] = prior.log_density_neg(Xn[ar, i])
            logr = psi[ar, i] - psin[ar, i]
        if bounded:
            inside = np.all(np.sum(Xn * Xn, axis=-1) <= R2, axis=-1)
            logr = np.where(inside, logr, -np.inf)
        with np.errstate(invalid="ignore"):
            logr = np.where(np.isnan(logr), -np.inf, logr)
        hn = hamiltonian_batch(model, Xn) / N
        bn = _bin_index(hn, lo, width, nb)
        logr = logr + lng[b] - lng[bn]
        accept = np.log(rng.random(B)) < logr
        X = np.where(accept[:, None, None], Xn, X)
        psi = np.where(accept[:, None], psin, psi)
        h = np.where(accept, hn, h)
        b = np.where(accept, bn, b)
        np.add.at(lng, b, lnf)
        np.add.at(hist, b, 1.0)
        seen[b] = True
        step += 1

        if dil:
            acc_d += int(accept.sum())
            tried_d += B
        else:
            acc_s += int(accept.sum())
            tried_s += B
        if step <= params.burn_in and step % 50 == 0:
            if tried_s:
                rate = acc_s / tried_s
                smax *= 1.15 if rate > hi_acc else (1 / 1.15 if rate < lo_acc else 1.0)
            if tried_d:
                rate = acc_d / tried_d
                eta *= 1.15 if rate > hi_acc else (1 / 1.15 if rate < lo_acc else 1.0)
            acc_s = tried_s = acc_d = tried_d = 0
            if step == params.burn_in:
                hist[:] = 0.0
        if step > params.burn_in and step % params.check_every == 0:
            # bins outside the support of H (e.g. an overflow bin past its maximum) are never visited
            ratio = hist[seen].min() / hist[seen].mean()
            history.append((step, float(ratio)))
            if ratio > params.flatness:
                schedule.append((step, lnf))
                lnf *= 0.5
                hist[:] = 0.0

    lng = np.where(seen, lng, -np.inf)
    lng = lng - logsumexp(lng)
    rate_s = acc_s / tried_s if tried_s else math.nan
    return lng, history, schedule, step, smax, eta, rate_s


def run_wang_landau(model, N, lo, hi, bins, params, seed, workers=None):
    params = params or WLParams()
    seeds = [int(np.random.SeedSequence(int(seed), spawn_key=(11, r)).generate_state(1)[0])
             for r in range(params.replicas)]
    out = parallel.map_ordered(lambda s: _single_replica(model, N, lo, hi, int(bins), params, s), seeds, workers)
    edges = np.linspace(lo, hi, int(bins) + 1)
    return DosEstimate(
        edges=edges,
        log_g=np.array([o[0] for o in out]),
        N=N,
        seed=seed,
        flatness_history=[o[1] for o in out],
        lnf_schedule=[o[2] for o in out],
        steps=[o[3] for o in out],
        step_scale=[float(o[4]) for o in out],
        eta_scale=[float(o[5]) for o in out],
        acceptance=[float(o[6]) for o in out],
    )
