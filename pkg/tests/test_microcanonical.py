import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ensemble_lab import ConfigError, InsufficientDataError, PreconditionError
from ensemble_lab.curves import SampledCurve, TailCurve, concavity_check, curve_from_csv, curve_to_csv
from ensemble_lab.domain import Ball, FullSpace, GaussianPrior, UniformBallPrior
from ensemble_lab.kernels import (
    RadialKernel,
    RadialPotential,
    ZeroPotential,
    log_profile,
    monomial_profile,
    zero_profile,
)
from ensemble_lab.microcanonical import (
    exact_sublevel_volume_powerlaw,
    hamiltonian,
    hamiltonian_batch,
    sample_prior_configs,
    sublevel_constant,
    tail_curve,
    tail_from_dos,
    tail_logprob_direct,
    tail_logprob_dos,
)
from ensemble_lab.model import ModelSpec
from ensemble_lab.wanglandau import WLParams

# P(|x - y| < 1) for independent standard Gaussians in the plane, from 1-d
# quadrature of the radial density of x - y ~ N(0, 2I)
VORTEX_N2_P0 = 0.22119921692859515
# brute-force volume of {|z1| + |z2| <= 1} in R^4 from 10^7 cube samples (value, stderr)
K_ALPHA1_N2_MC = (1.6453568, 0.0015368314741927222)
# P(|x|^2 <= e) for a standard Gaussian in the plane, 1-d radial quadrature
CHI2_LOWER = {0.25: 0.11750309741540461, 0.5: 0.22119921692859518, 1.0: 0.3934693402873666,
              1.5: 0.5276334472589852, 2.0: 0.6321205588285577, 3.0: 0.7768698398515702}


def vortex(N=None, prior="gaussian"):
    if prior == "gaussian":
        return ModelSpec(FullSpace(2), RadialKernel(log_profile()), ZeroPotential(), GaussianPrior(2, 1.0), N=N)
    return ModelSpec(Ball(2, 1.0), RadialKernel(log_profile()), ZeroPotential(), UniformBallPrior(2, 1.0), N=N)


def confining(alpha=2.0, N=1, prior="uniform"):
    if prior == "uniform":
        dom, pr = Ball(2, 1.0), UniformBallPrior(2, 1.0)
    else:
        dom, pr = FullSpace(2), GaussianPrior(2, 1.0)
    return ModelSpec(dom, RadialKernel(zero_profile()), RadialPotential(monomial_profile(alpha)), pr, N=N)


# Hamiltonian


def test_hamiltonian_examples():
    assert hamiltonian(vortex(), [[0, 0], [1, 0]]) == 0.0
    assert hamiltonian(vortex(), [[0, 0], [math.e, 0]]) == pytest.approx(-0.5, abs=1e-15)
    assert hamiltonian(confining(N=3), [[1, 0], [0, 1], [0, 0]]) == 2.0


def test_collision_gives_plus_infinity():
    assert hamiltonian(vortex(), [[0.3, 0.1], [0.3, 0.1]]) == math.inf


def test_permutation_invariance_is_exact():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((7, 2))
    model = ModelSpec(FullSpace(2), RadialKernel(log_profile()), RadialPotential(monomial_profile(2.0)),
                      GaussianPrior(2, 1.0))
    h = hamiltonian(model, X)
    for _ in range(100):
        assert hamiltonian(model, X[rng.permutation(7)]) == h


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 9))
def test_without_pair_terms_energy_per_particle_is_mean_potential(seed, N):
    X = np.random.default_rng(seed).standard_normal((N, 2))
    model = confining(prior="gaussian")
    v = np.sort(model.V(X))
    assert hamiltonian(model, X) / N == v.sum() / N


# sampling


def test_gaussian_sampler_mean():
    X = next(sample_prior_configs(confining(prior="gaussian"), 100_000, seed=4, N=1, chunk=100_000))
    assert np.all(np.abs(X.reshape(-1, 2).mean(axis=0)) <= 4.0 / math.sqrt(1e5))


def test_uniform_disc_mean_radius():
    X = np.concatenate(list(sample_prior_configs(confining(), 100_000, seed=5, N=1))).reshape(-1, 2)
    r = np.linalg.norm(X, axis=1)
    se = math.sqrt((0.5 - (2 / 3) ** 2) / len(r))
    assert abs(r.mean() - 2 / 3) <= 4 * se
    assert r.max() <= 1.0


def test_sampling_is_deterministic():
    a = next(sample_prior_configs(vortex(), 10, seed=9, N=4))
    b = next(sample_prior_configs(vortex(), 10, seed=9, N=4))
    assert np.array_equal(a[0], b[0])


# direct tails


def test_trivial_hamiltonian_upper_tail():
    model = ModelSpec(FullSpace(2), RadialKernel(zero_profile()), ZeroPotential(), GaussianPrior(2, 1.0), N=3)
    c = tail_logprob_direct(model, [-0.5, -0.1, 0.1, 0.5], 5000, seed=1)
    assert np.all(c.y[:2] == 0.0)
    assert np.all(np.isnan(c.y[2:])) and c.flags[2:] == ["needs_dos", "needs_dos"]


def test_lower_tail_of_square_radius_is_log_e():
    e = np.array([0.25, 0.5, 1.0])
    c = tail_logprob_direct(confining(), e, 200_000, seed=2, direction="lower")
    assert np.all(np.abs(c.y - np.log(e)) <= 3 * c.stderr + 1e-15)
    assert c.y[-1] == 0.0


def test_two_vortices_at_zero_energy_match_quadrature():
    c = tail_logprob_direct(vortex(N=2), [-0.2, 0.0, 0.2], 400_000, seed=3)
    assert abs(c.y[1] - 0.5 * math.log(VORTEX_N2_P0)) <= 3 * c.stderr[1]


def test_lower_tail_is_upper_tail_of_negated_model():
    model = vortex(N=4)
    e = np.linspace(-0.6, 0.4, 9)
    low = tail_logprob_direct(model, e, 50_000, seed=11, direction="lower")
    up = tail_logprob_direct(model.negated(), -e[::-1], 50_000, seed=11)
    assert np.array_equal(low.y, up.y[::-1], equal_nan=True)
    assert np.array_equal(low.stderr, up.stderr[::-1], equal_nan=True)


def test_single_particle_upper_and_lower_tails_sum_to_one():
    e = np.linspace(0.1, 0.9, 9)
    model = confining()
    up = tail_logprob_direct(model, e, 100_000, seed=6)
    low = tail_logprob_direct(model, e, 100_000, seed=6, direction="lower")
    total = np.exp(up.y) + np.exp(low.y)
    pooled = np.sqrt((np.exp(up.y) * up.stderr) ** 2 + (np.exp(low.y) * low.stderr) ** 2)
    assert np.all(np.abs(total - 1.0) <= 3 * pooled + 1e-12)


def test_direct_curves_are_monotone():
    c = tail_logprob_direct(vortex(N=4), np.linspace(-0.3, 0.8, 12), 50_000, seed=8)
    assert c.is_monotone()
    low = tail_logprob_direct(vortex(N=4), np.linspace(-0.3, 0.8, 12), 50_000, seed=8, direction="lower")
    assert low.is_monotone()


def test_result_is_independent_of_worker_count():
    e = np.linspace(-0.2, 0.5, 8)
    a = tail_logprob_direct(vortex(N=3), e, 300_000, seed=12, workers=1)
    b = tail_logprob_direct(vortex(N=3), e, 300_000, seed=12, workers=3)
    assert np.array_equal(a.y, b.y, equal_nan=True)


def test_direct_preconditions():
    with pytest.raises(PreconditionError):
        tail_logprob_direct(vortex(N=2), [0.0, 0.1], 100, seed=0)
    with pytest.raises(ConfigError):
        tail_logprob_direct(vortex(N=2), [0.1, 0.0], 5000, seed=0)
    with pytest.raises(ConfigError):
        tail_logprob_direct(vortex(), [0.0, 0.1], 5000, seed=0)


# density of states


@pytest.fixture(scope="module")
def chi2_tail():
    grid = np.array(sorted(CHI2_LOWER))
    return grid, tail_curve(confining(prior="gaussian"), grid, 100_000, seed=21, direction="lower",
                            dos_params=WLParams(), dos_window=(0.0, 3.0), bins_per_interval=8)


def test_dos_lower_tail_matches_chi_square(chi2_tail):
    grid, c = chi2_tail
    exact = np.array([CHI2_LOWER[e] for e in grid])
    assert all(f == "dos" for f in c.flags)
    assert np.max(np.abs(np.exp(c.y) / exact - 1.0)) <= 0.02


def test_dos_anchor_matches_direct_on_overlap(chi2_tail):
    _, c = chi2_tail
    d, sd = np.array(c.meta["direct_values"]), np.array(c.meta["direct_stderr"])
    pooled = np.sqrt(sd**2 + c.stderr**2)
    assert np.mean(np.abs(c.y - d)) <= 2 * np.mean(pooled)


def test_deep_vortex_tail_is_monotone():
    model = vortex(N=4)
    grid = np.linspace(0.0, 2.0, 21)
    c = tail_curve(model, grid, 50_000, seed=31, dos_params=WLParams(replicas=2))
    direct = np.array(c.meta["direct_values"])
    assert np.isnan(direct[-1])  # beyond direct reach
    assert np.all(np.isfinite(c.y))
    assert c.is_monotone()


def test_dos_needs_overlap_with_direct_region():
    dos = tail_logprob_dos(vortex(N=2), (3.0, 4.0), 8, WLParams(replicas=1, max_steps=20_000), seed=1)
    anchor = tail_logprob_direct(vortex(N=2), np.linspace(3.0, 4.0, 5), 5000, seed=1)
    with pytest.raises(PreconditionError):
        tail_from_dos(dos, np.linspace(3.0, 4.0, 5), anchor)


# sublevel volumes


def test_sublevel_volume_examples():
    assert exact_sublevel_volume_powerlaw(2.0, 1, 1, 0.7) == pytest.approx(math.pi * 0.7, rel=1e-14)
    for a, n, N in [(1.0, 1, 2), (2.0, 2, 3), (0.5, 1, 1)]:
        ratio = exact_sublevel_volume_powerlaw(a, n, N, 0.8) / exact_sublevel_volume_powerlaw(a, n, N, 0.2)
        assert ratio == pytest.approx(4.0 ** (2 * n * N / a), rel=1e-12)


def test_sublevel_constant_against_brute_force_mc():
    val, se = K_ALPHA1_N2_MC
    assert abs(sublevel_constant(1.0, 1, 2) - val) <= 3 * se
    assert sublevel_constant(1.0, 1, 2) == pytest.approx(math.pi**2 / 6, rel=1e-13)


def test_sublevel_mc_route_within_half_percent():
    val, se = exact_sublevel_volume_powerlaw(1.0, 1, 2, 1.0, method="mc", samples=2_000_000, seed=3)
    assert se / val <= 0.005
    assert abs(val - sublevel_constant(1.0, 1, 2)) <= 3 * se


def test_sublevel_preconditions():
    with pytest.raises(PreconditionError):
        exact_sublevel_volume_powerlaw(2.0, 1, 1, 2.0, R=1.0)
    with pytest.raises(PreconditionError):
        exact_sublevel_volume_powerlaw(0.0, 1, 1, 0.5)


# concavity


def test_concavity_examples():
    x = np.linspace(-1, 1, 11)
    assert concavity_check(SampledCurve(x, -x * x), "strict").passed
    rep = concavity_check(SampledCurve(x, x * x))
    assert not rep.passed
    assert len(rep.entries[0].details["violating_triples"]) == 9


def test_concavity_needs_four_points():
    with pytest.raises(InsufficientDataError):
        concavity_check(SampledCurve([0.0, 1.0, 2.0, 3.0], [0.0, np.nan, 1.0, 2.0]))


def test_weak_mode_tolerates_noise_within_stderr():
    x = np.linspace(0, 1, 6)
    y = -x * x + np.array([0, 0, -0.1, 0, 0, 0])
    assert not concavity_check(SampledCurve(x, y)).passed
    assert concavity_check(SampledCurve(x, y, stderr=np.full(6, 0.05))).passed
    assert not concavity_check(SampledCurve(x, y, stderr=np.full(6, 0.01))).passed


def test_curve_csv_roundtrip():
    c = TailCurve(np.array([0.0, 0.5, 1.0]), np.array([0.0, -0.25, np.nan]), np.array([0.0, 0.01, np.nan]),
                  ["", "low_hits", "needs_dos"])
    back = curve_from_csv(curve_to_csv(c))
    assert np.array_equal(back.x, c.x) and np.array_equal(back.y, c.y, equal_nan=True)
    assert back.flags == c.flags
