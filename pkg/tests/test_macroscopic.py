import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ensemble_lab import BracketError, ConfigError
from ensemble_lab import macroscopic as mc
from ensemble_lab.curves import concavity_check
from ensemble_lab.domain import Ball, FullSpace, GaussianPrior, UniformBallPrior
from ensemble_lab.kernels import (
    RadialKernel,
    RadialPotential,
    ZeroPotential,
    inverse_power_profile,
    log_profile,
    monomial_profile,
    regularize,
    zero_profile,
)
from ensemble_lab.model import ModelSpec

# 10^4-point midpoint rule of -log|x - y| over the relative angle, |x| = 0.5, |y| = 0.8
LOG_AVG_05_08 = 0.2231435513142097
# cell self-energies of r^-1 for the uniform disc on 64 equal-width shells, from the
# elliptic-integral angular average and nested adaptive quadrature
SELF_ENERGY_ALPHA1 = {63: 2.4800476028218124, 31: 4.545988510750142}
# 10^7-sample Monte Carlo of -log|x - y| / 2 for x, y uniform in the unit disc (mean, stderr)
LOG_DISC_ENERGY_MC = (0.12513824593933015, 9.814039666887378e-05)
# Gibbs inversion for V = |x|^2 on the uniform disc, by 1-d quadrature and root finding
GIBBS_BETA = {0.3: 2.6721038552733845, 0.4: 1.2299332003819559, 0.6: -1.2299332003819565}


def disc(W=None, V=None):
    W = W if W is not None else RadialKernel(zero_profile())
    V = V if V is not None else ZeroPotential()
    return ModelSpec(Ball(2, 1.0), W, V, UniformBallPrior(2, 1.0))


def vortex_disc(delta=0.1):
    return disc(regularize(RadialKernel(log_profile()), "shift", delta))


@pytest.fixture(scope="module")
def dm_vortex():
    return mc.discretize(vortex_disc(), 256)


@pytest.fixture(scope="module")
def dm_gibbs():
    return mc.discretize(disc(V=RadialPotential(monomial_profile(2.0))), 2048, spacing="mass")


# discretization


def test_log_angular_average_is_log_of_larger_radius():
    val = float(mc.angular_average(log_profile(), 0.5, 0.8))
    assert val == -math.log(0.8)
    assert abs(val - LOG_AVG_05_08) <= 1e-12


def test_trapezoid_angular_average_of_smooth_profile():
    prof = regularize(RadialKernel(log_profile()), "shift", 0.1).profile
    th = 2 * np.pi * (np.arange(10_000) + 0.5) / 10_000
    oracle = np.mean(prof(np.hypot(0.8 - 0.5 * np.cos(th), 0.5 * np.sin(th))))
    assert abs(float(mc.angular_average(prof, 0.5, 0.8)) - oracle) <= 1e-10


def test_monomial_angular_average_matches_trapezoid():
    prof = monomial_profile(1.5, -1.0)
    th = 2 * np.pi * (np.arange(10_000) + 0.5) / 10_000
    oracle = np.mean(prof(np.hypot(0.8 - 0.3 * np.cos(th), 0.3 * np.sin(th))))
    assert abs(float(mc.angular_average(prof, 0.3, 0.8)) - oracle) <= 1e-10


def test_kernel_matrix_is_symmetric(dm_vortex):
    assert np.array_equal(dm_vortex.W, dm_vortex.W.T)


def test_singular_power_diagonal_against_quadrature():
    dm = mc.discretize(disc(RadialKernel(inverse_power_profile(1.0))), 64, spacing="uniform")
    for k, val in SELF_ENERGY_ALPHA1.items():
        assert np.isfinite(dm.W[k, k])
        assert abs(dm.W[k, k] / val - 1.0) <= 1e-5


def test_non_integrable_diagonal_gets_sentinel():
    with pytest.warns(RuntimeWarning, match="non-integrable"):
        dm = mc.discretize(disc(RadialKernel(inverse_power_profile(2.0))), 32)
    assert np.all(np.diag(dm.W) == mc.DIAG_SENTINEL)
    assert dm.warnings


def test_discretize_preconditions():
    with pytest.raises(ConfigError):
        mc.discretize(ModelSpec(Ball(3, 1.0), RadialKernel(log_profile()), ZeroPotential(), UniformBallPrior(3, 1.0)))
    with pytest.raises(ConfigError):
        mc.discretize(ModelSpec(FullSpace(2), RadialKernel(log_profile()), ZeroPotential(), GaussianPrior(2, 1.0)))
    with pytest.raises(ConfigError):
        mc.discretize(vortex_disc(), 16, mode="hexagonal")


def test_radial_and_planar_energies_agree():
    model = vortex_disc()
    radial = mc.discretize(model, 256)
    planar = mc.discretize(model, 40, mode="planar")
    er = mc.energy(radial, radial.prior_measure())
    ep = mc.energy(planar, planar.prior_measure())
    assert abs(ep / er - 1.0) <= 0.005


# functionals


def test_energy_examples(dm_gibbs, dm_vortex):
    assert mc.energy(dm_gibbs, dm_gibbs.prior_measure()) == pytest.approx(0.5, abs=1e-9)
    w = np.zeros(dm_vortex.size)
    w[17] = 1.0
    assert mc.energy(dm_vortex, dm_vortex.measure(w)) == 0.5 * dm_vortex.W[17, 17]


def test_log_disc_energy_against_monte_carlo():
    dm = mc.discretize(disc(RadialKernel(log_profile())), 512)
    mean, se = LOG_DISC_ENERGY_MC
    e = mc.energy(dm, dm.prior_measure())
    assert abs(e - mean) <= 3 * se
    assert e == pytest.approx(0.125, abs=1e-5)


def test_energy_rejects_foreign_grid(dm_vortex, dm_gibbs):
    with pytest.raises(ConfigError):
        mc.energy(dm_vortex, dm_gibbs.prior_measure())


def test_entropy_examples(dm_gibbs):
    p = dm_gibbs.prior_weights
    assert mc.entropy(dm_gibbs.prior_measure()) == 0.0
    # cells are equal-mass, so the first half carries prior mass 1/2
    half = np.where(np.arange(len(p)) < len(p) // 2, 2 * p, 0.0)
    half /= half.sum()
    assert mc.entropy(dm_gibbs.measure(half)) == pytest.approx(-math.log(2), abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_entropy_is_non_positive(seed):
    w = np.random.default_rng(seed).dirichlet(np.ones(16) * 0.3)
    p = np.random.default_rng(seed + 1).dirichlet(np.ones(16))
    assert mc.entropy(mc.GridMeasure(w, p, "g")) <= 1e-15


def test_free_energy_functional_examples(dm_vortex, dm_gibbs):
    mu0 = dm_vortex.prior_measure()
    assert mc.free_energy_functional(dm_vortex, 0.0, mu0) == 0.0
    w = dm_vortex.prior_weights * np.linspace(0.5, 1.5, dm_vortex.size)
    assert mc.free_energy_functional(dm_vortex, 0.0, dm_vortex.measure(w / w.sum())) > 0
    g0 = dm_gibbs.prior_measure()
    assert mc.free_energy_functional(dm_gibbs, 1.0, g0) == mc.energy(dm_gibbs, g0)


# solver


def test_beta_zero_returns_prior_in_one_step(dm_vortex):
    res = mc.solve_mean_field(dm_vortex, 0.0)
    assert res.iterations == 1 and res.converged
    assert np.array_equal(res.measure.weights, dm_vortex.prior_weights)


def test_no_interaction_converges_in_one_step(dm_gibbs):
    for beta in (-3.0, 0.7, 12.0):
        res = mc.solve_mean_field(dm_gibbs, beta)
        assert res.iterations == 1 and res.converged
        g = dm_gibbs.prior_weights * np.exp(-beta * dm_gibbs.V)
        assert np.max(np.abs(res.measure.weights - g / g.sum())) <= 1e-14


def test_negative_beta_energy_is_grid_converged(dm_vortex):
    fine = mc.discretize(vortex_disc(), 512)
    e_half = mc.solve_mean_field(dm_vortex, -1.0).energy
    e_full = mc.solve_mean_field(fine, -1.0).energy
    assert abs(e_half / e_full - 1.0) <= 0.01


def test_free_energy_decreases_along_iterates(dm_vortex):
    for beta in (-4.0, 6.0):
        res = mc.solve_mean_field(dm_vortex, beta)
        h = np.array(res.history)
        assert np.all(np.diff(h) <= 1e-13 * (1 + np.abs(h[:-1])))
        assert abs(res.measure.weights.sum() - 1.0) <= 1e-10 and res.measure.weights.min() >= 0


def test_minimizer_beats_random_perturbations(dm_vortex):
    rng = np.random.default_rng(0)
    for beta in (-3.0, 1.0, 5.0):
        res = mc.solve_mean_field(dm_vortex, beta)
        f = res.free_energy
        for _ in range(20):
            w = res.measure.weights * np.exp(0.3 * rng.standard_normal(dm_vortex.size))
            mu = dm_vortex.measure(w / w.sum())
            assert f <= mc.free_energy_functional(dm_vortex, beta, mu) + 1e-12


def test_bad_damping_is_config_error(dm_vortex):
    with pytest.raises(ConfigError):
        mc.solve_mean_field(dm_vortex, 1.0, damping=0.0)


# sweeps


def test_free_energy_curve_properties(dm_vortex):
    betas = np.linspace(-4.0, 6.0, 41)
    F, res = mc.free_energy_curve(dm_vortex, betas)
    assert F.y[np.argmin(np.abs(betas))] == 0.0
    assert all(f == "" for f in F.flags)
    assert concavity_check(F).passed
    cold, _ = mc.free_energy_curve(dm_vortex, betas, warm_start=False)
    assert np.max(np.abs(cold.y - F.y)) <= 1e-9


def test_gibbs_free_energy_closed_form(dm_gibbs):
    betas = np.linspace(-2.0, 2.0, 21)
    F, _ = mc.free_energy_curve(dm_gibbs, betas)
    exact = np.array([-math.log((1 - math.exp(-b)) / b) if b else 0.0 for b in betas])
    assert np.max(np.abs(F.y - exact)) <= 1e-6


def test_derivative_of_free_energy_is_energy(dm_vortex):
    h = 1e-3
    for beta in (-2.5, 0.5, 3.0):
        F, res = mc.free_energy_curve(dm_vortex, [beta - h, beta, beta + h])
        slope = (F.y[2] - F.y[0]) / (2 * h)
        assert abs(slope - res[1].energy) <= 1e-3 * abs(res[1].energy)


def test_non_increasing_beta_grid_is_rejected(dm_vortex):
    with pytest.raises(ConfigError):
        mc.free_energy_curve(dm_vortex, [1.0, 0.0])


# energy inversion


def test_beta_for_prior_energy_is_zero(dm_vortex):
    e0 = mc.energy(dm_vortex, dm_vortex.prior_measure())
    beta, _ = mc.beta_for_energy(dm_vortex, e0)
    assert beta == 0.0


def test_gibbs_inversion(dm_gibbs):
    for e, beta_exact in GIBBS_BETA.items():
        beta, res = mc.beta_for_energy(dm_gibbs, e)
        assert abs(beta - beta_exact) <= 1e-4
        assert abs(res.energy - e) <= 1e-9


def test_beta_of_energy_is_decreasing(dm_vortex):
    e0 = mc.energy(dm_vortex, dm_vortex.prior_measure())
    es = np.linspace(e0 - 0.08, e0 + 0.2, 8)
    betas = [mc.beta_for_energy(dm_vortex, e)[0] for e in es]
    assert np.all(np.diff(betas) < 0)


def test_bad_bracket_reports_range(dm_vortex):
    with pytest.raises(BracketError):
        mc.beta_for_energy(dm_vortex, 0.1, beta_bracket=(0.0, 1.0))
    with pytest.raises(BracketError):
        mc.beta_for_energy(dm_vortex, -5.0)


def test_direct_entropy_curve(dm_vortex):
    e0 = mc.energy(dm_vortex, dm_vortex.prior_measure())
    grid = np.linspace(e0 - 0.05, e0 + 0.25, 13)
    S, _ = mc.entropy_curve_direct(dm_vortex, grid)
    k = int(np.argmin(np.abs(grid - e0)))
    assert S.y[k] == 0.0
    assert np.all(S.y <= 0.0)
    assert np.all(np.diff(S.y[k:]) < 0)
    assert concavity_check(S).passed


def test_entropy_below_reachable_range_is_flagged(dm_vortex):
    e0 = mc.energy(dm_vortex, dm_vortex.prior_measure())
    S, _ = mc.entropy_curve_direct(dm_vortex, [e0 - 1.0, e0, e0 + 0.1], on_error="flag")
    assert S.y[0] == -math.inf and S.flags[0] == "below_e_min"


def test_duality_sandwich(dm_vortex):
    e0 = mc.energy(dm_vortex, dm_vortex.prior_measure())
    grid = np.linspace(e0 - 0.05, e0 + 0.2, 6)
    S, _ = mc.entropy_curve_direct(dm_vortex, grid)
    betas = np.linspace(-4.5, 40.0, 300)
    F, _ = mc.free_energy_curve(dm_vortex, betas)
    bound = np.min(betas[None, :] * grid[:, None] - F.y[None, :], axis=1)
    assert np.all(S.y <= bound + 1e-9)


def test_energy_range_brackets_prior_energy(dm_vortex):
    rng = mc.energy_range(dm_vortex, starts=2, iters=500)
    e0 = mc.energy(dm_vortex, dm_vortex.prior_measure())
    assert rng["e_min_upper"] < e0 < rng["e_max_lower"]
    # with no interaction the energy is linear, so the lower bound is certified
    dm = mc.discretize(disc(V=RadialPotential(monomial_profile(2.0))), 256, spacing="mass")
    rng = mc.energy_range(dm, starts=2, iters=500)
    assert rng["convex"]
    assert rng["e_min_lower"] <= dm.V.min() <= rng["e_min_upper"] < 0.5


# catastrophic family


def test_catastrophe_family_examples():
    e0 = mc.uniform_disc_power_energy(1.0)
    assert e0 == pytest.approx(8 / (3 * math.pi), rel=1e-12)
    fam = mc.catastrophe_family(1.0, e0, 2, (1.0, 0.5, 0.1, 0.01), resolution=256)
    one = fam[0]
    assert one.E == pytest.approx(e0, rel=1e-5) and abs(one.S) <= 1e-12
    for p in fam[1:3]:
        assert abs(p.scaled_ratio * p.eps - 1.0) <= 0.01
    last = fam[-1]
    assert last.S_lower_bound == pytest.approx(0.01**0.25 * 2 * math.log(0.01), rel=1e-12)
    assert last.S_lower_bound == pytest.approx(-2.91, abs=0.005)
    assert last.S >= last.S_lower_bound


def test_core_halo_hits_target_energy():
    e0 = mc.uniform_disc_power_energy(1.0)
    eps = np.geomspace(0.1, 1e-4, 4)
    dm = mc.discretize(mc._catastrophe_model(1.0), 256, r_min=1e-8, extra_edges=eps)
    pts = mc.core_halo_family(1.0, 3 * e0, eps, dm=dm)
    S = [p.S for p in pts]
    for p in pts:
        assert abs(p.E / (3 * e0) - 1.0) <= 1e-6
    # the entropy cost of reaching the target shrinks as the core concentrates
    assert np.all(np.diff(S) > 0)
