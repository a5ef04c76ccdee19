# coding: utf-8

# # Do the two ensembles agree?
#
# For a regularized vortex gas in the unit disc we compute the entropy S(e)
# two ways: directly, by solving for the beta that hits each energy, and as
# the concave Legendre transform of the canonical free energy F(beta). When
# S is concave the two agree.

# In[1]:

import numpy as np

from ensemble_lab import duality as du
from ensemble_lab import macroscopic as mc
from ensemble_lab.domain import Ball, UniformBallPrior
from ensemble_lab.kernels import RadialKernel, ZeroPotential, log_profile, regularize
from ensemble_lab.model import ModelSpec

W = regularize(RadialKernel(log_profile()), "shift", 0.1)
model = ModelSpec(Ball(2, 1.0), W, ZeroPotential(), UniformBallPrior(2, 1.0))
dm = mc.discretize(model, 256)
e0 = mc.energy(dm, dm.prior_measure())
print(f"energy of the uniform measure: {e0:.5f}")


# ## Microcanonical side

# In[2]:

e_grid = np.linspace(e0 - 0.05, e0 + 0.25, 16)
S, _ = mc.entropy_curve_direct(dm, e_grid, on_error="flag")
for e, s, b, f in zip(S.x, S.y, S.meta["betas"], S.flags):
    print(f"e = {e:.4f}  S = {s:9.5f}  beta = {b:8.3f}  {f}")


# ## Canonical side and the gap

# In[3]:

bmin = min(b for b in S.meta["betas"] if np.isfinite(b))
betas = np.unique(np.concatenate([np.linspace(1.2 * bmin, 10.0, 400), np.geomspace(10.0, 1e4, 120)]))
F, _ = mc.free_energy_curve(dm, betas)
gap = du.equivalence_gap(S, F)
print(f"max |S - F*| = {gap.gap:.2e} at e = {gap.argmax_e:.4f}; equivalent: {gap.verdict}")


# The envelope of S is S itself, which is what concavity means on a grid.

# In[4]:

env = du.concave_envelope(S.finite_part())
print("envelope moved the curve by", float(np.max(env.y - S.finite_part().y)))
