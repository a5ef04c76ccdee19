# coding: utf-8

# # Finite-N tail entropy
#
# S+(e) = (1/N) log P(H/N >= e) under the product prior. For a few vortices
# in a Gaussian cloud we estimate it with plain Monte Carlo, fall back to a
# Wang-Landau density of states where the direct counts run dry, and test
# concavity with the noise-aware second-difference check.

# In[1]:

import numpy as np

from ensemble_lab.curves import concavity_check
from ensemble_lab.domain import FullSpace, GaussianPrior
from ensemble_lab.kernels import RadialKernel, ZeroPotential, log_profile
from ensemble_lab.microcanonical import hamiltonian_batch, tail_curve
from ensemble_lab.model import ModelSpec
from ensemble_lab.wanglandau import WLParams

seed = 7


# In[2]:

for N in (2, 4):
    model = ModelSpec(FullSpace(2), RadialKernel(log_profile()), ZeroPotential(), GaussianPrior(2, 1.0), N=N)
    rng = np.random.default_rng(seed)
    h = hamiltonian_batch(model, model.prior.sample(rng, (20000, N))) / N
    grid = np.linspace(np.median(h), np.median(h) + 1.0, 12)
    curve = tail_curve(model, grid, 100_000, seed, dos_params=WLParams())
    res = concavity_check(curve, "weak")
    print(f"N = {N}: weakly concave = {res.passed}, worst margin {res.entries[0].margin:.3g}")
    for e, s, se, f in zip(curve.x, curve.y, curve.stderr, curve.flags):
        print(f"   e = {e:6.3f}   S+ = {s:8.4f} +- {se:.4f}  {f}")
