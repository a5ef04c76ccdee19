# coding: utf-8

# # Energy catastrophe for r^-1 in the disc
#
# With a kernel more singular than log, squeezing mass into a small core
# raises the energy without bound while the entropy cost stays modest. Put
# weight eps^(alpha/4) on a copy of the uniform measure shrunk to radius eps
# and leave the rest uniform: E grows at least like eps^(-alpha/2) while S
# stays above eps^(alpha/4) * 2 log eps, which tends to zero. A core-halo
# mixture reaches any fixed energy with entropy that tends to zero.

# In[1]:

import numpy as np

from ensemble_lab import macroscopic as mc

alpha = 1.0
e0 = mc.uniform_disc_power_energy(alpha)
print(f"E of the uniform disc measure: {e0:.6f} (8 / 3 pi = {8 / (3 * np.pi):.6f})")


# ## Rescaled measures
#
# The shrunk copy alone has energy exactly eps^-alpha times E0.

# In[2]:

fam = mc.catastrophe_family(alpha, e0, 2, (1.0, 0.3, 0.1, 0.03, 0.01), resolution=256)
print(" eps    copy E/E0   eps^-alpha    E/E0   bound       S     bound")
for p in fam:
    print(f"{p.eps:6.3f}  {p.scaled_ratio:10.4f}  {p.eps ** -alpha:10.4f}  {p.E / e0:7.3f}  "
          f"{p.E_lower_bound / e0:6.3f}  {p.S:7.4f}  {p.S_lower_bound:7.4f}")


# ## Core plus halo at a fixed energy

# In[3]:

eps = np.geomspace(0.1, 1e-6, 7)
dm = mc.discretize(mc._catastrophe_model(alpha), 384, r_min=1e-10, extra_edges=eps)
for p in mc.core_halo_family(alpha, 5 * e0, eps, dm=dm):
    print(f"core radius {p.eps:8.1e}  core mass {p.lam:.4f}  E/E0 {p.E / e0:.4f}  S {p.S:.5f}")
