"""Smooth and incoherent input distributions, with empirical checks."""
# %%
import numpy as np

from evolvolin import LowRankUniform, UniformBox, check_niceness, make_incoherent, make_smooth, sample
from evolvolin.distributions import make_rng

# %% [markdown]
# A smooth distribution adds independent uniform noise of variance delta^2 to
# a bounded base.  Here the base is a rank-2 correlated uniform vector.

# %%
n = 8
base = LowRankUniform.random(n, 2, 0.5, make_rng(0))
smooth = make_smooth(base, 0.5, n)
batch = sample(smooth, 200_000, seed=1)
emp = batch.matrix.T @ batch.matrix / batch.count
print("G bound            :", smooth.g_bound)
print("max |Sigma_hat - Sigma|:", np.abs(emp - smooth.covariance.sigma).max())
print(check_niceness(smooth, batch))

# %% [markdown]
# Incoherent distributions keep every pairwise correlation at most mu.

# %%
inc = make_incoherent(0.125, 0.5, n, "equicorrelated", variance=0.9)
print("coherence          :", inc.covariance.coherence())
print(check_niceness(inc, sample(inc, 200_000, seed=2)))

# %%
box = make_smooth(UniformBox(0.5), 0.5, 3)
print(sample(box, 3, seed=0).to_csv())
