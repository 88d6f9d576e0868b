"""One generation by hand: a neighbourhood, its empirical losses and a selection."""
# %%
import numpy as np

from evolvolin import SparseVector, UniformBox, make_smooth, sample
from evolvolin.distributions import make_rng
from evolvolin.framework import bn_select, neighborhood_losses
from evolvolin.mutators import Move, bn_neighborhood

# %%
n = 30
h = make_smooth(UniformBox(0.5), 0.5, n)
f = SparseVector.from_mapping({3: 0.9, 17: -0.6}, n)
w = SparseVector.from_mapping({3: 0.5}, n)
rng = make_rng(0)

neigh = bn_neighborhood(w, (10, 40.0), n, 2000, rng)
print("moves:", {m.name: int((neigh.kinds == m).sum()) for m in Move})

# %% [markdown]
# Every member is scored on one fresh sample; selection keeps a beneficial
# member if any beats the origin by t, else a neutral one, else fails.

# %%
batch = sample(h, 2000, seed=(0, 0, 2, 1))
base, losses = neighborhood_losses(neigh, f, batch)
print("origin loss:", base, " best member:", losses.min())
out = bn_select(neigh, f, batch, 1e-4, rng)
print(out.event, "->", out.survivor)
