"""Sparse vectors, the distribution inner product and best-subset projection."""
# %%
import numpy as np

from evolvolin import CovarianceModel, SparseVector, best_projection, expected_loss, inner_product

# %% [markdown]
# A linear function is a sparse coefficient vector.  Its distance to another
# function is measured through the input covariance: <v, w> = v^T Sigma w.

# %%
sigma = np.array([[1.0, 0.3, 0.0],
                  [0.3, 1.0, 0.2],
                  [0.0, 0.2, 1.0]])
cov = CovarianceModel(sigma)
f = SparseVector.from_mapping({0: 1.0, 2: -0.5}, 3)
w = SparseVector.from_mapping({1: 0.4}, 3)
print("f =", f, " w =", w)
print("<f, w>       =", inner_product(f, w, cov))
print("loss(f, w)   =", expected_loss(f, w, cov))

# %% [markdown]
# The best approximation of f using only coordinates S solves the normal
# equations on Sigma_SS.  The residual is orthogonal to every e^i, i in S.

# %%
res = best_projection(f, [1, 2], cov)
print("f^S          =", res.projection)
print("residual     =", res.residual_norm_sq)
r = f - res.projection
print("<r, e^2>     =", inner_product(r, SparseVector.basis(1, 3), cov))
