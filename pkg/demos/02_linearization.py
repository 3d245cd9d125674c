# %% [markdown]
# # Linearising around the rest state
#
# The Jacobian has a complex pair -mu +/- i nu.  The normal form
# Y = Q^-1 (X - X_e) turns the drift into a damped rotation.

# %%
from fhnlif.fhn_model import MULTIPLICATIVE, FhnParams
from fhnlif.linearization import approximation_experiment, gamma, lambda_condition, normal_form

params = FhnParams()
nf = normal_form(params)
print("A =\n", nf.A)
print("h_e / sigma0 =", nf.h_e / params.sigma0, " |h_e|^2/sigma0^2 =", nf.h_e @ nf.h_e / params.sigma0 ** 2)
print("distance scale |Q^-1 (0, 1)| =", nf.distance_scale)

# %% [markdown]
# Multiplicative noise keeps the linearisation useful while
# lambda = mu - 2 |B1^T B1| stays positive.

# %%
rep = lambda_condition(params.with_noise(kind=MULTIPLICATIVE))
print(f"lambda = {rep.lam:.6f}, positive while sigma0 < {rep.sigma0_bound:.5f}")

# %% [markdown]
# Full against linearised dynamics on shared Brownian paths, stopped at the
# exit from the r-ball.  The ratio error / (gamma(r) r) stays of order one.

# %%
for r in (0.05, 0.1, 0.2):
    res = approximation_experiment(params.with_noise(0.005), r, 100, seed=1)
    print(f"r={r}: sup error={res.error_stat:.2e}  gamma(r)={gamma(params, r):.4f}  ratio={res.ratio:.2f}")
