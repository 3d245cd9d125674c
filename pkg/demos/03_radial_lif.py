# %% [markdown]
# # Two radial leaky integrate-and-fire models
#
# Averaging the rotation gives a radial OU equation,
# dR = [sigma^2/(2R) - mu R] dt + sigma dB.  Keeping the rotation in the
# noise coefficient gives the polar model with periodic coefficients.

# %%
from scipy import stats

from fhnlif.fhn_model import FhnParams
from fhnlif.lif_reduction import (period_averaged_drift, polar_radial_model, radial_ou_model,
                                  simulate_radial)

params = FhnParams()
ou = radial_ou_model(params)
polar = polar_radial_model(params)
print(ou.summary())
print("polar drift averaged over a period vs radial OU drift at R=0.5:",
      period_averaged_drift(polar, 0.5), ou.drift(0.5))

# %% [markdown]
# Long-run behaviour: the radial OU is Rayleigh distributed with mean
# sigma sqrt(pi / (4 mu)).

# %%
paths = simulate_radial(ou, ou.drift_root, 200_000, 0.01, seed=1, stream_ids=range(50), save_every=100)
print(f"sample mean {paths.r[:, 20:].mean():.4f}  stationary mean {ou.stationary_mean:.4f}")
print("reflections at 0:", paths.n_reflections)

# %% [markdown]
# Starting both models from the reset R = 0 and comparing the laws at T=100:

# %%
a = simulate_radial(ou, 0.0, 10_000, 0.01, seed=2, stream_ids=range(500), save_steps=[10_000]).r[:, -1]
b = simulate_radial(polar, 0.0, 10_000, 0.01, seed=3, stream_ids=range(500), save_steps=[10_000]).r[:, -1]
print("KS p-value radial OU vs polar:", stats.ks_2samp(a, b).pvalue)
