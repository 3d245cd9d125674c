# %% [markdown]
# # Firing probability, hazard and interspike intervals
#
# Paths started on the line below the rest state fire in their first turn
# with a probability that is sigmoidal in the distance l.  Rescaling the fit
# to normal-form radius gives a hazard for the radial models, and the hazard
# gives an ISI density.  Reduced trial counts keep this under a minute.

# %%
import numpy as np

from fhnlif import firing_isi as fi
from fhnlif.fhn_model import FhnParams
from fhnlif.linearization import normal_form
from fhnlif.lif_reduction import polar_radial_model, radial_ou_model

params = FhnParams()
table = fi.estimate_firing_prob(params, fi.probe_grid(params, 200), seed=1)
for _, i, l, p, se in list(table.rows())[::5]:
    print(f"L_{i:<2d} l={l:.4f}  p={p:.3f} +- {se:.3f}")

# %%
fit = fi.transform_fit(fi.fit_sigmoid(table), normal_form(params))
print(fit.to_json_dict())
print("hazard at a*:", fi.hazard_rate(fit, fit.a_star))

# %% [markdown]
# Model densities from both radial equations against first-spike times of
# the noisy neuron restarted at rest.

# %%
grid = fi.density_grid(3000, 150)
dens = {m.kind: fi.isi_density(m, fit, grid, 200, 10, seed=1) for m in (radial_ou_model(params), polar_radial_model(params))}
sample = fi.isi_histogram(params, 200, seed=1)
res = fi.compare_isi(sample, dens)
print("mean ISI (neuron):", sample.isis.mean())
for k, d in dens.items():
    print(f"{k}: mass={d.mass:.3f} mean={np.trapezoid(d.t * d.g, d.t):.1f}")
print(res.ks)
