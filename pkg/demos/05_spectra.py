# %% [markdown]
# # Spectral comparison of the reductions
#
# Welch spectra of the shifted neuron and of its linearisation, and of the
# normal-form radius against the two radial models.  Each spectrum is scaled
# to peak at 40; the score is the cosine similarity.

# %%
from fhnlif.fhn_model import FhnParams
from fhnlif.spectral import compare_radial, compare_shifted_linearized

params = FhnParams()
lin = compare_shifted_linearized(params, seed=1)
print("shifted vs linearised:", {k: round(v["overlap"], 4) for k, v in lin["components"].items()})

rad = compare_radial(params, seed=1)
for k, v in rad["pairs"].items():
    print(f"{k}: {v:.4f}")
