# %% [markdown]
# # The excitable FitzHugh-Nagumo neuron
#
# Rest state, its eigenstructure and what noise on the recovery variable does.

# %%
import numpy as np

from fhnlif.fhn_model import FhnParams, fhn_system, fixed_point, validate_excitable
from fhnlif.sde_engine import BrownianPath, brownian_path, integrate

params = FhnParams()          # I=0.265, alpha=0.7, beta=0.75, eps=0.08, sigma0=0.01
fp = fixed_point(params)
print(f"rest state   v_e={fp.v_e:.6f}  w_e={fp.w_e:.6f}")
print(f"focus        mu={fp.mu:.7f}  nu={fp.nu:.6f}  mu/nu={fp.mu / fp.nu:.4f}")
print("excitable:", validate_excitable(params).passed)

# %% [markdown]
# Two starts a hundredth apart in w, no noise. One returns quietly, the other
# makes the large excursion.

# %%
quiet = BrownianPath(0.01, np.zeros(20_000))
for w0 in (-0.45, -0.46):
    traj = integrate(fhn_system(params.with_noise(0.0)), np.array([-1.00125, w0]), quiet)
    print(f"w0={w0}: max v = {traj.x[:, 0].max():+.3f}")

# %% [markdown]
# With channel noise (Stratonovich, Heun scheme) the same rest state fires
# now and then.  Counting upward crossings of v = 0 over 1000 time units:

# %%
for seed in range(5):
    traj = integrate(fhn_system(params), fp.state, brownian_path(seed, 0, 0.01, 100_000))
    v = traj.x[:, 0]
    print(f"seed {seed}: {np.sum((v[:-1] < 0) & (v[1:] >= 0))} spikes")
