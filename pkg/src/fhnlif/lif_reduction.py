"""One-dimensional radial (leaky integrate-and-fire) reductions.

In normal-form coordinates ``Y = Q^-1 (X - X_e)`` the linearised channel-noise
system reads ``dY = A Y dt + h_e dB``.  Two radial equations approximate
``|Y|``:

* ``radial_ou``: the norm of an isotropic planar OU process,
  ``dR = [sigma^2 / (2R) - mu R] dt + sigma dB``;
* ``polar_radial``: the polar radius with the angle replaced by the uniform
  rotation ``theta_t = (sin(nu t + phase), cos(nu t + phase))``.

Both are Ito equations integrated by Euler-Maruyama with reflection at 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError, SingularityError
from .fhn_model import FhnParams
from .linearization import NormalForm, normal_form
from .sde_engine import ITO, BrownianEnsemble, BrownianPath, SdeSystem, integrate

RADIAL_OU = "radial_ou"
POLAR_RADIAL = "polar_radial"


def transform_state(nf: NormalForm, x):
    """Y = Q^-1 x for states of shape (..., 2)."""
    return np.asarray(x, dtype=float) @ nf.Q_inv.T


def inverse_transform_state(nf: NormalForm, y):
    return np.asarray(y, dtype=float) @ nf.Q.T


def sigma_eff(params: FhnParams, nf: Optional[NormalForm] = None) -> float:
    nf = nf or normal_form(params)
    return float(np.sqrt(-nf.m12 / (2.0 * nf.nu ** 2 * nf.m21)) * params.sigma0)


def sigma_eff_trace(params: FhnParams, nf: Optional[NormalForm] = None) -> float:
    """sqrt(tr(C C*) / 2) with C = Q^-1 diag(0, sigma0)."""
    nf = nf or normal_form(params)
    C = nf.Q_inv @ np.diag([0.0, params.sigma0])
    return float(np.sqrt(0.5 * np.trace(C @ C.T)))


@dataclass(frozen=True)
class LifModel:
    kind: str
    mu: float
    nu: float
    sigma_eff: float
    h_e: np.ndarray
    reset_state: float = 0.0
    phase: float = 0.0

    @property
    def drift_root(self) -> float:
        """Radius where the averaged drift vanishes, sigma / sqrt(2 mu)."""
        return self.sigma_eff / np.sqrt(2.0 * self.mu)

    @property
    def stationary_mean(self) -> float:
        # Rayleigh law with scale sigma / sqrt(2 mu)
        return self.sigma_eff * np.sqrt(np.pi / (4.0 * self.mu))

    @property
    def noise_scale(self) -> float:
        """RMS diffusion coefficient, used to size the reflection floor."""
        return self.sigma_eff

    def _theta(self, t):
        ph = self.nu * np.asarray(t, dtype=float) + self.phase
        return np.sin(ph), np.cos(ph)

    def projected_noise(self, t):
        """<theta_t, h_e>."""
        s, c = self._theta(t)
        return self.h_e[0] * s + self.h_e[1] * c

    def _drift_raw(self, r, t):
        if self.kind == RADIAL_OU:
            return self.sigma_eff ** 2 / (2.0 * r) - self.mu * r
        hp = self.projected_noise(t)
        return (self.h_e @ self.h_e - hp * hp) / (2.0 * r) - self.mu * r

    def drift(self, r, t=0.0):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise SingularityError("radial drift is singular at R <= 0")
        return self._drift_raw(r, t)

    def diffusion(self, r, t=0.0):
        r = np.asarray(r, dtype=float)
        if self.kind == RADIAL_OU:
            return np.full(r.shape, self.sigma_eff)
        return np.broadcast_to(self.projected_noise(t), r.shape).astype(float)

    def sde_system(self, dt: float) -> SdeSystem:
        """Ito system for integration; the 1/(2R) term is evaluated at
        ``max(R, noise_scale * sqrt(dt / 2))`` so that paths may start at the
        reset value R = 0."""
        floor = self.noise_scale * np.sqrt(dt / 2.0)
        floor = floor if floor > 0 else np.finfo(float).tiny

        def drift(x, t):
            return self._drift_raw(np.maximum(x, floor), t) if self.sigma_eff > 0 else -self.mu * x

        def diffusion(x, t):
            return self.diffusion(x, t)

        return SdeSystem(1, drift, diffusion, ITO, reflecting=True, name=self.kind)

    def summary(self) -> dict:
        return {
            "kind": self.kind, "mu": self.mu, "nu": self.nu, "sigma_eff": self.sigma_eff,
            "h_e": [float(v) for v in self.h_e], "drift_root": float(self.drift_root),
            "reset_state": self.reset_state, "phase": self.phase,
        }


def radial_ou_model(params: FhnParams, reset_state: float = 0.0) -> LifModel:
    nf = normal_form(params)
    return LifModel(RADIAL_OU, nf.mu, nf.nu, sigma_eff(params, nf), nf.h_e.copy(), reset_state)


def polar_radial_model(params: FhnParams, reset_state: float = 0.0, phase: float = 0.0) -> LifModel:
    nf = normal_form(params)
    return LifModel(POLAR_RADIAL, nf.mu, nf.nu, sigma_eff(params, nf), nf.h_e.copy(),
                    reset_state, phase)


def period_averaged_drift(model: LifModel, r, n_quad: int = 4096):
    """Drift of the polar model averaged over one rotation period."""
    period = 2.0 * np.pi / model.nu
    ts = np.arange(n_quad) * period / n_quad
    r = np.asarray(r, dtype=float)
    vals = np.array([model.drift(r, t) for t in ts])
    return vals.mean(axis=0)


@dataclass
class RadialPaths:
    t: np.ndarray
    r: np.ndarray          # (n_paths, n_saved)
    n_reflections: int


def simulate_radial(
    model: LifModel,
    r0,
    n_steps: int,
    dt: float,
    seed: int,
    stream_ids,
    save_every: int = 1,
    channel: int = 0,
    chunk: int = 5000,
    save_steps=None,
) -> RadialPaths:
    """Euler-Maruyama ensemble of a radial model with reflection at 0.

    States are kept every ``save_every`` steps, or only at the step indices
    listed in ``save_steps`` when given.  Increments are drawn in chunks from
    per-trial streams.
    """
    if save_steps is None:
        if n_steps % save_every:
            raise InvalidArgumentError("n_steps must be a multiple of save_every")
        save_steps = np.arange(0, n_steps + 1, save_every)
    save_steps = np.unique(np.asarray(save_steps, dtype=np.int64))
    if save_steps[0] < 0 or save_steps[-1] > n_steps:
        raise InvalidArgumentError("save_steps must lie in [0, n_steps]")
    slot = np.full(n_steps + 1, -1, dtype=np.int64)
    slot[save_steps] = np.arange(len(save_steps))
    stream_ids = np.asarray(stream_ids)
    n = len(stream_ids)
    r = np.broadcast_to(np.asarray(r0, dtype=float), (n,)).copy()
    noise = BrownianEnsemble(seed, stream_ids, dt, channel=channel)
    floor = model.noise_scale * np.sqrt(dt / 2.0)
    out = np.empty((n, len(save_steps)))
    if slot[0] >= 0:
        out[:, 0] = r
    refl = 0
    k = 0
    s2 = model.sigma_eff ** 2
    hh = float(model.h_e @ model.h_e)
    while k < n_steps:
        m = min(chunk, n_steps - k)
        inc = noise.draw(m)
        ts = (k + np.arange(m)) * dt
        if model.kind == RADIAL_OU:
            num = np.full(m, s2)
            g = np.full(m, model.sigma_eff)
        else:
            g = model.projected_noise(ts)
            num = hh - g * g
        for j in range(m):
            rr = np.maximum(r, floor) if floor > 0 else r
            drift = (num[j] / (2.0 * rr) if s2 > 0 else 0.0) - model.mu * r
            r = r + drift * dt + g[j] * inc[:, j]
            neg = r < 0
            if neg.any():
                refl += int(neg.sum())
                r = np.abs(r)
            k += 1
            if slot[k] >= 0:
                out[:, slot[k]] = r
    return RadialPaths(t=save_steps * dt, r=out, n_reflections=refl)


def averaged_process(params: FhnParams, path2d, y0=None, nf: Optional[NormalForm] = None):
    """Rotated, rescaled planar OU approximation of the normal-form process.

    ``path2d`` holds the two independent Brownian components driving
    ``dS = -S ds + dB`` in the slow time ``s = mu t``: either a pair of
    :class:`BrownianPath` or an array of shape ``(2, n_steps)`` whose step is
    ``ds``.  Returns ``(t, Yapp, Sscaled)`` with
    ``Yapp_t = sigma/sqrt(mu) Rot(-nu t) S_{mu t}`` and ``Sscaled`` the same
    process without the rotation.
    """
    nf = nf or normal_form(params)
    if isinstance(path2d, (tuple, list)) and isinstance(path2d[0], BrownianPath):
        ds = path2d[0].dt
        inc = np.vstack([p.forward() for p in path2d])
    else:
        inc, ds = np.asarray(path2d[0]), float(path2d[1])
    sig = sigma_eff(params, nf)
    mu, nu = nf.mu, nf.nu
    y0 = np.zeros(2) if y0 is None else np.asarray(y0, dtype=float)
    scale = sig / np.sqrt(mu)
    n = inc.shape[1]
    s = np.empty((n + 1, 2))
    s[0] = y0 / scale if scale > 0 else 0.0
    # exact OU transition driven by the given increments
    decay = np.exp(-ds)
    gain = np.sqrt((1.0 - decay ** 2) / 2.0) / np.sqrt(ds)
    for k in range(n):
        s[k + 1] = decay * s[k] + gain * inc[:, k]
    t = np.arange(n + 1) * ds / mu
    c, sn = np.cos(nu * t), np.sin(nu * t)
    # Rot(-nu t) = [[cos, sin], [-sin, cos]]
    y = np.empty_like(s)
    y[:, 0] = c * s[:, 0] + sn * s[:, 1]
    y[:, 1] = -sn * s[:, 0] + c * s[:, 1]
    return t, scale * y, scale * s


def simulate_normal_form(params: FhnParams, y0, n_steps: int, dt: float, seed: int, stream_ids,
                         nf: Optional[NormalForm] = None, save_every: int = 1):
    """Heun ensemble of dY = A Y dt + h_e dB (additive noise, scalar B).

    Returns ``(t, Y)`` with ``Y`` of shape ``(n_paths, n_saved, 2)``.
    """
    nf = nf or normal_form(params)
    stream_ids = np.asarray(stream_ids)
    n = len(stream_ids)
    y = np.broadcast_to(np.asarray(y0, float), (n, 2)).copy()
    noise = BrownianEnsemble(seed, stream_ids, dt)
    # linear additive system: Heun reduces to an exact one-step affine map
    A = nf.A
    P = np.eye(2) + dt * A + 0.5 * dt * dt * A @ A
    G = (np.eye(2) + 0.5 * dt * A) @ nf.h_e
    n_saved = n_steps // save_every + 1
    out = np.empty((n, n_saved, 2))
    out[:, 0] = y
    inc = noise.draw(n_steps)
    PT = P.T
    for k in range(n_steps):
        y = y @ PT + inc[:, k:k + 1] * G
        if (k + 1) % save_every == 0:
            out[:, (k + 1) // save_every] = y
    return np.arange(n_saved) * save_every * dt, out


def integrate_radial(model: LifModel, r0: float, path: BrownianPath):
    """Single radial path through the generic engine (reflection included)."""
    return integrate(model.sde_system(path.dt), np.array([r0]), path)
