"""FitzHugh-Nagumo fields, resting state and noise channels.

The model in fast time is::

    dv = (v - v^3/3 - w + I) dt
    dw = eps (v + alpha - beta w) dt + h(w) o dB

with channel noise ``h(w) = sigma0`` (additive) or ``h(w) = sigma0 w``
(multiplicative) in the Stratonovich sense.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgumentError, NotUniqueFixedPointError
from .sde_engine import STRATONOVICH, SdeSystem

ADDITIVE = "additive"
MULTIPLICATIVE = "multiplicative"


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = ADDITIVE
    sigma0: float = 0.01

    def __post_init__(self):
        if self.kind not in (ADDITIVE, MULTIPLICATIVE):
            raise InvalidArgumentError(f"unknown noise kind {self.kind!r}")
        if not self.sigma0 >= 0:
            raise InvalidArgumentError("sigma0 must be non-negative")


@dataclass(frozen=True)
class FhnParams:
    I: float = 0.265
    alpha: float = 0.7
    beta: float = 0.75
    epsilon: float = 0.08
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise InvalidArgumentError("epsilon must lie in (0, 1)")
        if not self.beta > 0:
            raise InvalidArgumentError("beta must be positive")

    @property
    def sigma0(self) -> float:
        return self.noise.sigma0

    def with_noise(self, sigma0=None, kind=None) -> "FhnParams":
        noise = NoiseSpec(kind or self.noise.kind,
                          self.noise.sigma0 if sigma0 is None else float(sigma0))
        return replace(self, noise=noise)


@dataclass(frozen=True)
class FixedPoint:
    v_e: float
    w_e: float
    p: float
    q: float
    delta: float
    jacobian: np.ndarray
    mu: float
    nu: float

    @property
    def state(self) -> np.ndarray:
        return np.array([self.v_e, self.w_e])

    @property
    def complex_pair(self) -> bool:
        return self.nu > 0


def fhn_drift(params: FhnParams, state) -> np.ndarray:
    x = np.asarray(state, dtype=float)
    v = x[..., 0]
    w = x[..., 1]
    out = np.empty(x.shape)
    out[..., 0] = v - v * v * v / 3.0 - w + params.I
    out[..., 1] = params.epsilon * (v + params.alpha - params.beta * w)
    return out


def critical_manifold(params: FhnParams, v):
    """w on the v-nullcline C0."""
    v = np.asarray(v, dtype=float)
    return v - v ** 3 / 3.0 + params.I


def critical_branch_stable(v) -> np.ndarray:
    """Layer-problem stability of points of C0: D_v f = 1 - v^2 < 0."""
    return 1.0 - np.asarray(v, dtype=float) ** 2 < 0


def cardano_coefficients(params: FhnParams):
    """(p, q, discriminant) of the depressed cubic v^3 + p v + q = 0."""
    p = 3.0 * (1.0 / params.beta - 1.0)
    q = 3.0 * (params.alpha / params.beta - params.I)
    delta = (1.0 / params.beta - 1.0) ** 3 + 2.25 * (params.alpha / params.beta - params.I) ** 2
    return p, q, delta


def _has_unique_root(p, q, delta):
    if delta > 0:
        return True
    # delta == 0 with p == q == 0 is the triple root v = 0
    return abs(delta) <= 1e-15 and abs(p) <= 1e-15 and abs(q) <= 1e-15


def jacobian(params: FhnParams, state) -> np.ndarray:
    v = float(np.asarray(state)[0])
    return np.array([[1.0 - v * v, -1.0],
                     [params.epsilon, -params.epsilon * params.beta]])


def fixed_point(params: FhnParams) -> FixedPoint:
    p, q, delta = cardano_coefficients(params)
    if not _has_unique_root(p, q, delta):
        raise NotUniqueFixedPointError(f"discriminant {delta:.6g} <= 0: fixed point is not unique")
    sd = np.sqrt(max(delta, 0.0))
    v = float(np.cbrt(-q / 2.0 - sd) + np.cbrt(-q / 2.0 + sd))
    # Newton polish on the cubic; stops once the update no longer shrinks the residual
    for _ in range(100):
        r = v ** 3 + p * v + q
        dr = 3.0 * v * v + p
        if r == 0.0 or dr == 0.0:
            break
        vn = v - r / dr
        if abs(vn ** 3 + p * vn + q) >= abs(r):
            break
        v = vn
    w = (v + params.alpha) / params.beta
    M = jacobian(params, (v, w))
    tr = M[0, 0] + M[1, 1]
    mu = -0.5 * tr
    s = 4.0 * params.epsilon - (1.0 - v * v + params.epsilon * params.beta) ** 2
    nu = 0.5 * np.sqrt(s) if s > 0 else 0.0
    return FixedPoint(v_e=v, w_e=w, p=p, q=q, delta=delta, jacobian=M, mu=float(mu), nu=float(nu))


@dataclass(frozen=True)
class ExcitableReport:
    delta: float
    mu: float
    nu: float
    ratio: float
    unique_fixed_point: bool
    stable: bool
    focus: bool
    averaging_ok: bool
    threshold: float

    @property
    def passed(self) -> bool:
        return self.unique_fixed_point and self.stable and self.focus and self.averaging_ok


def validate_excitable(params: FhnParams, ratio_threshold: float = 0.2) -> ExcitableReport:
    p, q, delta = cardano_coefficients(params)
    if not _has_unique_root(p, q, delta):
        return ExcitableReport(delta, np.nan, np.nan, np.nan, False, False, False, False, ratio_threshold)
    fp = fixed_point(params)
    ratio = fp.mu / fp.nu if fp.nu > 0 else np.inf
    return ExcitableReport(
        delta=delta, mu=fp.mu, nu=fp.nu, ratio=ratio,
        unique_fixed_point=True, stable=fp.mu > 0, focus=fp.nu > 0,
        averaging_ok=bool(ratio < ratio_threshold), threshold=ratio_threshold,
    )


def dissipativity_constants(params: FhnParams):
    """(a, b) with <X1-X2, F(X1)-F(X2)> <= a - b |X1-X2|^2."""
    eb = params.epsilon * params.beta
    if not eb > 0:
        raise InvalidArgumentError("epsilon*beta must be positive")
    a = 3.0 * (1.0 + eb / 2.0 + (1.0 - params.epsilon) ** 2 / (2.0 * eb)) ** 2
    return a, eb / 2.0


def noise_field(noise: NoiseSpec, state) -> np.ndarray:
    x = np.asarray(state, dtype=float)
    out = np.zeros(x.shape)
    if noise.kind == ADDITIVE:
        out[..., 1] = noise.sigma0
    else:
        out[..., 1] = noise.sigma0 * x[..., 1]
    return out


def fhn_system(params: FhnParams) -> SdeSystem:
    return SdeSystem(
        dim=2,
        drift=lambda x, t: fhn_drift(params, x),
        diffusion=lambda x, t: noise_field(params.noise, x),
        interpretation=STRATONOVICH,
        name=f"fhn-{params.noise.kind}",
    )
