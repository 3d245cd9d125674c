"""Behaviour of the stochastic FHN model near its resting state.

Covers the shifted system ``X - X_e``, its linearisation, the linear system
with frozen noise ``H(X_e)``, the change of basis ``Q`` that puts the Jacobian
into rotation-dilation form, and Monte Carlo checks of how closely the
linearisation tracks the full system up to the exit time from a ball of
radius ``r``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidArgumentError, UnsupportedRegimeError
from .fhn_model import ADDITIVE, MULTIPLICATIVE, FhnParams, fhn_drift, fixed_point, noise_field
from .sde_engine import DEFAULT_DT, STRATONOVICH, BrownianEnsemble, SdeSystem, heun_step


@dataclass(frozen=True)
class NormalForm:
    Q: np.ndarray
    Q_inv: np.ndarray
    A: np.ndarray
    h_e: np.ndarray
    B1: np.ndarray
    M: np.ndarray
    x_e: np.ndarray
    mu: float
    nu: float
    sigma0: float

    @property
    def m11(self):
        return self.M[0, 0]

    @property
    def m12(self):
        return self.M[0, 1]

    @property
    def m21(self):
        return self.M[1, 0]

    @property
    def distance_scale(self) -> float:
        """|Q^-1 (0, l)| / l = sqrt(-m12 / (m21 nu^2))."""
        return float(np.sqrt(-self.m12 / (self.m21 * self.nu ** 2)))


def gamma(params: FhnParams, r, v_e=None):
    """Bound r^2/3 + |v_e| r on the nonlinear remainder within radius r."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise InvalidArgumentError("r must be non-negative")
    if v_e is None:
        v_e = fixed_point(params).v_e
    return r * r / 3.0 + abs(v_e) * r


def nonlinear_remainder(params: FhnParams, x, fp=None):
    """F(X) - F(X_e) - DF(X_e)(X - X_e)."""
    fp = fp or fixed_point(params)
    x = np.asarray(x, dtype=float)
    d = x - fp.state
    return fhn_drift(params, x) - fhn_drift(params, fp.state) - d @ fp.jacobian.T


def shifted_system(params: FhnParams) -> SdeSystem:
    fp = fixed_point(params)
    xe = fp.state
    f_e = fhn_drift(params, xe)

    def drift(x, t):
        return fhn_drift(params, x + xe) - f_e

    def diffusion(x, t):
        return noise_field(params.noise, x + xe)

    return SdeSystem(2, drift, diffusion, STRATONOVICH, name="shifted")


def linearized_system(params: FhnParams) -> SdeSystem:
    fp = fixed_point(params)
    xe = fp.state
    MT = fp.jacobian.T

    def drift(x, t):
        return np.asarray(x) @ MT

    def diffusion(x, t):
        return noise_field(params.noise, np.asarray(x) + xe)

    return SdeSystem(2, drift, diffusion, STRATONOVICH, name="linearized")


def additive_linear_system(params: FhnParams) -> SdeSystem:
    fp = fixed_point(params)
    MT = fp.jacobian.T
    h_e = noise_field(params.noise, fp.state)

    def drift(x, t):
        return np.asarray(x) @ MT

    def diffusion(x, t):
        return np.broadcast_to(h_e, np.shape(x)).copy()

    return SdeSystem(2, drift, diffusion, STRATONOVICH, name="additive-linear")


def normal_form(params: FhnParams) -> NormalForm:
    fp = fixed_point(params)
    if not fp.complex_pair:
        raise UnsupportedRegimeError("Jacobian at the fixed point has real eigenvalues")
    M = fp.jacobian
    mu, nu = fp.mu, fp.nu
    Q = np.array([[-nu, M[0, 0] + mu],
                  [0.0, M[1, 0]]])
    Q_inv = np.linalg.inv(Q)
    A = np.array([[-mu, nu], [-nu, -mu]])
    s0 = params.sigma0
    h_e = Q_inv @ np.array([0.0, s0])
    B = np.array([[0.0, 0.0], [0.0, s0]])
    B1 = Q_inv @ B @ Q
    return NormalForm(Q=Q, Q_inv=Q_inv, A=A, h_e=h_e, B1=B1, M=M, x_e=fp.state,
                      mu=mu, nu=nu, sigma0=s0)


@dataclass(frozen=True)
class LambdaReport:
    lam: float
    b1_norm: float
    sigma0_bound: float
    positive: bool


def lambda_condition(params: FhnParams) -> LambdaReport:
    """lambda = mu - 2 ||B1^T B1|| for multiplicative channel noise.

    ``sigma0_bound`` is the amplitude at which lambda changes sign; B1 scales
    linearly with sigma0 so ||B1^T B1|| = k sigma0^2.
    """
    nf = normal_form(params)
    b1n = float(np.linalg.norm(nf.B1.T @ nf.B1, 2))
    lam = nf.mu - 2.0 * b1n
    unit = normal_form(params.with_noise(1.0))
    k = float(np.linalg.norm(unit.B1.T @ unit.B1, 2))
    return LambdaReport(lam=lam, b1_norm=b1n, sigma0_bound=float(np.sqrt(nf.mu / (2.0 * k))),
                        positive=bool(lam > 0))


@dataclass
class ApproxExperimentResult:
    r: float
    n_trials: int
    error_stat: float
    gamma_r: float
    ratio: float
    lam: float
    noise: str
    sigma0: float
    n_excluded: int
    n_exited: int
    bound_constant: float
    additive_linear_stat: float
    additive_linear_ratio: float
    mean_square_stat: float
    flags: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


def approximation_experiment(
    params: FhnParams,
    r: float,
    n_trials: int,
    seed: int,
    T: float = 200.0,
    dt: float = DEFAULT_DT,
    x0=None,
    n_samples: int = 50,
) -> ApproxExperimentResult:
    """Full vs linearised dynamics up to the exit time from the r-ball.

    Every trial drives the shifted system, the linearised system and the
    frozen-noise linear system with one Brownian path.  The additive-noise
    statistic is the largest in-ball discrepancy over trials and steps; the
    multiplicative one is the trial mean of the squared discrepancy at
    ``t ^ tau``, maximised over ``n_samples`` times in ``[0, T]``.
    """
    if n_trials <= 0:
        raise InvalidArgumentError("n_trials must be positive")
    if not 0 < r <= 0.5:
        raise InvalidArgumentError("r must lie in (0, 0.5]")
    fp = fixed_point(params)
    sys_full = shifted_system(params)
    sys_lin = linearized_system(params)
    sys_add = additive_linear_system(params)

    start = np.zeros(2) if x0 is None else np.asarray(x0, float) - fp.state
    inside0 = np.linalg.norm(start) < r
    n_excluded = 0 if inside0 else n_trials
    flags = []
    if not inside0:
        flags.append("start-outside-ball")

    n_steps = int(round(T / dt))
    sample_steps = np.unique(np.linspace(0, n_steps, n_samples).round().astype(int))
    xf = np.tile(start, (n_trials, 1))
    xl = xf.copy()
    xa = xf.copy()
    in_ball = np.full(n_trials, inside0)
    sup_err = np.zeros(n_trials)
    z_lin = np.zeros(n_trials)   # |Z|^2 at the last in-ball step
    z_add = np.zeros(n_trials)
    ms_lin = np.zeros(len(sample_steps))
    ms_add = np.zeros(len(sample_steps))
    sample_pos = {s: i for i, s in enumerate(sample_steps)}

    noise = BrownianEnsemble(seed, range(n_trials), dt)
    chunk = 2000
    k = 0
    while k < n_steps and in_ball.any():
        m = min(chunk, n_steps - k)
        inc = noise.draw(m)
        for j in range(m):
            if k in sample_pos:
                ms_lin[sample_pos[k]] = z_lin.mean()
                ms_add[sample_pos[k]] = z_add.mean()
            t = k * dt
            db = inc[:, j]
            xf = heun_step(sys_full, xf, t, dt, db)
            xl = heun_step(sys_lin, xl, t, dt, db)
            xa = heun_step(sys_add, xa, t, dt, db)
            k += 1
            still = in_ball & (np.einsum("ij,ij->i", xf, xf) < r * r)
            if still.any():
                dl = xf[still] - xl[still]
                da = xf[still] - xa[still]
                z2 = np.einsum("ij,ij->i", dl, dl)
                z_lin[still] = z2
                z_add[still] = np.einsum("ij,ij->i", da, da)
                sup_err[still] = np.maximum(sup_err[still], np.sqrt(z2))
            in_ball = still
            if not in_ball.any():
                break
    # remaining sample times see the frozen t ^ tau values
    for s, i in sample_pos.items():
        if s >= k:
            ms_lin[i] = z_lin.mean()
            ms_add[i] = z_add.mean()

    g = float(gamma(params, r, fp.v_e))
    nf = normal_form(params)
    qq = np.linalg.norm(nf.Q, 2) * np.linalg.norm(nf.Q_inv, 2)
    lam = nf.mu
    if params.noise.kind == ADDITIVE:
        stat = float(sup_err.max()) if inside0 else 0.0
        ratio = stat / (g * r)
        bound_c = qq / nf.mu
    else:
        rep = lambda_condition(params)
        lam = rep.lam
        stat = float(ms_lin.max())
        ratio = stat / (g * g * r * r)
        bound_c = qq ** 2 / (nf.mu * lam) if lam > 0 else np.inf
        if lam <= 0:
            flags.append("lambda-nonpositive")
    add_stat = float(ms_add.max())
    n_exited = int(n_trials - in_ball.sum()) if inside0 else 0
    return ApproxExperimentResult(
        r=float(r), n_trials=int(n_trials), error_stat=stat, gamma_r=g, ratio=float(ratio),
        lam=float(lam), noise=params.noise.kind, sigma0=params.sigma0,
        n_excluded=n_excluded, n_exited=n_exited, bound_constant=float(bound_c),
        additive_linear_stat=add_stat, additive_linear_ratio=add_stat / (r * r),
        mean_square_stat=float(ms_lin.max()), flags=flags,
    )


def discrepancy_ode(params: FhnParams, xhat: np.ndarray, dt: float) -> np.ndarray:
    """Noise-free evolution of Z = Xhat - Xbar along a stored shifted path.

    With additive noise ``dZ = [DF(X_e) Z + Fbar(Xhat)] dt`` carries no
    stochastic term, so Z is a deterministic functional of the path of Xhat.
    Trapezoidal rule on the grid of ``xhat`` (shape ``(n+1, 2)``), Z_0 = 0.
    """
    if params.noise.kind != ADDITIVE:
        raise InvalidArgumentError("Z is noise-free only for additive noise")
    fp = fixed_point(params)
    M = fp.jacobian
    fbar = nonlinear_remainder(params, np.asarray(xhat) + fp.state, fp)
    n = len(xhat) - 1
    z = np.zeros((n + 1, 2))
    lhs = np.linalg.inv(np.eye(2) - 0.5 * dt * M)
    rhs_m = np.eye(2) + 0.5 * dt * M
    for k in range(n):
        z[k + 1] = lhs @ (rhs_m @ z[k] + 0.5 * dt * (fbar[k] + fbar[k + 1]))
    return z


__all__ = [
    "ADDITIVE", "MULTIPLICATIVE", "NormalForm", "LambdaReport", "ApproxExperimentResult",
    "gamma", "nonlinear_remainder", "shifted_system", "linearized_system",
    "additive_linear_system", "normal_form", "lambda_condition",
    "approximation_experiment", "discrepancy_ode",
]
