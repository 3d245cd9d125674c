"""Numerical experiments around the random attractor of the stochastic FHN model.

Noise paths are two-sided: a :class:`~fhnlif.sde_engine.BrownianPath` whose
``origin`` marks model time 0.  The Wiener shift moves that origin along the
grid, so pullback runs re-use one immutable set of increments.

Additive noise is handled through ``Y = X - eta`` with ``eta`` the stationary
solution of ``d eta = -eta dt + (0, sigma0) dB``.  Multiplicative noise is
conjugated to a random ODE through ``T(z) = diag(1, exp(-sigma0 z))`` with
``z`` the stationary solution of ``dz = -z dt + dB``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import signal

from .errors import InvalidArgumentError
from .fhn_model import ADDITIVE, MULTIPLICATIVE, FhnParams, dissipativity_constants, fhn_drift, fhn_system, fixed_point
from .sde_engine import DEFAULT_DT, BrownianEnsemble, BrownianPath, brownian_path, integrate


def _grid_steps(s: float, dt: float) -> int:
    k = s / dt
    kr = round(k)
    if abs(k - kr) > 1e-9 * max(1.0, abs(k)):
        raise InvalidArgumentError(f"shift {s} is not a multiple of dt={dt}")
    return int(kr)


def wiener_shift(path: BrownianPath, s: float) -> BrownianPath:
    """theta_s: the same increments with time 0 moved to old time ``s``."""
    k = _grid_steps(s, path.dt)
    origin = path.origin + k
    if not 0 <= origin <= path.n_steps:
        raise InvalidArgumentError(f"shift {s} leaves the stored path")
    return BrownianPath(path.dt, path.increments, path.seed, path.stream_id, origin)


def coarsen(path: BrownianPath, factor: int) -> BrownianPath:
    """Sum blocks of ``factor`` increments (same Brownian motion on a coarser grid)."""
    if factor < 1 or path.n_steps % factor or path.origin % factor:
        raise InvalidArgumentError("path length and origin must be multiples of factor")
    inc = path.increments.reshape(path.increments.shape[:-1] + (-1, factor)).sum(axis=-1)
    return BrownianPath(path.dt * factor, inc, path.seed, path.stream_id, path.origin // factor)


def two_sided_path(seed: int, stream_id: int, dt: float, t_past: float, t_future: float = 0.0,
                   channel: int = 0) -> BrownianPath:
    n_past = _grid_steps(t_past, dt)
    n_fut = _grid_steps(t_future, dt)
    p = brownian_path(seed, stream_id, dt, n_past + n_fut, channel)
    return BrownianPath(dt, p.increments, seed, stream_id, n_past)


def cocycle_check(params: FhnParams, x0, path: BrownianPath, t: float, s: float) -> float:
    """|phi(t+s, w) x0 - phi(t, theta_s w) phi(s, w) x0| for the Heun flow."""
    dt = path.dt
    nt, ns = _grid_steps(t, dt), _grid_steps(s, dt)
    system = fhn_system(params)
    x0 = np.asarray(x0, dtype=float)
    direct = integrate(system, x0, path, n_steps=nt + ns, record=False).x
    mid = integrate(system, x0, path, n_steps=ns, record=False).x
    composed = integrate(system, mid, wiener_shift(path, s), n_steps=nt, record=False).x
    return float(np.max(np.abs(direct - composed)))


# ---------------------------------------------------------------------------
# stationary OU


@dataclass(frozen=True)
class StationaryOu:
    """Grid values of ``dz = -z dt + dB`` started at 0 at time ``-burn_in``.

    ``values[..., k]`` sits at time ``times[k]``; time 0 is ``index0``.
    The scheme is the Heun map of the driving engine, so the same increments
    reproduce the noise component of an engine run exactly.
    """

    values: np.ndarray
    dt: float
    burn_in: float
    path: BrownianPath

    @property
    def index0(self) -> int:
        return self.path.origin

    @property
    def times(self) -> np.ndarray:
        return self.path.times()

    @property
    def usable_past(self) -> float:
        """Length of the past after the burn-in has been discarded."""
        return max(0.0, self.index0 * self.dt - self.burn_in)

    def past(self) -> np.ndarray:
        return self.values[..., : self.index0 + 1]

    def future(self) -> np.ndarray:
        return self.values[..., self.index0:]


def ou_heun_coefficients(dt: float):
    """(a, c) with z_{k+1} = a z_k + c dB_k for Heun on dz = -z dt + dB."""
    return 1.0 - dt + 0.5 * dt * dt, 1.0 - 0.5 * dt


def stationary_ou(path: BrownianPath, burn_in: float = 10.0) -> StationaryOu:
    """OU values over the whole stored path, which must reach back ``burn_in``
    before time 0; the process is started from 0 at the start of the path."""
    if path.t0 > -burn_in + 1e-12:
        raise InvalidArgumentError("path does not reach back over the burn-in")
    a, c = ou_heun_coefficients(path.dt)
    inc = np.asarray(path.increments, dtype=float)
    z = signal.lfilter([c], [1.0, -a], inc, axis=-1)
    z = np.concatenate([np.zeros(inc.shape[:-1] + (1,)), z], axis=-1)
    return StationaryOu(values=z, dt=path.dt, burn_in=float(burn_in), path=path)


def ou_path(seed: int, stream_id: int, T: float, dt: float = DEFAULT_DT, burn_in: float = 10.0,
            t_past: float = 0.0, channel: int = 0) -> StationaryOu:
    """Stationary OU on ``[-t_past, T]`` after a burn-in of ``burn_in``."""
    return stationary_ou(two_sided_path(seed, stream_id, dt, t_past + burn_in, T, channel), burn_in)


def eta_values(params: FhnParams, z) -> np.ndarray:
    """eta = (0, sigma0 z) with the same Brownian motion as the model."""
    z = np.asarray(z, dtype=float)
    return np.stack([np.zeros_like(z), params.sigma0 * z], axis=-1)


# ---------------------------------------------------------------------------
# additive noise: absorbing ball


def _additive_forcing(params: FhnParams, eta):
    a, b = dissipativity_constants(params)
    u = fhn_drift(params, eta) + eta
    return 2.0 * a + np.einsum("...i,...i->...", u, u) / b


@dataclass(frozen=True)
class RadiusEstimate:
    value: float
    tail_bound: float
    horizon: float


def absorption_radius_additive(params: FhnParams, z: StationaryOu,
                               horizon: Optional[float] = None) -> RadiusEstimate:
    """R* = int_{-inf}^0 [2a + |F(eta_s) + eta_s|^2 / b] e^{bs} ds.

    The integral is cut at ``-horizon`` (default: all of the stored past
    beyond the OU burn-in) and the trapezoid rule is used.  ``tail_bound`` is
    ``max(integrand) e^{-b horizon} / b`` over the sampled part.
    """
    if params.noise.kind != ADDITIVE:
        raise InvalidArgumentError("R* is defined for additive noise")
    _, b = dissipativity_constants(params)
    horizon = z.usable_past if horizon is None else float(horizon)
    k = _grid_steps(horizon, z.dt)
    if k > z.index0:
        raise InvalidArgumentError("horizon exceeds the stored past")
    zz = np.atleast_2d(z.past())[:, -(k + 1):]
    s = -np.arange(k, -1, -1) * z.dt
    f = _additive_forcing(params, eta_values(params, zz))
    vals = np.trapezoid(f * np.exp(b * s), dx=z.dt, axis=-1)
    tail = f.max(axis=-1) * np.exp(-b * horizon) / b
    if np.ndim(z.values) == 1:
        return RadiusEstimate(float(vals[0]), float(tail[0]), horizon)
    return RadiusEstimate(vals, tail, horizon)


def zero_noise_radius(params: FhnParams) -> float:
    """R* with eta = 0: (2a + |F(0)|^2 / b) / b."""
    a, b = dissipativity_constants(params)
    f0 = fhn_drift(params, np.zeros(2))
    return float((2.0 * a + f0 @ f0 / b) / b)


def comparison_solution(params: FhnParams, eta, r0, dt: float) -> np.ndarray:
    """R' = 2a + |F(eta) + eta|^2 / b - b R along ``eta`` (shape (..., n+1, 2)).

    Exponential integrator with trapezoidal forcing, exact for piecewise
    linear forcing up to O(dt^2).
    """
    _, b = dissipativity_constants(params)
    f = _additive_forcing(params, eta)
    e = np.exp(-b * dt)
    rhs = 0.5 * dt * (e * f[..., :-1] + f[..., 1:])
    out = signal.lfilter([1.0], [1.0, -e], rhs, axis=-1,
                         zi=e * np.asarray(r0, dtype=float)[..., None])[0]
    return np.concatenate([np.asarray(r0, dtype=float)[..., None] * np.ones(f.shape[:-1] + (1,)), out],
                          axis=-1)


@dataclass
class AbsorptionReport:
    n_paths: int
    R_star: np.ndarray
    tail_bound: np.ndarray
    comparison_violations: int
    invariance_violations: int
    max_ratio: float
    T: float
    dt: float

    def to_json_dict(self) -> dict:
        return {
            "n_paths": self.n_paths,
            "R_star_median": float(np.median(self.R_star)),
            "tail_bound_max": float(np.max(self.tail_bound)),
            "comparison_violations": self.comparison_violations,
            "invariance_violations": self.invariance_violations,
            "max_ratio": self.max_ratio, "T": self.T, "dt": self.dt,
        }


def absorption_check(params: FhnParams, seed: int, n_paths: int = 100, T: float = 100.0,
                     dt: float = DEFAULT_DT, box=((-2.0, 2.0), (-1.5, 1.5)),
                     burn_in: float = 10.0) -> AbsorptionReport:
    """Pathwise comparison |Y_t|^2 <= R_t with Y = X - eta, additive noise.

    Each path has its own noise.  ``Y_0`` is uniform in ``box``; ``R`` is
    started at ``|Y_0|^2`` (comparison) and at ``R*`` (forward invariance of
    the absorbing ball).  X and eta are advanced by the same Heun map on the
    same increments, which is the Heun map of the random ODE for Y.
    """
    if params.noise.kind != ADDITIVE:
        raise InvalidArgumentError("absorption check uses additive noise")
    _, b = dissipativity_constants(params)
    t_past = 10.0 / b
    n_past = int(np.ceil(t_past / dt))
    n_burn = int(np.ceil(burn_in / dt))
    n_fut = _grid_steps(T, dt)
    inc = BrownianEnsemble(seed, range(n_paths), dt).draw(n_past + n_burn + n_fut)
    path = BrownianPath(dt, inc, seed, None, n_past + n_burn)
    z = stationary_ou(path, burn_in)
    rad = absorption_radius_additive(params, z, n_past * dt)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(0, 99))))
    lo, hi = np.array(box, dtype=float).T
    y0 = lo + (hi - lo) * rng.random((n_paths, 2))
    eta = eta_values(params, z.future())
    x0 = y0 + eta[:, 0]
    xs = integrate(fhn_system(params), x0, path).x          # (n_paths, n+1, 2)
    y = xs - eta
    ny = np.einsum("ijk,ijk->ij", y, y)
    r_cmp = comparison_solution(params, eta, ny[:, 0], dt)
    r_inv = comparison_solution(params, eta, rad.value, dt)
    inside = ny[:, 0] <= rad.value
    return AbsorptionReport(
        n_paths=n_paths, R_star=np.asarray(rad.value), tail_bound=np.asarray(rad.tail_bound),
        comparison_violations=int(np.sum(ny[:, 1:] > r_cmp[:, 1:])),
        invariance_violations=int(np.sum((ny > r_inv)[inside])),
        max_ratio=float(np.max(ny[:, 1:] / r_cmp[:, 1:])), T=T, dt=dt,
    )


# ---------------------------------------------------------------------------
# multiplicative noise: conjugated random ODE


def conjugacy_matrix(sigma0: float, z: float) -> np.ndarray:
    return np.diag([1.0, np.exp(-sigma0 * z)])


def rde_rhs(params: FhnParams, z, y) -> np.ndarray:
    """G(z, Y) for Y = (v, wbar) = T(z) X."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    s = params.sigma0
    v, wb = y[..., 0], y[..., 1]
    eps = params.epsilon
    out = np.empty(np.broadcast_shapes(y.shape, z.shape + (2,)))
    out[..., 0] = v - v * v * v / 3.0 - np.exp(s * z) * wb + params.I
    out[..., 1] = (np.exp(-s * z) * eps * (v + params.alpha)
                   + (s * z - eps * params.beta) * wb)
    return out


@dataclass(frozen=True)
class ConjugateSystem:
    params: FhnParams
    z: StationaryOu

    def rhs(self, k: int, y):
        """G at grid index ``k`` counted from time 0."""
        return rde_rhs(self.params, self.z.future()[..., k], y)

    def solve(self, x0, n_steps: Optional[int] = None):
        """Heun for the random ODE from ``X_0 = x0``.

        Returns ``(t, Y, X)`` with ``X = T(z)^-1 Y``.
        """
        zf = self.z.future()
        n = zf.shape[-1] - 1 if n_steps is None else int(n_steps)
        dt = self.z.dt
        s = self.params.sigma0
        x0 = np.asarray(x0, dtype=float)
        y = x0 * np.array([1.0, np.exp(-s * zf[0])])
        ys = np.empty((n + 1, 2))
        ys[0] = y
        for k in range(n):
            g0 = rde_rhs(self.params, zf[k], y)
            yp = y + dt * g0
            y = y + 0.5 * dt * (g0 + rde_rhs(self.params, zf[k + 1], yp))
            ys[k + 1] = y
        xs = ys.copy()
        xs[:, 1] *= np.exp(s * zf[: n + 1])
        return np.arange(n + 1) * dt, ys, xs


def conjugate_multiplicative(params: FhnParams, z: StationaryOu) -> ConjugateSystem:
    if params.noise.kind != MULTIPLICATIVE:
        raise InvalidArgumentError("the conjugacy applies to multiplicative noise")
    if np.ndim(z.values) != 1:
        raise InvalidArgumentError("conjugacy expects a single OU path")
    return ConjugateSystem(params, z)


@dataclass
class RoundTripResult:
    dts: list
    sup_diffs: list

    @property
    def ratios(self):
        d = self.sup_diffs
        return [d[i] / d[i + 1] if d[i + 1] > 0 else np.inf for i in range(len(d) - 1)]


def conjugacy_roundtrip(params: FhnParams, x0, seed: int, T: float = 100.0, dt: float = DEFAULT_DT,
                        levels: int = 2, burn_in: float = 10.0, stream_id: int = 0) -> RoundTripResult:
    """Random ODE mapped back versus direct Stratonovich Heun, same Brownian path.

    The finest grid has step ``dt / 2**(levels-1)``; coarser grids sum its
    increments.  Returns the sup-norm difference of X over [0, T] per step.
    """
    fine = dt / 2 ** (levels - 1)
    base = two_sided_path(seed, stream_id, fine, burn_in, T)
    dts, diffs = [], []
    for lvl in range(levels):
        f = 2 ** (levels - 1 - lvl)
        p = coarsen(base, f) if f > 1 else base
        z = stationary_ou(p, burn_in)
        _, _, x_rde = conjugate_multiplicative(params, z).solve(x0)
        x_sde = integrate(fhn_system(params), x0, p).x
        dts.append(p.dt)
        diffs.append(float(np.max(np.abs(x_rde - x_sde))))
    return RoundTripResult(dts, diffs)


def p_coefficient(params: FhnParams, z):
    z = np.asarray(z, dtype=float)
    s, eps, beta = params.sigma0, params.epsilon, params.beta
    eb = eps * beta
    bracket = 1.0 + (eps * np.exp(-s * z) - np.exp(s * z)) ** 2 / (2.0 * eb) - s * z + eb / 2.0
    return 3.0 * bracket ** 2 + 4.0 / eb * (params.I ** 2 + eps ** 2 * params.alpha ** 2 * np.exp(-2.0 * s * z))


def q_coefficient(params: FhnParams, z):
    return params.sigma0 * np.asarray(z, dtype=float) - params.epsilon * params.beta / 4.0


def radius_multiplicative(params: FhnParams, z: StationaryOu, horizon: Optional[float] = None) -> float:
    """Rbar = int_{-inf}^0 p(z_s) exp(int_s^0 q(z_u) du) ds, cut at ``-horizon``."""
    horizon = z.usable_past if horizon is None else float(horizon)
    k = _grid_steps(horizon, z.dt)
    if k > z.index0:
        raise InvalidArgumentError("horizon exceeds the stored past")
    zz = z.past()[..., -(k + 1):]
    q = q_coefficient(params, zz)
    # int_s^0 q, accumulated backwards from time 0
    seg = 0.5 * z.dt * (q[..., 1:] + q[..., :-1])
    tail = np.concatenate([np.cumsum(seg[..., ::-1], axis=-1)[..., ::-1], np.zeros(q.shape[:-1] + (1,))],
                          axis=-1)
    vals = np.trapezoid(p_coefficient(params, zz) * np.exp(tail), dx=z.dt, axis=-1)
    return float(vals) if np.ndim(vals) == 0 else vals


@dataclass(frozen=True)
class BirkhoffResult:
    average: float
    se: float
    T: float
    n_batches: int


def birkhoff_average(values, dt: float, n_batches: int = 100) -> BirkhoffResult:
    """Time average of a grid function with a batch-means standard error."""
    x = np.asarray(values, dtype=float)
    n = (len(x) // n_batches) * n_batches
    if n_batches < 2 or n == 0:
        raise InvalidArgumentError("need at least two non-empty batches")
    means = x[:n].reshape(n_batches, -1).mean(axis=1)
    return BirkhoffResult(float(x.mean()), float(means.std(ddof=1) / np.sqrt(n_batches)),
                          float((len(x) - 1) * dt), n_batches)


def q_birkhoff(params: FhnParams, seed: int, T: float = 1.0e4, dt: float = DEFAULT_DT,
               stream_id: int = 0, n_batches: int = 100) -> BirkhoffResult:
    z = ou_path(seed, stream_id, T, dt)
    return birkhoff_average(q_coefficient(params, z.future()), dt, n_batches)


# ---------------------------------------------------------------------------
# temperedness


def temperedness_estimate(sigma0: float, z_t: float, t: float) -> float:
    """(1/t) log |T(z_t)| with the spectral norm max(1, exp(-sigma0 z))."""
    if not t > 0:
        raise InvalidArgumentError("t must be positive")
    return float(max(0.0, -sigma0 * z_t) / t)


def temperedness_check(z: StationaryOu, sigma0: float) -> float:
    zf = z.future()
    t = (zf.shape[-1] - 1) * z.dt
    return temperedness_estimate(sigma0, float(zf[-1]), t)


@dataclass(frozen=True)
class TemperedTrend:
    T: float
    mean_T: float
    mean_2T: float
    ratio: float
    ratio_se: float


def temperedness_trend(sigma0: float, seed: int, T: float = 1.0e4, n_seeds: int = 20,
                       dt: float = DEFAULT_DT) -> TemperedTrend:
    """Mean |estimate| over ``n_seeds`` paths at T and at 2T.

    ``t * estimate`` is stationary in t, so the ratio of the two means should
    be close to 2.  ``ratio_se`` is a delta-method standard error.
    """
    a, b = [], []
    for j in range(n_seeds):
        z = ou_path(seed, j, 2.0 * T, dt)
        zf = z.future()
        a.append(temperedness_estimate(sigma0, float(zf[_grid_steps(T, dt)]), T))
        b.append(temperedness_estimate(sigma0, float(zf[-1]), 2.0 * T))
    a, b = np.array(a), np.array(b)
    ma, mb = a.mean(), b.mean()
    if mb == 0:
        return TemperedTrend(T, ma, mb, np.inf, np.inf)
    ratio = ma / mb
    rel = np.sqrt((a.std(ddof=1) / ma) ** 2 / n_seeds + (b.std(ddof=1) / mb) ** 2 / n_seeds) if ma > 0 else np.inf
    return TemperedTrend(T, float(ma), float(mb), float(ratio), float(ratio * rel))


# ---------------------------------------------------------------------------
# pullback


@dataclass
class PullbackResult:
    times: np.ndarray
    separations: np.ndarray      # (n_paths, n_horizons)
    radius_estimate: float

    @property
    def median(self) -> np.ndarray:
        return np.median(self.separations, axis=0)

    def fraction_below(self, tol: float, horizon_index: int = -1) -> float:
        return float(np.mean(self.separations[:, horizon_index] < tol))

    def to_pairs(self):
        return [(float(t), float(s)) for t, s in zip(self.times, self.median)]


def pullback_experiment(params: FhnParams, x_set, horizons, seed: int, n_paths: int = 1,
                        dt: float = DEFAULT_DT) -> PullbackResult:
    """Images at time 0 of ``x_set`` started at ``-t`` under one fixed noise.

    Path ``j`` uses stream ``j`` of ``seed``; every horizon re-bases that
    single two-sided path with the Wiener shift.  The separation is the
    largest pairwise distance between the images; ``radius_estimate`` the
    largest distance of an image from X_e at the longest horizon.
    """
    x_set = np.atleast_2d(np.asarray(x_set, dtype=float))
    horizons = np.asarray(horizons, dtype=float)
    if len(x_set) < 2:
        raise InvalidArgumentError("need at least two initial states")
    if np.any(np.diff(horizons) <= 0) or horizons[0] <= 0:
        raise InvalidArgumentError("horizons must be positive and increasing")
    n_max = _grid_steps(horizons[-1], dt)
    inc = BrownianEnsemble(seed, range(n_paths), dt).draw(n_max)
    path = BrownianPath(dt, inc, seed, None, n_max)
    system = fhn_system(params)
    xe = fixed_point(params).state
    seps = np.empty((n_paths, len(horizons)))
    radius = 0.0
    for h, t in enumerate(horizons):
        shifted = wiener_shift(path, -t)
        nsteps = _grid_steps(t, dt)
        images = np.stack([
            integrate(system, np.tile(x, (n_paths, 1)), shifted, n_steps=nsteps, record=False).x
            for x in x_set
        ])                                                   # (n_states, n_paths, 2)
        d = np.linalg.norm(images[:, None] - images[None, :], axis=-1)
        seps[:, h] = d.max(axis=(0, 1))
        if h == len(horizons) - 1:
            radius = float(np.linalg.norm(images - xe, axis=-1).max())
    return PullbackResult(times=horizons, separations=seps, radius_estimate=radius)


def verify_attractor(params: FhnParams, seed: int, quick: bool = False, n_paths: Optional[int] = None,
                     horizons=(50.0, 200.0, 800.0)) -> dict:
    """Summary record of the attractor checks for additive noise."""
    p_add = params.with_noise(kind=ADDITIVE)
    fp = fixed_point(p_add)
    path = two_sided_path(seed, 0, DEFAULT_DT, 0.0, 20.0)
    cdev = cocycle_check(p_add, fp.state + np.array([0.3, 0.3]), path, 10.0, 10.0)
    _, b = dissipativity_constants(p_add)
    z = ou_path(seed, 1, 0.0, DEFAULT_DT, t_past=np.ceil(10.0 / b))
    rstar = absorption_radius_additive(p_add, z)
    if n_paths is None:
        n_paths = 10 if quick else 100
    pb = pullback_experiment(p_add, [fp.state, fp.state + np.array([0.3, 0.3])], horizons,
                             seed, n_paths=n_paths)
    T = 1.0e3 if quick else 1.0e4
    bk = q_birkhoff(params.with_noise(kind=MULTIPLICATIVE), seed, T=T, stream_id=2)
    zt = ou_path(seed, 3, T)
    return {
        "cocycle_dev": cdev,
        "R_star": rstar.value,
        "R_star_tail_bound": rstar.tail_bound,
        "pullback": pb.to_pairs(),
        "pullback_fraction_below_1e-2": pb.fraction_below(1e-2),
        "birkhoff_avg": bk.average,
        "birkhoff_se": bk.se,
        "tempered_est": temperedness_check(zt, params.sigma0),
    }
