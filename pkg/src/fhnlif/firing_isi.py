"""Firing mechanism and interspike-interval statistics.

Spikes are upward crossings of ``v = 0``.  The conditional probability of
firing is estimated from short FHN paths started on the line
``L = {(v_e, w): w <= w_e}``, fitted by a sigmoid in the distance ``l`` to the
resting state, mapped to normal-form radius, and turned into a hazard rate for
the radial models.  The ISI density of a radial model follows from the
survival identity ``g(t) = E[alpha(R_t) exp(-int_0^t alpha(R_s) ds)]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import stats

from .errors import FitFailureError, InvalidArgumentError
from .fhn_model import ADDITIVE, FhnParams, fixed_point
from .lif_reduction import LifModel, simulate_radial
from .linearization import NormalForm
from .sde_engine import DEFAULT_DT, BrownianEnsemble

#: w-coordinate where the separatrix meets L, used verbatim for the grid spacing.
SEPARATRIX_W = -0.453
SEPARATRIX_DISTANCE = 0.05
N_GRID_POINTS = 35


# ---------------------------------------------------------------------------
# vectorised FHN stepping

def fhn_heun(params: FhnParams, v, w, db, dt):
    """Stochastic Heun step of the FHN system on component arrays."""
    I, a, b, e = params.I, params.alpha, params.beta, params.epsilon
    s0 = params.sigma0
    mult = params.noise.kind != ADDITIVE
    f0 = v - v * v * v / 3.0 - w + I
    g0 = e * (v + a - b * w)
    h0 = s0 * w if mult else s0
    vp = v + f0 * dt
    wp = w + g0 * dt + h0 * db
    f1 = vp - vp * vp * vp / 3.0 - wp + I
    g1 = e * (vp + a - b * wp)
    h1 = s0 * wp if mult else s0
    return v + 0.5 * (f0 + f1) * dt, w + 0.5 * (g0 + g1) * dt + 0.5 * (h0 + h1) * db


def detect_spike(trajectory, dt: Optional[float] = None):
    """First upward crossing of v = 0 as ``(time, state)``, or None.

    Accepts a :class:`~fhnlif.sde_engine.Trajectory` or a state array of
    shape ``(n, 2)`` together with ``dt``.
    """
    if hasattr(trajectory, "x"):
        x, t = np.asarray(trajectory.x), np.asarray(trajectory.t)
    else:
        x = np.asarray(trajectory)
        t = np.arange(len(x)) * (dt if dt is not None else 1.0)
    v = x[:, 0]
    hit = np.flatnonzero((v[:-1] < 0) & (v[1:] >= 0))
    if hit.size == 0:
        return None
    k = hit[0]
    frac = -v[k] / (v[k + 1] - v[k])
    return t[k] + frac * (t[k + 1] - t[k]), x[k + 1]


# ---------------------------------------------------------------------------
# conditional firing probability

@dataclass(frozen=True)
class FiringProbeGrid:
    delta: float
    points: np.ndarray
    trials_per_point: int = 1000

    @property
    def distances(self) -> np.ndarray:
        return np.arange(len(self.points)) * self.delta


def probe_grid(params: FhnParams, trials_per_point: int = 1000, n_points: int = N_GRID_POINTS) -> FiringProbeGrid:
    fp = fixed_point(params)
    delta = abs(fp.w_e - SEPARATRIX_W) / 20.0
    i = np.arange(n_points)
    pts = np.column_stack([np.full(n_points, fp.v_e), fp.w_e - i * delta])
    return FiringProbeGrid(delta=delta, points=pts, trials_per_point=int(trials_per_point))


@dataclass
class FiringTable:
    sigma0: float
    l: np.ndarray
    p_hat: np.ndarray
    se: np.ndarray
    n_trials: int
    n_capped: np.ndarray = None

    def rows(self):
        for i, (l, p, s) in enumerate(zip(self.l, self.p_hat, self.se)):
            yield self.sigma0, i, l, p, s


def estimate_firing_prob(
    params: FhnParams,
    grid: FiringProbeGrid,
    seed: int,
    dt: float = DEFAULT_DT,
    cap_periods: float = 3.0,
    chunk: int = 500,
) -> FiringTable:
    """Fraction of first-cycle spikes for paths started at every grid point.

    A trial ends at its first spike, or when the unwound angle of ``X - X_e``
    has turned by a full revolution in the rotation sense of the linearised
    flow (no spike), or after ``cap_periods`` periods ``2 pi / nu`` (no spike).
    Trial ``j`` at grid point ``i`` uses stream ``i * trials_per_point + j`` so
    runs at different noise amplitudes share their Brownian paths.
    """
    if not params.sigma0 > 0:
        raise InvalidArgumentError("sigma0 must be positive")
    fp = fixed_point(params)
    n_pts = len(grid.points)
    N = grid.trials_per_point
    # rotation sense of X - X_e under DF(X_e): sign of the (2,1) entry
    direction = np.sign(fp.jacobian[1, 0]) or 1.0
    n_total = n_pts * N
    v = np.repeat(grid.points[:, 0], N).astype(float)
    w = np.repeat(grid.points[:, 1], N).astype(float)
    point_of = np.repeat(np.arange(n_pts), N)
    spiked = np.zeros(n_total, dtype=bool)
    capped = np.zeros(n_total, dtype=bool)
    ang = np.arctan2(w - fp.w_e, v - fp.v_e)
    wind = np.zeros(n_total)
    active = np.arange(n_total)
    noise = BrownianEnsemble(seed, np.arange(n_total), dt)
    n_cap = int(np.ceil(cap_periods * 2.0 * np.pi / fp.nu / dt))
    two_pi = 2.0 * np.pi
    k = 0
    while k < n_cap and active.size:
        m = min(chunk, n_cap - k)
        inc = noise.draw(m, rows=active)
        va, wa = v[active], w[active]
        an, wd = ang[active], wind[active]
        live = np.ones(active.size, dtype=bool)
        done_spike = np.zeros(active.size, dtype=bool)
        for j in range(m):
            vn, wn = fhn_heun(params, va, wa, inc[:, j], dt)
            sp = live & (va < 0) & (vn >= 0)
            a_new = np.arctan2(wn - fp.w_e, vn - fp.v_e)
            d = a_new - an
            d -= two_pi * np.round(d / two_pi)
            wd = wd + d
            an = a_new
            cyc = live & ~sp & (direction * wd >= two_pi)
            done_spike |= sp
            live &= ~(sp | cyc)
            va, wa = vn, wn
            if not live.any():
                break
        k += m
        spiked[active[done_spike]] = True
        v[active], w[active] = va, wa
        ang[active], wind[active] = an, wd
        active = active[live]
    capped[active] = True
    counts = np.bincount(point_of, weights=spiked, minlength=n_pts)
    p_hat = counts / N
    se = np.sqrt(p_hat * (1.0 - p_hat) / N)
    n_capped = np.bincount(point_of, weights=capped, minlength=n_pts).astype(int)
    return FiringTable(params.sigma0, grid.distances, p_hat, se, N, n_capped)


# ---------------------------------------------------------------------------
# sigmoid regression

def sigmoid(l, a, b):
    return 1.0 / (1.0 + np.exp((a - np.asarray(l, dtype=float)) / b))


@dataclass(frozen=True)
class SigmoidFit:
    a: float
    b: float
    sigma0: float
    residual: float
    a_star: float = np.nan
    b_star: float = np.nan
    nu: float = np.nan
    iterations: int = 0

    def to_json_dict(self) -> dict:
        return {"sigma0": self.sigma0, "a": self.a, "b": self.b, "a_star": self.a_star,
                "b_star": self.b_star, "residual": self.residual}


def _initial_guess(l, y):
    above = np.flatnonzero(y >= 0.5)
    k = above[0]
    if k == 0:
        a0 = l[0]
    else:
        a0 = l[k - 1] + (0.5 - y[k - 1]) * (l[k] - l[k - 1]) / (y[k] - y[k - 1])

    def cross(level):
        idx = np.flatnonzero(y >= level)
        return l[idx[0]] if idx.size else l[-1]

    spread = (cross(0.75) - cross(0.25)) / (2.0 * np.log(3.0))
    step = np.min(np.diff(l)) if len(l) > 1 else 1.0
    return a0, max(spread, step / 4.0)


def fit_sigmoid(table, tol: float = 1e-10, max_iter: int = 200) -> SigmoidFit:
    """Least-squares fit of p(l) = 1/(1 + exp((a - l)/b)) by Levenberg-Marquardt.

    ``table`` is a :class:`FiringTable` or a pair ``(l, p_hat)``.  Points with
    p_hat in {0, 1} are kept; fitting is unweighted.
    """
    if isinstance(table, FiringTable):
        l, y, s0 = np.asarray(table.l, float), np.asarray(table.p_hat, float), table.sigma0
    else:
        l, y = (np.asarray(c, dtype=float) for c in table[:2])
        s0 = float(table[2]) if len(table) > 2 else np.nan
    if len(l) < 5:
        raise FitFailureError("need at least 5 grid points")
    if np.all(y <= 0) or np.all(y >= 1):
        raise FitFailureError("degenerate table: all estimates are 0 or all are 1")

    a, b = _initial_guess(l, y)

    def resid(a, b):
        return sigmoid(l, a, b) - y

    r = resid(a, b)
    ssr = r @ r
    lam = 1e-3
    it = 0
    for it in range(1, max_iter + 1):
        p = sigmoid(l, a, b)
        dp = p * (1.0 - p)
        J = np.column_stack([-dp / b, dp * (a - l) / b ** 2])
        JtJ = J.T @ J
        g = J.T @ r
        improved = False
        step = np.zeros(2)
        for _ in range(60):
            H = JtJ + lam * np.diag(np.maximum(np.diag(JtJ), 1e-300))
            try:
                step = np.linalg.solve(H, -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            a_n, b_n = a + step[0], b + step[1]
            if b_n > 0:
                r_n = resid(a_n, b_n)
                ssr_n = r_n @ r_n
                if ssr_n <= ssr:
                    a, b, r, ssr = a_n, b_n, r_n, ssr_n
                    lam = max(lam / 3.0, 1e-12)
                    improved = True
                    break
            lam *= 2.0
        if not improved or np.linalg.norm(step) < tol:
            break
    return SigmoidFit(a=float(a), b=float(b), sigma0=s0, residual=float(ssr), iterations=it)


def step_fit_residual(l, y) -> float:
    """Smallest SSR of a 0/1 step placed between grid points."""
    l, y = np.asarray(l, float), np.asarray(y, float)
    best = np.inf
    for k in range(len(l) + 1):
        pred = np.r_[np.zeros(k), np.ones(len(l) - k)]
        best = min(best, float(((pred - y) ** 2).sum()))
    return best


def transform_fit(fit: SigmoidFit, nf: NormalForm) -> SigmoidFit:
    c = nf.distance_scale
    return replace(fit, a_star=c * fit.a, b_star=c * fit.b, nu=nf.nu)


def hazard_rate(fit: SigmoidFit, r):
    """(nu / 2 pi) p*(r); ``fit`` must carry transformed parameters."""
    if not np.isfinite(fit.a_star) or not np.isfinite(fit.nu):
        raise InvalidArgumentError("hazard needs a transformed fit (use transform_fit)")
    r = np.asarray(r, dtype=float)
    return fit.nu / (2.0 * np.pi) * sigmoid(r, fit.a_star, fit.b_star)


# ---------------------------------------------------------------------------
# ISI densities

@dataclass
class IsiDensity:
    t: np.ndarray
    g: np.ndarray
    se: np.ndarray
    M: int
    n: int
    model: str
    n_reflections: int = 0

    @property
    def mass(self) -> float:
        return float(np.trapezoid(self.g, self.t))

    def cdf(self) -> np.ndarray:
        c = np.concatenate([[0.0], np.cumsum(0.5 * (self.g[1:] + self.g[:-1]) * np.diff(self.t))])
        return c

    def cdf_at(self, x):
        return np.interp(x, self.t, self.cdf())


def density_grid(t_max: float = 3000.0, n_points: int = 150) -> np.ndarray:
    return np.linspace(0.0, t_max, n_points)


def isi_density(
    lif: LifModel,
    fit: SigmoidFit,
    t_grid,
    M: int,
    n: int,
    seed: int,
    dt: float = DEFAULT_DT,
    channel: int = 1,
) -> IsiDensity:
    """Monte Carlo estimate of g(t) with an n-panel trapezoidal hazard integral.

    Radial paths start at the reset state; the values at ``i t / n`` are read
    off the nearest integration step.
    """
    if M < 1 or n < 1:
        raise InvalidArgumentError("M and n must be positive")
    t_grid = np.asarray(t_grid, dtype=float)
    n_steps = int(round(t_grid.max() / dt))
    sub = t_grid[:, None] * np.arange(n + 1)[None, :] / n
    idx = np.rint(sub / dt).astype(np.int64)
    need = np.unique(idx)
    paths = simulate_radial(lif, lif.reset_state, n_steps, dt, seed, np.arange(M),
                            channel=channel, save_steps=need)
    pos = np.searchsorted(need, idx)
    haz = hazard_rate(fit, paths.r)            # (M, len(need))
    h = haz[:, pos]                            # (M, len(t), n+1)
    integral = (t_grid / n)[None, :] * (0.5 * (h[:, :, 0] + h[:, :, -1]) + h[:, :, 1:-1].sum(axis=2))
    samples = h[:, :, -1] * np.exp(-integral)
    g = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / np.sqrt(M) if M > 1 else np.zeros_like(g)
    return IsiDensity(t=t_grid, g=g, se=se, M=M, n=n, model=lif.kind,
                      n_reflections=paths.n_reflections)


@dataclass
class IsiSample:
    isis: np.ndarray
    n_censored: int
    t_max: float
    sigma0: float


def isi_histogram(
    params: FhnParams,
    n_spikes: int,
    seed: int,
    dt: float = DEFAULT_DT,
    t_max: float = 1e5,
    chunk: int = 2000,
    x0=None,
    channel: int = 2,
) -> IsiSample:
    """First-spike times of FHN paths started at X_e (reset there after firing).

    Each interval is an independent trial on its own stream of ``channel``.
    Trials still silent at ``t_max`` are censored and left out of ``isis``.
    """
    fp = fixed_point(params)
    start = fp.state if x0 is None else np.asarray(x0, float)
    v = np.full(n_spikes, start[0])
    w = np.full(n_spikes, start[1])
    times = np.full(n_spikes, np.nan)
    active = np.arange(n_spikes)
    n_max = int(round(t_max / dt))
    if params.sigma0 == 0:
        # noise-free paths rest at the stable fixed point
        return IsiSample(np.array([]), n_spikes, t_max, 0.0)
    noise = BrownianEnsemble(seed, np.arange(n_spikes), dt, channel=channel)
    k = 0
    while k < n_max and active.size:
        m = min(chunk, n_max - k)
        inc = noise.draw(m, rows=active)
        va, wa = v[active], w[active]
        hit_t = np.full(active.size, np.nan)
        live = np.ones(active.size, dtype=bool)
        for j in range(m):
            vn, wn = fhn_heun(params, va, wa, inc[:, j], dt)
            sp = live & (va < 0) & (vn >= 0)
            if sp.any():
                frac = -va[sp] / (vn[sp] - va[sp])
                hit_t[sp] = (k + j + frac) * dt
                live &= ~sp
                if not live.any():
                    va, wa = vn, wn
                    break
            va, wa = vn, wn
        k += m
        times[active] = np.where(np.isnan(hit_t), times[active], hit_t)
        v[active], w[active] = va, wa
        active = active[live]
    isis = times[~np.isnan(times)]
    return IsiSample(isis=isis, n_censored=int(np.isnan(times).sum()), t_max=t_max,
                     sigma0=params.sigma0)


def ks_to_density(sample, dens: IsiDensity) -> float:
    """Kolmogorov-Smirnov distance between a sample and a gridded density."""
    x = np.sort(np.asarray(sample, dtype=float))
    nx = len(x)
    F = dens.cdf_at(x)
    upper = np.arange(1, nx + 1) / nx - F
    lower = F - np.arange(nx) / nx
    return float(max(upper.max(), lower.max()))


def ks_between_densities(d1: IsiDensity, d2: IsiDensity) -> float:
    if not np.array_equal(d1.t, d2.t):
        raise InvalidArgumentError("densities must share a time grid")
    return float(np.abs(d1.cdf() - d2.cdf()).max())


@dataclass
class IsiResult:
    empirical: IsiSample
    densities: dict
    ks: dict = field(default_factory=dict)


def compare_isi(sample: IsiSample, densities: dict) -> IsiResult:
    ks = {}
    names = list(densities)
    for name in names:
        ks[f"empirical-vs-{name}"] = ks_to_density(sample.isis, densities[name])
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            ks[f"{a}-vs-{b}"] = ks_between_densities(densities[a], densities[b])
    return IsiResult(sample, densities, ks)


def spearman(x, y) -> float:
    return float(stats.spearmanr(x, y).statistic)
