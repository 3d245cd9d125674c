"""Seeded Brownian paths and fixed-step SDE integration.

Random streams
--------------
Every trial draws its Gaussian increments from its own counter-based
Philox generator keyed by ``SeedSequence(seed, spawn_key=(stream_id, channel))``.
Trial ``i`` of an ensemble is therefore reproducible in isolation, and the
increments of a stream do not depend on how many steps are drawn per call.
``channel`` separates independent drivers used inside one trial (for example
the two components of a planar Brownian motion).

Schemes
-------
Stratonovich systems are advanced with the stochastic Heun predictor-corrector,
Ito systems with Euler-Maruyama.  States may carry a leading batch axis, in
which case the increments carry the same batch axis and every path is advanced
in lock-step.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import BlowUpError, InvalidArgumentError

STRATONOVICH = "stratonovich"
ITO = "ito"

#: Paths whose Euclidean norm exceeds this are treated as blown up.
BLOWUP_RADIUS = 1.0e6

DEFAULT_DT = 0.01


def stream_generator(seed: int, stream_id: int, channel: int = 0) -> np.random.Generator:
    """Philox generator for one (seed, stream, channel) triple."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id), int(channel)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class BrownianPath:
    """Gaussian increments of a scalar Brownian motion on a uniform grid.

    ``increments`` has shape ``(n_steps,)`` for a single path or
    ``(n_paths, n_steps)`` for an ensemble.  ``origin`` is the number of
    increments lying before model time 0, so the grid covers
    ``[-origin*dt, (n_steps - origin)*dt]``.
    """

    dt: float
    increments: np.ndarray
    seed: Optional[int] = None
    stream_id: Optional[object] = None
    origin: int = 0

    @property
    def n_steps(self) -> int:
        return int(self.increments.shape[-1])

    @property
    def t0(self) -> float:
        return -self.origin * self.dt

    @property
    def batched(self) -> bool:
        return self.increments.ndim == 2

    def forward(self, n_steps: Optional[int] = None) -> np.ndarray:
        """Increments from time 0 onward (``n_steps`` of them, default all)."""
        avail = self.n_steps - self.origin
        if self.origin < 0 or avail < 0:
            raise InvalidArgumentError("time 0 lies outside the stored path")
        if n_steps is None:
            n_steps = avail
        if n_steps > avail:
            raise InvalidArgumentError(f"path holds {avail} steps after time 0, {n_steps} requested")
        return self.increments[..., self.origin:self.origin + n_steps]

    def values(self) -> np.ndarray:
        """Brownian values on the grid, normalised so that B(0) = 0."""
        b = np.concatenate(
            [np.zeros(self.increments.shape[:-1] + (1,)), np.cumsum(self.increments, axis=-1)],
            axis=-1,
        )
        return b - b[..., self.origin:self.origin + 1]

    def times(self) -> np.ndarray:
        return (np.arange(self.n_steps + 1) - self.origin) * self.dt


def brownian_path(seed: int, stream_id: int, dt: float, n_steps: int, channel: int = 0) -> BrownianPath:
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    if n_steps < 0:
        raise InvalidArgumentError(f"n_steps must be non-negative, got {n_steps}")
    gen = stream_generator(seed, stream_id, channel)
    inc = np.sqrt(dt) * gen.standard_normal(int(n_steps))
    return BrownianPath(dt=float(dt), increments=inc, seed=int(seed), stream_id=int(stream_id))


class BrownianEnsemble:
    """Chunked increment source for a batch of independent trials.

    Row ``k`` of every draw continues stream ``stream_ids[k]``; concatenating
    the draws reproduces ``brownian_path(seed, stream_ids[k], dt, n)`` exactly.
    """

    def __init__(self, seed: int, stream_ids: Sequence[int], dt: float, channel: int = 0):
        if not dt > 0:
            raise InvalidArgumentError(f"dt must be positive, got {dt}")
        self.seed = int(seed)
        self.stream_ids = np.asarray(stream_ids, dtype=np.int64)
        self.dt = float(dt)
        self.channel = channel
        self._gens = [stream_generator(seed, s, channel) for s in self.stream_ids]
        self._sqdt = np.sqrt(self.dt)

    def __len__(self):
        return len(self._gens)

    def draw(self, n_steps: int, rows: Optional[np.ndarray] = None) -> np.ndarray:
        """Next ``n_steps`` increments for every trial (or for ``rows`` only).

        Skipped rows do not advance, so callers that retire finished trials
        keep the remaining streams aligned with ``brownian_path``.
        """
        idx = range(len(self._gens)) if rows is None else rows
        out = np.empty((len(idx), n_steps))
        for j, i in enumerate(idx):
            out[j] = self._gens[i].standard_normal(n_steps)
        out *= self._sqdt
        return out

    def path(self, n_steps: int) -> BrownianPath:
        return BrownianPath(dt=self.dt, increments=self.draw(n_steps), seed=self.seed,
                            stream_id=tuple(self.stream_ids.tolist()))


@dataclass(frozen=True)
class SdeSystem:
    """``dX = drift(X, t) dt + diffusion(X, t) dB`` with scalar ``B``.

    Both fields act on arrays of shape ``(..., dim)``.  ``reflecting`` marks
    one-dimensional radial equations whose state is mapped to ``|X|`` after
    every step.
    """

    dim: int
    drift: Callable[[np.ndarray, float], np.ndarray]
    diffusion: Callable[[np.ndarray, float], np.ndarray]
    interpretation: str = STRATONOVICH
    reflecting: bool = False
    name: str = ""

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InvalidArgumentError("only 1-D and 2-D systems are supported")
        if self.interpretation not in (STRATONOVICH, ITO):
            raise InvalidArgumentError(f"unknown interpretation {self.interpretation!r}")


@dataclass(frozen=True)
class Event:
    kind: str
    time: float
    state: np.ndarray
    trial: Optional[int] = None


@dataclass(frozen=True)
class Detector:
    """Upward zero crossing of ``func(x, t)``; ``terminal`` stops the path."""

    func: Callable[[np.ndarray, float], np.ndarray]
    kind: str = "line_crossing"
    terminal: bool = False


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    events: list = field(default_factory=list)
    stop_index: Optional[np.ndarray] = None
    n_reflections: int = 0

    def to_csv(self, path) -> None:
        write_trajectory_csv(self, path)


def heun_step(system: SdeSystem, x, t, dt, db):
    """One stochastic Heun step; ``db`` broadcasts against ``x[..., 0]``."""
    db = np.asarray(db)[..., None]
    f0 = system.drift(x, t)
    g0 = system.diffusion(x, t)
    xp = x + f0 * dt + g0 * db
    f1 = system.drift(xp, t + dt)
    g1 = system.diffusion(xp, t + dt)
    return x + 0.5 * (f0 + f1) * dt + 0.5 * (g0 + g1) * db


def euler_maruyama_step(system: SdeSystem, x, t, dt, db):
    db = np.asarray(db)[..., None]
    return x + system.drift(x, t) * dt + system.diffusion(x, t) * db


def step_function(system: SdeSystem):
    return heun_step if system.interpretation == STRATONOVICH else euler_maruyama_step


def _interp_time(t, dt, g0, g1):
    frac = np.where(g1 != g0, -g0 / np.where(g1 != g0, g1 - g0, 1.0), 0.0)
    return t + np.clip(frac, 0.0, 1.0) * dt


def integrate(
    system: SdeSystem,
    x0,
    path: BrownianPath,
    detectors: Sequence[Detector] = (),
    n_steps: Optional[int] = None,
    t_start: float = 0.0,
    record: bool = True,
) -> Trajectory:
    """Fixed-step integration driven by ``path`` from its time origin.

    Single paths halt at the first terminal event and the trajectory is
    truncated there.  For a batch, terminated paths are frozen and their
    halting step is stored in ``stop_index``.
    """
    x = np.array(x0, dtype=float)
    if x.shape[-1] != system.dim:
        raise InvalidArgumentError(f"state has dimension {x.shape[-1]}, system expects {system.dim}")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("initial state must be finite")
    inc = path.forward(n_steps)
    batched = x.ndim == 2
    if batched and inc.ndim == 1:
        inc = np.broadcast_to(inc, (x.shape[0], inc.shape[0]))
    if not batched and inc.ndim != 1:
        raise InvalidArgumentError("a batched path needs a batch of initial states")
    n = inc.shape[-1]
    dt = path.dt
    step = step_function(system)

    n_paths = x.shape[0] if batched else 1
    active = np.ones(n_paths, dtype=bool)
    stop_index = np.full(n_paths, n, dtype=np.int64)
    states = np.empty((n + 1,) + x.shape) if record else None
    if record:
        states[0] = x
    events = []
    reflections = 0
    gvals = [np.atleast_1d(np.asarray(d.func(x, t_start), dtype=float)) for d in detectors]

    last = 0
    for k in range(n):
        t = t_start + k * dt
        xn = step(system, x, t, dt, inc[..., k])
        if system.reflecting:
            neg = xn < 0
            if neg.any():
                reflections += int(neg.sum())
                xn = np.abs(xn)
        bad = ~np.isfinite(xn).all(axis=-1) | (np.linalg.norm(xn, axis=-1) > BLOWUP_RADIUS)
        if np.any(np.atleast_1d(bad) & active):
            raise BlowUpError(k)
        if batched:
            xn = np.where(active[:, None], xn, x)
        halt = np.zeros(n_paths, dtype=bool)
        for j, d in enumerate(detectors):
            g1 = np.atleast_1d(np.asarray(d.func(xn, t + dt), dtype=float))
            hit = (gvals[j] < 0) & (g1 >= 0) & active
            for i in np.flatnonzero(hit):
                te = float(_interp_time(t, dt, gvals[j][i], g1[i]))
                st = xn[i] if batched else xn
                events.append(Event(d.kind, te, np.array(st), int(i) if batched else None))
                if d.terminal:
                    halt[i] = True
            gvals[j] = g1
        x = xn
        last = k + 1
        if record:
            states[k + 1] = x
        if halt.any():
            stop_index[halt] = k + 1
            active &= ~halt
            if not active.any():
                break

    if record:
        states = states[: last + 1]
        if batched:
            # frozen tail for paths that stopped before the last recorded step
            states = np.swapaxes(states, 0, 1)
    else:
        states = x
    times = t_start + np.arange(last + 1) * dt
    return Trajectory(t=times, x=states, events=events,
                      stop_index=stop_index if batched else None,
                      n_reflections=reflections)


def first_passage(system: SdeSystem, x0, path: BrownianPath, predicate, kind="stop") -> Optional[Event]:
    """First upward zero crossing of ``predicate`` along the path, or None."""
    traj = integrate(system, x0, path, [Detector(predicate, kind, terminal=True)], record=False)
    return traj.events[0] if traj.events else None


def write_trajectory_csv(traj: Trajectory, path) -> None:
    x = np.asarray(traj.x)
    if x.ndim != 2:
        raise InvalidArgumentError("CSV export expects a single trajectory")
    header = ["t"] + [f"x{i + 1}" for i in range(x.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, row in zip(traj.t, x):
            w.writerow([format(t, ".17g")] + [format(v, ".17g") for v in row])


def read_trajectory_csv(path) -> Trajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Trajectory(t=data[:, 0], x=data[:, 1:])
