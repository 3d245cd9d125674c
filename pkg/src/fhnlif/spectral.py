"""Welch power spectral densities and a scale-free spectral overlap score."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class Psd:
    freqs: np.ndarray
    power: np.ndarray
    scale: float = 1.0
    n_segments: int = 0

    def to_rows(self):
        return zip(self.freqs, self.power)


def n_welch_segments(n: int, segment_len: int, overlap: float) -> int:
    step = segment_len - int(segment_len * overlap)
    return 1 + (n - segment_len) // step


def estimate_psd(series, dt: float, segment_len: int = None, overlap: float = 0.5,
                 n_segments: int = 8) -> Psd:
    """One-sided Hann-window Welch estimate (density scaling, mean removed).

    ``segment_len`` defaults to the length giving ``n_segments`` half-overlapping
    segments.  A 2-D ``series`` is treated as an ensemble along axis 0 and the
    periodograms are averaged.
    """
    x = np.asarray(series, dtype=float)
    n = x.shape[-1]
    if not 0 <= overlap <= 0.9:
        raise InvalidArgumentError("overlap must lie in [0, 0.9]")
    if segment_len is None:
        segment_len = int(n / (1 + (n_segments - 1) * (1 - overlap)))
        while segment_len > 16 and n_welch_segments(n, segment_len, overlap) < n_segments:
            segment_len -= 1
    if segment_len < 16 or n < segment_len:
        raise InvalidArgumentError(f"series of length {n} too short for segments of {segment_len}")
    noverlap = int(segment_len * overlap)
    f, p = signal.welch(x, fs=1.0 / dt, window="hann", nperseg=segment_len,
                        noverlap=noverlap, detrend="constant", return_onesided=True,
                        scaling="density", axis=-1)
    if p.ndim > 1:
        p = p.reshape(-1, p.shape[-1]).mean(axis=0)
    return Psd(freqs=f, power=np.maximum(p, 0.0), n_segments=n_welch_segments(n, segment_len, overlap))


def scale_to_max(psd: Psd, target: float = 40.0) -> Psd:
    peak = float(np.max(psd.power))
    if not peak > 0:
        raise InvalidArgumentError("cannot rescale an all-zero spectrum")
    c = target / peak
    return Psd(psd.freqs, psd.power * c, psd.scale * c, psd.n_segments)


def spectral_overlap(psd1: Psd, psd2: Psd) -> float:
    """Cosine similarity of two spectra on a common frequency grid."""
    if psd1.freqs.shape != psd2.freqs.shape or not np.allclose(psd1.freqs, psd2.freqs, rtol=1e-12, atol=0):
        raise InvalidArgumentError("spectra must share a frequency grid")
    a, b = psd1.power, psd2.power
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise InvalidArgumentError("overlap of an all-zero spectrum is undefined")
    return float(np.clip(a @ b / (na * nb), 0.0, 1.0))


# ---------------------------------------------------------------------------
# model comparisons

PSD_START = (-1.00125, -0.4)


def compare_shifted_linearized(params, seed: int, n_seeds: int = 20, T: float = 50.0,
                               dt: float = 0.01, x0=PSD_START, target: float = 40.0) -> dict:
    """Overlap of the spectra of X - X_e and of its linearisation.

    Both systems share one Brownian path per seed and start at ``x0 - X_e``.
    Spectra are averaged over seeds, per component, then scaled to a common
    maximum.
    """
    from .fhn_model import fixed_point
    from .linearization import linearized_system, shifted_system
    from .sde_engine import BrownianEnsemble, BrownianPath, integrate

    xe = fixed_point(params).state
    n_steps = int(round(T / dt))
    inc = BrownianEnsemble(seed, range(n_seeds), dt).draw(n_steps)
    path = BrownianPath(dt, inc, seed)
    start = np.tile(np.asarray(x0, float) - xe, (n_seeds, 1))
    full = integrate(shifted_system(params), start, path).x
    lin = integrate(linearized_system(params), start, path).x
    out = {"components": {}}
    for c, name in enumerate(("v", "w")):
        p1 = scale_to_max(estimate_psd(full[..., c], dt), target)
        p2 = scale_to_max(estimate_psd(lin[..., c], dt), target)
        out["components"][name] = {"overlap": spectral_overlap(p1, p2), "freqs": p1.freqs,
                                   "shifted": p1.power, "linearized": p2.power}
    out["overlap"] = min(v["overlap"] for v in out["components"].values())
    out["n_segments"] = p1.n_segments
    out["scale"] = target
    return out


def compare_radial(params, seed: int, n_seeds: int = 20, T: float = 50.0, dt: float = 0.01,
                   x0=PSD_START, target: float = 40.0, phase: float = 0.0) -> dict:
    """Spectra of |Ybar| against the radial OU and polar radial reductions.

    All three start from |Q^-1 (x0 - X_e)|.  The radial equations are driven
    by Brownian motions independent of the one driving Ybar.
    """
    from .fhn_model import fixed_point
    from .lif_reduction import (polar_radial_model, radial_ou_model, simulate_normal_form,
                                simulate_radial, transform_state)
    from .linearization import normal_form

    nf = normal_form(params)
    xe = fixed_point(params).state
    y0 = transform_state(nf, np.asarray(x0, float) - xe)
    r0 = float(np.linalg.norm(y0))
    n_steps = int(round(T / dt))
    ids = np.arange(n_seeds)
    _, ybar = simulate_normal_form(params, y0, n_steps, dt, seed, ids, nf=nf)
    norm_y = np.linalg.norm(ybar, axis=-1)
    r_ou = simulate_radial(radial_ou_model(params), r0, n_steps, dt, seed, ids, channel=1).r
    r_pol = simulate_radial(polar_radial_model(params, phase=phase), r0, n_steps, dt, seed, ids,
                            channel=2).r
    spectra = {name: scale_to_max(estimate_psd(s, dt), target)
               for name, s in (("norm_ybar", norm_y), ("radial_ou", r_ou), ("polar_radial", r_pol))}
    names = list(spectra)
    pairs = {}
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            pairs[f"{a}-vs-{b}"] = spectral_overlap(spectra[a], spectra[b])
    return {"overlap": min(pairs.values()), "pairs": pairs, "spectra": spectra,
            "n_segments": spectra["norm_ybar"].n_segments, "scale": target, "r0": r0}
