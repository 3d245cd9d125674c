import json

import numpy as np
import pytest
from scipy import stats

from fhnlif.errors import SingularityError
from fhnlif.fhn_model import FhnParams
from fhnlif.linearization import normal_form
from fhnlif.lif_reduction import (averaged_process, integrate_radial, inverse_transform_state,
                                  period_averaged_drift, polar_radial_model, radial_ou_model,
                                  sigma_eff, sigma_eff_trace, simulate_normal_form, simulate_radial,
                                  transform_state)
from fhnlif.sde_engine import BrownianEnsemble, brownian_path

P = FhnParams()
NF = normal_form(P)


def test_transform_zero_and_round_trip():
    assert np.array_equal(transform_state(NF, np.zeros(2)), np.zeros(2))
    x = np.random.default_rng(0).normal(size=(100, 2))
    assert np.abs(inverse_transform_state(NF, transform_state(NF, x)) - x).max() < 1e-12


def test_distance_map():
    for l in (0.01, 0.05, 0.3):
        r = np.linalg.norm(transform_state(NF, [0.0, l]))
        assert r == pytest.approx(np.sqrt(-NF.m12 / (NF.m21 * NF.nu ** 2)) * l, rel=1e-12)
        assert r / l == pytest.approx(12.565, abs=1e-3)


def test_sigma_eff_values():
    assert sigma_eff(P.with_noise(0.0)) == 0.0
    assert sigma_eff(P) == pytest.approx(0.08885, abs=1e-5)
    for s0 in (0.001, 0.01, 0.3):
        params = P.with_noise(s0)
        assert abs(sigma_eff(params) - sigma_eff_trace(params)) < 1e-10


def test_radial_drift_root_and_singularity():
    m = radial_ou_model(P)
    assert m.drift_root == pytest.approx(0.3554, abs=1e-4)
    assert abs(m.drift(m.drift_root)) < 1e-12
    with pytest.raises(SingularityError):
        m.drift(0.0)
    with pytest.raises(SingularityError):
        m.drift(np.array([0.1, -0.2]))


def test_radial_long_run_mean():
    m = radial_ou_model(P)
    dt = 0.01
    n = 1_000_000
    paths = simulate_radial(m, m.drift_root, n, dt, seed=1, stream_ids=np.arange(8), save_every=100)
    burn = int(200 / (100 * dt))
    mean = paths.r[:, burn:].mean()
    assert abs(mean - m.stationary_mean) <= 0.1 * m.stationary_mean


def test_radial_noise_free_decay():
    m = radial_ou_model(P.with_noise(0.0))
    paths = simulate_radial(m, 0.3, 5000, 0.01, seed=1, stream_ids=[0])
    exact = 0.3 * np.exp(-m.mu * paths.t)
    assert np.abs(paths.r[0] - exact).max() < 1e-3 * 0.3
    assert paths.n_reflections == 0


def test_simulate_radial_matches_generic_engine():
    for m in (radial_ou_model(P), polar_radial_model(P)):
        a = simulate_radial(m, 0.3, 2000, 0.01, seed=4, stream_ids=[0]).r[0]
        b = integrate_radial(m, 0.3, brownian_path(4, 0, 0.01, 2000)).x[:, 0]
        assert np.abs(a - b).max() < 1e-12


def test_polar_constants_from_h_e():
    m = polar_radial_model(P)
    assert (m.h_e @ m.h_e) / 0.01 ** 2 == pytest.approx(157.88, abs=0.01)
    assert abs(m.diffusion(1.0, 0.0) / 0.01 - 12.5) < 1e-2
    t = 3.7
    expected = (NF.h_e[0] * np.sin(NF.nu * t) + NF.h_e[1] * np.cos(NF.nu * t))
    assert m.diffusion(1.0, t) == pytest.approx(expected, rel=1e-12)


def test_period_averaged_polar_drift_is_radial_ou():
    m = polar_radial_model(P)
    ou = radial_ou_model(P)
    assert ou.sigma_eff ** 2 == pytest.approx((m.h_e @ m.h_e) / 2, rel=1e-12)
    r = np.array([0.05, 0.2, 0.5, 1.3])
    assert np.abs(period_averaged_drift(m, r) - ou.drift(r)).max() < 1e-6


def test_polar_phase_knob():
    m = polar_radial_model(P, phase=np.pi / 2)
    assert m.diffusion(1.0, 0.0) == pytest.approx(NF.h_e[0], rel=1e-12)


def _averaged(seed, n, y0):
    ds = NF.mu * 0.01
    inc = np.vstack([BrownianEnsemble(seed, [0], ds, channel=c).draw(n)[0] for c in (0, 1)])
    return averaged_process(P, (inc, ds), y0, NF)


def test_averaged_process_rotation_invariance_and_start():
    y0 = np.array([0.02, -0.01])
    t, yapp, sc = _averaged(1, 5000, y0)
    assert np.allclose(yapp[0], y0, atol=1e-15)
    assert np.abs(np.linalg.norm(yapp, axis=1) - np.linalg.norm(sc, axis=1)).max() < 1e-12
    assert t[1] == pytest.approx(0.01)


def test_averaged_process_spectrum_matches_normal_form():
    from fhnlif.spectral import estimate_psd, scale_to_max, spectral_overlap
    y0 = np.array([0.02, 0.0])
    n, dt = 5000, 0.01
    _, yb = simulate_normal_form(P, y0, n, dt, seed=1, stream_ids=np.arange(20), nf=NF)
    ds = NF.mu * dt
    a = BrownianEnsemble(1, np.arange(20), ds, channel=3).draw(n)
    b = BrownianEnsemble(1, np.arange(20), ds, channel=4).draw(n)
    napp = np.array([np.linalg.norm(averaged_process(P, (np.vstack([a[i], b[i]]), ds), y0, NF)[1], axis=1)
                     for i in range(20)])
    ov = spectral_overlap(scale_to_max(estimate_psd(np.linalg.norm(yb, axis=-1), dt)),
                          scale_to_max(estimate_psd(napp, dt)))
    assert ov >= 0.9


def test_ito_form_matches_planar_ou_norm():
    m = radial_ou_model(P)
    dt, T, n = 0.01, 50.0, 2000
    steps = int(T / dt)
    r0 = 0.3
    rad = simulate_radial(m, r0, steps, dt, seed=2, stream_ids=np.arange(n), save_steps=[steps]).r[:, -1]
    e1 = BrownianEnsemble(3, np.arange(n), dt, channel=0)
    e2 = BrownianEnsemble(3, np.arange(n), dt, channel=1)
    y = np.zeros((n, 2))
    y[:, 0] = r0
    k = 0
    while k < steps:
        c = min(5000, steps - k)
        d1, d2 = e1.draw(c), e2.draw(c)
        for j in range(c):
            y = y - m.mu * y * dt + m.sigma_eff * np.column_stack([d1[:, j], d2[:, j]])
        k += c
    p = stats.ks_2samp(rad, np.linalg.norm(y, axis=1)).pvalue
    assert p > 0.01


@pytest.fixture(scope="module")
def small_start_paths():
    m = radial_ou_model(P)
    return simulate_radial(m, 0.05, 5000, 0.01, seed=1, stream_ids=np.arange(100), save_every=10)


def test_radial_paths_nonnegative(small_start_paths):
    assert np.all(small_start_paths.r >= 0)
    assert small_start_paths.n_reflections >= 0


@pytest.mark.xfail(strict=True, reason="Euler steps near R = 0 overshoot; reflections are routine")
def test_radial_paths_need_no_reflection(small_start_paths):
    assert small_start_paths.n_reflections == 0


def test_model_summary_is_json():
    d = json.loads(json.dumps(radial_ou_model(P).summary()))
    for k in ("mu", "nu", "sigma_eff", "h_e", "drift_root"):
        assert k in d
    assert d["drift_root"] == pytest.approx(0.3554, abs=1e-4)
