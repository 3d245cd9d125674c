import numpy as np
import pytest

from fhnlif import attractor_checks as ac
from fhnlif.errors import InvalidArgumentError
from fhnlif.fhn_model import (MULTIPLICATIVE, FhnParams, dissipativity_constants, fhn_drift, fhn_system,
                              fixed_point)
from fhnlif.sde_engine import BrownianPath, brownian_path, integrate

P = FhnParams()
PM = P.with_noise(kind=MULTIPLICATIVE)
XE = fixed_point(P).state


def _path(n=2000, origin=500):
    p = brownian_path(7, 0, 0.01, n)
    return BrownianPath(p.dt, p.increments, p.seed, p.stream_id, origin)


def test_shift_by_zero_is_identity():
    p = _path()
    q = ac.wiener_shift(p, 0.0)
    assert q.origin == p.origin
    assert np.array_equal(q.forward(), p.forward())


def test_shift_group_property():
    p = _path()
    a = ac.wiener_shift(ac.wiener_shift(p, 0.3), 0.5)
    b = ac.wiener_shift(p, 0.8)
    assert np.array_equal(a.forward(), b.forward())
    assert np.array_equal(a.values(), b.values())


def test_shift_moves_increments():
    p = _path()
    q = ac.wiener_shift(p, 1.5)
    assert np.array_equal(q.forward(), p.forward()[150:])
    r = ac.wiener_shift(p, -2.0)
    assert np.array_equal(r.forward()[200:], p.forward())


def test_shift_errors():
    p = _path()
    with pytest.raises(InvalidArgumentError):
        ac.wiener_shift(p, 0.005)
    with pytest.raises(InvalidArgumentError):
        ac.wiener_shift(p, -6.0)
    with pytest.raises(InvalidArgumentError):
        ac.wiener_shift(p, 16.0)


def test_coarsen_sums_blocks():
    p = _path(1000, 100)
    c = ac.coarsen(p, 4)
    assert c.dt == pytest.approx(0.04)
    assert c.origin == 25
    assert np.allclose(c.increments, p.increments.reshape(-1, 4).sum(axis=1))
    with pytest.raises(InvalidArgumentError):
        ac.coarsen(p, 3)


def test_cocycle_trivial_cases():
    p = ac.two_sided_path(1, 0, 0.01, 0.0, 20.0)
    x0 = XE + 0.3
    assert ac.cocycle_check(P, x0, p, 0.0, 10.0) == 0.0
    assert ac.cocycle_check(P, x0, p, 10.0, 0.0) == 0.0


def test_cocycle_identity():
    p = ac.two_sided_path(1, 0, 0.01, 0.0, 20.0)
    assert ac.cocycle_check(P, XE + 0.3, p, 10.0, 10.0) < 1e-9
    assert ac.cocycle_check(PM, XE + 0.3, p, 7.5, 12.5) < 1e-9


def test_stationary_ou_variance():
    z = ac.ou_path(1, 0, 1.0e4)
    assert z.future().var() == pytest.approx(0.5, rel=0.1)
    assert z.index0 == 1000
    assert z.times[z.index0] == 0.0


def test_stationary_ou_needs_burn_in():
    with pytest.raises(InvalidArgumentError):
        ac.stationary_ou(ac.two_sided_path(1, 0, 0.01, 5.0, 1.0), burn_in=10.0)


def test_ou_matches_engine_noise_component():
    from fhnlif.sde_engine import STRATONOVICH, SdeSystem
    z = ac.ou_path(2, 0, 50.0)
    sys = SdeSystem(1, lambda x, t: -x, lambda x, t: np.ones_like(x), STRATONOVICH)
    p = z.path
    ref = integrate(sys, np.zeros(1), BrownianPath(p.dt, p.increments)).x[:, 0]
    assert np.allclose(z.values, ref, rtol=0, atol=1e-12)


def test_zero_noise_radius_closed_form():
    a, b = dissipativity_constants(P)
    expected = (2 * a + (P.I ** 2 + (P.epsilon * P.alpha) ** 2) / b) / b
    assert ac.zero_noise_radius(P) == pytest.approx(expected, rel=1e-12)
    z = ac.ou_path(1, 1, 0.0, t_past=np.ceil(10 / b))
    est = ac.absorption_radius_additive(P.with_noise(0.0), z)
    assert est.value == pytest.approx(expected, rel=est.tail_bound / expected + 1e-6)


def test_radius_truncation_consistency():
    z = ac.ou_path(1, 1, 0.0, t_past=1000.0)
    r500 = ac.absorption_radius_additive(P, z, horizon=500.0)
    r1000 = ac.absorption_radius_additive(P, z, horizon=1000.0)
    assert abs(r500.value - r1000.value) < 0.01 * r1000.value
    assert r1000.value - r500.value <= r500.tail_bound
    assert r1000.tail_bound < r500.tail_bound


def test_radius_rejects_multiplicative_and_long_horizon():
    z = ac.ou_path(1, 1, 0.0, t_past=100.0)
    with pytest.raises(InvalidArgumentError):
        ac.absorption_radius_additive(PM, z)
    with pytest.raises(InvalidArgumentError):
        ac.absorption_radius_additive(P, z, horizon=500.0)


def test_absorption_comparison_and_invariance():
    rep = ac.absorption_check(P, seed=1, n_paths=100, T=100.0)
    assert rep.comparison_violations == 0
    assert rep.invariance_violations == 0
    assert rep.max_ratio <= 1.0
    d = rep.to_json_dict()
    assert d["n_paths"] == 100


def test_conjugacy_identity_without_noise():
    p0 = PM.with_noise(0.0)
    assert np.array_equal(ac.conjugacy_matrix(0.0, 1.7), np.eye(2))
    y = np.random.default_rng(0).normal(size=(50, 2))
    assert np.allclose(ac.rde_rhs(p0, np.zeros(50), y), fhn_drift(p0, y), rtol=0, atol=1e-14)
    z = ac.ou_path(1, 0, 50.0)
    _, ys, xs = ac.conjugate_multiplicative(p0, z).solve(XE + 0.3)
    assert np.array_equal(ys, xs)
    ref = integrate(fhn_system(p0), XE + 0.3, BrownianPath(0.01, np.zeros(5000))).x
    assert np.allclose(xs, ref, rtol=0, atol=1e-12)


def test_conjugacy_roundtrip_refines():
    res = ac.conjugacy_roundtrip(PM, XE + np.array([0.3, -0.1]), seed=1, T=100.0, levels=3)
    assert res.dts[0] == pytest.approx(0.01)
    assert res.sup_diffs[0] < 5e-2
    assert all(r >= 1.8 for r in res.ratios)


def test_conjugacy_argument_checks():
    z = ac.ou_path(1, 0, 1.0)
    with pytest.raises(InvalidArgumentError):
        ac.conjugate_multiplicative(P, z)
    zb = ac.stationary_ou(BrownianPath(0.01, np.zeros((2, 1200)), origin=1100))
    with pytest.raises(InvalidArgumentError):
        ac.conjugate_multiplicative(PM, zb)


def test_p_and_q_coefficients():
    assert ac.q_coefficient(PM, 0.0) == pytest.approx(-0.015)
    z = np.linspace(-4, 4, 81)
    assert np.all(ac.p_coefficient(PM, z) > 0)
    zz = ac.ou_path(1, 0, 0.0, t_past=600.0)
    assert np.isfinite(ac.radius_multiplicative(PM, zz)) and ac.radius_multiplicative(PM, zz) > 0


def test_q_birkhoff_average():
    res = ac.q_birkhoff(PM, seed=1, T=1.0e4)
    assert abs(res.average + 0.015) <= 3 * res.se
    assert res.n_batches == 100


def test_birkhoff_average_constant():
    res = ac.birkhoff_average(np.full(1000, 2.5), 0.01, 10)
    assert res.average == 2.5 and res.se == 0.0
    with pytest.raises(InvalidArgumentError):
        ac.birkhoff_average(np.ones(5), 0.01, 10)


def test_temperedness():
    assert ac.temperedness_estimate(0.0, 3.0, 10.0) == 0.0
    z = ac.ou_path(1, 3, 1.0e4)
    assert abs(ac.temperedness_check(z, 0.01)) < 1e-2
    assert ac.temperedness_check(z, 0.0) == 0.0
    with pytest.raises(InvalidArgumentError):
        ac.temperedness_estimate(0.01, 1.0, 0.0)


def test_temperedness_trend():
    tr = ac.temperedness_trend(0.01, seed=1, T=1.0e4, n_seeds=20)
    assert tr.ratio > 1
    assert abs(tr.ratio - 2) <= 3 * tr.ratio_se


def test_pullback_noise_free():
    res = ac.pullback_experiment(P.with_noise(0.0), [XE, XE + 0.3], [100.0, 400.0, 1000.0], seed=1)
    assert res.separations[0, -1] < 1e-3
    assert np.all(np.diff(res.median) <= 0)


def test_pullback_noisy_trend():
    res = ac.pullback_experiment(P, [XE, XE + 0.3], [50.0, 200.0, 800.0], seed=1, n_paths=20)
    assert np.all(res.separations >= 0)
    assert np.all(np.diff(res.median) <= 0)
    assert res.fraction_below(1e-2) >= 0.95
    assert len(res.to_pairs()) == 3


def test_pullback_argument_checks():
    with pytest.raises(InvalidArgumentError):
        ac.pullback_experiment(P, [XE], [10.0], seed=1)
    with pytest.raises(InvalidArgumentError):
        ac.pullback_experiment(P, [XE, XE + 0.1], [20.0, 10.0], seed=1)


def test_verify_attractor_keys():
    res = ac.verify_attractor(P, seed=1, quick=True)
    for k in ("cocycle_dev", "R_star", "pullback", "birkhoff_avg", "tempered_est"):
        assert k in res
    assert res["cocycle_dev"] < 1e-9
