import math

import numpy as np
import pytest
from scipy import stats

from signedlattice.blocks import (BlockClassifier, BlockParams, abs_quantile, abs_tail_quantile, all_bounded_probability,
                                  calibrate, crossing_laws, m_for_epsilon, signed_rearrangement, symmetrize_path)
from signedlattice.env import EdgeKey, LawSpec, WeightLaw, make_environment
from signedlattice.errors import ConfigurationError, UnsupportedRegimeError
from signedlattice.geometry import path_sums
from signedlattice.probability import tv_distance
from signedlattice.tessellation import BlockAddress, BlockGeometry, staircase_path

from conftest import CRITERION_EPSILON


@pytest.mark.parametrize("eps,m", [(0.2, 6), (0.25, 6), (0.5, 5), (0.1, 7), (0.9, 4)])
def test_m_for_epsilon(eps, m):
    assert m_for_epsilon(eps) == m


def test_m_for_epsilon_rejects():
    with pytest.raises(ConfigurationError):
        m_for_epsilon(1.0)


def test_params_validation():
    p = BlockParams(2, 3, 1.0, 1.0, 6, 3)
    assert p.K3 == 1.0 + 9 * 1.0 and p.height == 7
    assert BlockParams.from_json(p.to_json()) == p
    with pytest.raises(ConfigurationError):
        BlockParams(0, 3, 1.0, 1.0, 6, 3)


def test_signed_rearrangement():
    X = np.array([0.5, -1.0, 2.0, 0.25])
    assert signed_rearrangement(X, 4) == pytest.approx(X.sum())
    assert signed_rearrangement(X, -4) == pytest.approx(-X.sum())
    assert signed_rearrangement(X, 0) == pytest.approx(0.5 - 1.0 - 2.0 - 0.25)
    with pytest.raises(ArithmeticError):
        signed_rearrangement(X, 1)


def test_symmetrize_with_deterministic_count():
    env = make_environment(0, LawSpec(WeightLaw.uniform(0, 1), 1.0, 1.0))
    exact, sym = crossing_laws(4, 4, 1.0, 1.0)
    rng = np.random.default_rng(0)
    for k in range(20):
        path = staircase_path(4, 4)
        from signedlattice.geometry import translate
        r = symmetrize_path(env, translate(path, (10 * k, 0)), exact, sym, rng)
        assert r.H and r.T == 0 and r.T_sigma == 0


def _params(m=2, n=3, K1=1.0, K2=1.0, a1=6, a2=3):
    return BlockParams(m, n, K1, K2, a1, a2)


def test_constant_law_boundary_and_bound_events():
    m = 2
    params = _params(m=m, K1=2 * (3 * m + 1) * 1.5, K2=1.5)
    env = make_environment(1, LawSpec(WeightLaw.constant(1.5), 0.6, 0.7))
    clf = BlockClassifier(env, params)
    for k in range(5):
        rep = clf.classify(BlockAddress((k, 0), "rl"[k % 2]))
        assert rep.F1 and rep.F3


def _plant_sign(geom_path, target_sign, value):
    out = {}
    pts = geom_path.vertices.tolist()
    for a, b in zip(pts, pts[1:]):
        key = EdgeKey.between(tuple(a), tuple(b))
        forward = (b[0] - a[0]) + (b[1] - a[1])
        out[key] = (value, forward * target_sign)
    return out


def test_planted_escape_gives_F2():
    params = _params(m=2, K1=1.0, K2=100.0)
    base = make_environment(2, LawSpec(WeightLaw.uniform(-0.01, 0.01), 0.6, 0.7))
    g = BlockGeometry(params.tessellation(), BlockAddress((0, 0), "r"))
    overlay = {**_plant_sign(g.gamma(1), +1, 10.0), **_plant_sign(g.gamma(2), -1, 10.0)}
    rep = BlockClassifier(base.with_overlay(overlay), params).classify(g.addr)
    assert rep.F2 and rep.j_plus == 1 and rep.i_minus == 2
    assert rep.paths[0].S == pytest.approx(10.0 * params.ell)


def test_planted_large_weight_breaks_F3():
    params = _params(m=2, K1=1.0, K2=1.0)
    base = make_environment(2, LawSpec(WeightLaw.uniform(-1, 1), 0.6, 0.7))
    g = BlockGeometry(params.tessellation(), BlockAddress((3, 1), "l"))
    e = g.gamma(1).edges()[2]
    rep = BlockClassifier(base.with_overlay({e: (1e6, 1)}), params).classify(g.addr)
    assert not rep.F3 and not rep.G


@pytest.mark.parametrize("side", ["r", "l"])
def test_report_matches_direct_path_sums(side):
    params = _params(m=3, n=2, K1=3.0, K2=0.9, a1=8, a2=4)
    env = make_environment(5, LawSpec(WeightLaw.uniform(-1, 1), 0.6, 0.7))
    clf = BlockClassifier(env, params)
    for k in range(6):
        addr = BlockAddress((k, -k), side)
        rep = clf.classify(addr)
        g = BlockGeometry(params.tessellation(), addr)
        for i, rec in enumerate(rep.paths, start=1):
            ps = path_sums(g.gamma(i), env)
            assert rec.S == pytest.approx(ps.S_end, abs=1e-12) and rec.T == ps.T_end
            X, _ = env.sample(*np.array([[e.x, e.y, e.o] for e in g.gamma(i).edges()]).T)
            assert rec.max_abs == pytest.approx(np.abs(X).max())
        entry = path_sums(g.beta(0), env)
        exit_ = path_sums(g.beta(g.exit_h), env)
        sum_abs = lambda p: float(np.abs(env.sample(*np.array([[e.x, e.y, e.o] for e in p.edges()]).T)[0]).sum())
        assert sorted(rep.boundary_sum_abs) == pytest.approx(sorted([sum_abs(g.beta(0)), sum_abs(g.beta(g.exit_h))]))
        for eta in (rep.eta_minus, rep.eta_plus):
            ps = path_sums(g.eta(eta.index), env)
            assert eta.S == pytest.approx(ps.S_end, abs=1e-9)
            assert eta.lo == pytest.approx(min(0.0, ps.S.min()), abs=1e-9)
            assert eta.hi == pytest.approx(max(0.0, ps.S.max()), abs=1e-9)
        assert rep.G == (rep.F0 and rep.F1 and rep.F2 and rep.F3)
        assert rep.F1 == (max(rep.boundary_sum_abs) <= params.K1 / 2)
        if rep.G:
            assert params.K1 <= rep.S_eta_plus <= params.K3
            assert -params.K3 <= rep.S_eta_minus <= -params.K1


def test_classification_is_deterministic():
    params = _params()
    env = make_environment(8, LawSpec(WeightLaw.gaussian(0, 1), 0.6, 0.7))
    a = BlockClassifier(env, params).classify(BlockAddress((2, 5), "l"))
    b = BlockClassifier(make_environment(8, LawSpec(WeightLaw.gaussian(0, 1), 0.6, 0.7)), params).classify(
        BlockAddress((2, 5), "l"))
    assert a.to_json() == b.to_json()


def test_coupling_success_rate_matches_tv():
    params = _params(m=1, n=2, a1=4, a2=2)
    env = make_environment(3, LawSpec(WeightLaw.uniform(-1, 1), 0.6, 0.7))
    clf = BlockClassifier(env, params)
    H = np.array([clf.classify(BlockAddress((k, 2 * k), "r")).paths[0].H for k in range(4000)])
    tv = tv_distance(*crossing_laws(4, 2, 0.6, 0.7))
    assert abs(H.mean() - (1 - tv)) < 4 * math.sqrt(tv * (1 - tv) / H.size)


def test_calibration_rejects_bad_regimes():
    with pytest.raises(ConfigurationError):
        calibrate(0.2, LawSpec(WeightLaw.uniform(-1, 1), 0.7, 0.6))
    with pytest.raises(UnsupportedRegimeError):
        calibrate(0.2, LawSpec(WeightLaw.constant(1.0), 1.0, 1.0))


def test_abs_quantile():
    law = LawSpec(WeightLaw.uniform(-1, 1))
    assert abs_quantile(law, 0.5) == pytest.approx(0.5, abs=1e-12)
    atoms = LawSpec(WeightLaw.atoms([(1.0, 0.5), (-3.0, 0.5)]))
    assert abs_quantile(atoms, 0.4) == 1.0 and abs_quantile(atoms, 0.6) == 3.0


@pytest.mark.parametrize("text", ["uniform:-1,1", "gaussian:0.3,2", "mix:0.5*constant:0|0.5*uniform:-2,1",
                                  "atoms:1=0.5,-3=0.5"])
def test_abs_sf_complements_abs_cdf(text):
    w = WeightLaw.parse(text)
    t = np.linspace(-1, 4, 101)
    assert np.allclose(w.abs_sf(t), 1 - w.abs_cdf(t), atol=1e-15)


def test_abs_tail_quantile_keeps_precision():
    gauss = LawSpec(WeightLaw.gaussian(0, 1))
    for tail in (1e-3, 1e-9, 1e-14):
        t = abs_tail_quantile(gauss, tail)
        assert t == pytest.approx(stats.norm.isf(tail / 2), rel=1e-12)
    uni = LawSpec(WeightLaw.uniform(-1, 1))
    # 1 - 2^-40 is exact, so its tail is exactly 2^-40
    assert abs_tail_quantile(uni, 2.0 ** -40) == 1 - 2.0 ** -40
    p = all_bounded_probability(uni, 1 - 2.0 ** -40, 4 * 10 ** 6)
    assert p == pytest.approx((1 - 2.0 ** -40) ** (4 * 10 ** 6), rel=1e-13)
    assert p == pytest.approx(math.exp(-4e6 * 2.0 ** -40), rel=1e-13)


def test_calibrated_parameters(calibration, calibrated_params):
    p = calibrated_params
    est = calibration["estimates"]
    target = 1 - CRITERION_EPSILON / 4
    assert p.m == 6
    assert est["P_F0"] >= target and est["P_F2"] >= target and est["P_F3"] >= target
    assert est["P_G"] >= 1 - CRITERION_EPSILON - 3 * est["P_G_sd"]
    law = LawSpec(WeightLaw.uniform(-1, 1), 0.6, 0.6)
    assert all_bounded_probability(law, p.K2, p.m * p.ell) >= target
    # the bound is tight: a slightly smaller K2 misses the target
    assert all_bounded_probability(law, p.K2 * (1 - 1e-6), p.m * p.ell) < target
