import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from signedlattice.errors import ConfigurationError
from signedlattice.probability import (CltBoundInputs, MaximalCoupling, Pmf, chernoff_rate, clt_bound_eval,
                                       crossing_mean_var, exact_crossing_law, local_clt_delta, symmetrized_law,
                                       tv_distance)

from oracles import brute_tv, exact_crossing_pmf


def random_pmf(rng, parity=0, width=8):
    lo = 2 * int(rng.integers(-4, 4)) + parity
    m = rng.random(int(rng.integers(1, width)))
    m[rng.random(m.size) < 0.2] = 0
    if m.sum() == 0:
        m[0] = 1
    return Pmf(lo, m / m.sum())


@given(st.integers(0, 25), st.integers(0, 25), st.fractions(0, 1, max_denominator=20),
       st.fractions(0, 1, max_denominator=20))
def test_exact_law_matches_rational_convolution(a1, a2, p_o, p_v):
    if a1 + a2 == 0:
        return
    got = exact_crossing_law(a1, a2, float(p_o), float(p_v))
    ref = exact_crossing_pmf(a1, a2, p_o, p_v)
    for t, v in ref.items():
        assert got(t) == pytest.approx(float(v), abs=1e-12)
    assert got.total() == pytest.approx(1.0, abs=1e-12)


def test_exact_law_large_is_normalized():
    p = exact_crossing_law(350_000, 350_000, 0.6, 0.6)
    mean, var = crossing_mean_var(350_000, 350_000, 0.6, 0.6)
    assert p.total() == pytest.approx(1.0, abs=1e-9)
    assert p.mean() == pytest.approx(mean, abs=1e-6)
    assert p.var() == pytest.approx(var, rel=1e-9)


@given(st.floats(0.2, 200.0), st.integers(1, 1000))
def test_symmetrized_law_shape(b, N):
    p = symmetrized_law(b, N)
    assert p.offset == N % 2
    assert p.total() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(p.masses, p.masses[::-1], atol=1e-15)
    assert p.lo == -p.hi


def test_symmetrized_mass_at_zero():
    # Phi(1/2) - Phi(-1/2)
    assert symmetrized_law(2.0, 10)(0) == pytest.approx(0.38292492254802624, abs=1e-12)


def test_tv_matches_bruteforce():
    rng = np.random.default_rng(1)
    for _ in range(50):
        p, q = random_pmf(rng), random_pmf(rng)
        assert tv_distance(p, q) == pytest.approx(brute_tv(p.as_dict(), q.as_dict()), abs=1e-14)
        assert tv_distance(p, q) == pytest.approx(tv_distance(q, p), abs=1e-15)
    assert tv_distance(Pmf(0, [1.0]), Pmf(1, [1.0])) == 1.0


def test_tv_triangle_inequality():
    rng = np.random.default_rng(2)
    for _ in range(50):
        p, q, r = (random_pmf(rng) for _ in range(3))
        assert tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-14


def test_tv_decreasing_for_half_ratio():
    from signedlattice.probability import symmetrized_crossing_law

    tvs = [tv_distance(exact_crossing_law(2 * n, n, 0.6, 0.7), symmetrized_crossing_law(2 * n, n, 0.6, 0.7))
           for n in (1, 2, 4, 8, 16, 32, 64, 134)]
    assert all(b < a for a, b in zip(tvs, tvs[1:]))
    assert tvs[-1] < 0.1


def test_maximal_coupling_marginals():
    rng = np.random.default_rng(3)
    p, q = random_pmf(rng), random_pmf(rng)
    c = MaximalCoupling(p, q)
    ts = p.sample(rng.random(50_000))
    draws = np.array([c.draw(int(t), rng) for t in ts])
    assert abs(np.mean(draws == ts) - (1 - c.tv)) < 4 * math.sqrt(c.tv * (1 - c.tv) / draws.size) + 1e-9
    ks = np.arange(q.lo, q.hi + 1, 2)
    obs = np.array([(draws == k).sum() for k in ks])
    exp = q.masses * draws.size
    keep = exp > 0
    assert obs[~keep].sum() == 0
    assert stats.chisquare(obs[keep], exp[keep] * obs.sum() / exp[keep].sum()).pvalue > 1e-4


def test_coupling_different_parity_never_agrees():
    c = MaximalCoupling(Pmf(0, [0.5, 0.5]), Pmf(1, [1.0]))
    assert c.tv == 1.0 and c.keep_probability(0) == 0.0
    assert c.draw(2, np.random.default_rng(0)) == 1


def _clt_reference(K, pi, s2, phi, N, be=0.56):
    s = math.sqrt(s2)
    t1 = math.erf(phi / (s * math.sqrt(N / 3)) / math.sqrt(2))
    t2 = 2 * be * K ** 3 / (s ** 3 * math.sqrt(N / 3))
    q = 1 - pi
    lam = (2 / 3) * math.log((2 / 3) / q) + (1 / 3) * math.log((1 / 3) / (1 - q))
    return t1, t2, math.exp(-lam * N)


def test_clt_bound_fixed_instance():
    got = clt_bound_eval(CltBoundInputs(2.0, 0.9, 0.25, 10.0, 10_000))
    ref = _clt_reference(2.0, 0.9, 0.25, 10.0, 10_000)
    assert got[:3] == pytest.approx(ref, rel=1e-12, abs=1e-300)
    assert got[3] == pytest.approx(sum(ref), rel=1e-12)
    bare = clt_bound_eval(CltBoundInputs(2.0, 0.9, 0.25, 10.0, 10_000), berry_esseen=1.0)
    assert bare[1] == pytest.approx(2 * 8 / (0.125 * math.sqrt(10_000 / 3)), rel=1e-12)


def test_clt_bound_edge_cases():
    assert clt_bound_eval(CltBoundInputs(2.0, 0.9, 0.25, 0.0, 100))[0] == 0.0
    with pytest.raises(ConfigurationError):
        CltBoundInputs(2.0, 0.5, 0.25, 1.0, 100)
    with pytest.raises(ConfigurationError):
        CltBoundInputs(2.0, 0.9, 0.0, 1.0, 100)
    assert chernoff_rate(0.9) > 0


def test_clt_bound_vanishes():
    totals = [clt_bound_eval(CltBoundInputs(1.0, 0.9, 0.3, math.sqrt(N) / math.log(N), N))[3]
              for N in (10 ** 4, 10 ** 5, 10 ** 6, 10 ** 7, 10 ** 8)]
    assert all(b < a for a, b in zip(totals, totals[1:]))
    assert totals[-1] < 0.15


def test_clt_bound_dominates_monte_carlo():
    rng = np.random.default_rng(4)
    N, phi = 2000, 2000 ** 0.5 / math.log(2000)
    X = rng.uniform(-1, 1, size=(4000, N))
    Z = np.where(rng.random((4000, N)) < 0.6, 1, -1)
    freq = np.mean(np.abs((X * Z).sum(axis=1)) <= phi)
    K = 0.9
    inside = np.abs(X) < K
    inputs = CltBoundInputs(K, 0.9, float(np.var(np.where(inside, X, 0.0))), phi, N)
    assert freq <= clt_bound_eval(inputs)[3] + 3 * math.sqrt(freq * (1 - freq) / 4000)


def test_local_clt_delta_decreases():
    d = [local_clt_delta(a1, a1 // 2, 0.6, 0.7) for a1 in (6, 20, 60, 200)]
    assert all(b < a for a, b in zip(d, d[1:]))


@given(st.integers(1, 40), st.integers(0, 40), st.floats(0.5, 1.0), st.floats(0.5, 1.0))
def test_exact_law_moments(a1, a2, p_o, p_v):
    p = exact_crossing_law(a1, a2, p_o, p_v)
    mean, var = crossing_mean_var(a1, a2, p_o, p_v)
    assert p.mean() == pytest.approx(mean, abs=1e-9)
    assert p.var() == pytest.approx(var, abs=1e-8)
