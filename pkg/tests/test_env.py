import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from signedlattice import _kernels as K
from signedlattice.env import (AxisTransform, EdgeKey, KeyedRandom, LawSpec, WeightLaw, make_environment,
                               normalize_axes, support_class)
from signedlattice.errors import ConfigurationError
from signedlattice.geometry import PathSeq, path_sums

MASK = (1 << 64) - 1


def _fmix(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def _reference_uniform_edge(seed, x, y, o, p, a=-1.0, b=1.0):
    """Pure-integer re-derivation of an edge sample for a uniform law."""
    key = int(K.mix_seed(seed, 0x454E56))
    base = (key + (x & MASK) * 0x9E3779B97F4A7C15 + (y & MASK) * 0xD1B54A32D192ED03
            + o * 0x8CB92BA72F3D8DD7) & MASK
    u = lambda lane: ((_fmix((base + lane) & MASK) >> 11) + 0.5) / 2.0 ** 53
    X = a + (b - a) * u(0x2545F4914F6CDD1D)
    Y = 1 if u(0x6A09E667F3BCC909) < p else -1
    return X, Y


@given(st.integers(0, 2 ** 31), st.integers(-10 ** 6, 10 ** 6), st.integers(-10 ** 6, 10 ** 6), st.sampled_from("HV"))
def test_edge_sample_matches_integer_reference(seed, x, y, orient):
    env = make_environment(seed, LawSpec(WeightLaw.uniform(-1, 1), 0.6, 0.7))
    X, Y = env.edge_sample(EdgeKey(x, y, orient))
    rX, rY = _reference_uniform_edge(seed, x, y, 0 if orient == "H" else 1, 0.6 if orient == "H" else 0.7)
    assert X == pytest.approx(rX, abs=1e-15)
    assert Y == rY


def test_sampling_is_order_independent():
    env = make_environment(3, LawSpec(WeightLaw.gaussian(0, 1), 0.5, 0.5))
    rng = np.random.default_rng(0)
    xs, ys, os = rng.integers(-50, 50, 500), rng.integers(-50, 50, 500), rng.integers(0, 2, 500)
    X, Y = env.sample(xs, ys, os)
    perm = rng.permutation(500)
    X2, Y2 = env.sample(xs[perm], ys[perm], os[perm])
    assert np.array_equal(X[perm], X2) and np.array_equal(Y[perm], Y2)
    X3, _ = make_environment(3, LawSpec(WeightLaw.gaussian(0, 1), 0.5, 0.5)).sample(xs, ys, os)
    assert np.array_equal(X, X3)


def test_sign_frequencies():
    env = make_environment(11, LawSpec(WeightLaw.uniform(0, 1), 0.6, 0.8))
    n = 200_000
    xs = np.arange(n)
    for o, p in ((0, 0.6), (1, 0.8)):
        _, Y = env.sample(xs, np.zeros(n, dtype=np.int64), np.full(n, o))
        assert abs((Y == 1).mean() - p) < 5 * math.sqrt(p * (1 - p) / n)


def test_gaussian_quantile_matches_scipy():
    from scipy.special import ndtri

    u = np.linspace(1e-12, 1 - 1e-12, 20001)
    law = WeightLaw.gaussian(0.5, 2.0)
    got = K.law_inverse_array(u, *law.tables)
    assert np.allclose(got, 0.5 + 2.0 * ndtri(u), rtol=1e-12, atol=1e-11)


def test_mixture_sampling_law():
    from scipy import stats

    law = WeightLaw.mixture([(0.3, WeightLaw.constant(0.0)), (0.7, WeightLaw.uniform(0.5, 1.0))])
    env = make_environment(1, LawSpec(law))
    X, _ = env.sample(np.arange(100_000), np.zeros(100_000, dtype=np.int64), np.zeros(100_000, dtype=np.int64))
    zero = (X == 0).mean()
    assert abs(zero - 0.3) < 5 * math.sqrt(0.21 / 1e5)
    rest = X[X != 0]
    assert stats.kstest(rest, stats.uniform(0.5, 0.5).cdf).pvalue > 1e-3


def test_law_validation():
    with pytest.raises(ConfigurationError):
        WeightLaw.atoms([(1.0, 0.5), (2.0, 0.4)])
    with pytest.raises(ConfigurationError):
        LawSpec(WeightLaw.constant(0.0))
    with pytest.raises(ConfigurationError):
        LawSpec(WeightLaw.uniform(0, 1), p_o=1.2)
    with pytest.raises(ConfigurationError):
        WeightLaw.parse("cauchy:0,1")


@pytest.mark.parametrize("text", ["uniform:-1,1", "gaussian:0,2", "constant:3", "atoms:0=0.7,1=0.3",
                                  "mix:0.3*constant:0|0.7*uniform:0.5,1"])
def test_law_round_trips(text):
    law = WeightLaw.parse(text)
    assert WeightLaw.from_json(law.to_json()) == law
    spec = LawSpec(law, 0.6, 0.7)
    assert LawSpec.from_json(spec.to_json()) == spec


@given(st.floats(0.001, 0.999), st.sampled_from(["uniform:-2,3", "gaussian:1,0.5"]))
def test_from_uniform_inverts_cdf_for_single_components(u, text):
    law = WeightLaw.parse(text)
    x = float(law.from_uniform(np.array([u]))[0])
    assert float(law.cdf(x)) == pytest.approx(u, abs=1e-9)


def test_from_uniform_pushes_forward_the_law():
    from scipy import stats

    law = WeightLaw.mixture([(0.5, WeightLaw.uniform(-2, 0)), (0.5, WeightLaw.gaussian(1, 0.5))])
    x = law.from_uniform((np.arange(20000) + 0.5) / 20000)
    assert stats.kstest(x, law.cdf).statistic < 2e-3


def test_support_classes():
    assert support_class(WeightLaw.uniform(-1, 1)) == "irrational"
    assert support_class(WeightLaw.atoms([(1.0, 0.5), (2.0, 0.5)])) == "finite_rational"
    assert support_class(WeightLaw.atoms([(1.0, 0.5), (math.sqrt(2), 0.5)])) == "irrational"
    assert support_class(WeightLaw.atoms([(1.0, 0.5), (0.5, 0.5)], countable=True)) == "countably_rational"
    with pytest.raises(ConfigurationError):
        support_class(WeightLaw.constant(0.0))


def test_overlay_precedence():
    env = make_environment(0, LawSpec(WeightLaw.uniform(-1, 1)))
    key = EdgeKey(4, -2, "V")
    env2 = env.with_overlay({key: (10.0, -1)})
    assert env2.edge_sample(key) == (10.0, -1)
    other = EdgeKey(4, -2, "H")
    assert env2.edge_sample(other) == env.edge_sample(other)


def test_keyed_random_exhausts():
    env = make_environment(0, LawSpec(WeightLaw.uniform(-1, 1)))
    r = KeyedRandom(env, [1, 2, 3], size=2)
    a, b = r.random(), r.random()
    assert 0 < a < 1 and 0 < b < 1 and a != b
    with pytest.raises(Exception):
        r.random()
    assert KeyedRandom(env, [1, 2, 3], size=2).random() == a


@given(st.booleans(), st.booleans(), st.booleans(),
       st.lists(st.sampled_from("RULD"), min_size=1, max_size=40))
def test_axis_transform_round_trip(fx, fy, sw, steps):
    t = AxisTransform(fx, fy, sw)
    pts = PathSeq.from_steps((0, 0), "".join(steps)).vertices
    assert np.array_equal(t.invert(t.apply(pts)), pts)


@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.lists(st.sampled_from("RULD"), min_size=1, max_size=40))
def test_normalized_environment_preserves_sums(p_o, p_v, steps):
    base = make_environment(5, LawSpec(WeightLaw.uniform(-1, 1), p_o, p_v))
    norm = normalize_axes(base)
    assert 0.5 <= norm.p_o <= norm.p_v
    path = PathSeq.from_steps((2, -1), "".join(steps))
    image = PathSeq(norm.transform.apply(path.vertices))
    a, b = path_sums(path, base), path_sums(image, norm)
    assert np.allclose(a.S, b.S) and np.array_equal(a.T, b.T)
