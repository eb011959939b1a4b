import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from signedlattice.errors import ConfigurationError, ConstructionError
from signedlattice.probability import crossing_mean_var
from signedlattice.tessellation import (BlockAddress, BlockGeometry, TessellationParams, convergents, dirichlet_pair,
                                        edge_in_interior, in_half, locate, rho, staircase_path, tessellation_dump)

from oracles import admissible_staircases


def test_corners():
    c = TessellationParams(2, 1, 1).corners()
    assert c.tolist() == [[2, -1], [2, 3], [-2, 5], [-2, 1]]


def test_rho_examples():
    assert rho(0.5, 0.5) == 0
    assert rho(0.6, 0.7) == pytest.approx(0.5)
    assert rho(1, 1) == 1
    with pytest.raises(ConfigurationError):
        rho(0.7, 0.6)


def test_dirichlet_examples():
    assert dirichlet_pair(0.5, 3) == (6, 3)
    assert dirichlet_pair(0.0, 5) == (5, 0)
    assert dirichlet_pair(1 / math.sqrt(2), 3) == (17, 12)
    assert abs(12 / 17 - 1 / math.sqrt(2)) <= 1 / 17 ** 2


@given(st.floats(0.01, 0.99), st.integers(1, 8))
def test_dirichlet_approximation(r, n):
    a1, a2 = dirichlet_pair(r, n)
    assert 0 <= a2 <= a1
    assert abs(a2 / a1 - r) <= 1 / a1 ** 2 + 1e-12
    b1, b2 = dirichlet_pair(r, n + 1)
    assert b1 > a1 and b2 >= a2


def test_convergents_are_exact():
    cs = list(convergents(math.sqrt(2) - 1, 8))
    assert cs[:5] == [Fraction(0), Fraction(1, 2), Fraction(2, 5), Fraction(5, 12), Fraction(12, 29)]


def test_staircase_examples():
    assert staircase_path(2, 1).vertices.tolist() == [[0, 0], [1, 0], [1, -1], [2, -1]]
    assert staircase_path(3, 0).vertices.tolist() == [[0, 0], [1, 0], [2, 0], [3, 0]]
    with pytest.raises(ConstructionError):
        staircase_path(1, 1)


@pytest.mark.parametrize("a1", range(2, 9))
def test_staircase_is_lowest_admissible(a1):
    for a2 in range(0, a1 + 1):
        stairs = admissible_staircases(a1, a2)
        path = [tuple(v) for v in staircase_path(a1, a2).vertices.tolist()]
        assert path in stairs
        # in every column the staircase reaches at least as low as any admissible path
        lowest = lambda s: np.array([min(y for x, y in s if x == c) for c in range(a1 + 1)])
        assert all(np.all(lowest(path) <= lowest(s)) for s in stairs)


@given(st.integers(2, 40), st.data())
def test_staircase_constraints(a1, data):
    a2 = data.draw(st.integers(0, a1))
    p = staircase_path(a1, a2)
    v = p.vertices
    assert len(p) == a1 + a2 and tuple(v[-1]) == (a1, -a2)
    assert tuple(v[1]) == (1, 0) and v[-2][1] == -a2
    assert np.all(np.abs(v[:, 1] + a2 / a1 * v[:, 0]) <= 1 + 1e-12)
    assert np.all(np.diff(v[:, 1]) <= 0)


@pytest.mark.parametrize("m", [1, 2, 3])
@pytest.mark.parametrize("side", ["r", "l"])
def test_block_geometry(m, side):
    p = TessellationParams(5, 3, m)
    g = BlockGeometry(p, BlockAddress((1, -2), side))
    if m == 2 and side == "r":
        assert g.gamma_translations()[:, 1].tolist() == [g.offset[1] + 2, g.offset[1] + 5]
    for h in (-1, 0, 1):
        assert len(g.beta(h)) == 3 * m + 1
    seen = set()
    for i in range(1, m + 1):
        eta = g.eta(i)
        assert eta.start == g.entry and eta.end == g.exit and eta.is_self_avoiding
        gv = {tuple(v) for v in g.gamma(i).vertices.tolist()}
        assert not gv & seen
        seen |= gv
        pts = g.gamma(i).vertices.tolist()
        for a, b in zip(pts, pts[1:]):
            assert edge_in_interior(p, g.addr, tuple(a), tuple(b))


def test_entry_exit_corners():
    p = TessellationParams(4, 2, 2)
    A = p.corners()
    assert BlockGeometry(p, BlockAddress((0, 0), "r")).exit == tuple(A[1])
    assert BlockGeometry(p, BlockAddress((0, 0), "l")).exit == tuple(A[2])


@given(st.integers(2, 12), st.data(), st.integers(1, 3), st.integers(-5, 5), st.integers(-5, 5), st.sampled_from("rl"))
def test_locate_interior_paths(a1, data, m, bx, by, side):
    a2 = data.draw(st.integers(0, a1))
    if a2 == 0 and side == "l":
        return
    p = TessellationParams(a1, a2, m)
    addr = BlockAddress((bx, by), side)
    g = BlockGeometry(p, addr)
    for i in range(1, m + 1):
        for v in g.gamma(i).vertices.tolist():
            assert in_half(p, addr, tuple(v))


@given(st.integers(2, 12), st.data(), st.integers(1, 3), st.floats(-200, 200), st.floats(-200, 200))
def test_tiling_unique_owner(a1, data, m, x, y):
    """Each generic point lies in exactly one half-block among the neighbours."""
    a2 = data.draw(st.integers(1, a1))
    p = TessellationParams(a1, a2, m)
    pt = (Fraction(x) + Fraction(1, 7919), Fraction(y) + Fraction(1, 104729))
    addr = locate(p, pt)
    assert in_half(p, addr, pt)
    owners = [(b, s) for bx in range(addr.b[0] - 1, addr.b[0] + 2) for by in range(addr.b[1] - 1, addr.b[1] + 2)
              for s in "rl" for b in [(bx, by)] if in_half(p, BlockAddress(b, s), pt, strict=True)]
    assert owners == [(addr.b, addr.side)]


@given(st.floats(0.5, 1.0), st.floats(0.5, 1.0), st.integers(1, 6))
def test_mean_control(p_o, p_v, n):
    if p_o > p_v or p_v == 0.5:
        return
    r = rho(p_o, p_v)
    a1, a2 = dirichlet_pair(r, n)
    mean, var = crossing_mean_var(a1, a2, p_o, p_v)
    assert mean == pytest.approx(a1 * (2 * p_o - 1) - a2 * (2 * p_v - 1), abs=1e-9)
    assert abs(mean) <= 1 / a1 + 1e-9
    assert var == pytest.approx(4 * (a1 * p_o * (1 - p_o) + a2 * p_v * (1 - p_v)), abs=1e-9)


def test_variance_matches_environment_sampling():
    from signedlattice.env import LawSpec, WeightLaw, make_environment
    from signedlattice.geometry import path_sums, translate

    env = make_environment(9, LawSpec(WeightLaw.uniform(-1, 1), 0.6, 0.7))
    base = staircase_path(12, 6)
    T = np.array([path_sums(translate(base, (50 * k, 0)), env).T_end for k in range(4000)])
    mean, var = crossing_mean_var(12, 6, 0.6, 0.7)
    assert abs(T.mean() - mean) < 3 * math.sqrt(var / T.size)
    assert abs(T.var(ddof=1) - var) < 3 * var * math.sqrt(2 / (T.size - 1))


def test_dump_is_json():
    import json

    d = json.loads(tessellation_dump(TessellationParams(3, 1, 1), range(0, 2), range(0, 1)))
    assert d
