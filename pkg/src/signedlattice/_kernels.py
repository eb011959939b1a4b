"""Compiled kernels: counter-based edge hashing, law sampling and path scans.

Every random quantity in the package is a pure function of a 64-bit key and
integer coordinates.  The hash is the splitmix64 finalizer applied to a
linear combination of the coordinates with odd 64-bit constants; two lanes
give independent uniforms for the weight X and the sign Y of an edge.
"""
from __future__ import annotations

import math

import numba as nb
import numpy as np

MIX_VERSION = "splitmix64-fmix/lattice-v1"

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_C1 = np.uint64(0x9E3779B97F4A7C15)
_C2 = np.uint64(0xD1B54A32D192ED03)
_C3 = np.uint64(0x8CB92BA72F3D8DD7)
_LX = np.uint64(0x2545F4914F6CDD1D)
_LY = np.uint64(0x6A09E667F3BCC909)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

# law component kinds
KIND_CONST = 0
KIND_UNIFORM = 1
KIND_GAUSS = 2

OVERLAY_BIAS = 1 << 30


@nb.njit(inline="always", cache=True)
def fmix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(inline="always", cache=True)
def to_unit(h):
    """Map a 64-bit hash to the open interval (0, 1)."""
    return (np.int64(h >> _S11) + 0.5) * _INV53


@nb.njit(cache=True)
def ndtri(p):
    """Standard normal quantile (Acklam's rational form plus one Halley step)."""
    a0, a1, a2 = -3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02
    a3, a4, a5 = 1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00
    b0, b1, b2 = -5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02
    b3, b4 = 6.680131188771972e01, -1.328068155288572e01
    c0, c1, c2 = -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00
    c3, c4, c5 = -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00
    d0, d1, d2, d3 = 7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00, 3.754408661907416e00
    # work in the lower tail, where the Halley residual is accurate
    upper = p > 0.5
    if upper:
        p = 1.0 - p
    if p < 0.02425:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((c0 * q + c1) * q + c2) * q + c3) * q + c4) * q + c5) / ((((d0 * q + d1) * q + d2) * q + d3) * q + 1.0)
    else:
        q = p - 0.5
        r = q * q
        x = (((((a0 * r + a1) * r + a2) * r + a3) * r + a4) * r + a5) * q / (
            ((((b0 * r + b1) * r + b2) * r + b3) * r + b4) * r + 1.0
        )
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    x = x - u / (1.0 + 0.5 * x * u)
    return -x if upper else x


@nb.njit(inline="always", cache=True)
def law_inverse(u, kinds, cum, wts, p1, p2):
    """Inverse CDF of a finite mixture of constant/uniform/gaussian parts."""
    j = 0
    last = kinds.shape[0] - 1
    while j < last and u >= cum[j]:
        j += 1
    v = (u - (cum[j] - wts[j])) / wts[j]
    if v <= 0.0:
        v = 0.5 * _INV53
    elif v >= 1.0:
        v = 1.0 - 0.5 * _INV53
    k = kinds[j]
    if k == KIND_CONST:
        return p1[j]
    if k == KIND_UNIFORM:
        return p1[j] + (p2[j] - p1[j]) * v
    return p1[j] + p2[j] * ndtri(v)


@nb.njit(inline="always", cache=True)
def edge_base(key, x, y, o):
    return key + np.uint64(x) * _C1 + np.uint64(y) * _C2 + np.uint64(o) * _C3


@nb.njit(inline="always", cache=True)
def overlay_code(x, y, o):
    return ((x + OVERLAY_BIAS) << 32) | ((y + OVERLAY_BIAS) << 1) | o


@nb.njit(cache=True)
def sample_edges(key, xs, ys, os, p_o, p_v, kinds, cum, wts, p1, p2, ov_codes, ov_x, ov_y):
    """Sample (X, Y) for arbitrary edge keys."""
    n = xs.shape[0]
    X = np.empty(n, dtype=np.float64)
    Y = np.empty(n, dtype=np.int8)
    n_ov = ov_codes.shape[0]
    for k in range(n):
        base = edge_base(key, xs[k], ys[k], os[k])
        X[k] = law_inverse(to_unit(fmix(base + _LX)), kinds, cum, wts, p1, p2)
        p = p_v if os[k] == 1 else p_o
        Y[k] = 1 if to_unit(fmix(base + _LY)) < p else -1
        if n_ov > 0:
            c = overlay_code(xs[k], ys[k], os[k])
            i = np.searchsorted(ov_codes, c)
            if i < n_ov and ov_codes[i] == c:
                X[k] = ov_x[i]
                Y[k] = ov_y[i]
    return X, Y


@nb.njit(cache=True)
def fill_path(key, ex, ey, eo, dr, ox, oy, p_o, p_v, kinds, cum, wts, p1, p2, ov_codes, ov_x, ov_y, X, Z):
    """Fill X and the crossing signs Z of a path translated by (ox, oy).

    ``ex, ey, eo`` are the edge keys of the untranslated path and ``dr`` the
    traversal direction (+1 along the edge orientation, -1 against it).
    """
    n = ex.shape[0]
    for k in range(n):
        base = edge_base(key, ex[k] + ox, ey[k] + oy, eo[k])
        X[k] = law_inverse(to_unit(fmix(base + _LX)), kinds, cum, wts, p1, p2)
        p = p_o + (p_v - p_o) * eo[k]
        Z[k] = dr[k] * (2 * np.int8(to_unit(fmix(base + _LY)) < p) - 1)
    n_ov = ov_codes.shape[0]
    if n_ov > 0:
        for k in range(n):
            c = overlay_code(ex[k] + ox, ey[k] + oy, eo[k])
            i = np.searchsorted(ov_codes, c)
            if i < n_ov and ov_codes[i] == c:
                X[k] = ov_x[i]
                Z[k] = dr[k] * ov_y[i]


@nb.njit(cache=True)
def fill_path_affine(key, ex, ey, eo, dr, ox, oy, p_o, p_v, a, b, X, Z):
    """Specialization of :func:`fill_path` for X = a + b U with U uniform,
    which covers uniform and constant laws and vectorizes well."""
    n = ex.shape[0]
    for k in range(n):
        base = edge_base(key, ex[k] + ox, ey[k] + oy, eo[k])
        X[k] = a + b * to_unit(fmix(base + _LX))
        p = p_o + (p_v - p_o) * eo[k]
        Z[k] = dr[k] * (2 * np.int8(to_unit(fmix(base + _LY)) < p) - 1)


@nb.njit(cache=True)
def scan_path(X, Z):
    """Running statistics of a filled path.

    Returns (S, T, min prefix, max prefix, sum |X|, max |X|, sum X), where the
    prefix extrema include the empty prefix.
    """
    s = 0.0
    t = 0
    mn = 0.0
    mx = 0.0
    sa = 0.0
    ma = 0.0
    sx = 0.0
    for k in range(X.shape[0]):
        x = X[k]
        z = Z[k]
        t += z
        s += z * x
        if s > mx:
            mx = s
        if s < mn:
            mn = s
        a = abs(x)
        sa += a
        if a > ma:
            ma = a
        sx += x
    return s, t, mn, mx, sa, ma, sx


@nb.njit(cache=True)
def keyed_uniforms(key, words, count):
    """``count`` uniforms in (0, 1) keyed by ``key`` and a word tuple."""
    h = key
    for w in words:
        h = fmix(h ^ (np.uint64(w) * _C1 + _C3))
    out = np.empty(count, dtype=np.float64)
    for i in range(count):
        out[i] = to_unit(fmix(h + np.uint64(i) * _C2 + _LX))
    return out


@nb.njit(cache=True)
def law_inverse_array(u, kinds, cum, wts, p1, p2):
    out = np.empty(u.shape[0], dtype=np.float64)
    for i in range(u.shape[0]):
        out[i] = law_inverse(u[i], kinds, cum, wts, p1, p2)
    return out


@nb.njit(cache=True)
def synthetic_path_sums(seed, n_samples, a1, a2, p_o, p_v, kinds, cum, wts, p1, p2):
    """Monte Carlo draws of S along an untranslated staircase of a1 + a2 edges.

    The staircase crosses a1 horizontal edges rightward and a2 vertical edges
    downward, so the number of positive crossings is Bin(a1, p_o) plus
    Bin(a2, 1 - p_v).  Given that count, the sum is the signed total of
    i.i.d. weights, which is what is sampled here.
    """
    np.random.seed(seed)
    ell = a1 + a2
    out = np.empty(n_samples, dtype=np.float64)
    for j in range(n_samples):
        q = np.random.binomial(a1, p_o) + np.random.binomial(a2, 1.0 - p_v)
        s = 0.0
        for k in range(ell):
            x = law_inverse(np.random.random(), kinds, cum, wts, p1, p2)
            if k < q:
                s += x
            else:
                s -= x
        out[j] = s
    return out


def as_key(value: int) -> np.uint64:
    return np.uint64(int(value) & 0xFFFFFFFFFFFFFFFF)


def mix_seed(seed: int, domain: int) -> np.uint64:
    """Derive a stream key from a user seed and a domain separator."""
    z = (int(seed) ^ (domain * 0x9E3779B97F4A7C15)) & 0xFFFFFFFFFFFFFFFF
    for _ in range(2):
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & 0xFFFFFFFFFFFFFFFF
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB & 0xFFFFFFFFFFFFFFFF
        z ^= z >> 31
    return np.uint64(z)
