"""Crossing-number laws, total variation and the symmetrizing coupling.

All laws here live on a lattice ``2Z + r``; a :class:`Pmf` stores the lowest
support point and the masses at steps of two.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import special, stats

from .errors import ConfigurationError

# binomial masses below this fraction of the mode are dropped before convolving
_TRIM = 1e-20


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability mass function on ``lo, lo + 2, lo + 4, ...``."""

    lo: int
    masses: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=np.float64)
        if m.ndim != 1 or m.size == 0:
            raise ValueError("masses must be a nonempty vector")
        if np.any(m < 0):
            raise ValueError("masses must be nonnegative")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "lo", int(self.lo))

    @classmethod
    def from_dict(cls, d: dict[int, float]) -> "Pmf":
        ks = sorted(d)
        parity = {k % 2 for k in ks}
        if len(parity) != 1:
            raise ValueError("support points must share a parity")
        lo, hi = ks[0], ks[-1]
        m = np.zeros((hi - lo) // 2 + 1)
        for k, v in d.items():
            m[(k - lo) // 2] = v
        return cls(lo, m)

    @property
    def offset(self) -> int:
        return self.lo % 2

    @property
    def hi(self) -> int:
        return self.lo + 2 * (self.masses.size - 1)

    @cached_property
    def support(self) -> np.ndarray:
        return self.lo + 2 * np.arange(self.masses.size)

    def __call__(self, k: int) -> float:
        if (k - self.lo) % 2 or k < self.lo or k > self.hi:
            return 0.0
        return float(self.masses[(k - self.lo) // 2])

    def total(self) -> float:
        return math.fsum(self.masses)

    def mean(self) -> float:
        return float(np.dot(self.support, self.masses))

    def var(self) -> float:
        mu = self.mean()
        return float(np.dot((self.support - mu) ** 2, self.masses))

    def as_dict(self) -> dict[int, float]:
        return {int(k): float(v) for k, v in zip(self.support, self.masses) if v > 0}

    def sample(self, u: np.ndarray | float):
        cdf = np.cumsum(self.masses)
        idx = np.searchsorted(cdf, np.asarray(u) * cdf[-1], side="right")
        return self.lo + 2 * np.minimum(idx, self.masses.size - 1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "mass"])
        for k, v in zip(self.support, self.masses):
            w.writerow([int(k), repr(float(v))])
        return buf.getvalue()


def _binomial_masses(n: int, p: float) -> tuple[int, np.ndarray]:
    """Binomial(n, p) masses with negligible tails trimmed: (first index, masses)."""
    if n == 0:
        return 0, np.ones(1)
    k = np.arange(n + 1)
    pm = stats.binom.pmf(k, n, p)
    keep = np.flatnonzero(pm >= _TRIM * pm.max())
    a, b = int(keep[0]), int(keep[-1])
    return a, pm[a:b + 1]


def exact_crossing_law(a1: int, a2: int, p_o: float, p_v: float) -> Pmf:
    """Law of the crossing count along a staircase with ``a1`` rightward and
    ``a2`` downward steps.

    A rightward step contributes +1 with probability ``p_o``; a downward step
    contributes +1 with probability ``1 - p_v``.  With Q positive steps,
    ``T = 2Q - (a1 + a2)``.
    """
    if a1 < 0 or a2 < 0 or a1 + a2 < 1:
        raise ConfigurationError("need a1 + a2 >= 1")
    s1, m1 = _binomial_masses(a1, p_o)
    s2, m2 = _binomial_masses(a2, 1.0 - p_v)
    q = np.convolve(m1, m2)
    q = np.clip(q, 0.0, None)
    return Pmf(2 * (s1 + s2) - (a1 + a2), q)


def crossing_mean_var(a1: int, a2: int, p_o: float, p_v: float) -> tuple[float, float]:
    mean = a1 * (2 * p_o - 1) - a2 * (2 * p_v - 1)
    var = 4 * (a1 * p_o * (1 - p_o) + a2 * p_v * (1 - p_v))
    return mean, var


def symmetrized_law(b: float, N: int, tail: float = 1e-12) -> Pmf:
    """Discretized centered Gaussian on ``2Z + (N mod 2)`` with scale ``b``.

    mass(k) = Phi((k+1)/b) - Phi((k-1)/b); the support is cut where the
    remaining two-sided tail is below ``tail`` and the masses renormalized.
    """
    if not b > 0:
        raise ConfigurationError("scale b must be positive")
    r = N % 2
    # largest k kept: both tails beyond it carry less than `tail`
    kmax = int(math.ceil(b * -special.ndtri(tail / 2))) + 2
    kmax += (kmax - r) % 2
    k = np.arange(r, kmax + 1, 2, dtype=np.float64)
    # upper-tail differences are accurate for k >= 1
    pos = special.ndtr(-(k - 1) / b) - special.ndtr(-(k + 1) / b)
    if r == 0:
        pos[0] = 1.0 - 2.0 * special.ndtr(-1.0 / b)
        masses = np.concatenate([pos[:0:-1], pos])
    else:
        masses = np.concatenate([pos[::-1], pos])
    masses = masses / math.fsum(masses)
    return Pmf(-kmax, masses)


def gaussian_window_law(a: float, b: float, lo: int, hi: int) -> Pmf:
    """Masses Phi((k+1-a)/b) - Phi((k-1-a)/b) for k = lo, lo+2, ..., hi."""
    k = np.arange(lo, hi + 1, 2, dtype=np.float64)
    z1 = (k + 1 - a) / b
    z0 = (k - 1 - a) / b
    m = np.where(z0 > 0, special.ndtr(-z0) - special.ndtr(-z1), special.ndtr(z1) - special.ndtr(z0))
    return Pmf(lo, m)


def _aligned(p: Pmf, q: Pmf) -> tuple[int, np.ndarray, np.ndarray]:
    lo = min(p.lo, q.lo)
    hi = max(p.hi, q.hi)
    n = (hi - lo) // 2 + 1
    a = np.zeros(n)
    b = np.zeros(n)
    a[(p.lo - lo) // 2:(p.lo - lo) // 2 + p.masses.size] = p.masses
    b[(q.lo - lo) // 2:(q.lo - lo) // 2 + q.masses.size] = q.masses
    return lo, a, b


def tv_distance(p: Pmf, q: Pmf) -> float:
    """Total variation distance; laws on different parity classes are at distance 1."""
    if p.offset != q.offset:
        return 1.0
    _, a, b = _aligned(p, q)
    return 0.5 * math.fsum(np.abs(a - b))


class MaximalCoupling:
    """Maximal coupling of ``p`` and ``q`` sampled conditionally on the
    ``p``-coordinate."""

    def __init__(self, p: Pmf, q: Pmf):
        self.p = p
        self.q = q
        if p.offset != q.offset:
            self.lo = q.lo
            self._keep = None
            resid = q.masses.copy()
        else:
            lo, a, b = _aligned(p, q)
            self.lo = lo
            self._a = a
            self._keep = np.divide(np.minimum(a, b), a, out=np.zeros_like(a), where=a > 0)
            resid = np.clip(b - a, 0.0, None)
        total = resid.sum()
        self._resid_cdf = np.cumsum(resid) / total if total > 0 else None
        self.tv = tv_distance(p, q)

    def keep_probability(self, t: int) -> float:
        if self.p(t) <= 0:
            raise ValueError(f"t={t} has zero probability under p")
        if self._keep is None:
            return 0.0
        return float(self._keep[(t - self.lo) // 2])

    def draw(self, t: int, rng) -> int:
        keep = self.keep_probability(t)
        if keep >= 1.0 or self._resid_cdf is None or rng.random() < keep:
            return int(t)
        j = int(np.searchsorted(self._resid_cdf, rng.random(), side="right"))
        j = min(j, self._resid_cdf.size - 1)
        return self.lo + 2 * j


def maximal_coupling_conditional(p: Pmf, q: Pmf, t_observed: int, rng) -> int:
    """Draw T_sigma given T = t_observed under the maximal coupling of (p, q)."""
    return MaximalCoupling(p, q).draw(t_observed, rng)


# ---------------------------------------------------------------------------
# tail bound and local CLT error


@dataclass(frozen=True)
class CltBoundInputs:
    K: float
    pi_K: float
    sigma_K2: float
    phi_N: float
    N: int

    def __post_init__(self):
        if not self.pi_K > 0.5:
            raise ConfigurationError("need P(|X| < K) > 1/2")
        if not self.sigma_K2 > 0:
            raise ConfigurationError("need a positive truncated variance")
        if self.N < 1 or self.phi_N < 0 or self.K <= 0:
            raise ConfigurationError("need N >= 1, phi_N >= 0 and K > 0")


def chernoff_rate(pi_K: float) -> float:
    """Rate of P(Bin(N, 1 - pi_K) > 2N/3), the divergence KL(2/3 || 1 - pi_K)."""
    q = 1.0 - pi_K
    a = 2.0 / 3.0
    if not q < a:
        raise ConfigurationError("the exponent is positive only when P(|X| < K) > 1/3")
    if q == 0.0:
        return math.inf
    return a * math.log(a / q) + (1 - a) * math.log((1 - a) / (1 - q))


def clt_bound_eval(inputs: CltBoundInputs, berry_esseen: float = 0.56) -> tuple[float, float, float, float]:
    """Three-term upper bound on P(|sum Z_k X_k| <= phi_N).

    The Berry-Esseen term is scaled by ``berry_esseen``; 1.0 gives the bare
    ``2 K^3 / (sigma^3 sqrt(N/3))``.
    """
    s = math.sqrt(inputs.sigma_K2)
    root = math.sqrt(inputs.N / 3.0)
    term1 = 2.0 * (float(special.ndtr(inputs.phi_N / (s * root))) - 0.5)
    term2 = 2.0 * berry_esseen * inputs.K ** 3 / (s ** 3 * root)
    term3 = math.exp(-chernoff_rate(inputs.pi_K) * inputs.N)
    return term1, term2, term3, term1 + term2 + term3


def local_clt_delta(a1: int, a2: int, p_o: float, p_v: float) -> float:
    """b * max_k |P(T = k) - P(T~ = k)| for the Gaussian window centered at E T."""
    mean, var = crossing_mean_var(a1, a2, p_o, p_v)
    if var <= 0:
        raise ConfigurationError("the crossing count has zero variance")
    p = exact_crossing_law(a1, a2, p_o, p_v)
    b = math.sqrt(var)
    ell = a1 + a2
    g = gaussian_window_law(mean, b, -ell, ell)
    _, x, y = _aligned(p, g)
    return b * float(np.abs(x - y).max())


def symmetrized_crossing_law(a1: int, a2: int, p_o: float, p_v: float) -> Pmf:
    """Symmetrized law matched to the staircase crossing count.

    Falls back to the exact law when the crossing count is deterministic.
    """
    _, var = crossing_mean_var(a1, a2, p_o, p_v)
    if var <= 0:
        return exact_crossing_law(a1, a2, p_o, p_v)
    return symmetrized_law(math.sqrt(var), a1 + a2)
