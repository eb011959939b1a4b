"""Good-block classification and parameter calibration.

A half-parallelogram block is *good* (event G) when

* F0: every interior path's crossing count survives the symmetrizing
  coupling (``T_sigma == T``),
* F1: each vertical boundary carries total weight ``sum |X| <= K1 / 2``,
* F2: some interior path has ``S >= 2 K1`` and some has ``S <= -2 K1``,
* F3: every interior edge has ``|X| <= K2``.

On a good block the minimal and maximal eta paths have sums in
``[-K3, -K1]`` and ``[K1, K3]`` with ``K3 = K1 + K2 * ell``.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize

from . import _kernels as K
from .env import Environment, KeyedRandom, LawSpec, make_environment
from .errors import CalibrationError, ConfigurationError, UnsupportedRegimeError
from .geometry import PathSeq, contributions
from .probability import (
    MaximalCoupling,
    Pmf,
    exact_crossing_law,
    symmetrized_crossing_law,
    tv_distance,
)
from .tessellation import (
    BlockAddress,
    BlockGeometry,
    TessellationParams,
    dirichlet_pair,
    gamma_offset,
    rho,
)

log = logging.getLogger(__name__)

# bump when the calibration procedure changes, so cached results are refreshed
CALIBRATION_VERSION = "2"
_AUX_TAG = 0x636F75706C65  # separates coupling draws from other keyed streams
_SIDE_ID = {"r": 0, "l": 1}


@dataclass(frozen=True)
class BlockParams:
    m: int
    n: int
    K1: float
    K2: float
    a1: int
    a2: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1 or not self.K1 > 0 or not self.K2 > 0:
            raise ConfigurationError(f"invalid block parameters {self}")
        TessellationParams(self.a1, self.a2, self.m)

    @property
    def ell(self) -> int:
        return self.a1 + self.a2

    @property
    def K3(self) -> float:
        return self.K1 + self.K2 * self.ell

    @property
    def height(self) -> int:
        return 3 * self.m + 1

    def tessellation(self) -> TessellationParams:
        return TessellationParams(self.a1, self.a2, self.m)

    def to_json(self) -> dict:
        out = asdict(self)
        out["K3"] = self.K3
        return out

    @classmethod
    def from_json(cls, data: dict) -> "BlockParams":
        return cls(int(data["m"]), int(data["n"]), float(data["K1"]), float(data["K2"]), int(data["a1"]), int(data["a2"]))

    @classmethod
    def for_law(cls, law: LawSpec, m: int, n: int, K1: float, K2: float) -> "BlockParams":
        a1, a2 = dirichlet_pair(rho(law.p_o, law.p_v), n)
        return cls(m, n, K1, K2, a1, a2)


def m_for_epsilon(epsilon: float) -> int:
    """Number of interior paths, floor(log2(1/epsilon)) + 4."""
    if not 0 < epsilon < 1:
        raise ConfigurationError("epsilon must lie in (0, 1)")
    return int(math.floor(math.log2(1.0 / epsilon) + 1e-12)) + 4


@dataclass(frozen=True)
class PathRecord:
    index: int
    T: int
    T_sigma: int
    S: float
    S_sigma: float
    H: bool
    min_prefix: float
    max_prefix: float
    sum_abs: float
    max_abs: float


@dataclass(frozen=True)
class EtaSummary:
    """Sum of an eta path and the range of its prefix sums (including 0)."""

    index: int
    S: float
    lo: float
    hi: float


@dataclass(frozen=True)
class BlockReport:
    address: BlockAddress
    F0: bool
    F1: bool
    F2: bool
    F3: bool
    paths: tuple[PathRecord, ...]
    i_minus: int
    j_plus: int
    eta_minus: EtaSummary
    eta_plus: EtaSummary
    boundary_sum_abs: tuple[float, float]

    @property
    def G(self) -> bool:
        return self.F0 and self.F1 and self.F2 and self.F3

    @property
    def S_eta_minus(self) -> float:
        return self.eta_minus.S

    @property
    def S_eta_plus(self) -> float:
        return self.eta_plus.S

    def to_json(self) -> dict:
        return {
            "b": list(self.address.b),
            "side": self.address.side,
            "F0": self.F0,
            "F1": self.F1,
            "F2": self.F2,
            "F3": self.F3,
            "G": self.G,
            "i_minus": self.i_minus,
            "j_plus": self.j_plus,
            "S_eta_minus": self.eta_minus.S,
            "S_eta_plus": self.eta_plus.S,
            "boundary_sum_abs": list(self.boundary_sum_abs),
            "paths": [asdict(p) for p in self.paths],
        }


@dataclass(frozen=True)
class SymmetrizedSums:
    T: int
    T_sigma: int
    S: float
    S_sigma: float
    H: bool


def signed_rearrangement(X: np.ndarray, T: int) -> float:
    """Sum with the first (len + T)/2 weights positive and the rest negative."""
    ell = X.shape[0]
    if (ell + T) % 2:
        raise ArithmeticError(f"crossing count {T} has the wrong parity for length {ell}")
    q = (ell + T) // 2
    return float(2.0 * X[:q].sum() - X.sum())


def symmetrize_path(env, path: PathSeq, pmf_exact: Pmf, pmf_sym: Pmf, rng) -> SymmetrizedSums:
    """Read T and S along ``path`` and draw the coupled symmetric count."""
    X, Z = contributions(path, env)
    T = int(Z.sum())
    S = float(np.dot(Z, X))
    if (len(path) + T) % 2:
        raise ArithmeticError("crossing count parity does not match the path length")
    Ts = MaximalCoupling(pmf_exact, pmf_sym).draw(T, rng)
    return SymmetrizedSums(T, Ts, S, signed_rearrangement(X, Ts), Ts == T)


def _mirror(p: Pmf) -> Pmf:
    return Pmf(-p.hi, p.masses[::-1])


@lru_cache(maxsize=16)
def crossing_laws(a1: int, a2: int, p_o: float, p_v: float) -> tuple[Pmf, Pmf]:
    """(exact, symmetrized) crossing-count laws of the right-side staircase."""
    return exact_crossing_law(a1, a2, p_o, p_v), symmetrized_crossing_law(a1, a2, p_o, p_v)


class BlockClassifier:
    """Evaluates block reports for one environment and parameter set.

    Classification is a pure function of (environment, params, address):
    the coupling draws are keyed by the address, side and path index.
    """

    def __init__(self, env: Environment, params: BlockParams):
        self.env = env
        self.params = params
        self.tess = params.tessellation()
        exact_r, sym = crossing_laws(params.a1, params.a2, env.p_o, env.p_v)
        self.coupling = {"r": MaximalCoupling(exact_r, sym), "l": MaximalCoupling(_mirror(exact_r), sym)}
        self._base = {}
        for side in ("r", "l"):
            g = BlockGeometry(self.tess, BlockAddress((0, 0), side))
            self._base[side] = g.base_gamma.edge_arrays
        h = params.height
        self._vert = (
            np.zeros(h, dtype=np.int64),
            np.arange(h, dtype=np.int64),
            np.ones(h, dtype=np.int8),
            np.ones(h, dtype=np.int8),
        )
        self._X = np.empty(params.ell)
        self._Z = np.empty(params.ell, dtype=np.int8)

    def _boundary(self, geom: BlockGeometry, h: int) -> tuple[np.ndarray, float]:
        start = h * self.tess.corners()[0] + geom.offset
        ex, ey, eo, dr = self._vert
        X = np.empty(ex.shape[0])
        Z = np.empty(ex.shape[0], dtype=np.int8)
        self.env.fill_path(ex, ey, eo, dr, int(start[0]), int(start[1]), X, Z)
        return Z * X, float(np.abs(X).sum())

    def classify(self, addr: BlockAddress, rng=None) -> BlockReport:
        p = self.params
        geom = BlockGeometry(self.tess, addr)
        ex, ey, eo, dr = self._base[addr.side]
        coupling = self.coupling[addr.side]
        X, Z = self._X, self._Z
        records = []
        for i, (ox, oy) in enumerate(geom.gamma_translations(), start=1):
            self.env.fill_path(ex, ey, eo, dr, int(ox), int(oy), X, Z)
            S, T, mn, mx, sa, ma, _ = K.scan_path(X, Z)
            T = int(T)
            if (p.ell + T) % 2:
                raise ArithmeticError(f"parity mismatch on path {i} of block {addr}")
            stream = rng if rng is not None else KeyedRandom(self.env, (addr.b[0], addr.b[1], _SIDE_ID[addr.side], i, _AUX_TAG), 2)
            Ts = coupling.draw(T, stream)
            records.append(PathRecord(i, T, Ts, float(S), signed_rearrangement(X, Ts), Ts == T,
                                      float(mn), float(mx), float(sa), float(ma)))

        entry_c, entry_abs = self._boundary(geom, 0)
        exit_c, exit_abs = self._boundary(geom, geom.exit_h)
        sums = [r.S for r in records]
        i_minus = int(np.argmin(sums)) + 1
        j_plus = int(np.argmax(sums)) + 1
        F0 = all(r.H for r in records)
        F1 = entry_abs <= p.K1 / 2 and exit_abs <= p.K1 / 2
        F2 = sums[j_plus - 1] >= 2 * p.K1 and sums[i_minus - 1] <= -2 * p.K1
        F3 = max(r.max_abs for r in records) <= p.K2
        left_abs, right_abs = (entry_abs, exit_abs) if addr.side == "r" else (exit_abs, entry_abs)
        return BlockReport(
            addr, F0, F1, F2, F3, tuple(records), i_minus, j_plus,
            _eta_summary(records[i_minus - 1], entry_c, exit_c),
            _eta_summary(records[j_plus - 1], entry_c, exit_c),
            (left_abs, right_abs),
        )


def _eta_summary(rec: PathRecord, entry_c: np.ndarray, exit_c: np.ndarray) -> EtaSummary:
    o = gamma_offset(rec.index)
    head = np.cumsum(entry_c[:o])
    b0 = float(head[-1])
    tail = b0 + rec.S + np.cumsum(exit_c[o:])
    S = float(tail[-1]) if tail.size else b0 + rec.S
    lo = min(0.0, float(head.min()), b0 + rec.min_prefix, float(tail.min()) if tail.size else S)
    hi = max(0.0, float(head.max()), b0 + rec.max_prefix, float(tail.max()) if tail.size else S)
    return EtaSummary(rec.index, S, lo, hi)


@lru_cache(maxsize=8)
def _classifier(env: Environment, params: BlockParams) -> BlockClassifier:
    return BlockClassifier(env, params)


def classify_block(env: Environment, geom: BlockGeometry, params: BlockParams, rng=None) -> BlockReport:
    """Evaluate F0..F3 and G on the block described by ``geom``."""
    if geom.params != params.tessellation():
        raise ConfigurationError("geometry and block parameters disagree")
    return _classifier(env, params).classify(geom.addr, rng)


# ---------------------------------------------------------------------------
# calibration


@dataclass
class CalibrationResult:
    params: BlockParams
    estimates: dict
    trail: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"params": self.params.to_json(), "estimates": self.estimates, "trail": self.trail}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)


def _f2_probability(pp: float, pm: float, m: int) -> float:
    """P(max S >= 2K1 and min S <= -2K1) over m i.i.d. interior paths."""
    return 1.0 - (1.0 - pp) ** m - (1.0 - pm) ** m + max(0.0, 1.0 - pp - pm) ** m


def _f2_std(pp: float, pm: float, m: int, n: int) -> float:
    r = max(0.0, 1.0 - pp - pm)
    gp = m * (1.0 - pp) ** (m - 1) - m * r ** (m - 1)
    gm = m * (1.0 - pm) ** (m - 1) - m * r ** (m - 1)
    # multinomial covariance of the two indicator frequencies
    var = (gp * gp * pp * (1 - pp) + gm * gm * pm * (1 - pm) - 2 * gp * gm * pp * pm) / n
    return math.sqrt(max(var, 0.0))


def _escape_estimate(law: LawSpec, a1: int, a2: int, K1: float, m: int, target: float,
                     samples: int, seed: int, batch: int = 1000) -> tuple[float, float, int]:
    """Sequential Monte Carlo for P(S >= 2K1) and P(S <= -2K1) along a staircase.

    Sampling stops early once the implied F2 probability is more than five
    standard errors away from ``target``.
    """
    tables = law.weights.tables
    ss = np.random.SeedSequence([seed, a1, a2])
    hits_p = hits_m = n = 0
    for child in ss.spawn(max(1, samples // batch)):
        draws = K.synthetic_path_sums(int(child.generate_state(1)[0] & 0x7FFFFFFF), batch, a1, a2,
                                      law.p_o, law.p_v, *tables)
        hits_p += int((draws >= 2 * K1).sum())
        hits_m += int((draws <= -2 * K1).sum())
        n += batch
        pp, pm = hits_p / n, hits_m / n
        f2 = _f2_probability(pp, pm, m)
        if abs(f2 - target) > 5 * max(_f2_std(pp, pm, m, n), 1.0 / n):
            break
    return hits_p / n, hits_m / n, n


def abs_quantile(law: LawSpec, level: float) -> float:
    """Smallest t with P(|X| <= t) >= level."""
    return abs_tail_quantile(law, 1.0 - level)


def abs_tail_quantile(law: LawSpec, tail: float) -> float:
    """Smallest t with P(|X| > t) <= tail.

    Working with the tail keeps full precision when ``tail`` is tiny, as it
    is for the bound on all interior weights of a block.
    """
    w = law.weights
    f = lambda t: float(w.abs_sf(t)) - tail
    if f(0.0) <= 0:
        return 0.0
    if not w.has_continuous_part():
        # step function: the answer is one of the atom magnitudes
        mags = sorted({abs(v) for v in w.atom_values()})
        return next(t for t in mags if f(t) <= 0)
    hi = 1.0
    while f(hi) > 0:
        hi *= 2.0
        if hi > 1e300:
            raise CalibrationError("weight quantile diverges")
    t = optimize.brentq(f, 0.0, hi, xtol=1e-14, rtol=1e-15)
    while f(t) > 0:
        t = np.nextafter(t, np.inf)
    return float(t)


def all_bounded_probability(law: LawSpec, K2: float, count: int) -> float:
    """P(|X_e| <= K2 for ``count`` i.i.d. weights)."""
    return math.exp(count * math.log1p(-float(law.weights.abs_sf(K2))))


def _dyadic_ceil(x: float, rel: int = 6) -> float:
    """Round ``x > 0`` up to a grid of spacing 2^(floor(log2 x) - rel)."""
    step = 2.0 ** (math.floor(math.log2(x)) - rel)
    return math.ceil(x / step) * step


def calibrate_with_diagnostics(epsilon: float, law: LawSpec, *, seed: int = 0, samples: int = 10_000,
                               n_max: int = 1 << 22, verify_blocks: int = 2000, refine: bool = True,
                               ) -> CalibrationResult:
    """Choose (m, n, K1, K2) so that each of F0..F3 has probability >= 1 - epsilon/4.

    K1 comes first, from the boundary weights.  Then n is doubled along the
    aspect-ratio sequence until the coupling and escape targets hold, and
    refined by bisection to the smallest passing n.  K2 is the exact
    |X|-quantile for that n.  Finally P(G) is checked on fresh blocks.
    """
    if not 0.5 <= law.p_o <= law.p_v <= 1.0:
        raise ConfigurationError("calibration needs normalized axes (1/2 <= p_o <= p_v <= 1)")
    if law.p_o == 1.0 and law.weights.is_constant():
        raise UnsupportedRegimeError("all signs are +1 and the weights are constant")
    m = m_for_epsilon(epsilon)
    target = 1.0 - epsilon / 4.0
    h = 3 * m + 1
    r = rho(law.p_o, law.p_v)

    rng = np.random.default_rng([seed, 0x4B31])
    u = rng.random((samples, 2, h))
    bnd = np.abs(law.weights.from_uniform(u.ravel())).reshape(samples, 2, h).sum(axis=2).max(axis=1)
    q = float(np.quantile(bnd, target, method="inverted_cdf"))
    K1 = _dyadic_ceil(q) if q > 0 else 2.0 ** -20
    K1 *= 2.0
    p_f1 = float(np.mean(bnd <= K1 / 2))

    trail: list[dict] = []

    def evaluate(n: int) -> dict:
        a1, a2 = dirichlet_pair(r, n)
        exact, sym = crossing_laws(a1, a2, law.p_o, law.p_v)
        p_f0 = (1.0 - tv_distance(exact, sym)) ** m
        pp, pm, used = _escape_estimate(law, a1, a2, K1, m, target, samples, seed + n)
        rec = {"n": n, "a1": a1, "a2": a2, "P_F0": p_f0, "p_plus": pp, "p_minus": pm,
               "P_F2": _f2_probability(pp, pm, m), "mc_samples": used}
        rec["pass"] = rec["P_F0"] >= target and rec["P_F2"] >= target
        trail.append(rec)
        log.info("calibration n=%d ell=%d P_F0=%.4f P_F2=%.4f", n, a1 + a2, p_f0, rec["P_F2"])
        return rec

    n = 1
    while True:
        a1, a2 = dirichlet_pair(r, n)
        if a2 == 0 or a1 >= 2:
            break
        n += 1
    lo_fail = None
    while True:
        if n > n_max:
            raise CalibrationError(f"no n <= {n_max} meets the targets", {"trail": trail, "K1": K1})
        rec = evaluate(n)
        if rec["pass"]:
            break
        lo_fail = n
        n *= 2
    if refine and lo_fail is not None:
        hi = n
        while hi - lo_fail > max(1, hi // 32):
            mid = (hi + lo_fail) // 2
            if evaluate(mid)["pass"]:
                hi = mid
            else:
                lo_fail = mid
        n = hi
    chosen = next(t for t in reversed(trail) if t["n"] == n)
    a1, a2 = chosen["a1"], chosen["a2"]
    count = m * (a1 + a2)
    K2 = max(abs_tail_quantile(law, -math.expm1(math.log(target) / count)), 2.0 ** -20)
    while all_bounded_probability(law, K2, count) < target:
        K2 = float(np.nextafter(K2, np.inf))
    p_f3 = all_bounded_probability(law, K2, count)
    params = BlockParams(m, n, K1, K2, a1, a2)

    est = {
        "epsilon": epsilon,
        "target": target,
        "P_F0": chosen["P_F0"],
        "P_F1": p_f1,
        "P_F2": chosen["P_F2"],
        "P_F3": p_f3,
        "p_plus": chosen["p_plus"],
        "p_minus": chosen["p_minus"],
        "mix_version": K.MIX_VERSION,
        "calibration_version": CALIBRATION_VERSION,
    }
    if verify_blocks:
        env = make_environment(seed ^ 0x5EED, law)
        clf = BlockClassifier(env, params)
        good = [clf.classify(BlockAddress((2 * k, 0), "r")).G for k in range(verify_blocks)]
        pg = float(np.mean(good))
        sd = math.sqrt(max(pg * (1 - pg), 1e-12) / verify_blocks)
        est.update({"P_G": pg, "P_G_sd": sd, "verify_blocks": verify_blocks})
        if pg < 1 - epsilon - 3 * sd:
            raise CalibrationError("fresh blocks are good less often than required",
                                   {"params": params.to_json(), **est, "trail": trail})
    return CalibrationResult(params, est, trail)


def calibrate(epsilon: float, law: LawSpec, **kwargs) -> BlockParams:
    return calibrate_with_diagnostics(epsilon, law, **kwargs).params


def escape_probabilities(env: Environment, params: BlockParams, samples: int = 10_000) -> tuple[float, float]:
    """Frequencies of S(gamma_1) >= 2 K1 and <= -2 K1 over distinct right blocks."""
    clf = BlockClassifier(env, params)
    ex, ey, eo, dr = clf._base["r"]
    X, Z = clf._X, clf._Z
    hits_p = hits_m = 0
    for k in range(samples):
        geom = BlockGeometry(clf.tess, BlockAddress((k, -k), "r"))
        ox, oy = geom.gamma_translations()[0]
        env.fill_path(ex, ey, eo, dr, int(ox), int(oy), X, Z)
        S = K.scan_path(X, Z)[0]
        hits_p += S >= 2 * params.K1
        hits_m += S <= -2 * params.K1
    return hits_p / samples, hits_m / samples
