"""Bounded-sum paths along percolating block paths and the exit-sum chain.

Walking through good blocks, the path picks in each block the eta path whose
sum opposes the current running sum (the minimal path when the sum is
positive, the maximal one otherwise; zero counts as negative).  The exit sums

    s_{k+1} = s_k - zeta^-_k 1{s_k > 0} + zeta^+_k 1{s_k <= 0}

then stay in [-K3, K3], and every prefix sum of the path stays within 2 K3.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numba as nb
import numpy as np

from .blocks import BlockParams
from .env import Environment
from .errors import ConstructionError
from .geometry import PathSeq, concatenate, path_sums
from .percolation import BlockField, OrientedBlockPath
from .tessellation import BlockGeometry


@dataclass
class ChainState:
    k: int = 0
    s: float = 0.0
    history: list = field(default_factory=list)


@dataclass
class EtaStarResult:
    s: np.ndarray
    choices: list
    prefix_max_abs: float
    max_abs_s: float
    violations: list
    entered_at: int | None
    length: int
    prefix_sum: float = 0.0
    path: PathSeq | None = None

    @property
    def ok(self) -> bool:
        return not self.violations

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "s_k"])
        for k, v in enumerate(self.s):
            w.writerow([k, repr(float(v))])
        return buf.getvalue()


def build_eta_star(env: Environment, params: BlockParams, block_path: OrientedBlockPath,
                   steps: int | None = None, vertical_prefix_h: int | None = None, *,
                   field: BlockField | None = None, emit_path: bool = False) -> EtaStarResult:
    """Concatenate the sign-opposing eta paths along ``block_path``.

    Bounds are checked from the first step at which ``|s_k| <= K3`` (the
    start when there is no vertical prefix); past that point the interval
    is invariant on good blocks.  With ``vertical_prefix_h = h`` the block
    path must start at ``(h, h)``, and the vertical segment from the origin
    to that block's entry corner is walked first.
    """
    field = field or BlockField(env, params)
    steps = len(block_path) if steps is None else steps
    if steps > len(block_path):
        raise ValueError("block path is shorter than the requested number of steps")
    tess = params.tessellation()
    K3 = params.K3
    segments: list[PathSeq] = []

    s = 0.0
    running_abs = 0.0
    if vertical_prefix_h is not None:
        h = vertical_prefix_h
        if block_path.origin != (h, h):
            raise ValueError(f"block path must start at ({h}, {h})")
        top = 2 * params.height * h
        prefix = PathSeq(np.column_stack([np.zeros(top + 1, dtype=np.int64), np.arange(top + 1)]))
        if top:
            ps = path_sums(prefix, env)
            s = ps.S_end
            running_abs = ps.max_abs()
        if emit_path:
            segments.append(prefix)
    prefix_sum = s
    length = 0 if vertical_prefix_h is None else 2 * params.height * vertical_prefix_h

    trace = [s]
    choices = []
    violations = []
    entered_at = 0 if abs(s) <= K3 else None
    post_max = 0.0 if entered_at is None else abs(s)
    for k in range(steps):
        addr = block_path.steps[k]
        rep = field.report(addr.b, addr.side)
        if not rep.G:
            raise ConstructionError(f"block {addr.b} side {addr.side} is not good")
        eta = rep.eta_minus if s > 0 else rep.eta_plus
        lo, hi = s + eta.lo, s + eta.hi
        seg_max = max(abs(lo), abs(hi))
        running_abs = max(running_abs, seg_max)
        if entered_at is not None:
            post_max = max(post_max, seg_max)
            if seg_max > 2 * K3:
                violations.append((k, "prefix", seg_max))
        choices.append((addr.b, addr.side, "-" if s > 0 else "+", eta.index))
        if emit_path:
            segments.append(BlockGeometry(tess, addr).eta(eta.index))
        s = s + eta.S
        length += params.height + params.ell
        trace.append(s)
        if entered_at is None and abs(s) <= K3:
            entered_at = k + 1
        elif entered_at is not None and abs(s) > K3:
            violations.append((k + 1, "exit_sum", abs(s)))

    path = concatenate(*segments) if emit_path and segments else None
    if path is not None and not path.is_self_avoiding:
        violations.append((steps, "self_avoidance", 0.0))
    arr = np.asarray(trace)
    tail = arr[entered_at:] if entered_at is not None else arr[:0]
    return EtaStarResult(
        s=arr,
        choices=choices,
        prefix_max_abs=post_max if entered_at is not None else running_abs,
        max_abs_s=float(np.abs(tail).max()) if tail.size else math.inf,
        violations=violations,
        entered_at=entered_at,
        length=length,
        prefix_sum=prefix_sum,
        path=path,
    )


@dataclass
class PrefixForm:
    """Decomposition of a vertical-prefix sum into signed edge weights."""

    h: int
    terms: int
    value: float
    off_support: int

    @property
    def ok(self) -> bool:
        return self.terms % 2 == 0 and self.off_support == 0


def vertical_prefix_form(env: Environment, params: BlockParams, h: int) -> PrefixForm:
    """Check that the vertical-prefix sum is a sum of an even number of terms
    from ``+-supp(X)``.

    For laws with a continuous part only the parity of the term count is
    checked; for purely atomic laws every term must be a signed atom.
    """
    if h < 0:
        raise ValueError("h must be nonnegative")
    top = 2 * params.height * h
    if top == 0:
        return PrefixForm(h, 0, 0.0, 0)
    prefix = PathSeq(np.column_stack([np.zeros(top + 1, dtype=np.int64), np.arange(top + 1)]))
    ps = path_sums(prefix, env)
    off = 0
    w = env.law.weights
    if not w.has_continuous_part():
        atoms = np.abs(np.asarray(w.atom_values()))
        off = int(np.count_nonzero(~np.isin(np.abs(ps.X), atoms)))
    return PrefixForm(h, int(ps.X.size), ps.S_end, off)


# ---------------------------------------------------------------------------
# the exit-sum chain


@dataclass
class IncrementLaws:
    """Samplers for the positive increments zeta^- and zeta^+.

    Each sampler maps ``(rng, size)`` to an array of draws.
    """

    minus: Callable[[np.random.Generator, int], np.ndarray]
    plus: Callable[[np.random.Generator, int], np.ndarray]
    description: str = ""

    @classmethod
    def constant(cls, zeta_minus: float, zeta_plus: float) -> "IncrementLaws":
        return cls(lambda rng, n: np.full(n, float(zeta_minus)),
                   lambda rng, n: np.full(n, float(zeta_plus)),
                   f"constant({zeta_minus}, {zeta_plus})")

    @classmethod
    def atoms(cls, values: Sequence[float], weights: Sequence[float] | None = None,
              plus_values: Sequence[float] | None = None) -> "IncrementLaws":
        v_minus = np.asarray(values, dtype=np.float64)
        v_plus = np.asarray(values if plus_values is None else plus_values, dtype=np.float64)
        w = None if weights is None else np.asarray(weights, dtype=np.float64)
        return cls(lambda rng, n: rng.choice(v_minus, size=n, p=w),
                   lambda rng, n: rng.choice(v_plus, size=n, p=w if plus_values is None else None),
                   f"atoms({list(values)})")

    @classmethod
    def empirical(cls, minus: np.ndarray, plus: np.ndarray) -> "IncrementLaws":
        minus = np.asarray(minus, dtype=np.float64)
        plus = np.asarray(plus, dtype=np.float64)
        if minus.size == 0 or plus.size == 0:
            raise ValueError("empirical increment laws need at least one sample each")
        return cls(lambda rng, n: rng.choice(minus, size=n), lambda rng, n: rng.choice(plus, size=n),
                   f"empirical({minus.size}, {plus.size})")

    @classmethod
    def from_blocks(cls, field: BlockField, n_blocks: int, start: int = 0) -> "IncrementLaws":
        """Record -S(eta_-) and S(eta_+) on good blocks among ``n_blocks``
        pairwise disjoint blocks."""
        minus, plus = [], []
        for k in range(start, start + n_blocks):
            side = "rl"[k % 2]
            rep = field.report((2 * k, -2 * k), side)
            if rep.G:
                minus.append(-rep.S_eta_minus)
                plus.append(rep.S_eta_plus)
        return cls.empirical(np.array(minus), np.array(plus))


@nb.njit(cache=True)
def _chain(x0, zm, zp):
    out = np.empty(zm.shape[0])
    s = x0
    for k in range(zm.shape[0]):
        if s > 0:
            s = s - zm[k]
        else:
            s = s + zp[k]
        out[k] = s
    return out


def simulate_chain(laws: IncrementLaws, x0: float, steps: int, rng: np.random.Generator) -> np.ndarray:
    """Values s_1, ..., s_steps of the exit-sum chain started at ``x0``."""
    if steps < 1:
        raise ValueError("steps must be positive")
    zm = np.ascontiguousarray(laws.minus(rng, steps), dtype=np.float64)
    zp = np.ascontiguousarray(laws.plus(rng, steps), dtype=np.float64)
    return _chain(float(x0), zm, zp)


def recurrence_stats(s: Sequence[float], epsilon: float) -> dict:
    """Exact zeros and entries into the closed band ``|s| <= epsilon``."""
    s = np.asarray(s, dtype=np.float64)
    inside = np.abs(s) <= epsilon
    entries = inside & ~np.concatenate([[False], inside[:-1]])
    return {
        "zero_returns": int(np.count_nonzero(s == 0.0)),
        "eps_hits": int(np.count_nonzero(inside)),
        "first_hit_times": (np.flatnonzero(entries) + 1).tolist(),
    }


def zero_sum_schedule(positives: Sequence, negatives: Sequence) -> list:
    """Order a zero-sum collection so that partial sums return to 0.

    ``positives`` are added and ``negatives`` (given as positive magnitudes)
    subtracted: add while the current sum is <= 0, subtract while it is > 0.
    Exact arithmetic is used for ints and Fractions.  Returns the partial sums.
    """
    pos = list(positives)
    neg = list(negatives)
    if sum(pos) != sum(neg):
        raise ValueError("the collection does not sum to zero")
    s = 0 * (pos[0] if pos else 0)
    out = []
    while pos or neg:
        if s <= 0 and pos:
            s += pos.pop()
        elif neg:
            s -= neg.pop()
        else:
            s += pos.pop()
        out.append(s)
    return out


# ---------------------------------------------------------------------------
# rotation dynamics


def induced_map_eval(w: float, theta: float) -> float:
    """First-return map of the two-value dynamics on (0, 1]."""
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    if not 0 < w <= 1:
        raise ValueError("w must lie in (0, 1]")
    return 1.0 - theta + w if w <= theta else w - theta


def rotation_orbit(theta: float, w0: float, N: int) -> np.ndarray:
    """Points w0, f(w0), ..., f^{N-1}(w0) of the induced map."""
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    if N < 1:
        raise ValueError("N must be positive")
    out = np.empty(N)
    w = w0
    for k in range(N):
        out[k] = w
        w = induced_map_eval(w, theta)
    return out


def circle_max_gap(points: np.ndarray) -> float:
    """Largest gap between points on the circle of length 1."""
    p = np.sort(np.mod(points, 1.0))
    gaps = np.diff(p)
    wrap = 1.0 - p[-1] + p[0]
    return float(max(gaps.max() if gaps.size else 0.0, wrap))


def two_value_orbit(x_bar: float, y_bar: float, z: float, u: Sequence[float]) -> np.ndarray:
    """w_0 = z, then w_{n+1} = w_n + (y + u_n) 1{w_n <= 0} - (x + u_n) 1{w_n > 0}."""
    w = np.empty(len(u) + 1)
    w[0] = z
    for n, un in enumerate(u):
        w[n + 1] = w[n] + (y_bar + un) if w[n] <= 0 else w[n] - (x_bar + un)
    return w


def first_near_zero_step(x_bar: float, y_bar: float, z: float, eps: float, max_steps: int = 10 ** 6) -> int | None:
    """Smallest n >= 1 with -eps <= w_n <= 0 for the unperturbed orbit."""
    w = z
    for n in range(1, max_steps + 1):
        w = w + y_bar if w <= 0 else w - x_bar
        if -eps <= w <= 0:
            return n
    return None


def stability_threshold(x_bar: float, y_bar: float, z: float, eps: float, m: int) -> float:
    """Perturbation size below which orbits from z and z + eps keep their
    unperturbed signs for steps 0..m-1.

    Under matching signs, n perturbations move w_n by less than n * rho, so
    rho is bounded by the distance of each orbit point to the sign change
    divided by its step index.  Returns 0 when the two unperturbed orbits
    already disagree in sign.
    """
    a = two_value_orbit(x_bar, y_bar, z, np.zeros(m))
    b = two_value_orbit(x_bar, y_bar, z + eps, np.zeros(m))
    if np.any((a[:m] > 0) != (b[:m] > 0)):
        return 0.0
    best = math.inf
    for n in range(1, m):
        for w in (a[n], b[n]):
            d = w if w > 0 else -w
            best = min(best, d / n)
    return best
