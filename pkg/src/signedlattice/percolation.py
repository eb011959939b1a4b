"""Oriented percolation on the block lattice.

The site ``b`` of the block lattice has two outgoing oriented edges: side
``r`` leads to ``b + (1, 0)`` and side ``l`` to ``b + (0, 1)``.  An edge is
open when the corresponding half-parallelogram block is good.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .blocks import BlockClassifier, BlockParams, BlockReport
from .env import Environment
from .tessellation import BlockAddress

_BERNOULLI_DOMAIN = 0x42455231


@dataclass(frozen=True)
class OrientedBlockPath:
    """Sequence of (address, side) pairs with ``b_{k+1} = b_k + e_side``."""

    steps: tuple[BlockAddress, ...]

    def __post_init__(self):
        for a, b in zip(self.steps, self.steps[1:]):
            if a.successor() != b.b:
                raise ValueError(f"{b.b} does not follow {a.b} through side {a.side}")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def origin(self) -> tuple[int, int]:
        return self.steps[0].b

    def sites(self) -> list[tuple[int, int]]:
        if not self.steps:
            return []
        return [s.b for s in self.steps] + [self.steps[-1].successor()]

    def sides(self) -> str:
        return "".join(s.side for s in self.steps)

    def to_json(self) -> dict:
        return {"origin": list(self.origin) if self.steps else None, "sides": self.sides()}


class BlockField:
    """Good-block indicator field with a bounded memo of block reports."""

    def __init__(self, env: Environment, params: BlockParams, cache_size: int = 1 << 14):
        self.env = env
        self.params = params
        self.classifier = BlockClassifier(env, params)
        self.cache_size = cache_size
        self._cache: OrderedDict = OrderedDict()
        self.evaluations = 0

    def report(self, b, side: str) -> BlockReport:
        key = (int(b[0]), int(b[1]), side)
        rep = self._cache.get(key)
        if rep is not None:
            self._cache.move_to_end(key)
            return rep
        rep = self.classifier.classify(BlockAddress(key[:2], side))
        self.evaluations += 1
        self._cache[key] = rep
        if len(self._cache) > self.cache_size:
            self._cache.popitem(last=False)
        return rep

    def is_open(self, b, side: str) -> bool:
        return self.report(b, side).G


def field_at(field, addr, side: str | None = None) -> int:
    """Indicator of the oriented edge ``(addr, side)``."""
    if isinstance(addr, BlockAddress):
        addr, side = addr.b, addr.side
    return int(field.is_open(addr, side))


class BernoulliField:
    """Independent open edges with probability ``p``, keyed by a seed."""

    def __init__(self, p: float, seed: int):
        self.p = p
        self.seed = seed
        self._key = K.mix_seed(seed, _BERNOULLI_DOMAIN)

    def is_open(self, b, side: str) -> bool:
        words = np.array([b[0], b[1], 0 if side == "r" else 1], dtype=np.int64)
        return bool(K.keyed_uniforms(self._key, words, 1)[0] < self.p)


class TableField:
    """Field given by an explicit set of open (b, side) edges."""

    def __init__(self, open_edges):
        self.open_edges = {((int(b[0]), int(b[1])), s) for b, s in open_edges}

    def is_open(self, b, side: str) -> bool:
        return ((int(b[0]), int(b[1])), side) in self.open_edges


def percolate_oriented(field, depth: int, origin=(0, 0)) -> OrientedBlockPath | None:
    """Depth-first search for an open oriented path of ``depth`` steps.

    Sides are tried in the order r, l, so the returned path is the
    lexicographically smallest open path.  Sites from which no path of the
    remaining length exists are remembered, which keeps the search linear
    in the number of sites explored.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    origin = (int(origin[0]), int(origin[1]))
    dead: set[tuple[int, int]] = set()
    path: list[BlockAddress] = []
    # stack of (site, next side index to try)
    stack: list[list] = [[origin, 0]]
    while stack:
        top = stack[-1]
        site, k = top
        if len(path) == depth:
            return OrientedBlockPath(tuple(path))
        if k == 2:
            dead.add(site)
            stack.pop()
            if path:
                path.pop()
            continue
        top[1] += 1
        side = "rl"[k]
        nxt = (site[0] + 1, site[1]) if side == "r" else (site[0], site[1] + 1)
        if nxt in dead or not field.is_open(site, side):
            continue
        path.append(BlockAddress(site, side))
        stack.append([nxt, 0])
    return None


@dataclass(frozen=True)
class ProbeEstimate:
    value: float
    ci_low: float
    ci_high: float
    samples: int


def _mean_ci(x: np.ndarray) -> ProbeEstimate:
    n = x.size
    mu = float(x.mean())
    sd = float(x.std(ddof=1)) / math.sqrt(n) if n > 1 else math.inf
    return ProbeEstimate(mu, mu - 1.96 * sd, mu + 1.96 * sd, n)


def _corr_ci(a: np.ndarray, b: np.ndarray) -> ProbeEstimate:
    n = a.size
    if a.std() == 0 or b.std() == 0:
        return ProbeEstimate(0.0, -math.inf, math.inf, n)
    r = float(np.corrcoef(a, b)[0, 1])
    half = 1.96 / math.sqrt(n)
    return ProbeEstimate(r, r - half, r + half, n)


def dependence_probe(field: BlockField, samples: int) -> dict[str, ProbeEstimate]:
    """Density of good blocks and correlations of neighbouring indicators.

    * adjacent pairs: the r and l halves of one parallelogram share the
      middle boundary, so their indicators may correlate;
    * separated pairs: ``(b, r)`` and ``(b + (1, 1), r)`` share no edge.
    Sites are spread along a line far apart so different samples are
    independent of each other.
    """
    if samples < 1000:
        raise ValueError("use at least 1000 samples")
    dens, adj_a, adj_b, far_a, far_b = [], [], [], [], []
    for k in range(samples):
        b = (3 * k, -3 * k)
        r = field.is_open(b, "r")
        dens.append(r)
        adj_a.append(r)
        adj_b.append(field.is_open(b, "l"))
        far_a.append(r)
        far_b.append(field.is_open((b[0] + 1, b[1] + 1), "r"))
    arr = lambda v: np.asarray(v, dtype=np.float64)
    return {
        "density": _mean_ci(arr(dens)),
        "adjacent_corr": _corr_ci(arr(adj_a), arr(adj_b)),
        "separated_corr": _corr_ci(arr(far_a), arr(far_b)),
    }
