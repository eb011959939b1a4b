"""Lattice paths and their signed partial sums.

A path is a vertex sequence with unit steps.  Traversing an edge in its
positive direction (rightward or upward) contributes ``Z = +Y``; traversing it
backwards contributes ``Z = -Y``.  Along a path

    T_N = sum_{k<=N} Z_k,     S_N = sum_{k<=N} Z_k X_k,

with the convention ``S_0 = T_0 = 0``.
"""
from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .env import EdgeKey


def crossing_sign(frm, to, y: int) -> int:
    """Crossing sign of the step ``frm -> to`` over an edge with sign ``y``."""
    dx = to[0] - frm[0]
    dy = to[1] - frm[1]
    if abs(dx) + abs(dy) != 1:
        raise ValueError(f"vertices {frm} and {to} are not adjacent")
    return (dx + dy) * y


@dataclass(frozen=True, eq=False)
class PathSeq:
    """Immutable lattice path given by its vertices (an ``(N+1, 2)`` array)."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.int64).reshape(-1, 2)
        if v.shape[0] == 0:
            raise ValueError("a path needs at least one vertex")
        steps = np.abs(np.diff(v, axis=0)).sum(axis=1)
        if np.any(steps != 1):
            k = int(np.flatnonzero(steps != 1)[0])
            raise ValueError(f"vertices {k} and {k + 1} are not adjacent")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @classmethod
    def from_points(cls, points: Iterable[Sequence[int]]) -> "PathSeq":
        return cls(np.array(list(points), dtype=np.int64))

    @classmethod
    def from_steps(cls, start, steps: str) -> "PathSeq":
        """Build from a start vertex and a string over ``R U L D``."""
        moves = {"R": (1, 0), "U": (0, 1), "L": (-1, 0), "D": (0, -1)}
        d = np.array([moves[c] for c in steps], dtype=np.int64).reshape(-1, 2)
        pts = np.vstack([np.zeros((1, 2), dtype=np.int64), np.cumsum(d, axis=0)]) + np.asarray(start)
        return cls(pts)

    def __len__(self) -> int:
        return self.vertices.shape[0] - 1

    def __eq__(self, other) -> bool:
        return isinstance(other, PathSeq) and np.array_equal(self.vertices, other.vertices)

    def __hash__(self) -> int:
        return hash(self.vertices.tobytes())

    def __repr__(self) -> str:
        return f"PathSeq(len={len(self)}, start={self.start}, end={self.end})"

    @property
    def start(self) -> tuple[int, int]:
        return tuple(int(c) for c in self.vertices[0])

    @property
    def end(self) -> tuple[int, int]:
        return tuple(int(c) for c in self.vertices[-1])

    @cached_property
    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Edge keys ``(x, y, o)`` and traversal directions (+1 or -1)."""
        v = self.vertices
        d = np.diff(v, axis=0)
        lo = np.minimum(v[:-1], v[1:])
        o = (d[:, 1] != 0).astype(np.int8)
        dr = d.sum(axis=1).astype(np.int8)
        ex, ey = lo[:, 0].copy(), lo[:, 1].copy()
        for a in (ex, ey, o, dr):
            a.setflags(write=False)
        return ex, ey, o, dr

    def edges(self) -> list[EdgeKey]:
        ex, ey, o, _ = self.edge_arrays
        return [EdgeKey(int(x), int(y), "HV"[k]) for x, y, k in zip(ex, ey, o)]

    @cached_property
    def is_self_avoiding(self) -> bool:
        v = self.vertices
        codes = (v[:, 0] << 32) ^ (v[:, 1] & 0xFFFFFFFF)
        return np.unique(codes).shape[0] == v.shape[0]

    @property
    def is_cycle(self) -> bool:
        return len(self) > 0 and self.start == self.end

    def to_json(self) -> list[list[int]]:
        return self.vertices.tolist()

    @classmethod
    def from_json(cls, data) -> "PathSeq":
        return cls(np.array(data, dtype=np.int64))


@dataclass(frozen=True)
class PathSums:
    """Prefix sums along a path, indexed by N = 1..|path|."""

    T: np.ndarray
    S: np.ndarray
    X: np.ndarray
    Z: np.ndarray

    @property
    def S_end(self) -> float:
        return float(self.S[-1]) if self.S.size else 0.0

    @property
    def T_end(self) -> int:
        return int(self.T[-1]) if self.T.size else 0

    def max_abs(self) -> float:
        return float(np.abs(self.S).max()) if self.S.size else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "T_N", "S_N"])
        for k, (t, s) in enumerate(zip(self.T, self.S), start=1):
            w.writerow([k, int(t), repr(float(s))])
        return buf.getvalue()


def contributions(path: PathSeq, env) -> tuple[np.ndarray, np.ndarray]:
    """Per-step weights X and crossing signs Z of ``path`` in ``env``."""
    ex, ey, o, dr = path.edge_arrays
    if len(path) == 0:
        return np.zeros(0), np.zeros(0, dtype=np.int64)
    X, Y = env.sample(ex, ey, o)
    return X, dr.astype(np.int64) * Y


def path_sums(path: PathSeq, env) -> PathSums:
    X, Z = contributions(path, env)
    return PathSums(np.cumsum(Z), np.cumsum(Z * X), X, Z)


def _check_join(a: PathSeq, b: PathSeq) -> None:
    if a.end != b.start:
        raise ValueError(f"cannot join a path ending at {a.end} to one starting at {b.start}")


def concatenate(*paths: PathSeq) -> PathSeq:
    """Concatenation of paths whose endpoints match."""
    if not paths:
        raise ValueError("nothing to concatenate")
    parts = [paths[0].vertices]
    for a, b in zip(paths, paths[1:]):
        _check_join(a, b)
        parts.append(b.vertices[1:])
    return PathSeq(np.vstack(parts))


def reverse(path: PathSeq) -> PathSeq:
    return PathSeq(path.vertices[::-1])


def translate(path: PathSeq, b) -> PathSeq:
    return PathSeq(path.vertices + np.asarray(b, dtype=np.int64))


def truncate(path: PathSeq, i: int, j: int) -> PathSeq:
    """Sub-path through vertices ``i..j`` (so ``j - i`` edges)."""
    if not 0 <= i < j <= len(path):
        raise ValueError(f"need 0 <= i < j <= {len(path)}, got i={i}, j={j}")
    return PathSeq(path.vertices[i:j + 1])


def repeat(cycle: PathSeq, times: int) -> PathSeq:
    """Concatenate a cycle with itself ``times`` times."""
    if not cycle.is_cycle:
        raise ValueError("only cycles can be repeated")
    if times == 0:
        return PathSeq(cycle.vertices[:1])
    return concatenate(*([cycle] * times))


def prefix_sup_bound_holds(a: Sequence[float], A: float) -> bool:
    """If some ``|a_k| > A`` then ``max_n |a_1 + ... + a_n| > A/2``."""
    a = np.asarray(a, dtype=np.float64)
    if a.size == 0 or np.abs(a).max() <= A:
        return True
    return bool(np.abs(np.cumsum(a)).max() > A / 2)


class PathBuilder:
    """Mutable path with incremental prefix sums (single owner).

    ``push`` and ``pop`` are O(1); vertex visit counts are kept for
    self-avoidance checks.
    """

    def __init__(self, start, s0: float = 0.0, t0: int = 0):
        self.vertices = [tuple(start)]
        self.visits = Counter([tuple(start)])
        self.S = [s0]
        self.T = [t0]
        self.max_abs = [abs(s0)]

    def __len__(self) -> int:
        return len(self.vertices) - 1

    @property
    def head(self) -> tuple[int, int]:
        return self.vertices[-1]

    @property
    def s(self) -> float:
        return self.S[-1]

    def push(self, v, x: float, z: int) -> None:
        self.vertices.append(tuple(v))
        self.visits[tuple(v)] += 1
        s = self.S[-1] + z * x
        self.S.append(s)
        self.T.append(self.T[-1] + z)
        self.max_abs.append(max(self.max_abs[-1], abs(s)))

    def pop(self) -> None:
        v = self.vertices.pop()
        self.visits[v] -= 1
        if not self.visits[v]:
            del self.visits[v]
        self.S.pop()
        self.T.pop()
        self.max_abs.pop()

    def visited(self, v) -> bool:
        return tuple(v) in self.visits

    def to_path(self) -> PathSeq:
        return PathSeq.from_points(self.vertices)
