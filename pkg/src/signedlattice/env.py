"""Lazily evaluated random environment on the edges of the square lattice.

Each edge ``e`` carries a real weight ``X_e`` drawn from a law ``L`` and a sign
``Y_e`` with ``P(Y_e = +1) = p_o`` on horizontal and ``p_v`` on vertical edges.
Values are computed on demand from ``(seed, edge)`` by a counter-based hash,
so the lattice is never stored and queries may come in any order.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np
from scipy import special

from . import _kernels as K
from .errors import ConfigurationError

MIX_VERSION = K.MIX_VERSION
H, V = 0, 1
_ORIENT_NAMES = ("H", "V")

_ENV_DOMAIN = 0x454E56
_AUX_DOMAIN = 0x415558


@dataclass(frozen=True, order=True)
class EdgeKey:
    """An edge of Z^2: left endpoint for ``H``, bottom endpoint for ``V``."""

    x: int
    y: int
    orient: str

    def __post_init__(self):
        if self.orient not in _ORIENT_NAMES:
            raise ConfigurationError(f"orientation must be H or V, got {self.orient!r}")

    @property
    def o(self) -> int:
        return _ORIENT_NAMES.index(self.orient)

    def translate(self, dx: int, dy: int) -> "EdgeKey":
        return EdgeKey(self.x + dx, self.y + dy, self.orient)

    def endpoints(self) -> tuple[tuple[int, int], tuple[int, int]]:
        if self.orient == "H":
            return (self.x, self.y), (self.x + 1, self.y)
        return (self.x, self.y), (self.x, self.y + 1)

    @classmethod
    def between(cls, v, w) -> "EdgeKey":
        (vx, vy), (wx, wy) = v, w
        if abs(vx - wx) + abs(vy - wy) != 1:
            raise ValueError(f"vertices {v} and {w} are not adjacent")
        if vy == wy:
            return cls(min(vx, wx), vy, "H")
        return cls(vx, min(vy, wy), "V")

    def to_json(self) -> list:
        return [self.x, self.y, self.orient]

    @classmethod
    def from_json(cls, data) -> "EdgeKey":
        x, y, o = data
        return cls(int(x), int(y), str(o))


# ---------------------------------------------------------------------------
# laws


_KINDS = ("constant", "atoms", "uniform", "gaussian", "mixture")


@dataclass(frozen=True)
class WeightLaw:
    """Law of the edge weights X.

    Use the constructors :meth:`constant`, :meth:`atoms`, :meth:`uniform`,
    :meth:`gaussian` and :meth:`mixture`.  ``args`` holds the parameters in
    a hashable form.  ``countable`` marks an atom list standing for a
    countable rational support (for instance a truncated geometric series).
    """

    kind: str
    args: tuple
    countable: bool = False

    # constructors -----------------------------------------------------
    @classmethod
    def constant(cls, c: float) -> "WeightLaw":
        return cls("constant", (float(c),))._checked()

    @classmethod
    def atoms(cls, pairs: Iterable[tuple[float, float]], countable: bool = False) -> "WeightLaw":
        return cls("atoms", tuple((float(v), float(p)) for v, p in pairs), countable)._checked()

    @classmethod
    def uniform(cls, a: float, b: float) -> "WeightLaw":
        return cls("uniform", (float(a), float(b)))._checked()

    @classmethod
    def gaussian(cls, mu: float, sigma: float) -> "WeightLaw":
        return cls("gaussian", (float(mu), float(sigma)))._checked()

    @classmethod
    def mixture(cls, parts: Iterable[tuple[float, "WeightLaw"]]) -> "WeightLaw":
        return cls("mixture", tuple((float(w), law) for w, law in parts))._checked()

    # validation -------------------------------------------------------
    def _checked(self) -> "WeightLaw":
        if self.kind not in _KINDS:
            raise ConfigurationError(f"unknown law kind {self.kind!r}")
        if self.kind in ("atoms", "mixture"):
            if not self.args:
                raise ConfigurationError(f"{self.kind} law needs at least one entry")
            weights = [w for _, w in self.args] if self.kind == "atoms" else [w for w, _ in self.args]
            if any(w < 0 or not math.isfinite(w) for w in weights):
                raise ConfigurationError("weights must be finite and nonnegative")
            if abs(math.fsum(weights) - 1.0) > 1e-12:
                raise ConfigurationError(f"weights sum to {math.fsum(weights)!r}, expected 1")
        if self.kind == "uniform" and not self.args[0] <= self.args[1]:
            raise ConfigurationError("uniform(a, b) needs a <= b")
        if self.kind == "gaussian" and not self.args[1] >= 0:
            raise ConfigurationError("gaussian sigma must be nonnegative")
        if not all(math.isfinite(a) and math.isfinite(b) for _, _, a, b in self.primitives()):
            raise ConfigurationError("law parameters must be finite")
        return self

    # structure --------------------------------------------------------
    def primitives(self) -> list[tuple[float, int, float, float]]:
        """Flatten into (weight, kind, p1, p2) primitives with positive weight.

        Degenerate uniforms and gaussians become constants.
        """
        if self.kind == "constant":
            return [(1.0, K.KIND_CONST, self.args[0], 0.0)]
        if self.kind == "atoms":
            return [(p, K.KIND_CONST, v, 0.0) for v, p in self.args if p > 0]
        if self.kind == "uniform":
            a, b = self.args
            if a == b:
                return [(1.0, K.KIND_CONST, a, 0.0)]
            return [(1.0, K.KIND_UNIFORM, a, b)]
        if self.kind == "gaussian":
            mu, sigma = self.args
            if sigma == 0:
                return [(1.0, K.KIND_CONST, mu, 0.0)]
            return [(1.0, K.KIND_GAUSS, mu, sigma)]
        out = []
        for w, law in self.args:
            if w > 0:
                out.extend((w * w2, k, a, b) for w2, k, a, b in law.primitives())
        return out

    @cached_property
    def tables(self) -> tuple[np.ndarray, ...]:
        prims = self.primitives()
        wts = np.array([p[0] for p in prims], dtype=np.float64)
        wts = wts / wts.sum()
        cum = np.cumsum(wts)
        cum[-1] = 1.0
        kinds = np.array([p[1] for p in prims], dtype=np.int64)
        p1 = np.array([p[2] for p in prims], dtype=np.float64)
        p2 = np.array([p[3] for p in prims], dtype=np.float64)
        return kinds, cum, wts, p1, p2

    def is_delta_zero(self) -> bool:
        return all(k == K.KIND_CONST and a == 0.0 for _, k, a, _ in self.primitives())

    def is_constant(self) -> bool:
        vals = {a for _, k, a, _ in self.primitives() if k == K.KIND_CONST}
        return all(k == K.KIND_CONST for _, k, _, _ in self.primitives()) and len(vals) == 1

    def atom_values(self) -> list[float]:
        return sorted({a for _, k, a, _ in self.primitives() if k == K.KIND_CONST})

    def has_continuous_part(self) -> bool:
        return any(k != K.KIND_CONST for _, k, _, _ in self.primitives())

    def sup_abs(self) -> float:
        """Essential supremum of |X| (``inf`` for gaussian parts)."""
        best = 0.0
        for _, k, a, b in self.primitives():
            if k == K.KIND_GAUSS:
                return math.inf
            best = max(best, abs(a), abs(b) if k == K.KIND_UNIFORM else 0.0)
        return best

    def has_nonzero_atoms(self) -> bool:
        return any(k == K.KIND_CONST and a != 0.0 for _, k, a, _ in self.primitives())

    # distribution functions -------------------------------------------
    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros_like(x)
        for w, k, a, b in self.primitives():
            if k == K.KIND_CONST:
                out += w * (x >= a)
            elif k == K.KIND_UNIFORM:
                out += w * np.clip((x - a) / (b - a), 0.0, 1.0)
            else:
                out += w * special.ndtr((x - a) / b)
        return out

    def abs_cdf(self, t) -> np.ndarray:
        """P(|X| <= t)."""
        t = np.asarray(t, dtype=np.float64)
        out = np.zeros_like(t)
        for w, k, a, b in self.primitives():
            if k == K.KIND_CONST:
                out += w * (abs(a) <= t)
            elif k == K.KIND_UNIFORM:
                hi = np.clip((t - a) / (b - a), 0.0, 1.0)
                lo = np.clip((-t - a) / (b - a), 0.0, 1.0)
                out += w * (hi - lo)
            else:
                out += w * (special.ndtr((t - a) / b) - special.ndtr((-t - a) / b))
        return np.where(t < 0, 0.0, out)

    def abs_sf(self, t) -> np.ndarray:
        """P(|X| > t), computed from the tails so that small values keep their precision."""
        t = np.asarray(t, dtype=np.float64)
        out = np.zeros_like(t)
        for w, k, a, b in self.primitives():
            if k == K.KIND_CONST:
                out += w * (abs(a) > t)
            elif k == K.KIND_UNIFORM:
                above = np.clip(b - np.maximum(a, t), 0.0, b - a)
                below = np.clip(np.minimum(b, -t) - a, 0.0, b - a)
                out += w * (above + below) / (b - a)
            else:
                out += w * (special.ndtr((a - t) / b) + special.ndtr((-t - a) / b))
        return np.where(t < 0, 1.0, out)

    def from_uniform(self, u) -> np.ndarray:
        """Map uniforms to weights with the routine the environment uses.

        A mixture component is chosen from ``u`` and then ``u`` is rescaled
        and pushed through that component's inverse CDF.  For a single
        component this is the inverse CDF of the law.
        """
        u = np.ascontiguousarray(u, dtype=np.float64)
        return K.law_inverse_array(u, *self.tables)

    # serialization ----------------------------------------------------
    def to_json(self) -> dict:
        if self.kind == "atoms":
            out = {"kind": "atoms", "atoms": [list(a) for a in self.args]}
            if self.countable:
                out["countable"] = True
            return out
        if self.kind == "mixture":
            return {"kind": "mixture", "parts": [[w, law.to_json()] for w, law in self.args]}
        names = {"constant": ("c",), "uniform": ("a", "b"), "gaussian": ("mu", "sigma")}[self.kind]
        return {"kind": self.kind, **dict(zip(names, self.args))}

    @classmethod
    def from_json(cls, data: Mapping) -> "WeightLaw":
        kind = data.get("kind")
        if kind == "constant":
            return cls.constant(data["c"])
        if kind == "atoms":
            return cls.atoms(data["atoms"], countable=bool(data.get("countable", False)))
        if kind == "uniform":
            return cls.uniform(data["a"], data["b"])
        if kind == "gaussian":
            return cls.gaussian(data["mu"], data["sigma"])
        if kind == "mixture":
            return cls.mixture((w, cls.from_json(d)) for w, d in data["parts"])
        raise ConfigurationError(f"unknown law kind {kind!r}")

    @classmethod
    def parse(cls, text: str) -> "WeightLaw":
        """Parse a compact form such as ``uniform:-1,1``, ``gaussian:0,1``,
        ``constant:1`` or ``atoms:0=0.7,1=0.3``; mixtures are written
        ``mix:0.3*constant:0|0.7*uniform:0.5,1``."""
        kind, _, rest = text.partition(":")
        kind = kind.strip()
        try:
            if kind == "mix":
                parts = [item.partition("*") for item in rest.split("|")]
                return cls.mixture((float(w), cls.parse(sub)) for w, _, sub in parts)
            if kind == "atoms":
                pairs = [item.split("=") for item in rest.split(",") if item]
                return cls.atoms((float(v), float(p)) for v, p in pairs)
            nums = [float(v) for v in rest.split(",") if v]
            return {"constant": cls.constant, "uniform": cls.uniform, "gaussian": cls.gaussian}[kind](*nums)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"cannot parse law {text!r}") from exc


@dataclass(frozen=True)
class LawSpec:
    """Weight law plus the sign parameters of horizontal and vertical edges."""

    weights: WeightLaw
    p_o: float = 0.5
    p_v: float = 0.5

    def __post_init__(self):
        for name in ("p_o", "p_v"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {p!r}")
        if self.weights.is_delta_zero():
            raise ConfigurationError("the weight law must not be the point mass at 0")

    def to_json(self) -> dict:
        return {"weights": self.weights.to_json(), "p_o": self.p_o, "p_v": self.p_v}

    @classmethod
    def from_json(cls, data: Mapping) -> "LawSpec":
        return cls(WeightLaw.from_json(data["weights"]), float(data["p_o"]), float(data["p_v"]))


def _is_rational_ratio(a: float, b: float) -> bool:
    r = a / b
    approx = Fraction(r).limit_denominator(10_000)
    return abs(float(approx) - r) <= 1e-12 * max(1.0, abs(r))


def support_class(law: LawSpec | WeightLaw) -> str:
    """Classify the support of X as finite_rational, countably_rational or irrational."""
    w = law.weights if isinstance(law, LawSpec) else law
    if w.is_delta_zero():
        raise ConfigurationError("support class is undefined for the point mass at 0")
    if w.has_continuous_part():
        return "irrational"
    vals = [v for v in w.atom_values() if v != 0.0]
    ref = vals[0]
    if not all(_is_rational_ratio(v, ref) for v in vals[1:]):
        return "irrational"
    return "countably_rational" if w.countable else "finite_rational"


# ---------------------------------------------------------------------------
# environment


def _overlay_arrays(overlays: Mapping[EdgeKey, tuple[float, int]]):
    items = []
    for key, (xv, yv) in overlays.items():
        if yv not in (-1, 1):
            raise ConfigurationError(f"overlay sign must be +1 or -1, got {yv!r}")
        if max(abs(key.x), abs(key.y)) >= K.OVERLAY_BIAS:
            raise ConfigurationError("overlay coordinates out of range")
        code = ((key.x + K.OVERLAY_BIAS) << 32) | ((key.y + K.OVERLAY_BIAS) << 1) | key.o
        items.append((code, float(xv), int(yv)))
    items.sort()
    codes = np.array([c for c, _, _ in items], dtype=np.int64)
    xs = np.array([x for _, x, _ in items], dtype=np.float64)
    ys = np.array([y for _, _, y in items], dtype=np.int8)
    return codes, xs, ys


@dataclass(frozen=True, eq=False)
class Environment:
    """Handle on a realized environment; sampling is a pure function of
    ``(seed, edge)`` and overlay entries take precedence."""

    seed: int
    law: LawSpec
    overlays: Mapping[EdgeKey, tuple[float, int]] = field(default_factory=dict)

    @cached_property
    def key(self) -> np.uint64:
        return K.mix_seed(self.seed, _ENV_DOMAIN)

    @cached_property
    def _overlay(self):
        return _overlay_arrays(self.overlays)

    @property
    def p_o(self) -> float:
        return self.law.p_o

    @property
    def p_v(self) -> float:
        return self.law.p_v

    def sample(self, xs, ys, os) -> tuple[np.ndarray, np.ndarray]:
        """Weights and signs of the edges with keys ``(xs[k], ys[k], os[k])``
        where ``os`` uses 0 for horizontal and 1 for vertical."""
        xs = np.ascontiguousarray(xs, dtype=np.int64)
        ys = np.ascontiguousarray(ys, dtype=np.int64)
        os = np.ascontiguousarray(os, dtype=np.int64)
        return K.sample_edges(self.key, xs, ys, os, self.p_o, self.p_v, *self.law.weights.tables, *self._overlay)

    def edge_sample(self, key: EdgeKey) -> tuple[float, int]:
        X, Y = self.sample([key.x], [key.y], [key.o])
        return float(X[0]), int(Y[0])

    @cached_property
    def _affine(self) -> tuple[float, float] | None:
        prims = self.law.weights.primitives()
        if len(prims) != 1 or self.overlays:
            return None
        _, kind, a, b = prims[0]
        if kind == K.KIND_UNIFORM:
            return a, b - a
        if kind == K.KIND_CONST:
            return a, 0.0
        return None

    def fill_path(self, ex, ey, eo, dr, ox: int, oy: int, X: np.ndarray, Z: np.ndarray) -> None:
        """Write weights and crossing signs of a translated edge sequence into X, Z."""
        if self._affine is not None:
            K.fill_path_affine(self.key, ex, ey, eo, dr, np.int64(ox), np.int64(oy), self.p_o, self.p_v,
                               *self._affine, X, Z)
            return
        K.fill_path(self.key, ex, ey, eo, dr, np.int64(ox), np.int64(oy), self.p_o, self.p_v,
                    *self.law.weights.tables, *self._overlay, X, Z)

    def with_overlay(self, extra: Mapping[EdgeKey, tuple[float, int]]) -> "Environment":
        merged = dict(self.overlays)
        merged.update(extra)
        return Environment(self.seed, self.law, merged)

    def aux_uniforms(self, words: Iterable[int], count: int) -> np.ndarray:
        """Auxiliary uniforms keyed by the seed and an integer word tuple."""
        key = K.mix_seed(self.seed, _AUX_DOMAIN)
        return K.keyed_uniforms(key, np.array(list(words), dtype=np.int64), count)

    def describe(self) -> dict:
        return {
            "seed": self.seed,
            "law": self.law.to_json(),
            "overlay_edges": len(self.overlays),
            "mix_version": MIX_VERSION,
        }


def make_environment(seed: int, law: LawSpec, overlays: Mapping[EdgeKey, tuple[float, int]] | None = None) -> Environment:
    """Build an environment handle for ``seed`` and ``law``."""
    if not isinstance(law, LawSpec):
        raise ConfigurationError("law must be a LawSpec")
    return Environment(int(seed), law, dict(overlays or {}))


def edge_sample(env: Environment, key: EdgeKey) -> tuple[float, int]:
    return env.edge_sample(key)


class KeyedRandom:
    """A small deterministic uniform stream, usable where an ``rng`` with a
    ``random()`` method is expected."""

    def __init__(self, env: Environment, words: Iterable[int], size: int = 8):
        self._u = env.aux_uniforms(words, size)
        self._i = 0

    def random(self) -> float:
        if self._i >= self._u.shape[0]:
            raise RuntimeError("keyed stream exhausted")
        u = float(self._u[self._i])
        self._i += 1
        return u


# ---------------------------------------------------------------------------
# axis normalization


@dataclass(frozen=True)
class AxisTransform:
    """Lattice symmetry ``P -> swap(flip(P))`` with flips applied first."""

    flip_x: bool = False
    flip_y: bool = False
    swap: bool = False

    def apply(self, pts: np.ndarray) -> np.ndarray:
        pts = np.array(pts, dtype=np.int64, copy=True)
        if self.flip_x:
            pts[..., 0] *= -1
        if self.flip_y:
            pts[..., 1] *= -1
        if self.swap:
            pts = pts[..., ::-1].copy()
        return pts

    def invert(self, pts: np.ndarray) -> np.ndarray:
        pts = np.array(pts, dtype=np.int64, copy=True)
        if self.swap:
            pts = pts[..., ::-1].copy()
        if self.flip_x:
            pts[..., 0] *= -1
        if self.flip_y:
            pts[..., 1] *= -1
        return pts


class NormalizedEnvironment:
    """View of an environment through an axis transform chosen so that
    ``1/2 <= p_o <= p_v``.  Path sums are preserved: a path ``g`` in the
    original environment and its image under ``transform`` have equal S, T."""

    def __init__(self, base: Environment):
        p_o, p_v = base.p_o, base.p_v
        fx, fy = p_o < 0.5, p_v < 0.5
        q_o = 1 - p_o if fx else p_o
        q_v = 1 - p_v if fy else p_v
        swap = q_o > q_v
        if swap:
            q_o, q_v = q_v, q_o
        self.base = base
        self.transform = AxisTransform(fx, fy, swap)
        self.law = LawSpec(base.law.weights, q_o, q_v)
        self.seed = base.seed

    @property
    def p_o(self) -> float:
        return self.law.p_o

    @property
    def p_v(self) -> float:
        return self.law.p_v

    def sample(self, xs, ys, os):
        xs = np.asarray(xs, dtype=np.int64)
        ys = np.asarray(ys, dtype=np.int64)
        os = np.asarray(os, dtype=np.int64)
        v = np.stack([xs, ys], axis=-1)
        w = v + np.stack([1 - os, os], axis=-1)
        ov = self.transform.invert(v)
        ow = self.transform.invert(w)
        d = ow - ov
        lo = np.minimum(ov, ow)
        orient = (d[:, 1] != 0).astype(np.int64)
        X, Y = self.base.sample(lo[:, 0], lo[:, 1], orient)
        return X, (Y * d.sum(axis=1)).astype(np.int8)

    def edge_sample(self, key: EdgeKey) -> tuple[float, int]:
        X, Y = self.sample([key.x], [key.y], [key.o])
        return float(X[0]), int(Y[0])

    def fill_path(self, ex, ey, eo, dr, ox, oy, X, Z) -> None:
        Xs, Ys = self.sample(np.asarray(ex) + ox, np.asarray(ey) + oy, eo)
        X[:] = Xs
        Z[:] = np.asarray(dr) * Ys

    def aux_uniforms(self, words, count):
        return self.base.aux_uniforms(words, count)

    def describe(self) -> dict:
        out = self.base.describe()
        out["axis_transform"] = asdict(self.transform)
        return out


def normalize_axes(env: Environment) -> NormalizedEnvironment:
    return NormalizedEnvironment(env)
