"""Parallelogram tessellations, aspect-ratio sequences and block path families.

The base parallelogram has corners

    A1 = (a1, -a2),  A2 = (a1, -a2 + H),  A3 = (-a1, a2 + H),  A4 = (-a1, a2)

with ``H = 3m + 1``.  The y-axis splits it into a right half ``r`` (between
x = 0 and x = a1) and a left half ``l``.  Translates by ``b_x A2 + b_y A3``
tile the plane.  In sheared coordinates ``(x, y + (a2/a1) x)`` each half is
an axis-parallel rectangle, which is how points are located.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterator

import numpy as np

from .errors import ConfigurationError, ConstructionError
from .geometry import PathSeq, concatenate, reverse, translate, truncate

SIDES = ("r", "l")


@dataclass(frozen=True)
class TessellationParams:
    a1: int
    a2: int
    m: int

    def __post_init__(self):
        if not (self.a1 >= 1 and 0 <= self.a2 <= self.a1 and self.m >= 1):
            raise ConfigurationError(f"need a1 >= a2 >= 0, a1 >= 1 and m >= 1, got {self}")

    @property
    def height(self) -> int:
        return 3 * self.m + 1

    @property
    def ell(self) -> int:
        return self.a1 + self.a2

    def corners(self) -> np.ndarray:
        a1, a2, h = self.a1, self.a2, self.height
        return np.array([[a1, -a2], [a1, -a2 + h], [-a1, a2 + h], [-a1, a2]], dtype=np.int64)


@dataclass(frozen=True)
class BlockAddress:
    b: tuple[int, int]
    side: str

    def __post_init__(self):
        if self.side not in SIDES:
            raise ConfigurationError(f"side must be 'r' or 'l', got {self.side!r}")
        object.__setattr__(self, "b", (int(self.b[0]), int(self.b[1])))

    def successor(self) -> tuple[int, int]:
        bx, by = self.b
        return (bx + 1, by) if self.side == "r" else (bx, by + 1)


def block_offset(p: TessellationParams, b) -> np.ndarray:
    A = p.corners()
    return b[0] * A[1] + b[1] * A[2]


def parallelogram_vertices(p: TessellationParams, b=(0, 0)) -> np.ndarray:
    """Corners A1..A4 of the parallelogram with address ``b``."""
    return p.corners() + block_offset(p, b)


def locate(p: TessellationParams, point) -> BlockAddress:
    """Half-parallelogram containing ``point`` (boundary points resolved to
    the block whose closed half contains them with half-open conventions)."""
    x, y = Fraction(point[0]), Fraction(point[1])
    v = y + Fraction(p.a2, p.a1) * x
    row = math.floor(v / p.height)
    # within a row, rectangles centered at a1*c with c of the row's parity
    c = 2 * math.floor((x / p.a1 - row + 1) / 2) + row
    side = "r" if x - p.a1 * c >= 0 else "l"
    return BlockAddress(((row + c) // 2, (row - c) // 2), side)


def in_half(p: TessellationParams, addr: BlockAddress, point, strict: bool = False) -> bool:
    """Whether ``point`` lies in the closed (or open) half-parallelogram."""
    off = block_offset(p, addr.b)
    x = Fraction(point[0]) - int(off[0])
    y = Fraction(point[1]) - int(off[1])
    lo_x, hi_x = (0, p.a1) if addr.side == "r" else (-p.a1, 0)
    v = p.a1 * y + p.a2 * x
    if strict:
        return lo_x < x < hi_x and 0 < v < p.a1 * p.height
    return lo_x <= x <= hi_x and 0 <= v <= p.a1 * p.height


def edge_in_interior(p: TessellationParams, addr: BlockAddress, v, w) -> bool:
    """Whether the open segment ``v w`` lies in the interior of the half."""
    mid = ((Fraction(v[0]) + w[0]) / 2, (Fraction(v[1]) + w[1]) / 2)
    return in_half(p, addr, v) and in_half(p, addr, w) and in_half(p, addr, mid, strict=True)


# ---------------------------------------------------------------------------
# aspect ratios


def rho(p_o: float, p_v: float) -> float:
    """Aspect ratio (2 p_o - 1) / (2 p_v - 1), zero in the symmetric case."""
    if not 0.5 <= p_o <= p_v <= 1.0:
        raise ConfigurationError(f"need 1/2 <= p_o <= p_v <= 1, got p_o={p_o}, p_v={p_v}")
    if p_v == 0.5:
        return 0.0
    return (2 * p_o - 1) / (2 * p_v - 1)


def rational_form(x: float, max_denominator: int = 10_000, tol: float = 1e-12) -> Fraction | None:
    """``x`` as a fraction with small denominator, or ``None`` if none fits."""
    f = Fraction(x).limit_denominator(max_denominator)
    return f if abs(float(f) - x) <= tol else None


def convergents(x: float, max_terms: int = 64) -> Iterator[Fraction]:
    """Continued-fraction convergents of ``x`` computed with exact rationals."""
    r = Fraction(x)
    h0, h1 = 1, math.floor(r)
    k0, k1 = 0, 1
    yield Fraction(h1, k1)
    frac = r - math.floor(r)
    for _ in range(max_terms):
        if frac == 0:
            return
        r = 1 / frac
        a = math.floor(r)
        frac = r - a
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        yield Fraction(h1, k1)


def dirichlet_pair(rho_value: float, n: int) -> tuple[int, int]:
    """n-th pair (a1, a2) with a2/a1 approximating ``rho_value``.

    Rational ratios give multiples of the reduced pair.  Otherwise the
    convergents p/q with p >= 1 and q >= 2 are used; they increase in both
    components and satisfy |p/q - rho| <= 1/q^2.
    """
    if n < 1:
        raise ConfigurationError("n must be positive")
    if not 0.0 <= rho_value <= 1.0:
        raise ConfigurationError("rho must lie in [0, 1]")
    f = rational_form(rho_value)
    if f is not None:
        return n * f.denominator, n * f.numerator
    good = (c for c in convergents(rho_value) if c.numerator >= 1 and c.denominator >= 2)
    for k, c in enumerate(good, start=1):
        if k == n:
            return c.denominator, c.numerator
    raise ConfigurationError(f"ran out of convergents for rho={rho_value} at n={n}")


# ---------------------------------------------------------------------------
# staircase and block paths


@lru_cache(maxsize=64)
def _staircase_vertices(a1: int, a2: int) -> np.ndarray:
    if a2 == 0:
        pts = np.zeros((a1 + 1, 2), dtype=np.int64)
        pts[:, 0] = np.arange(a1 + 1)
        return pts
    if a1 == 1:
        raise ConstructionError("no staircase with horizontal first and last steps for a1=1, a2>=1")
    pts = np.empty((a1 + a2 + 1, 2), dtype=np.int64)
    pts[0] = (0, 0)
    pts[1] = (1, 0)
    k = 1
    y = 0
    for x in range(1, a1):
        # lowest exit height keeping y + (a2/a1) x >= -1 inside the column
        target = -a2 if x == a1 - 1 else max(-a2, -((a2 * x) // a1) - 1)
        while y > target:
            y -= 1
            k += 1
            pts[k] = (x, y)
        k += 1
        pts[k] = (x + 1, y)
    assert k == a1 + a2
    return pts


def staircase_path(a1: int, a2: int) -> PathSeq:
    """Decreasing path from the origin to (a1, -a2) inside the stripe
    ``|y + (a2/a1) x| <= 1`` whose first and last steps are horizontal."""
    if not (a1 >= 1 and 0 <= a2 <= a1):
        raise ConstructionError(f"need a1 >= 1 and 0 <= a2 <= a1, got ({a1}, {a2})")
    return PathSeq(_staircase_vertices(a1, a2))


def gamma_offset(i: int) -> int:
    """Vertical offset 2 + 3(i - 1) of the i-th interior path (i = 1..m)."""
    return 2 + 3 * (i - 1)


def _vertical(x: int, y0: int, y1: int) -> PathSeq:
    ys = np.arange(y0, y1 + 1) if y1 >= y0 else np.arange(y0, y1 - 1, -1)
    return PathSeq(np.column_stack([np.full(ys.shape, x), ys]))


class BlockGeometry:
    """Paths and boundary edge sets of one half-parallelogram block.

    Everything is computed lazily; the interior paths of a block are
    translates of one staircase, so large blocks are classified from the
    staircase's edge arrays and per-path offsets without building each path.
    """

    def __init__(self, p: TessellationParams, addr: BlockAddress):
        self.params = p
        self.addr = addr
        self.side = addr.side
        self.offset = block_offset(p, addr.b)

    @property
    def m(self) -> int:
        return self.params.m

    @property
    def ell(self) -> int:
        return self.params.ell

    @cached_property
    def corners(self) -> np.ndarray:
        return parallelogram_vertices(self.params, self.addr.b)

    @property
    def entry(self) -> tuple[int, int]:
        return tuple(int(c) for c in self.offset)

    @property
    def exit(self) -> tuple[int, int]:
        A = self.params.corners()
        e = self.offset + (A[1] if self.side == "r" else A[2])
        return int(e[0]), int(e[1])

    @cached_property
    def base_gamma(self) -> PathSeq:
        """Untranslated ``gamma_0`` for this side, from the origin."""
        g = staircase_path(self.params.a1, self.params.a2)
        if self.side == "l":
            g = translate(reverse(g), self.params.corners()[3])
        return g

    def gamma_translations(self) -> np.ndarray:
        """Translation vectors taking ``base_gamma`` to gamma_1..gamma_m."""
        i = np.arange(1, self.m + 1)
        out = np.zeros((self.m, 2), dtype=np.int64)
        out[:, 0] = self.offset[0]
        out[:, 1] = self.offset[1] + 2 + 3 * (i - 1)
        return out

    def gamma(self, i: int) -> PathSeq:
        if not 1 <= i <= self.m:
            raise IndexError(f"path index must be in 1..{self.m}")
        return translate(self.base_gamma, self.gamma_translations()[i - 1])

    def beta(self, h: int) -> PathSeq:
        """Vertical path through h*A1 with 3m + 1 upward edges (h in -1, 0, 1)."""
        if h not in (-1, 0, 1):
            raise ValueError("h must be -1, 0 or 1")
        base = h * self.params.corners()[0] + self.offset
        return _vertical(int(base[0]), int(base[1]), int(base[1]) + self.params.height)

    @property
    def exit_h(self) -> int:
        return 1 if self.side == "r" else -1

    def left_boundary(self) -> PathSeq:
        """Boundary path on the left vertical side of this half."""
        return self.beta(0 if self.side == "r" else -1)

    def right_boundary(self) -> PathSeq:
        return self.beta(1 if self.side == "r" else 0)

    def entry_boundary(self) -> PathSeq:
        """The shared boundary ``beta^0`` that every eta path starts on."""
        return self.beta(0)

    def exit_boundary(self) -> PathSeq:
        return self.beta(self.exit_h)

    def eta(self, i: int) -> PathSeq:
        o = gamma_offset(i)
        h = self.params.height
        return concatenate(
            truncate(self.beta(0), 0, o),
            self.gamma(i),
            truncate(self.beta(self.exit_h), o, h),
        )

    def boundary_edge_sets(self) -> dict[str, list]:
        """Edge sets E^{u,l} and E^{u,r} keyed by 'l' and 'r'."""
        return {"l": self.left_boundary().edges(), "r": self.right_boundary().edges()}

    def to_json(self) -> dict:
        return {
            "address": list(self.addr.b),
            "side": self.side,
            "corners": self.corners.tolist(),
            "entry": list(self.entry),
            "exit": list(self.exit),
            "gamma": [self.gamma(i).to_json() for i in range(1, self.m + 1)],
            "beta": {str(h): self.beta(h).to_json() for h in (-1, 0, 1)},
            "eta": [self.eta(i).to_json() for i in range(1, self.m + 1)],
        }


def block_paths(p: TessellationParams, addr: BlockAddress) -> BlockGeometry:
    return BlockGeometry(p, addr)


def tessellation_dump(p: TessellationParams, bx=range(-1, 2), by=range(-1, 2)) -> str:
    """JSON dataset with parallelogram corners and the paths of the base blocks."""
    data = {
        "params": {"a1": p.a1, "a2": p.a2, "m": p.m},
        "parallelograms": [
            {"b": [i, j], "corners": parallelogram_vertices(p, (i, j)).tolist()} for i in bx for j in by
        ],
        "blocks": [BlockGeometry(p, BlockAddress((0, 0), s)).to_json() for s in SIDES],
    }
    return json.dumps(data, indent=1)
