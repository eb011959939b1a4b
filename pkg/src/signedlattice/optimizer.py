"""Minimax path search and explicit constructions of bounded and unbounded sums.

* :func:`minimax_search` minimizes ``max_N |S_N|`` over self-avoiding paths in
  a finite box by depth-first branch and bound.
* :func:`zero_path_search` looks for long paths made of zero-weight edges.
* :func:`flat_path` steers the running sum back toward zero with 4-cycles,
  which keeps every prefix within ``6 C`` where ``C = sup |X|``.
* :func:`plant_outward_ball` and :func:`find_heavy_vertex` produce
  configurations forcing large sums on every path through them.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from . import _kernels as K
from .env import EdgeKey, Environment
from .errors import ConfigurationError, DegenerateCycleError
from .geometry import PathSeq, path_sums

log = logging.getLogger(__name__)

# neighbour order: right, up, left, down
_DIRS = np.array([[1, 0], [0, 1], [-1, 0], [0, -1]], dtype=np.int64)


@dataclass(frozen=True)
class SearchBox:
    """Vertices ``xmin..xmax`` by ``ymin..ymax``, a start, optional target and
    the path length: exact length without a target, maximum length with one."""

    xmin: int
    xmax: int
    ymin: int
    ymax: int
    start: tuple[int, int]
    max_length: int
    target: tuple[int, int] | None = None

    def __post_init__(self):
        if self.xmin > self.xmax or self.ymin > self.ymax:
            raise ConfigurationError("empty box")
        for v in (self.start, self.target):
            if v is not None and not self.contains(v):
                raise ConfigurationError(f"{v} lies outside the box")
        if self.max_length < 0:
            raise ConfigurationError("max_length must be nonnegative")

    @classmethod
    def square(cls, side: int, max_length: int, start=(0, 0), target=None) -> "SearchBox":
        """Box with ``side`` vertices per row, lower-left corner at the origin."""
        return cls(0, side - 1, 0, side - 1, tuple(start), max_length, None if target is None else tuple(target))

    def contains(self, v) -> bool:
        return self.xmin <= v[0] <= self.xmax and self.ymin <= v[1] <= self.ymax

    @property
    def width(self) -> int:
        return self.xmax - self.xmin + 1

    @property
    def height(self) -> int:
        return self.ymax - self.ymin + 1


@dataclass(frozen=True)
class MinimaxResult:
    value: float
    witness: PathSeq | None
    exact: bool
    nodes: int

    def to_json(self) -> dict:
        return {
            "value": self.value if math.isfinite(self.value) else None,
            "witness": self.witness.to_json() if self.witness is not None else None,
            "exact": self.exact,
            "nodes": self.nodes,
        }


def step_contributions(env, box: SearchBox) -> np.ndarray:
    """Array ``c[ix, iy, d]`` of Z X for the step from a box vertex in
    direction ``d`` (right, up, left, down); NaN where the step leaves the box."""
    W, H = box.width, box.height
    c = np.full((W, H, 4), np.nan)
    if W > 1:
        xs, ys = np.meshgrid(np.arange(box.xmin, box.xmax), np.arange(box.ymin, box.ymax + 1), indexing="ij")
        X, Y = env.sample(xs.ravel(), ys.ravel(), np.zeros(xs.size, dtype=np.int64))
        v = (X * Y).reshape(W - 1, H)
        c[:-1, :, 0] = v
        c[1:, :, 2] = -v
    if H > 1:
        xs, ys = np.meshgrid(np.arange(box.xmin, box.xmax + 1), np.arange(box.ymin, box.ymax), indexing="ij")
        X, Y = env.sample(xs.ravel(), ys.ravel(), np.ones(xs.size, dtype=np.int64))
        v = (X * Y).reshape(W, H - 1)
        c[:, :-1, 1] = v
        c[:, 1:, 3] = -v
    return c


@nb.njit(cache=True)
def _branch_and_bound(c, sx, sy, tx, ty, L, node_budget):
    W, H = c.shape[0], c.shape[1]
    visited = np.zeros((W, H), dtype=np.bool_)
    vx = np.empty(L + 1, dtype=np.int64)
    vy = np.empty(L + 1, dtype=np.int64)
    nd = np.zeros(L + 1, dtype=np.int64)
    S = np.zeros(L + 1)
    M = np.zeros(L + 1)
    best = np.inf
    best_len = -1
    best_x = np.empty(L + 1, dtype=np.int64)
    best_y = np.empty(L + 1, dtype=np.int64)
    dx = (1, 0, -1, 0)
    dy = (0, 1, 0, -1)
    depth = 0
    vx[0] = sx
    vy[0] = sy
    visited[sx, sy] = True
    nodes = 0
    complete = True
    while depth >= 0:
        x = vx[depth]
        y = vy[depth]
        at_goal = (tx >= 0 and x == tx and y == ty) or (tx < 0 and depth == L)
        if at_goal or nd[depth] == 4 or depth == L:
            if at_goal and M[depth] < best:
                best = M[depth]
                best_len = depth
                best_x[: depth + 1] = vx[: depth + 1]
                best_y[: depth + 1] = vy[: depth + 1]
            visited[x, y] = False
            depth -= 1
            continue
        d = nd[depth]
        nd[depth] += 1
        cv = c[x, y, d]
        if cv != cv:
            continue
        nx = x + dx[d]
        ny = y + dy[d]
        if visited[nx, ny]:
            continue
        s = S[depth] + cv
        m = max(M[depth], abs(s))
        if m >= best:
            continue
        nodes += 1
        if nodes > node_budget:
            complete = False
            break
        depth += 1
        vx[depth] = nx
        vy[depth] = ny
        nd[depth] = 0
        S[depth] = s
        M[depth] = m
        visited[nx, ny] = True
    return best, best_len, best_x, best_y, nodes, complete


def minimax_search(env, box: SearchBox, node_budget: int = 50_000_000) -> MinimaxResult:
    """Minimum over self-avoiding box paths of the largest |prefix sum|.

    Without a target the paths have exactly ``box.max_length`` edges; with a
    target they run from the start to the target with at most that many.
    Ties keep the first path found in the order right, up, left, down.  When
    the node budget runs out the best path so far is returned with
    ``exact=False``.
    """
    c = step_contributions(env, box)
    sx, sy = box.start[0] - box.xmin, box.start[1] - box.ymin
    tx, ty = (-1, -1) if box.target is None else (box.target[0] - box.xmin, box.target[1] - box.ymin)
    best, n, bx, by, nodes, complete = _branch_and_bound(c, sx, sy, tx, ty, box.max_length, node_budget)
    if n < 0:
        return MinimaxResult(math.inf, None, complete, int(nodes))
    pts = np.column_stack([bx[: n + 1] + box.xmin, by[: n + 1] + box.ymin])
    return MinimaxResult(float(best), PathSeq(pts), bool(complete), int(nodes))


# ---------------------------------------------------------------------------
# zero-weight paths


@nb.njit(cache=True)
def _zero_bfs(key, kinds, cum, wts, p1, p2, ov_codes, ov_x, ov_y, sx, sy, L):
    R = L
    size = 2 * R + 1
    dist = np.full((size, size), -1, dtype=np.int32)
    came = np.full((size, size), -1, dtype=np.int8)
    qx = np.empty(size * size, dtype=np.int64)
    qy = np.empty(size * size, dtype=np.int64)
    dist[R, R] = 0
    qx[0] = R
    qy[0] = R
    head = 0
    tail = 1
    n_ov = ov_codes.shape[0]
    dxs = (1, 0, -1, 0)
    dys = (0, 1, 0, -1)
    while head < tail:
        ix = qx[head]
        iy = qy[head]
        head += 1
        dcur = dist[ix, iy]
        if dcur == L:
            return ix - R, iy - R, dist, came
        for d in range(4):
            jx = ix + dxs[d]
            jy = iy + dys[d]
            if jx < 0 or jy < 0 or jx >= size or jy >= size or dist[jx, jy] >= 0:
                continue
            # edge key of the step
            x0 = sx + min(ix, jx) - R
            y0 = sy + min(iy, jy) - R
            o = 1 if dxs[d] == 0 else 0
            base = K.edge_base(key, x0, y0, o)
            xv = K.law_inverse(K.to_unit(K.fmix(base + K._LX)), kinds, cum, wts, p1, p2)
            if n_ov > 0:
                code = K.overlay_code(x0, y0, o)
                i = np.searchsorted(ov_codes, code)
                if i < n_ov and ov_codes[i] == code:
                    xv = ov_x[i]
            if xv != 0.0:
                continue
            dist[jx, jy] = dcur + 1
            came[jx, jy] = d
            qx[tail] = jx
            qy[tail] = jy
            tail += 1
    return 0, 0, dist, came


def zero_path_search(env: Environment, start, target_length: int) -> PathSeq | None:
    """Self-avoiding path of ``target_length`` zero-weight edges from ``start``.

    Breadth-first search over zero-weight edges; the path returned is a
    shortest path in that subgraph to a vertex at graph distance exactly
    ``target_length``, hence self-avoiding.  Returns None when no vertex of
    the zero cluster is that far from ``start``.
    """
    start = (int(start[0]), int(start[1]))
    if target_length <= 0:
        return PathSeq.from_points([start])
    L = int(target_length)
    ex, ey, dist, came = _zero_bfs(env.key, *env.law.weights.tables, *env._overlay, start[0], start[1], L)
    R = L
    if dist[ex + R, ey + R] != L:
        return None
    pts = [(ex, ey)]
    ix, iy = ex + R, ey + R
    while (ix, iy) != (R, R):
        d = came[ix, iy]
        ix, iy = ix - _DIRS[d, 0], iy - _DIRS[d, 1]
        pts.append((ix - R, iy - R))
    pts.reverse()
    return PathSeq(np.array(pts, dtype=np.int64) + np.asarray(start))


# ---------------------------------------------------------------------------
# flat paths


@dataclass
class FlatPathResult:
    path: PathSeq
    sums: np.ndarray
    anchors: np.ndarray
    C_bar: float
    cycle_prefix_violations: int = 0
    degenerate_steps: list = field(default_factory=list)

    @property
    def max_abs(self) -> float:
        return float(np.abs(self.sums).max()) if self.sums.size else 0.0

    @property
    def anchor_max_abs(self) -> float:
        return float(np.abs(self.anchors).max()) if self.anchors.size else 0.0


def _bounded_sup(env) -> float:
    w = env.law.weights
    c = w.sup_abs()
    if env.overlays:
        c = max(c, max(abs(x) for x, _ in env.overlays.values()))
    return c


def flat_leg(env, start, direction, n: int, s0: float = 0.0, on_degenerate: str = "auto",
             C_bar: float | None = None) -> FlatPathResult:
    """Flat path from ``start`` to ``start + n * direction``.

    At each lattice step the next edge is taken directly when it does not
    push the running sum further from zero.  Otherwise the 4-cycle on the
    right-hand side of the step (the one below for rightward legs), oriented
    against the running sum, is walked the least number of times that brings
    the sum to zero or across it, and then the edge is taken.

    A cycle with zero sum cannot steer.  With ``on_degenerate="auto"`` a cycle
    of four zero weights is skipped (the edge is taken directly and the step
    index logged) while a cancelling nonzero cycle raises
    :class:`DegenerateCycleError`; ``"raise"`` and ``"skip"`` force either.
    """
    if on_degenerate not in ("auto", "raise", "skip"):
        raise ValueError("on_degenerate must be 'auto', 'raise' or 'skip'")
    if n < 1:
        raise ValueError("n must be positive")
    d = np.asarray(direction, dtype=np.int64)
    if np.abs(d).sum() != 1:
        raise ValueError("direction must be a unit lattice vector")
    nrm = np.array([d[1], -d[0]], dtype=np.int64)
    P0 = np.asarray(start, dtype=np.int64)
    C = _bounded_sup(env) if C_bar is None else C_bar

    # cycle vertices P, P + d, P + d + nrm, P + nrm for all anchors at once
    k = np.arange(n)[:, None]
    P = P0 + k * d
    corners = np.stack([P, P + d, P + d + nrm, P + nrm, P], axis=1)
    a = corners[:, :-1].reshape(-1, 2)
    b = corners[:, 1:].reshape(-1, 2)
    diff = b - a
    lo = np.minimum(a, b)
    orient = (diff[:, 1] != 0).astype(np.int64)
    X, Y = env.sample(lo[:, 0], lo[:, 1], orient)
    cyc = (diff.sum(axis=1) * Y * X).reshape(n, 4)

    verts = [tuple(P0)]
    sums = []
    anchors = []
    s = s0
    violations = 0
    degenerate = []
    for j in range(n):
        step = cyc[j, 0]
        p = corners[j]
        if step * s > 0:
            sig = cyc[j].sum()
            if sig == 0:
                all_zero = not np.any(cyc[j])
                if on_degenerate == "raise" or (on_degenerate == "auto" and not all_zero):
                    raise DegenerateCycleError(f"zero cycle sum at anchor {tuple(p[0])}")
                degenerate.append(j)
                log.info("zero cycle sum at anchor %s; taking the edge directly", tuple(p[0]))
            else:
                xi = -1 if s * sig > 0 else 1
                order = [0, 1, 2, 3] if xi == 1 else [3, 2, 1, 0]
                contrib = [cyc[j, e] if xi == 1 else -cyc[j, e] for e in order]
                cyc_verts = [tuple(p[i]) for i in (1, 2, 3, 4)] if xi == 1 else [tuple(p[i]) for i in (3, 2, 1, 0)]
                per = xi * sig
                reps = max(1, int(math.floor(abs(s) / abs(sig))))
                while s * (s + (reps - 1) * per) <= 0 and reps > 1:
                    reps -= 1
                cap = math.ceil(4 * C / abs(sig)) + 1 if math.isfinite(C) else None
                while s * (s + reps * per) > 0:
                    reps += 1
                    if cap is not None and reps > cap:
                        raise ArithmeticError("cycle repetition count exceeds its bound")
                for _ in range(reps):
                    t = s
                    for cv, vv in zip(contrib, cyc_verts):
                        t += cv
                        sums.append(t)
                        verts.append(vv)
                        r = (t - s) if per < 0 else (s - t)
                        if not -4 * C < r < 2 * C:
                            violations += 1
                    s = t
        s = s + step
        sums.append(s)
        verts.append(tuple(p[1]))
        anchors.append(s)
    return FlatPathResult(PathSeq(np.array(verts, dtype=np.int64)), np.asarray(sums), np.asarray(anchors),
                          C, violations, degenerate)


def flat_path(env, n: int, check_law: bool = True, on_degenerate: str = "auto") -> FlatPathResult:
    """Flat path from the origin to ``(n, 0)``; see :func:`flat_leg`."""
    if check_law:
        w = env.law.weights
        if not math.isfinite(w.sup_abs()) or w.has_nonzero_atoms():
            raise ConfigurationError("flat paths need bounded weights without nonzero atoms")
    return flat_leg(env, (0, 0), (1, 0), n, 0.0, on_degenerate)


def flat_route(env, u, v, on_degenerate: str = "auto") -> FlatPathResult:
    """L-shaped flat route: horizontal leg from ``u`` then vertical leg to ``v``."""
    u = tuple(int(c) for c in u)
    v = tuple(int(c) for c in v)
    parts = []
    s = 0.0
    cur = u
    for axis in (0, 1):
        delta = v[axis] - cur[axis]
        if delta == 0:
            continue
        direction = (int(np.sign(delta)), 0) if axis == 0 else (0, int(np.sign(delta)))
        leg = flat_leg(env, cur, direction, abs(delta), s, on_degenerate)
        parts.append(leg)
        s = float(leg.anchors[-1])
        cur = leg.path.end
    if not parts:
        return FlatPathResult(PathSeq.from_points([u]), np.zeros(0), np.zeros(0), _bounded_sup(env))
    verts = np.vstack([parts[0].path.vertices] + [p.path.vertices[1:] for p in parts[1:]])
    return FlatPathResult(
        PathSeq(verts),
        np.concatenate([p.sums for p in parts]),
        np.concatenate([p.anchors for p in parts]),
        parts[0].C_bar,
        sum(p.cycle_prefix_violations for p in parts),
        [j for p in parts for j in p.degenerate_steps],
    )


# ---------------------------------------------------------------------------
# configurations forcing large sums


def _sign0(a: int) -> int:
    return 1 if a >= 0 else -1


def plant_outward_ball(env, center, L: int) -> dict[EdgeKey, tuple[float, int]]:
    """Overlay with unit weights inside the L1 ball and signs pointing outward.

    A horizontal edge at horizontal offset ``a`` from the center gets sign
    ``sign(a)`` and a vertical one at vertical offset ``b`` gets ``sign(b)``,
    with sign(0) = +1.  Every step inside the ball then contributes the change
    of L1 distance to the center.
    """
    if L < 1:
        raise ValueError("L must be positive")
    ux, uy = int(center[0]), int(center[1])
    out = {}
    for a in range(-L, L + 1):
        for b in range(-(L - abs(a)), L - abs(a) + 1):
            if abs(a + 1) + abs(b) <= L:
                out[EdgeKey(ux + a, uy + b, "H")] = (1.0, _sign0(a))
            if abs(a) + abs(b + 1) <= L:
                out[EdgeKey(ux + a, uy + b, "V")] = (1.0, _sign0(b))
    return out


@dataclass
class OutwardBallReport:
    L: int
    paths_tested: int
    edges_checked: int
    sums: list
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures


def _l1(p, c) -> int:
    return abs(p[0] - c[0]) + abs(p[1] - c[1])


def verify_outward_ball(env, center, L: int, n_paths: int = 200, seed: int = 0) -> OutwardBallReport:
    """Check that every step inside the ball contributes the L1-distance change
    and that random center-to-boundary walks (with backtracking) sum to L."""
    center = (int(center[0]), int(center[1]))
    failures = []
    keys = list(plant_outward_ball(env, center, L))
    X, Y = env.sample([k.x for k in keys], [k.y for k in keys], [k.o for k in keys])
    for key, x, y in zip(keys, X, Y):
        v, w = key.endpoints()
        if x * y != _l1(w, center) - _l1(v, center):
            failures.append(("edge", key.to_json()))
    rng = np.random.default_rng(seed)
    sums = []
    for i in range(n_paths):
        pts = [center]
        while _l1(pts[-1], center) < L:
            d = _DIRS[rng.integers(4)]
            pts.append((pts[-1][0] + int(d[0]), pts[-1][1] + int(d[1])))
        ps = path_sums(PathSeq.from_points(pts), env)
        dist = np.array([_l1(p, center) for p in pts[1:]])
        if not np.array_equal(ps.S, dist.astype(np.float64)):
            failures.append(("path", i))
        sums.append(ps.S_end)
        if ps.S_end != L:
            failures.append(("sum", i, ps.S_end))
    return OutwardBallReport(L, n_paths, len(keys), sums, failures)


def _incident_abs(env, box: SearchBox) -> np.ndarray:
    c = step_contributions(env, box)
    return np.abs(c)


def find_heavy_vertices(env, box: SearchBox, C: float) -> list[tuple[int, int]]:
    """All box vertices whose four incident edges have |X| > C.

    Vertices on the box border are skipped since one incident edge lies
    outside the box.
    """
    a = _incident_abs(env, box)
    heavy = np.all(a > C, axis=2)
    idx = np.argwhere(heavy)
    return [(int(i) + box.xmin, int(j) + box.ymin) for i, j in idx]


def find_heavy_vertex(env, box: SearchBox, C: float) -> tuple[int, int] | None:
    found = find_heavy_vertices(env, box, C)
    return found[0] if found else None
