"""Experiment harness: configuration, per-seed runs and replayable reports.

Every subcommand writes into its output directory

* ``config.json``: the resolved configuration, the hash-function version and
  the package version;
* ``summary.json``: aggregated results and the invariants checked;
* one or more CSV data tables;
* ``manifest.json``: SHA-256 digests of the data tables and the summary.

``replay`` re-executes a report from its ``config.json`` and compares
digests.  Multi-seed runs use seeds ``seed, seed + 1, ...``; the worker count
comes from the ``SIGNEDLATTICE_WORKERS`` environment variable.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Callable

import numpy as np

from . import _kernels as K
from .blocks import BlockParams, abs_quantile, calibrate_with_diagnostics, m_for_epsilon
from .builder import IncrementLaws, build_eta_star, circle_max_gap, recurrence_stats, rotation_orbit, simulate_chain
from .env import EdgeKey, LawSpec, WeightLaw, make_environment, normalize_axes, support_class
from .errors import CalibrationError, ConfigurationError, DegenerateCycleError, UnsupportedRegimeError
from .geometry import path_sums
from .optimizer import (SearchBox, find_heavy_vertices, flat_path, minimax_search, plant_outward_ball,
                        verify_outward_ball)
from .percolation import BlockField, percolate_oriented
from .probability import (CltBoundInputs, clt_bound_eval, exact_crossing_law, symmetrized_crossing_law,
                          tv_distance)
from .tessellation import dirichlet_pair, rho, tessellation_dump

log = logging.getLogger(__name__)

WORKERS_ENV = "SIGNEDLATTICE_WORKERS"
SUBCOMMANDS = ("env-stats", "calibrate", "classify-blocks", "percolate", "build-path", "chain", "rotation",
               "flat-path", "minimax", "counterexample", "tv-check", "clt-bound")


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


@dataclass
class ExperimentConfig:
    seed: int = 0
    seeds: int = 1
    law: str = "uniform:-1,1"
    po: float = 0.5
    pv: float = 0.5
    epsilon: float = 0.2
    m: int | None = None
    n: int | None = None
    K1: float | None = None
    K2: float | None = None
    depth: int = 100
    steps: int = 1000
    box: int = 6
    length: int | None = None
    samples: int = 10_000
    theta: float | None = None
    zeta_minus: list = field(default_factory=lambda: [1.0])
    zeta_plus: list = field(default_factory=lambda: [1.0])
    threshold: float | None = None
    dump_geometry: bool = False
    out: str = "report"

    def __post_init__(self):
        for name in ("seeds", "depth", "steps", "box", "samples"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive")
        if not 0 < self.epsilon < 1:
            raise ConfigurationError("epsilon must lie in (0, 1)")
        self.law_spec()

    def law_spec(self) -> LawSpec:
        return LawSpec(WeightLaw.parse(self.law), self.po, self.pv)

    def seed_list(self) -> list[int]:
        return [self.seed + i for i in range(self.seeds)]

    def to_json(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigurationError(f"unknown config fields {sorted(unknown)}")
        return cls(**data)


@dataclass
class RunResult:
    summary: dict
    tables: dict[str, list[list]]
    headers: dict[str, list[str]]
    invariants: dict[str, bool]
    files: dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.invariants.values())


# ---------------------------------------------------------------------------
# helpers


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _map_seeds(fn: Callable, cfg: ExperimentConfig, extra=None) -> list:
    workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    args = [(cfg.to_json(), s, extra) for s in cfg.seed_list()]
    if workers <= 1 or len(args) == 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*args)))


def _environment(cfg: ExperimentConfig, seed: int):
    env = make_environment(seed, cfg.law_spec())
    if 0.5 <= env.p_o <= env.p_v:
        return env
    return normalize_axes(env)


def _normalized_law(cfg: ExperimentConfig) -> LawSpec:
    return _environment(cfg, cfg.seed).law


def _geometry_files(cfg: ExperimentConfig, params: BlockParams) -> dict[str, str]:
    if not cfg.dump_geometry:
        return {}
    return {"tessellation.json": tessellation_dump(params.tessellation()) + "\n"}


def _block_params(cfg: ExperimentConfig) -> tuple[BlockParams, dict]:
    law = _normalized_law(cfg)
    overrides = (cfg.m, cfg.n, cfg.K1, cfg.K2)
    if all(v is not None for v in overrides):
        return BlockParams.for_law(law, *overrides), {"source": "config"}
    if any(v is not None for v in overrides):
        raise ConfigurationError("block overrides need all of m, n, K1, K2")
    res = calibrate_with_diagnostics(cfg.epsilon, law, seed=cfg.seed, samples=cfg.samples)
    return res.params, {"source": "calibrated", "estimates": res.estimates}


# ---------------------------------------------------------------------------
# per-seed workers (top level so that they pickle)


def _w_env_stats(c, seed, _):
    cfg = ExperimentConfig.from_json(c)
    env = _environment(cfg, seed)
    side = cfg.box
    xs, ys = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    out = []
    for o in (0, 1):
        X, Y = env.sample(xs.ravel(), ys.ravel(), np.full(xs.size, o))
        out.append([seed, "HV"[o], X.size, float(X.mean()), float(np.abs(X).mean()), float((Y == 1).mean())])
    return out


def _w_classify(c, seed, pj):
    cfg = ExperimentConfig.from_json(c)
    params = BlockParams.from_json(pj)
    field_ = BlockField(_environment(cfg, seed), params)
    rows = []
    ok = True
    for k in range(cfg.depth):
        rep = field_.report((2 * k, 0), "r")
        g = rep.F0 and rep.F1 and rep.F2 and rep.F3
        eta_ok = not rep.G or (abs(rep.S_eta_minus) <= params.K3 and abs(rep.S_eta_plus) <= params.K3)
        ok &= (g == rep.G) and eta_ok
        rows.append([seed, 2 * k, 0, "r", rep.F0, rep.F1, rep.F2, rep.F3, rep.G, rep.S_eta_minus, rep.S_eta_plus])
    return rows, ok


def _w_percolate(c, seed, payload):
    cfg = ExperimentConfig.from_json(c)
    params = BlockParams.from_json(payload["params"])
    env = _environment(cfg, seed)
    field_ = BlockField(env, params)
    path = percolate_oriented(field_, cfg.depth)
    row = [seed, path is not None, path.sides() if path else "", field_.evaluations]
    if not payload["build"]:
        ok = path is None or all(field_.is_open(a.b, a.side) for a in path.steps)
        return row, [], ok
    if path is None:
        return row, [], True
    res = build_eta_star(env, params, path, field=field_)
    trace = [[seed, k, v] for k, v in enumerate(res.s)]
    row += [res.max_abs_s, res.prefix_max_abs, len(res.violations)]
    return row, trace, res.ok


def _w_chain(c, seed, _):
    cfg = ExperimentConfig.from_json(c)
    laws = IncrementLaws.atoms(cfg.zeta_minus, plus_values=cfg.zeta_plus)
    s = simulate_chain(laws, 0.0, cfg.steps, np.random.default_rng(seed))
    eps = cfg.threshold if cfg.threshold is not None else 1e-3
    st = recurrence_stats(s, eps)
    lo, hi = -max(cfg.zeta_minus), max(cfg.zeta_plus)
    ok = bool(np.all(s > lo) and np.all(s <= hi))
    first = st["first_hit_times"][0] if st["first_hit_times"] else ""
    return [seed, cfg.steps, st["zero_returns"], st["eps_hits"], first, float(np.abs(s).max())], ok


def _w_flat(c, seed, _):
    cfg = ExperimentConfig.from_json(c)
    env = make_environment(seed, cfg.law_spec())
    try:
        res = flat_path(env, cfg.steps)
    except DegenerateCycleError:
        return [seed, "", "", "", "", "degenerate"], False
    C = res.C_bar
    ok = res.max_abs <= 6 * C and res.anchor_max_abs <= 4 * C and res.cycle_prefix_violations == 0
    return [seed, res.max_abs, res.anchor_max_abs, len(res.path), len(res.degenerate_steps),
            res.cycle_prefix_violations], ok


def _w_minimax(c, seed, _):
    cfg = ExperimentConfig.from_json(c)
    env = make_environment(seed, cfg.law_spec())
    L = cfg.length if cfg.length is not None else 2 * cfg.box
    res = minimax_search(env, SearchBox.square(cfg.box, L))
    ok = True
    if res.witness is not None:
        ok = path_sums(res.witness, env).max_abs() == res.value and res.witness.is_self_avoiding
    return [seed, res.value, res.exact, res.nodes], ok


def _w_tv(c, _seed, _):
    cfg = ExperimentConfig.from_json(c)
    law = _normalized_law(cfg)
    r = rho(law.p_o, law.p_v)
    rows = []
    n = 1
    while n <= cfg.steps:
        a1, a2 = dirichlet_pair(r, n)
        exact = exact_crossing_law(a1, a2, law.p_o, law.p_v)
        sym = symmetrized_crossing_law(a1, a2, law.p_o, law.p_v)
        rows.append([n, a1, a2, a1 + a2, tv_distance(exact, sym)])
        n *= 2
    return rows


# ---------------------------------------------------------------------------
# subcommands


def run_env_stats(cfg: ExperimentConfig) -> RunResult:
    rows = [r for part in _map_seeds(_w_env_stats, cfg) for r in part]
    law = cfg.law_spec()
    inv = {}
    for orient, p in (("H", law.p_o), ("V", law.p_v)):
        sel = [r for r in rows if r[1] == orient]
        freq = float(np.mean([r[5] for r in sel]))
        n = sum(r[2] for r in sel)
        inv[f"sign_frequency_{orient}"] = abs(freq - p) <= 5 * math.sqrt(p * (1 - p) / n) + 1e-12
    summary = {"support_class": support_class(law)}
    return RunResult(summary, {"env_stats": rows},
                     {"env_stats": ["seed", "orient", "edges", "mean_X", "mean_abs_X", "freq_Y_plus"]}, inv)


def run_calibrate(cfg: ExperimentConfig) -> RunResult:
    res = calibrate_with_diagnostics(cfg.epsilon, _normalized_law(cfg), seed=cfg.seed, samples=cfg.samples)
    trail = [[t["n"], t["a1"], t["a2"], t["P_F0"], t["p_plus"], t["p_minus"], t["P_F2"], t["mc_samples"], t["pass"]]
             for t in res.trail]
    inv = {"m_matches_epsilon": res.params.m == m_for_epsilon(cfg.epsilon)}
    if "P_G" in res.estimates:
        inv["good_block_rate"] = res.estimates["P_G"] >= 1 - cfg.epsilon - 3 * res.estimates["P_G_sd"]
    summary = {"params": res.params.to_json(), "estimates": res.estimates}
    return RunResult(summary, {"calibration_trail": trail},
                     {"calibration_trail": ["n", "a1", "a2", "P_F0", "p_plus", "p_minus", "P_F2", "mc_samples",
                                            "pass"]}, inv)


def run_classify_blocks(cfg: ExperimentConfig) -> RunResult:
    params, info = _block_params(cfg)
    parts = _map_seeds(_w_classify, cfg, params.to_json())
    rows = [r for p, _ in parts for r in p]
    good = float(np.mean([r[8] for r in rows]))
    summary = {"params": params.to_json(), "params_info": info, "good_fraction": good}
    return RunResult(summary, {"blocks": rows},
                     {"blocks": ["seed", "bx", "by", "side", "F0", "F1", "F2", "F3", "G", "S_eta_minus",
                                 "S_eta_plus"]},
                     {"indicator_consistency": all(ok for _, ok in parts)}, _geometry_files(cfg, params))


def _run_percolation(cfg: ExperimentConfig, build: bool) -> RunResult:
    params, info = _block_params(cfg)
    parts = _map_seeds(_w_percolate, cfg, {"params": params.to_json(), "build": build})
    rows = [r for r, _, _ in parts]
    found = float(np.mean([r[1] for r in rows]))
    header = ["seed", "found", "sides", "blocks_evaluated"]
    tables = {"percolation": rows}
    headers = {"percolation": header}
    inv_name = "open_paths" if not build else "eta_star_bounds"
    if build:
        header += ["max_abs_s", "prefix_max_abs", "violations"]
        for r in rows:
            r += [""] * (len(header) - len(r))
        tables["exit_sums"] = [t for _, tr, _ in parts for t in tr]
        headers["exit_sums"] = ["seed", "k", "s_k"]
    summary = {"params": params.to_json(), "params_info": info, "found_fraction": found, "depth": cfg.depth}
    return RunResult(summary, tables, headers, {inv_name: all(ok for _, _, ok in parts)},
                     _geometry_files(cfg, params))


def run_percolate(cfg: ExperimentConfig) -> RunResult:
    return _run_percolation(cfg, build=False)


def run_build_path(cfg: ExperimentConfig) -> RunResult:
    return _run_percolation(cfg, build=True)


def run_chain(cfg: ExperimentConfig) -> RunResult:
    parts = _map_seeds(_w_chain, cfg)
    rows = [r for r, _ in parts]
    summary = {"zero_returns_total": sum(r[2] for r in rows), "eps_hits_total": sum(r[3] for r in rows)}
    return RunResult(summary, {"chain": rows},
                     {"chain": ["seed", "steps", "zero_returns", "eps_hits", "first_hit", "max_abs_s"]},
                     {"chain_band": all(ok for _, ok in parts)})


def run_rotation(cfg: ExperimentConfig) -> RunResult:
    theta = cfg.theta if cfg.theta is not None else (math.sqrt(5.0) - 1.0) / 2.0
    orbit = rotation_orbit(theta, 1.0, cfg.steps)
    gap = circle_max_gap(orbit)
    rows = [[k, w] for k, w in enumerate(orbit)]
    inv = {"orbit_in_unit_interval": bool(np.all((orbit > 0) & (orbit <= 1)))}
    if cfg.threshold is not None:
        inv["max_gap_below_threshold"] = gap <= cfg.threshold
    return RunResult({"theta": theta, "max_gap": gap}, {"orbit": rows}, {"orbit": ["k", "w"]}, inv)


def run_flat_path(cfg: ExperimentConfig) -> RunResult:
    parts = _map_seeds(_w_flat, cfg)
    rows = [r for r, _ in parts]
    summary = {"n": cfg.steps, "max_abs_sum": {str(r[0]): r[1] for r in rows}}
    return RunResult(summary, {"flat_path": rows},
                     {"flat_path": ["seed", "max_abs_sum", "anchor_max_abs", "length", "degenerate_steps",
                                    "cycle_prefix_violations"]},
                     {"flat_bounds": all(ok for _, ok in parts)})


def run_minimax(cfg: ExperimentConfig) -> RunResult:
    parts = _map_seeds(_w_minimax, cfg)
    rows = [r for r, _ in parts]
    summary = {"box": cfg.box, "length": cfg.length if cfg.length is not None else 2 * cfg.box,
               "min_value": min(r[1] for r in rows)}
    return RunResult(summary, {"minimax": rows}, {"minimax": ["seed", "value", "exact", "nodes"]},
                     {"witness_matches_value": all(ok for _, ok in parts)})


def run_counterexample(cfg: ExperimentConfig) -> RunResult:
    base = make_environment(cfg.seed, cfg.law_spec())
    rows = []
    ball_ok = True
    for L in range(1, cfg.depth + 1):
        env = base.with_overlay(plant_outward_ball(base, (0, 0), L))
        rep = verify_outward_ball(env, (0, 0), L, n_paths=cfg.samples if cfg.samples < 1000 else 200, seed=cfg.seed)
        ball_ok &= rep.ok
        rows.append([L, rep.paths_tested, rep.edges_checked, min(rep.sums), max(rep.sums), rep.ok])
    # planted heavy vertices at spread-out interior points
    rng = np.random.default_rng(cfg.seed)
    side = max(cfg.box, 8)
    box = SearchBox.square(side, 0)
    C = 9.0
    planted = {(int(a), int(b)) for a, b in rng.integers(1, side - 1, size=(5, 2))}
    overlay = {}
    for v in planted:
        for key in (EdgeKey(v[0], v[1], "H"), EdgeKey(v[0] - 1, v[1], "H"), EdgeKey(v[0], v[1], "V"),
                    EdgeKey(v[0], v[1] - 1, "V")):
            overlay[key] = (10.0, 1)
    found = set(find_heavy_vertices(base.with_overlay(overlay), box, C))
    recall = len(planted & found) / len(planted)
    heavy_rows = [[v[0], v[1], v in found] for v in sorted(planted)]
    summary = {"outward_ball_L": cfg.depth, "heavy_recall": recall}
    return RunResult(summary, {"outward_ball": rows, "heavy_vertices": heavy_rows},
                     {"outward_ball": ["L", "paths", "edges", "min_sum", "max_sum", "ok"],
                      "heavy_vertices": ["x", "y", "found"]},
                     {"outward_ball_exact": ball_ok, "heavy_recall_full": recall == 1.0})


def run_tv_check(cfg: ExperimentConfig) -> RunResult:
    rows = _w_tv(cfg.to_json(), cfg.seed, None)
    tvs = [r[4] for r in rows]
    inv = {"tv_decreasing": all(b < a for a, b in zip(tvs, tvs[1:]))}
    law = _normalized_law(cfg)
    return RunResult({"rho": rho(law.p_o, law.p_v), "tv": tvs},
                     {"tv": rows}, {"tv": ["n", "a1", "a2", "ell", "tv"]}, inv)


def _truncated_moments(law: LawSpec, K: float, grid: int = 1 << 20) -> tuple[float, float]:
    """P(|X| < K) and Var(X 1{|X| < K}) by midpoint quadrature over uniforms."""
    u = (np.arange(grid) + 0.5) / grid
    x = law.weights.from_uniform(u)
    inside = np.abs(x) < K
    y = np.where(inside, x, 0.0)
    return float(inside.mean()), float(y.var())


def run_clt_bound(cfg: ExperimentConfig) -> RunResult:
    law = cfg.law_spec()
    if cfg.threshold is not None:
        K_cut = abs(cfg.threshold)
    else:
        K_cut = 2.0 * abs_quantile(law, 0.75) or 1.0
    pi_K, sigma2 = _truncated_moments(law, K_cut)
    env = make_environment(cfg.seed, law)
    rows = []
    ok = True
    N = 16
    while N <= cfg.steps:
        phi = math.sqrt(N) / math.log(N)
        t1, t2, t3, total = clt_bound_eval(CltBoundInputs(K_cut, pi_K, sigma2, phi, N))
        n_paths = min(cfg.samples, 2000)
        xs = np.tile(np.arange(N), n_paths)
        ys = np.repeat(np.arange(n_paths), N)
        X, Y = env.sample(xs, ys, np.zeros(xs.size, dtype=np.int64))
        S = (X * Y).reshape(n_paths, N).sum(axis=1)
        freq = float(np.mean(np.abs(S) <= phi))
        sd = math.sqrt(max(freq * (1 - freq), 1.0 / n_paths) / n_paths)
        ok &= freq <= total + 3 * sd
        rows.append([N, phi, t1, t2, t3, total, freq])
        N *= 2
    summary = {"K": K_cut, "pi_K": pi_K, "sigma_K2": sigma2}
    return RunResult(summary, {"clt_bound": rows},
                     {"clt_bound": ["N", "phi_N", "term1", "term2", "term3", "total", "mc_frequency"]},
                     {"bound_dominates_mc": ok})


RUNNERS: dict[str, Callable[[ExperimentConfig], RunResult]] = {
    "env-stats": run_env_stats,
    "calibrate": run_calibrate,
    "classify-blocks": run_classify_blocks,
    "percolate": run_percolate,
    "build-path": run_build_path,
    "chain": run_chain,
    "rotation": run_rotation,
    "flat-path": run_flat_path,
    "minimax": run_minimax,
    "counterexample": run_counterexample,
    "tv-check": run_tv_check,
    "clt-bound": run_clt_bound,
}


# ---------------------------------------------------------------------------
# reports


def _report_files(subcommand: str, cfg: ExperimentConfig, res: RunResult) -> dict[str, bytes]:
    files = {}
    for name, rows in res.tables.items():
        files[f"{name}.csv"] = _csv(res.headers[name], rows).encode()
    for name, text in res.files.items():
        files[name] = text.encode()
    summary = {"subcommand": subcommand, "ok": res.ok, "invariants": res.invariants, **res.summary}
    files["summary.json"] = (json.dumps(summary, indent=1, sort_keys=True, default=_json_default) + "\n").encode()
    return files


def _json_default(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    raise TypeError(f"cannot serialize {type(v)}")


def run(subcommand: str, cfg: ExperimentConfig, out: str | Path | None = None) -> tuple[RunResult, Path]:
    """Run a subcommand and write its report directory."""
    if subcommand not in RUNNERS:
        raise ConfigurationError(f"unknown subcommand {subcommand!r}")
    res = RUNNERS[subcommand](cfg)
    outdir = Path(out if out is not None else cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    files = _report_files(subcommand, cfg, res)
    for name, data in files.items():
        (outdir / name).write_bytes(data)
    resolved = {"subcommand": subcommand, "config": cfg.to_json(), "law": cfg.law_spec().to_json(),
                "mix_version": K.MIX_VERSION, "software_version": _version()}
    (outdir / "config.json").write_text(json.dumps(resolved, indent=1, sort_keys=True) + "\n")
    manifest = {name: _digest(data) for name, data in sorted(files.items())}
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return res, outdir


@dataclass
class ReplayVerdict:
    verdict: str
    files: dict[str, str]
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.verdict == "pass"


def replay(report_dir: str | Path) -> ReplayVerdict:
    """Re-run a report from its resolved config and compare digests per file.

    Files whose stored digest no longer matches their content are reported as
    tampered; otherwise each file is compared with the fresh run.
    """
    report_dir = Path(report_dir)
    cfg_path = report_dir / "config.json"
    if not cfg_path.exists():
        raise ConfigurationError(f"{report_dir} has no config.json")
    resolved = json.loads(cfg_path.read_text())
    if resolved.get("mix_version") != K.MIX_VERSION:
        return ReplayVerdict("incompatible", {},
                             f"report uses hash {resolved.get('mix_version')!r}, this build uses {K.MIX_VERSION!r}")
    manifest = json.loads((report_dir / "manifest.json").read_text())
    cfg = ExperimentConfig.from_json(resolved["config"])
    with tempfile.TemporaryDirectory() as tmp:
        run(resolved["subcommand"], cfg, tmp)
        fresh = json.loads((Path(tmp) / "manifest.json").read_text())
    files = {}
    for name, digest in manifest.items():
        p = report_dir / name
        if not p.exists():
            files[name] = "missing"
        elif _digest(p.read_bytes()) != digest:
            files[name] = "tampered"
        elif fresh.get(name) != digest:
            files[name] = "mismatch"
        else:
            files[name] = "pass"
    bad = sorted(n for n, v in files.items() if v != "pass")
    return ReplayVerdict("pass" if not bad else "fail", files, ", ".join(f"{n}: {files[n]}" for n in bad))


# ---------------------------------------------------------------------------
# argument parsing


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="signedlattice", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON file with ExperimentConfig fields")
        s.add_argument("--seed", type=int)
        s.add_argument("--seeds", type=int, help="number of seeds, run as seed, seed+1, ...")
        s.add_argument("--law", help="weight law, e.g. uniform:-1,1 or atoms:0=0.7,1=0.3")
        s.add_argument("--po", type=float)
        s.add_argument("--pv", type=float)
        s.add_argument("--epsilon", type=float)
        for f in ("m", "n", "depth", "steps", "box", "length", "samples"):
            s.add_argument(f"--{f}", type=int)
        for f in ("K1", "K2", "theta", "threshold"):
            s.add_argument(f"--{f}", type=float)
        s.add_argument("--zeta-minus", type=float, nargs="+", dest="zeta_minus")
        s.add_argument("--zeta-plus", type=float, nargs="+", dest="zeta_plus")
        s.add_argument("--dump-geometry", action="store_true", default=None, dest="dump_geometry",
                       help="also write the block layout (corners and paths) as tessellation.json")
        s.add_argument("--out")
    r = sub.add_parser("replay")
    r.add_argument("report")
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        if args.subcommand == "replay":
            v = replay(args.report)
            print(json.dumps({"verdict": v.verdict, "files": v.files, "detail": v.detail}, indent=1, sort_keys=True))
            return 0 if v.ok else 1
        data = {}
        if args.config:
            data.update(json.loads(Path(args.config).read_text()))
        names = {f.name for f in dataclasses.fields(ExperimentConfig)}
        data.update({k: v for k, v in vars(args).items() if k in names and v is not None})
        cfg = ExperimentConfig.from_json(data)
        res, outdir = run(args.subcommand, cfg)
    except (ConfigurationError, UnsupportedRegimeError, json.JSONDecodeError, OSError) as exc:
        parser.error(str(exc))
    except CalibrationError as exc:
        print(f"calibration failed: {exc}", file=sys.stderr)
        return 1
    print(json.dumps({"subcommand": args.subcommand, "ok": res.ok, "invariants": res.invariants,
                      "out": str(outdir)}, sort_keys=True))
    return 0 if res.ok else 1


if __name__ == "__main__":
    sys.exit(main())
