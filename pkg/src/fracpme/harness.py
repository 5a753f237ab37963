"""Run configuration, single experiments, (m, s) sweeps and their on-disk outputs.

A run directory holds CSV snapshots and diagnostics, barrier reports, SVG
plots and ``manifest.json``.  The manifest is written last through a
temporary file and an atomic rename, so a directory without one is an
interrupted run.  Nothing time-dependent is recorded, which keeps reruns of
the same configuration byte-identical.
"""
from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import __version__, barriers, diagnostics, fracops, integrated, plots, validate
from .evolve import SimParams, Trajectory, run
from .fracops import Grid

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
OUTPUT_ROOT_ENV = "FRACPME_OUTPUT_ROOT"
THREADS_ENV = "FRACPME_THREADS"

__all__ = [
    "ConfigError",
    "RunConfig",
    "RunResult",
    "SweepPlan",
    "parse_config",
    "parse_plan",
    "load_config",
    "build_datum",
    "run_experiment",
    "run_sweep",
    "default_dichotomy_plan",
    "regenerate_report",
]


class ConfigError(ValueError):
    """All schema violations found in one configuration."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


# ---------------------------------------------------------------- schema

_SECTIONS: dict[str, dict[str, Any]] = {
    "physics": {"m": None, "s": None, "eps": 0.0, "delta": 0.0, "mu": 0.0},
    "grid": {"x_min": -10.0, "x_max": 10.0, "n": 1024},
    "time": {"t_end": 1.0, "snapshot_every": 0.1, "cfl": 0.4, "dt_max": 1e-2},
    "datum": {
        "kind": "gaussian", "height": 1.0, "width": 1.0, "radius": 1.0, "centre": 0.0,
        "amplitude": 0.5, "decay": 1.0, "mass": 1.0, "jump": 0.0, "R": 1.0, "path": None,
    },
    "diagnostics": {
        "enabled": True, "energy": True, "front": True, "classify": True,
        "integrated": False, "probe_factor": 2.0,
    },
    "output": {"dir": None, "plots": True, "snapshots": True},
}
_TOP_LEVEL = {"name", "seed", "barriers", *_SECTIONS}
_DATUM_KINDS = {"box", "gaussian", "exp_tail", "heaviside_integrated", "huang", "file"}
_BARRIER_KEYS = {
    "exp_tail": {"family", "A", "a", "C", "h", "eta"},
    "exp_tail_staged": {"family", "A", "a", "q", "stages"},
    "parabola": {"family", "a", "b", "C"},
    "persistence": {"family", "a", "centre", "radius", "height"},
}


class _DuplicateCheckingLoader(yaml.SafeLoader):
    """Safe loader that records every duplicated mapping key instead of overwriting."""

    def __init__(self, stream):
        super().__init__(stream)
        self.duplicates: list[str] = []


def _construct_mapping(loader: _DuplicateCheckingLoader, node, deep=False):
    seen = set()
    for key_node, _ in node.value:
        key = loader.construct_object(key_node, deep=deep)
        if key in seen:
            loader.duplicates.append(f"duplicate key '{key}' (line {key_node.start_mark.line + 1})")
        seen.add(key)
    return yaml.SafeLoader.construct_mapping(loader, node, deep=deep)


_DuplicateCheckingLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def _load_yaml(text: str) -> Any:
    loader = _DuplicateCheckingLoader(text)
    try:
        data = loader.get_single_data()
    except yaml.YAMLError as exc:
        raise ConfigError([f"unreadable configuration: {exc}"]) from exc
    finally:
        loader.dispose()
    if loader.duplicates:
        raise ConfigError(loader.duplicates)
    return data


@dataclass
class RunConfig:
    """One experiment: physics, grid, time stepping, datum, diagnostics, barriers, output."""

    name: str
    physics: dict
    grid: dict
    time: dict
    datum: dict
    diagnostics: dict
    output: dict
    barriers: list = field(default_factory=list)
    seed: int = 0

    def grid_obj(self) -> Grid:
        return Grid(float(self.grid["x_min"]), float(self.grid["x_max"]), int(self.grid["n"]))

    def sim_params(self) -> SimParams:
        p, t = self.physics, self.time
        return SimParams(
            m=float(p["m"]), s=float(p["s"]), grid=self.grid_obj(), t_end=float(t["t_end"]),
            eps=float(p["eps"]), delta=float(p["delta"]), mu=float(p["mu"]),
            cfl=float(t["cfl"]), snapshot_every=float(t["snapshot_every"]), dt_max=float(t["dt_max"]),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name, "seed": self.seed, "physics": dict(self.physics), "grid": dict(self.grid),
            "time": dict(self.time), "datum": dict(self.datum), "diagnostics": dict(self.diagnostics),
            "output": dict(self.output), "barriers": [dict(b) for b in self.barriers],
        }

    def with_physics(self, **changes) -> "RunConfig":
        out = copy.deepcopy(self)
        out.physics.update(changes)
        return out


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _validate(data: dict) -> tuple[RunConfig | None, list[str]]:
    problems: list[str] = []
    if not isinstance(data, dict):
        return None, ["configuration must be a mapping"]
    for key in sorted(set(data) - _TOP_LEVEL):
        problems.append(f"unknown key '{key}'")
    sections = {}
    for name, defaults in _SECTIONS.items():
        raw = data.get(name, {}) or {}
        if not isinstance(raw, dict):
            problems.append(f"section '{name}' must be a mapping")
            raw = {}
        for key in sorted(set(raw) - set(defaults)):
            problems.append(f"unknown key '{name}.{key}'")
        merged = {**defaults, **{k: v for k, v in raw.items() if k in defaults}}
        for key, val in merged.items():
            if val is None and defaults[key] is None and key in ("m", "s"):
                problems.append(f"missing required key '{name}.{key}'")
        sections[name] = merged

    phys = sections["physics"]
    m, s = phys["m"], phys["s"]
    if m is not None:
        if not _is_number(m):
            problems.append("physics.m must be a number")
        elif not 1.0 < m < 3.0:
            problems.append(f"physics.m={m} outside the existence range (1, 3) required by the solver guard")
    if s is not None:
        if not _is_number(s):
            problems.append("physics.s must be a number")
        elif not 0.0 < s < 1.0:
            problems.append(f"physics.s={s} outside (0, 1)")
    for key in ("eps", "delta", "mu"):
        if not _is_number(phys[key]) or phys[key] < 0:
            problems.append(f"physics.{key} must be a nonnegative number")

    g = sections["grid"]
    if not all(_is_number(g[k]) for k in ("x_min", "x_max", "n")):
        problems.append("grid.x_min, grid.x_max and grid.n must be numbers")
    else:
        if g["x_max"] <= g["x_min"]:
            problems.append("grid.x_max must exceed grid.x_min")
        if int(g["n"]) != g["n"] or g["n"] < 8:
            problems.append("grid.n must be an integer >= 8")

    t = sections["time"]
    for key in ("t_end", "snapshot_every", "cfl", "dt_max"):
        if not _is_number(t[key]):
            problems.append(f"time.{key} must be a number")
    if _is_number(t["cfl"]) and not 0.0 < t["cfl"] < 1.0:
        problems.append("time.cfl must lie in (0, 1)")
    if _is_number(t["snapshot_every"]) and t["snapshot_every"] <= 0:
        problems.append("time.snapshot_every must be positive")

    datum = sections["datum"]
    if datum["kind"] not in _DATUM_KINDS:
        problems.append(f"datum.kind '{datum['kind']}' not one of {sorted(_DATUM_KINDS)}")
    if datum["kind"] == "file" and not datum["path"]:
        problems.append("datum.path is required for kind 'file'")

    blist = data.get("barriers", []) or []
    if not isinstance(blist, list):
        problems.append("barriers must be a list")
        blist = []
    for k, spec in enumerate(blist):
        fam = spec.get("family") if isinstance(spec, dict) else None
        if fam not in _BARRIER_KEYS:
            problems.append(f"barriers[{k}].family must be one of {sorted(_BARRIER_KEYS)}")
            continue
        for key in sorted(set(spec) - _BARRIER_KEYS[fam]):
            problems.append(f"unknown key 'barriers[{k}].{key}'")

    name = data.get("name", "run")
    if not isinstance(name, str) or not name or "/" in name:
        problems.append("name must be a non-empty string without '/'")
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        problems.append("seed must be an integer")
    if problems:
        return None, problems
    cfg = RunConfig(
        name=name, physics=phys, grid=g, time=t, datum=datum,
        diagnostics=sections["diagnostics"], output=sections["output"],
        barriers=[dict(b) for b in blist], seed=seed,
    )
    cfg.grid["n"] = int(cfg.grid["n"])
    return cfg, []


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML configuration; raises :class:`ConfigError` listing every problem."""
    cfg, problems = _validate(_load_yaml(text))
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text())


def config_from_dict(data: dict) -> RunConfig:
    cfg, problems = _validate(copy.deepcopy(data))
    if problems:
        raise ConfigError(problems)
    return cfg


# ---------------------------------------------------------------- data


def build_datum(cfg: RunConfig) -> np.ndarray:
    """Initial density on the configured grid."""
    grid = cfg.grid_obj()
    d = cfg.datum
    x = grid.x - float(d["centre"])
    kind = d["kind"]
    if kind == "box":
        return np.where(np.abs(x) < float(d["radius"]), float(d["height"]), 0.0)
    if kind == "gaussian":
        return float(d["height"]) * np.exp(-((x / float(d["width"])) ** 2))
    if kind == "exp_tail":
        return float(d["amplitude"]) * np.exp(-float(d["decay"]) * np.abs(x))
    if kind == "heaviside_integrated":
        # the primitive jumps by `mass` at `jump`: all mass in the cell holding the jump
        u = np.zeros(grid.n)
        k = int(np.clip(np.searchsorted(grid.x + 0.5 * grid.h, float(d["jump"])), 0, grid.n - 1))
        u[k] = float(d["mass"]) / grid.h
        return u
    if kind == "huang":
        s = float(cfg.physics["s"])
        R = float(d["R"])
        return validate.huang_profile(validate.huang_lambda(R, s), R, s, x)
    if kind == "file":
        table = np.loadtxt(d["path"], delimiter=",", ndmin=2)
        if table.shape[1] == 1:
            vals = table[:, 0]
            if vals.size != grid.n:
                raise ConfigError([f"datum file has {vals.size} values, grid has {grid.n}"])
            return vals.astype(float)
        return np.interp(grid.x, table[:, 0], table[:, 1], left=0.0, right=0.0)
    raise ConfigError([f"unknown datum kind {kind}"])


def _fmt(v: float) -> str:
    return repr(float(v))


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path: Path, payload: dict) -> None:
    text = json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n"
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _output_root(root: str | Path | None) -> Path:
    if root is not None:
        return Path(root)
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


# ---------------------------------------------------------------- experiments


@dataclass
class RunResult:
    path: Path
    manifest: dict
    exit_code: int


def _barrier_reports(cfg: RunConfig, traj: Trajectory) -> tuple[list[dict], bool]:
    reports, ok = [], True
    for spec_cfg in cfg.barriers:
        fam = spec_cfg["family"]
        rep: dict = {"family": fam}
        try:
            if fam == "exp_tail":
                A, a = float(spec_cfg.get("A", 1.0)), float(spec_cfg.get("a", 1.0))
                C = spec_cfg.get("C", "auto")
                if C == "auto":
                    fit = barriers.fit_exp_tail_rate(traj, A, a)
                    rep["ladder"] = fit["ladder"]
                    rep["ladder_monotone"] = fit["monotone"]
                    C = fit["C"]
                if C is None:
                    rep.update(passed=False, violation="no finite C found")
                else:
                    spec = barriers.exp_tail_spec(A, a, float(C), float(spec_cfg.get("h", 0.0)), spec_cfg.get("eta"))
                    v = barriers.verify_upper_barrier(traj, spec)
                    rep.update(spec.report(), passed=v is None, violation=None if v is None else vars(v))
            elif fam == "exp_tail_staged":
                A, a = float(spec_cfg.get("A", 1.0)), float(spec_cfg.get("a", 1.0))
                K = barriers.pressure_bounds(traj)["K"]
                sched = barriers.staged_exp_tail(K, A, traj.params.m, traj.params.s, float(spec_cfg.get("q", 1.0)), int(spec_cfg.get("stages", 3)))
                v = barriers.verify_staged_exp_tail(traj, sched, a)
                rep.update(schedule=sched, passed=v is None, violation=None if v is None else vars(v))
            elif fam == "parabola":
                a, b = float(spec_cfg["a"]), float(spec_cfg["b"])
                C = spec_cfg.get("C", "auto")
                if C == "auto":
                    fit = barriers.fit_parabola_speed(traj, a, b)
                    rep["ladder"] = fit["ladder"]
                    C = fit["C"]
                if C is None:
                    rep.update(passed=False, violation="no finite C found")
                else:
                    spec = barriers.parabola_spec(a, b, float(C), traj.params.s)
                    v = barriers.verify_parabola(traj, spec)
                    rep.update(spec.report(), passed=v is None, violation=None if v is None else vars(v))
            elif fam == "persistence":
                spec = barriers.persistence_spec(
                    float(spec_cfg["a"]), float(spec_cfg.get("centre", 0.0)),
                    float(spec_cfg.get("radius", 1.0)), float(spec_cfg.get("height", 1.0)),
                )
                v = barriers.verify_persistence(traj, spec)
                rep.update(spec.report(), passed=v is None, violation=None if v is None else vars(v))
        except barriers.BarrierPreconditionError as exc:
            rep.update(passed=False, precondition=exc.kind, violation=str(exc))
        ok &= bool(rep.get("passed", False))
        reports.append(rep)
    return reports, ok


def _diagnostics(cfg: RunConfig, traj: Trajectory, out: Path, files: list[Path]) -> tuple[dict, bool]:
    summary: dict = {}
    ok = True
    d = cfg.diagnostics
    prm = traj.params
    energy = diagnostics.energy_reports(traj) if d["energy"] else None
    trace = diagnostics.front_trace(traj) if d["front"] else None
    rows = []
    for k, t in enumerate(traj.times):
        row = [float(t), float(traj.snapshots[k].sum() * traj.grid.h), float(traj.snapshots[k].max())]
        if energy is not None:
            e = energy[k]
            row += [e.lp[2.0], e.lp[3.0], e.f_mu, e.hs_sq, e.diss_grad_hs, e.diss_pressure]
        if trace is not None:
            row += [float(trace.left_edge[k]), float(trace.right_edge[k])]
        rows.append(row)
    header = ["t", "mass", "linf"]
    if energy is not None:
        header += ["l2", "l3", "f_mu", "hs_sq", "diss_grad_hs", "diss_pressure"]
    if trace is not None:
        header += ["front_left", "front_right"]
    path = out / "diagnostics.csv"
    _write_csv(path, header, rows)
    files.append(path)

    summary["mass_drift"] = traj.mass_drift()
    sup = np.array([u.max() for u in traj.snapshots])
    summary["linf_nonincreasing"] = bool(np.all(np.diff(sup) <= 1e-12))
    ok &= summary["mass_drift"] <= 1e-10 and summary["linf_nonincreasing"]
    if energy is not None:
        if not (prm.m in (2.0, 3.0) and prm.mu == 0.0):
            summary["first_energy_residual"] = diagnostics.first_energy_residual(traj)["max_residual"]
        sec = diagnostics.second_energy_check(traj)
        summary["second_energy_holds"] = sec["holds"]
        ok &= sec["holds"]
    if trace is not None:
        summary["front_exponent"] = trace.fitted_exponent
        summary["front_predicted_exponent"] = trace.predicted_exponent
        summary["front_bound_holds"] = trace.bound_holds
        summary["front_bound_constant"] = trace.bound_constant
    v_states = v_times = None
    if d["integrated"]:
        alpha = 1.0 - prm.s
        state = integrated.cumulative(traj.snapshots[0], traj.grid, alpha)
        vt = integrated.run_integrated(
            state, prm.m, prm.t_end, prm.snapshot_every, dt_max=prm.dt_max, snapshot_times=traj.times[1:]
        )
        v_states, v_times = vt.states, vt.times
        summary["integrated_consistency"] = integrated.consistency_check(traj, vt)["max_rel"]
        path = out / "integrated.csv"
        _write_csv(path, ["x"] + [f"t={t:.6g}" for t in vt.times], zip(traj.grid.x + 0.5 * traj.grid.h, *vt.states))
        files.append(path)
    if d["classify"]:
        cls = diagnostics.classify_propagation(traj, v_states, v_times, probe_factor=float(d["probe_factor"]))
        summary["regime"] = cls["label"]
    if cfg.output["plots"] and trace is not None:
        p = plots.line_plot(
            out / "front.svg",
            [(traj.times, trace.right_edge, "right edge"), (traj.times, -trace.left_edge, "-left edge")],
            title="support edges", xlabel="t", ylabel="x",
        )
        files.append(p)
    if cfg.output["plots"] and energy is not None:
        p = plots.line_plot(
            out / "energy.svg",
            [
                (traj.times, [e.hs_sq for e in energy], "<u,K u>"),
                (traj.times, [e.f_mu for e in energy], "F_mu"),
                (traj.times, [e.linf for e in energy], "max u"),
            ],
            title="energies", xlabel="t",
        )
        files.append(p)
    return summary, ok


def run_experiment(cfg: RunConfig, root: str | Path | None = None) -> RunResult:
    """Execute one configuration and write its run directory.

    Every failure inside the run is recorded in the manifest (status
    ``error``) and reflected in a nonzero exit code instead of propagating.
    """
    out = _output_root(root) / (cfg.output["dir"] or cfg.name)
    out.mkdir(parents=True, exist_ok=True)
    stale = out / "manifest.json"
    if stale.exists():
        stale.unlink()
    files: list[Path] = []
    manifest: dict = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "config": cfg.to_dict(),
    }
    ok = True
    try:
        np.random.seed(cfg.seed)
        params = cfg.sim_params()
        manifest["kernel_hash"] = fracops.build_grad_riesz(params.grid, params.s, params.eps).digest()
        u0 = build_datum(cfg)
        traj = run(u0, params)
        if traj.error:
            raise RuntimeError(traj.error)
        if cfg.output["snapshots"]:
            path = out / "snapshots.csv"
            _write_csv(path, ["x"] + [f"t={t:.6g}" for t in traj.times], zip(params.grid.x, *traj.snapshots))
            files.append(path)
        summary: dict = {"steps": traj.steps}
        if cfg.diagnostics["enabled"]:
            diag, diag_ok = _diagnostics(cfg, traj, out, files)
            summary.update(diag)
            ok &= diag_ok
        if cfg.barriers:
            reports, b_ok = _barrier_reports(cfg, traj)
            path = out / "barriers.json"
            _write_json(path, {"barriers": reports})
            files.append(path)
            summary["barriers_passed"] = b_ok
            ok &= b_ok
        if cfg.output["plots"]:
            pick = np.unique(np.linspace(0, len(traj.times) - 1, min(8, len(traj.times))).astype(int))
            p = plots.line_plot(
                out / "waterfall.svg",
                [(params.grid.x, traj.snapshots[k], f"t={traj.times[k]:.3g}") for k in pick],
                title=f"u(x,t), m={params.m:g}, s={params.s:g}", xlabel="x", ylabel="u",
            )
            files.append(p)
        manifest["summary"] = summary
        manifest["status"] = "ok" if ok else "failed"
    except ConfigError:
        raise
    except Exception as exc:
        log.exception("run %s failed", cfg.name)
        manifest["status"] = "error"
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        ok = False
    manifest["files"] = {p.name: _sha256(p) for p in sorted(files)}
    manifest["exit_code"] = 0 if ok else 1
    _write_json(out / "manifest.json", manifest)
    return RunResult(out, manifest, manifest["exit_code"])


# ---------------------------------------------------------------- sweeps


@dataclass
class SweepPlan:
    """Grid of ``(m, s)`` pairs sharing one base configuration."""

    name: str
    ms: list
    ss: list
    base: RunConfig
    concurrency: int = 1

    def cells(self) -> list[tuple[float, float]]:
        """Plan order: ``s`` outer, ``m`` inner, both ascending."""
        return [(m, s) for s in sorted(self.ss) for m in sorted(self.ms)]

    def __post_init__(self) -> None:
        bad = [f"m={m}" for m in self.ms if not 1.0 < m < 3.0] + [f"s={s}" for s in self.ss if not 0.0 < s < 1.0]
        if bad:
            raise ConfigError([f"sweep value outside the module guards: {', '.join(bad)}"])
        if self.concurrency < 1:
            raise ConfigError(["concurrency must be >= 1"])


def _default_concurrency() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def parse_plan(text: str) -> SweepPlan:
    data = _load_yaml(text)
    problems = []
    if not isinstance(data, dict):
        raise ConfigError(["plan must be a mapping"])
    for key in sorted(set(data) - {"name", "sweep", "base"}):
        problems.append(f"unknown key '{key}'")
    sweep = data.get("sweep") or {}
    for key in sorted(set(sweep) - {"m", "s", "concurrency"}):
        problems.append(f"unknown key 'sweep.{key}'")
    ms, ss = sweep.get("m"), sweep.get("s")
    if not isinstance(ms, list) or not ms or not all(_is_number(v) for v in ms):
        problems.append("sweep.m must be a non-empty list of numbers")
    if not isinstance(ss, list) or not ss or not all(_is_number(v) for v in ss):
        problems.append("sweep.s must be a non-empty list of numbers")
    base_data = dict(data.get("base") or {})
    base_data.setdefault("physics", {})
    if isinstance(base_data["physics"], dict):
        base_data["physics"] = {"m": 2.0, "s": 0.25, **base_data["physics"]}
    base, base_problems = _validate(base_data)
    problems += [f"base: {p}" for p in base_problems]
    if problems:
        raise ConfigError(problems)
    conc = sweep.get("concurrency", _default_concurrency())
    return SweepPlan(str(data.get("name", "sweep")), list(ms), list(ss), base, int(conc))


def default_dichotomy_plan(concurrency: int | None = None) -> SweepPlan:
    """The 7 x 2 sweep across the critical exponent ``m = 2``."""
    base = config_from_dict(
        {
            "name": "dichotomy",
            "physics": {"m": 2.0, "s": 0.25},
            "grid": {"x_min": -8.0, "x_max": 8.0, "n": 1024},
            "time": {"t_end": 0.5, "snapshot_every": 0.5 / 32, "dt_max": 2e-4},
            "datum": {"kind": "box", "radius": 1.0, "height": 1.0},
            "diagnostics": {"energy": False},
            "output": {"plots": False, "snapshots": False},
        }
    )
    return SweepPlan(
        "dichotomy", [1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75], [0.25, 0.4], base,
        concurrency if concurrency is not None else _default_concurrency(),
    )


def _cell_name(m: float, s: float) -> str:
    return f"m{m:g}_s{s:g}"


def _run_cell(args) -> dict:
    cfg_dict, root = args
    cfg = config_from_dict(cfg_dict)
    try:
        res = run_experiment(cfg, root)
    except Exception as exc:  # keep the sweep alive; the cell shows "error"
        return {"status": "error", "error": f"{type(exc).__name__}: {exc}"}
    summary = res.manifest.get("summary", {})
    return {
        "status": res.manifest["status"],
        "regime": summary.get("regime", "error") if res.manifest["status"] != "error" else "error",
        "front_exponent": summary.get("front_exponent"),
        "passed": res.exit_code == 0,
        "error": res.manifest.get("error"),
    }


def run_sweep(plan: SweepPlan, root: str | Path | None = None) -> dict:
    """Run every cell with bounded concurrency and reduce the results in plan order."""
    out = _output_root(root) / plan.name
    out.mkdir(parents=True, exist_ok=True)
    cells = plan.cells()
    jobs = []
    for m, s in cells:
        cfg = plan.base.with_physics(m=float(m), s=float(s))
        cfg.name = _cell_name(m, s)
        cfg.output["dir"] = None
        jobs.append((cfg.to_dict(), str(out)))
    if plan.concurrency > 1:
        with ProcessPoolExecutor(max_workers=plan.concurrency) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]
    rows = []
    labels = {}
    for (m, s), res in zip(cells, results):
        regime = res.get("regime", "error") if res["status"] != "error" else "error"
        labels[(m, s)] = regime
        fe = res.get("front_exponent")
        rows.append(
            {
                "m": m, "s": s, "regime": regime, "status": res["status"],
                "front_exponent": fe if isinstance(fe, float) else (fe or ""),
                "passed": bool(res.get("passed", False)),
            }
        )
    _write_sweep_tables(out, plan, rows)
    plots.regime_map(out / "regime_map.svg", sorted(plan.ms), sorted(plan.ss), labels)
    files = sorted(p for p in out.iterdir() if p.is_file() and p.name != "sweep_manifest.json")
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "plan": {"name": plan.name, "m": sorted(plan.ms), "s": sorted(plan.ss), "base": plan.base.to_dict()},
        "cells": rows,
        "files": {p.name: _sha256(p) for p in files},
    }
    _write_json(out / "sweep_manifest.json", manifest)
    return {"path": out, "rows": rows, "labels": labels}


def _write_sweep_tables(out: Path, plan: SweepPlan, rows: list[dict]) -> None:
    with (out / "sweep.csv").open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["m", "s", "regime", "status", "front_exponent", "passed"], lineterminator="\n")
        writer.writeheader()
        for row in rows:
            fe = row["front_exponent"]
            writer.writerow({**row, "front_exponent": _fmt(fe) if isinstance(fe, float) else fe})
    ms = sorted(plan.ms)
    table = {(r["m"], r["s"]): r["regime"] for r in rows}
    with (out / "regime_map.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["s\\m"] + [f"{m:g}" for m in ms])
        for s in sorted(plan.ss):
            writer.writerow([f"{s:g}"] + [table[(m, s)] for m in ms])


# ---------------------------------------------------------------- reports


def regenerate_report(directory: str | Path) -> Path:
    """Rebuild plots and a plain-text summary from the CSVs of a run or sweep directory."""
    d = Path(directory)
    if (d / "sweep.csv").exists():
        with (d / "sweep.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        ms = sorted({float(r["m"]) for r in rows})
        ss = sorted({float(r["s"]) for r in rows})
        labels = {(float(r["m"]), float(r["s"])): r["regime"] for r in rows}
        plots.regime_map(d / "regime_map.svg", ms, ss, labels)
        lines = [f"m={r['m']} s={r['s']}: {r['regime']} ({r['status']})" for r in rows]
    elif (d / "manifest.json").exists():
        manifest = json.loads((d / "manifest.json").read_text())
        lines = [f"status: {manifest.get('status')}"]
        for key, val in sorted(manifest.get("summary", {}).items()):
            lines.append(f"{key}: {val}")
        snap = d / "snapshots.csv"
        if snap.exists():
            with snap.open() as fh:
                header = next(csv.reader(fh))
            data = np.loadtxt(snap, delimiter=",", skiprows=1, ndmin=2)
            cols = np.unique(np.linspace(1, data.shape[1] - 1, min(8, data.shape[1] - 1)).astype(int))
            plots.line_plot(
                d / "waterfall.svg", [(data[:, 0], data[:, k], header[k]) for k in cols],
                title="u(x,t)", xlabel="x", ylabel="u",
            )
    else:
        raise FileNotFoundError(f"{d} holds neither a run manifest nor a sweep table")
    path = d / "summary.txt"
    path.write_text("\n".join(lines) + "\n")
    return path
