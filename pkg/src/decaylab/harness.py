"""Experiment configuration, orchestration and refinement studies.

Configs are TOML files. Every table accepts a fixed set of keys and anything
else is rejected with the line it appears on. A minimal periodic run::

    name = "burgers-sine"
    expect = "decayed"

    [flux]
    preset = "burgers"

    [period]
    generators = [[1]]

    [initial]
    preset = "sine"

    [grid]
    cells_per_period = 256

    [scheme]
    t_end = 20.0
    output_times = [0.0, 5.0, 10.0, 20.0]

    [analysis]
    metric = "torus_l1"
    decay_threshold = 0.0318
"""

from __future__ import annotations

import json
import logging
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import oracle
from .analysis import DecayReport, decay_report
from .flux import PRESETS, FluxModel, check_genuine_nonlinearity, from_table, lipschitz_bound, nonlinearity_set
from .io import read_field, write_field
from .lattice import NormWindow, PeriodStructure
from .problem import (InitialData, ProblemSpec, constant, enlarged_domain, exp_decay, indicator,
                      nondecaying_example, periodic_envelopes, sine, square_wave, verify_vanishing)
from .solver import GridField, SchemeConfig, evolve

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_MISMATCH = 0, 2, 3
VERDICTS = ("decayed", "stalled", "undetermined")

SCHEMA = {
    "": {"name", "expect", "seed", "flux", "period", "initial", "perturbation", "grid", "scheme", "analysis", "outputs"},
    "flux": {"preset", "state_interval", "velocity", "mean", "delta", "components"},
    "period": {"generators", "constancy"},
    "initial": {"preset", "amplitude", "period", "axis", "wavevector", "offset", "value", "epsilon", "delta", "xi",
                "r", "mean", "profile_amplitude", "profile_wavevector", "path"},
    "perturbation": {"preset", "height", "lower", "upper", "amplitude", "rate", "support_radius"},
    "grid": {"cells", "cells_per_period", "domain_scale", "lower", "upper", "subsamples"},
    "scheme": {"scheme", "cfl", "t_end", "output_times", "state_bounds"},
    "analysis": {"decay_threshold", "metric", "eps_list", "delta_grid", "tau", "envelope_r", "window",
                 "vanishing_levels", "vanishing_radius"},
    "outputs": {"directory", "snapshots"},
}
REQUIRED = {"": {"name", "flux", "period", "initial", "scheme"}}


class ConfigError(ValueError):
    def __init__(self, msg: str, path: str | None = None, line: int | None = None):
        self.line = line
        self.path = path
        loc = f"{path or '<config>'}:{line}: " if line else (f"{path}: " if path else "")
        super().__init__(loc + msg)


@dataclass
class ExperimentConfig:
    data: dict
    text: str = ""
    path: Path | None = None

    @property
    def base_dir(self) -> Path:
        return self.path.parent if self.path else Path.cwd()

    @property
    def name(self) -> str:
        return self.data["name"]

    def table(self, key: str) -> dict:
        return self.data.get(key, {})

    def locate(self, table: str, key: str | None = None) -> int | None:
        """Line of ``key`` inside ``[table]`` (or of the table header) in the source text."""
        lines = self.text.splitlines()
        start = 0
        if table:
            hdr = re.compile(rf"^\s*\[\s*{re.escape(table)}\s*\]")
            start = next((i for i, l in enumerate(lines) if hdr.match(l)), None)
            if start is None:
                return None
            if key is None:
                return start + 1
            start += 1
        pat = re.compile(rf"^\s*{re.escape(key)}\s*=") if key else None
        for i in range(start, len(lines)):
            if table and re.match(r"^\s*\[", lines[i]):
                break
            if not table and re.match(r"^\s*\[", lines[i]):
                break
            if pat and pat.match(lines[i]):
                return i + 1
        return None

    def error(self, msg: str, table: str = "", key: str | None = None) -> ConfigError:
        return ConfigError(msg, str(self.path) if self.path else None, self.locate(table, key))


def parse_config(text: str, path: str | Path | None = None) -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"invalid TOML: {exc}", str(path) if path else None, int(m.group(1)) if m else None)
    cfg = ExperimentConfig(data, text, Path(path) if path else None)
    for table, allowed in SCHEMA.items():
        section = data if table == "" else data.get(table, {})
        if table and table in data and not isinstance(section, dict):
            raise cfg.error(f"'{table}' must be a table", "", table)
        for key in section:
            if key not in allowed:
                raise cfg.error(f"unknown key '{key}'" + (f" in [{table}]" if table else ""), table, key)
    for table, req in REQUIRED.items():
        missing = sorted(req - set(data))
        if missing:
            raise ConfigError(f"missing required keys {missing}", str(path) if path else None, 1)
    _validate(cfg)
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path))
    return parse_config(text, path)


def _validate(cfg: ExperimentConfig):
    d = cfg.data
    if not isinstance(d["name"], str) or not d["name"]:
        raise cfg.error("name must be a non-empty string", "", "name")
    if "expect" in d and d["expect"] not in VERDICTS:
        raise cfg.error(f"expect must be one of {VERDICTS}", "", "expect")
    an = cfg.table("analysis")
    if "decay_threshold" in an and not an["decay_threshold"] > 0:
        raise cfg.error("decay_threshold must be positive", "analysis", "decay_threshold")
    if an.get("metric", "x_norm") not in ("x_norm", "torus_l1"):
        raise cfg.error("metric must be 'x_norm' or 'torus_l1'", "analysis", "metric")
    if d.get("expect") == "decayed" and "decay_threshold" not in an:
        raise cfg.error("expect = 'decayed' needs analysis.decay_threshold", "analysis")
    fl = cfg.table("flux")
    if ("preset" in fl) == ("components" in fl):
        raise cfg.error("give exactly one of flux.preset or flux.components", "flux")
    if "preset" in fl and fl["preset"] not in PRESETS:
        raise cfg.error(f"unknown flux preset '{fl['preset']}'", "flux", "preset")
    ini = cfg.table("initial")
    if ini.get("preset") == "file":
        if "path" not in ini:
            raise cfg.error("initial preset 'file' needs a path", "initial")
        stem = cfg.base_dir / ini["path"]
        if not stem.with_suffix(".txt").exists() or not stem.with_suffix(".bin").exists():
            raise cfg.error(f"grid file '{ini['path']}' (.txt/.bin) not found", "initial", "path")


# ---------------------------------------------------------------- building blocks

def _exact_list(values):
    out = []
    for v in values:
        if isinstance(v, (list, tuple)):
            out.append(_exact_list(v))
        elif isinstance(v, str) or isinstance(v, int):
            out.append(Fraction(v))
        else:
            out.append(v)
    return out


def build_flux(cfg: ExperimentConfig) -> FluxModel:
    fl = cfg.table("flux")
    try:
        if "components" in fl:
            if "state_interval" not in fl:
                raise cfg.error("table fluxes need state_interval", "flux")
            comps = [{k: _exact_list(v) if isinstance(v, list) else v for k, v in c.items()} for c in fl["components"]]
            return from_table(comps, tuple(fl["state_interval"]))
        kwargs = {k: (_exact_list(v) if isinstance(v, list) else (Fraction(v) if isinstance(v, (str, int)) else v))
                  for k, v in fl.items() if k not in ("preset", "state_interval")}
        if "state_interval" in fl:
            kwargs["state_interval"] = tuple(fl["state_interval"])
        return PRESETS[fl["preset"]](**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise cfg.error(f"bad flux definition: {exc}", "flux")


def build_structure(cfg: ExperimentConfig) -> PeriodStructure:
    per = cfg.table("period")
    gens = _exact_list(per.get("generators", []))
    cons = _exact_list(per.get("constancy", []))
    try:
        return PeriodStructure.from_config(gens, cons)
    except (ValueError, IndexError) as exc:
        raise cfg.error(f"bad period structure: {exc}", "period")


def build_initial(cfg: ExperimentConfig, S: PeriodStructure) -> InitialData:
    ini = dict(cfg.table("initial"))
    preset = ini.pop("preset", None)
    box = S.period_box() if S.exact else [None] * S.ambient_dim
    try:
        if preset == "square_wave":
            axis = int(ini.get("axis", 0))
            period = float(ini.get("period", box[axis]))
            data = InitialData(square_wave(float(ini.get("amplitude", 1.0)), period, axis), S, label="square_wave")
        elif preset == "sine":
            wv = ini.get("wavevector") or [float(c) for c in S.dual.generators[0]]
            data = InitialData(sine(float(ini.get("amplitude", 1.0)), wv, float(ini.get("offset", 0.0))), S, label="sine")
        elif preset == "constant":
            c = float(ini.get("value", 0.0))
            data = InitialData(constant(c), S, mean=c, label="constant")
        elif preset == "example1_perturbed":
            eps = float(ini.get("epsilon", 0.5))
            oracle.Example1Params(eps)
            data = InitialData(square_wave(1.0, 2.0), S, indicator(eps, 0.0, 1.0), support_radius=1.0,
                               mean=0.0, label=f"example1_perturbed({eps})")
        elif preset == "counterexample":
            delta = float(ini["delta"])
            xi = _exact_list(ini.get("xi", [1] + [0] * (S.ambient_dim - 1)))
            amp = float(ini.get("profile_amplitude", 0.0))
            prof = None
            if amp:
                pw = ini.get("profile_wavevector", [1] + [0] * (S.ambient_dim - 1))
                k = np.array(pw, dtype=float)
                prof = lambda y: amp * np.cos(2 * np.pi * np.tensordot(k, y, axes=1))
            data = nondecaying_example(delta, S, xi, int(ini.get("r", 1)), prof, float(ini.get("mean", 0.0)))
        elif preset == "file":
            u, _ = read_field(cfg.base_dir / ini["path"])
            data = InitialData(_grid_sampler(u), S, mean=float(u.data.mean()), label="file")
            data.grid = u
        else:
            raise cfg.error(f"unknown initial preset '{preset}'", "initial", "preset")
    except KeyError as exc:
        raise cfg.error(f"initial preset '{preset}' needs key {exc}", "initial")
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise cfg.error(str(exc), "initial")
    pert = cfg.table("perturbation")
    if pert:
        p = pert.get("preset")
        if p == "indicator":
            lo, hi = pert.get("lower", [0.0]), pert.get("upper", [1.0])
            v = indicator(float(pert.get("height", 1.0)), lo, hi)
            radius = float(max(np.max(np.abs(lo)), np.max(np.abs(hi))))
        elif p == "exp":
            rate = float(pert.get("rate", 1.0))
            v = exp_decay(float(pert.get("amplitude", 1.0)), rate)
            radius = 36.0 / rate  # exp(-36) is below double precision relative to O(1) data
        else:
            raise cfg.error(f"unknown perturbation preset '{p}'", "perturbation", "preset")
        radius = float(pert.get("support_radius", radius))
        if data.perturbation is not None:
            raise cfg.error("the initial preset already carries a perturbation", "perturbation")
        data.perturbation = v
        data.support_radius = radius
    return data


def _grid_sampler(u: GridField):
    def f(x):
        idx = []
        for i in range(u.dims):
            k = np.floor((np.asarray(x[i]) - u.lower[i]) / u.spacing[i]).astype(int)
            idx.append(np.mod(k, u.cells[i]))
        return u.data[tuple(idx)]
    return f


def build_problem(cfg: ExperimentConfig, cells_override: int | None = None) -> ProblemSpec:
    phi = build_flux(cfg)
    S = build_structure(cfg)
    if phi.n != S.ambient_dim:
        raise cfg.error(f"flux has {phi.n} components but the period structure is {S.ambient_dim}D", "flux")
    init = build_initial(cfg, S)
    sc = cfg.table("scheme")
    try:
        scheme = SchemeConfig(sc.get("scheme", "local_lax_friedrichs"), float(sc.get("cfl", 0.9)), float(sc["t_end"]),
                              tuple(sc.get("output_times", ())), tuple(sc["state_bounds"]) if "state_bounds" in sc else None)
    except KeyError:
        raise cfg.error("scheme.t_end is required", "scheme")
    except ValueError as exc:
        raise cfg.error(str(exc), "scheme")
    g = cfg.table("grid")
    n = S.ambient_dim
    box = S.period_box() if S.exact else [None] * n
    if "lower" in g and "upper" in g:
        lower, upper = tuple(float(x) for x in g["lower"]), tuple(float(x) for x in g["upper"])
    elif any(b is None for b in box):
        raise cfg.error("axes along constancy directions need explicit grid.lower and grid.upper", "grid")
    else:
        P = [float(b) for b in box]
        scale = g.get("domain_scale", "auto" if init.perturbation is not None else 1)
        if scale == "auto":
            bounds = scheme.state_bounds or _data_range(init, P)
            speed = float(np.max(lipschitz_bound(phi, bounds)))
            lower, upper, _ = enlarged_domain(P, init.support_radius, speed, scheme.t_end)
        else:
            k = int(scale)
            if k < 1:
                raise cfg.error("domain_scale must be a positive integer or 'auto'", "grid", "domain_scale")
            lo0 = [0.0] * n if init.perturbation is None else [-(k // 2) * p for p in P]
            lower = tuple(lo0)
            upper = tuple(l + k * p for l, p in zip(lo0, P))
    if cells_override is not None:
        cells = (int(cells_override),) * n
    elif "cells" in g:
        cells = tuple(int(c) for c in np.atleast_1d(g["cells"]))
    elif "cells_per_period" in g and all(b is not None for b in box):
        cells = tuple(int(round(g["cells_per_period"] * (u - l) / float(b))) for l, u, b in zip(lower, upper, box))
    else:
        raise cfg.error("grid needs cells or cells_per_period", "grid")
    if len(cells) != n:
        raise cfg.error(f"grid.cells has {len(cells)} entries for a {n}D problem", "grid", "cells")
    if cells_override is None:
        for i, b in enumerate(box):
            if b is not None and cells[i] * float(b) / (upper[i] - lower[i]) < 32 - 1e-9:
                raise cfg.error(f"axis {i}: fewer than 32 cells per period", "grid")
    exact = None
    if init.label.startswith("example1_perturbed") and n == 1:
        eps = float(cfg.table("initial").get("epsilon", 0.5))
        exact = lambda: oracle.example1_cell_averages(0.0, lower[0], upper[0], cells[0], eps)
    elif getattr(init, "grid", None) is not None:
        u = init.grid
        if u.cells != cells:
            raise cfg.error(f"grid file has cells {u.cells}, config asks for {cells}", "grid")
        exact = lambda: u.copy()
    return ProblemSpec(phi, init, lower, upper, cells, scheme, int(g.get("subsamples", 4)), exact)


def _data_range(init: InitialData, P):
    pts = np.stack(np.meshgrid(*[np.linspace(0, p, 257) for p in P], indexing="ij"))
    vals = init.periodic_part(pts)
    lo, hi = float(vals.min()), float(vals.max())
    if init.perturbation is not None:
        r = max(init.support_radius, 1.0)
        q = np.stack(np.meshgrid(*[np.linspace(-r, r, 1025) for _ in P], indexing="ij"))
        w = init(q)
        lo, hi = min(lo, float(w.min())), max(hi, float(w.max()))
    return (lo, hi)


# ---------------------------------------------------------------- reports

def gn_report(cfg: ExperimentConfig, phi: FluxModel | None = None, S: PeriodStructure | None = None,
              m: float | None = None) -> dict:
    phi = phi or build_flux(cfg)
    S = S or build_structure(cfg)
    an = cfg.table("analysis")
    if m is None:
        m = build_initial(cfg, S).mean
    delta = float(an.get("delta_grid", 1e-2))
    tau = float(an.get("tau", 1e-10))
    eps_list = [float(e) for e in an.get("eps_list", [0.5, 0.25, 0.1, 0.05])]
    F = nonlinearity_set(phi, S if S.d else None, delta, tau)
    gn = check_genuine_nonlinearity(F, m, eps_list)
    return {
        "flux": phi.name,
        "state_interval": [float(x) for x in phi.state_interval],
        "mean": m,
        "F": F.as_dict(),
        "theorem1_ok": gn.theorem1_ok,
        "gn_ok": gn.gn_ok,
        "eps_list": eps_list,
        "exact_arithmetic": bool(F.exact),
    }


def envelope_table(spec: ProblemSpec, rs) -> list:
    """Rows ``(r, M_r, eps_plus, eps_minus)`` from the sampled perturbation."""
    init = spec.initial
    S = init.structure
    if init.perturbation is None or S.constancy_basis:
        return []
    h = [(u - l) / c for l, u, c in zip(spec.lower, spec.upper, spec.cells)]
    box = [float(b) for b in S.period_box()]
    reach = max(rs) * max(box) / 2 + init.support_radius + max(box)
    lower = [-(math.ceil(reach / hi)) * hi for hi in h]
    cells = [2 * math.ceil(reach / hi) for hi in h]
    upper = [l + c * hi for l, c, hi in zip(lower, cells, h)]
    v = GridField.from_function(init.perturbation, lower, upper, cells, subsamples=1)
    rows = []
    for r in rs:
        env = periodic_envelopes(v, S, int(r))
        rows.append((int(r), env.M_r, env.eps_plus, env.eps_minus))
    return rows


@dataclass
class ExperimentResult:
    exit_code: int
    verdict: str
    expected: str | None
    out_dir: Path
    report: DecayReport
    summary: dict = field(default_factory=dict)


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> ExperimentResult:
    spec = build_problem(cfg)
    an = cfg.table("analysis")
    outs = cfg.table("outputs")
    out = Path(out_dir or cfg.base_dir / outs.get("directory", f"out/{cfg.name}"))
    out.mkdir(parents=True, exist_ok=True)
    seed = int(cfg.data.get("seed", 0))
    init = spec.initial
    S = init.structure
    traj = evolve(spec.initial_field(), spec.flux, spec.scheme)
    window = None
    if "window" in an:
        w = an["window"]
        window = NormWindow(w.get("shape", "ball"), tuple(np.atleast_1d(w.get("size", 1.0))))
    periodic = init.perturbation is None
    metric = an.get("metric", "x_norm")
    if metric == "torus_l1" and not periodic:
        raise cfg.error("torus_l1 decay needs periodic data (no perturbation)", "analysis", "metric")
    kwargs = {"window": window} if window else {}
    rep = decay_report(traj, init.mean, S if periodic else None, an.get("decay_threshold"), metric, **kwargs)
    (out / "decay.csv").write_text(rep.to_csv())
    if outs.get("snapshots", True):
        for i, t in enumerate(traj.times):
            write_field(out / "snapshots" / f"u_{i:04d}", traj.field_at(i), t)
    gn = gn_report(cfg, spec.flux, S, init.mean)
    (out / "gn_report.json").write_text(json.dumps(gn, indent=2, sort_keys=True) + "\n")
    env_rows = []
    vanishing = None
    if not periodic:
        rs = [int(r) for r in an.get("envelope_r", [2, 4, 8, 16])]
        env_rows = envelope_table(spec, rs) if S.ambient_dim == 1 or S.d == S.ambient_dim else []
        lines = ["r,M_r,eps_plus,eps_minus"] + [f"{r},{m:.17g},{a:.17g},{b:.17g}" for r, m, a, b in env_rows]
        (out / "envelope.csv").write_text("\n".join(lines) + "\n")
        levels = [float(x) for x in an.get("vanishing_levels", [0.1, 0.01])]
        radius = float(an.get("vanishing_radius", 8 * max(init.support_radius, 1.0)))
        vr = verify_vanishing(init.perturbation, levels, radius, n=S.ambient_dim)
        vanishing = {"levels": levels, "radii": vr.radii, "measures": vr.measures, "passed": vr.passed}
    expected = cfg.data.get("expect")
    code = EXIT_OK if expected is None or expected == rep.verdict else EXIT_MISMATCH
    summary = {
        "name": cfg.name,
        "verdict": rep.verdict,
        "expected": expected,
        "match": code == EXIT_OK,
        "metric": metric,
        "decay_threshold": an.get("decay_threshold"),
        "mean": init.mean,
        "mean_error": init.mean_error,
        "final": {"t": rep.times[-1], "x_norm": rep.x_norm[-1], "torus_l1": rep.torus_l1[-1]},
        "x_norm_defect_bound": max(rep.x_norm_defect),
        "grid": {"lower": list(spec.lower), "upper": list(spec.upper), "cells": list(spec.cells)},
        "scheme": {"scheme": spec.scheme.scheme, "cfl": spec.scheme.cfl, "dt": traj.diagnostics["dt"],
                   "steps": traj.diagnostics["steps"], "lipschitz": traj.diagnostics["lipschitz"]},
        "checks": {"mass_drift": traj.diagnostics["mass_drift"],
                   "time_continuity_ok": traj.diagnostics["time_continuity_ok"],
                   "min": min(a for a, _ in rep.min_max), "max": max(b for _, b in rep.min_max)},
        "gn": {"theorem1_ok": gn["theorem1_ok"], "gn_ok": gn["gn_ok"]},
        "vanishing": vanishing,
        "envelope_rows": len(env_rows),
        "seed": seed,
        "exit_code": code,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return ExperimentResult(code, rep.verdict, expected, out, rep, summary)


def _jsonable(o):
    if isinstance(o, (np.floating, Fraction)):
        return float(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not serializable: {type(o)}")


# ---------------------------------------------------------------- convergence study

def exact_solution(cfg: ExperimentConfig, spec: ProblemSpec):
    """Callable ``(t, lower, upper, cells) -> GridField`` of exact cell averages, or ``None``."""
    if spec.n != 1:
        return None
    label = spec.initial.label
    name = spec.flux.name
    ini = cfg.table("initial")
    if label == "constant":
        c = float(ini.get("value", 0.0))
        return lambda t, lo, hi, n: GridField(np.full(n, c), (lo,), ((hi - lo) / n,))
    if name == "example1" and label == "square_wave" and float(ini.get("amplitude", 1.0)) == 1.0 \
            and float(ini.get("period", 2.0)) == 2.0 and spec.initial.perturbation is None:
        return lambda t, lo, hi, n: oracle.example1_cell_averages(t, lo, hi, n)
    if name == "example1" and label.startswith("example1_perturbed"):
        eps = float(ini.get("epsilon", 0.5))
        return lambda t, lo, hi, n: oracle.example1_cell_averages(t, lo, hi, n, eps)
    if name == "burgers" and label == "sine" and spec.initial.perturbation is None:
        amp = float(ini.get("amplitude", 1.0))
        wv = ini.get("wavevector") or [float(c) for c in spec.initial.structure.dual.generators[0]]
        k = float(wv[0])
        if float(ini.get("offset", 0.0)) == 0.0 and spec.scheme.t_end < oracle.burgers_breaking_time(amp, k):
            return lambda t, lo, hi, n: oracle.burgers_cell_averages(t, lo, hi, n, amp, k)
    return None


def _study_level(args):
    text, path, cells = args
    cfg = parse_config(text, path)
    spec = build_problem(cfg, cells_override=cells)
    exact = exact_solution(cfg, spec)
    t = spec.scheme.t_end
    spec.scheme = SchemeConfig(spec.scheme.scheme, spec.scheme.cfl, t, (0.0, t), spec.scheme.state_bounds)
    lo, hi = spec.lower[0], spec.upper[0]
    u0 = exact(0.0, lo, hi, cells)
    traj = evolve(u0, spec.flux, spec.scheme)
    ref = exact(t, lo, hi, cells)
    h = (hi - lo) / cells
    return float(np.sum(np.abs(traj.final.data - ref.data))) * h


def workers_from_env() -> int:
    try:
        return max(1, int(os.environ.get("DECAYLAB_WORKERS", "1")))
    except ValueError:
        return 1


def convergence_study(cfg: ExperimentConfig, refinements, out_path: str | Path | None = None,
                      workers: int | None = None) -> list:
    """L1 errors against the exact solution and observed orders ``log2(e_h / e_{h/2})``.

    Rows are ``(cells, dx, error, order)``; ``order`` is NaN on the first row.
    """
    spec = build_problem(cfg, cells_override=int(refinements[0]))
    if exact_solution(cfg, spec) is None:
        raise cfg.error("no exact oracle is available for this configuration")
    refinements = [int(c) for c in refinements]
    jobs = [(cfg.text, str(cfg.path) if cfg.path else None, c) for c in refinements]
    workers = workers or workers_from_env()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            errors = list(pool.map(_study_level, jobs))
    else:
        errors = [_study_level(j) for j in jobs]
    L = spec.upper[0] - spec.lower[0]
    rows = []
    for i, (c, e) in enumerate(zip(refinements, errors)):
        if i == 0:
            order = math.nan
        else:
            ratio = refinements[i] / refinements[i - 1]
            prev = errors[i - 1]
            order = math.log(prev / e) / math.log(ratio) if e > 0 and prev > 0 else math.nan
        rows.append((c, L / c, e, order))
    if out_path is not None:
        lines = ["cells,dx,l1_error,order"] + [f"{c},{h:.17g},{e:.17g},{o:.17g}" for c, h, e, o in rows]
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        Path(out_path).write_text("\n".join(lines) + "\n")
    return rows
