"""Run configuration files and result serialization.

Config files are INI-style. Every dimensional quantity carries a unit
(``P2 = 23.507 mW``); dimensionless ones (refractive index, quality
factors) must not. Values are converted to SI on parsing and unknown
sections or keys are rejected.

Example::

    [model]
    preset = second_harmonic
    P2 = 23.507 mW
    Omega = 0 deg_per_hour

    [run]
    seed = 0

    [sweep.1]
    parameter = P2
    min = 20 mW
    max = 30 mW
    count = 21
"""

from __future__ import annotations

import configparser
import csv
import io as _io
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import DEG_PER_HOUR, PARAMETER_NAMES, REFERENCE_DESIGNS, ModelParams
from .optimize import DEFAULT_BOUNDS, Axis, Dimension, SearchSpace, SUMMARY_COLUMNS, default_space
from .sensitivity import CONVENTIONS
from .steady import SCHEMES, SolverStrategy

FORMAT_VERSION = 1


class ConfigError(ValueError):
    pass


UNITS = {
    "power": {"W": 1.0, "mW": 1e-3, "uW": 1e-6, "nW": 1e-9},
    "length": {"m": 1.0, "mm": 1e-3, "um": 1e-6, "nm": 1e-9},
    "rate": {"rad/s": 1.0, "krad/s": 1e3, "Mrad/s": 1e6},
    "rotation": {"rad/s": 1.0, "deg_per_hour": DEG_PER_HOUR, "deg/h": DEG_PER_HOUR},
    "angle": {"rad": 1.0, "deg": math.pi / 180.0},
    "susceptibility": {"m/V": 1.0, "pm/V": 1e-12},
    "inverse_length": {"1/m": 1.0, "1/mm": 1e3, "1/um": 1e6},
    "responsivity": {"A/W": 1.0},
}
SI_UNIT = {kind: next(iter(table)) for kind, table in UNITS.items()}

PARAMETER_KIND = {
    "R": "length", "n0": None, "lambda1": "length", "Qi1": None, "Qi2": None,
    "beta1": "rate", "beta2": "rate", "chi": "rate", "chi2": "susceptibility", "zeta": "inverse_length",
    "P1": "power", "P2": "power", "psi1": "angle", "psi2": "angle", "Qc1": None, "Qc2": None,
    "Omega": "rotation", "responsivity": "responsivity", "phi1": "angle", "phi2": "angle",
}
assert set(PARAMETER_KIND) == set(PARAMETER_NAMES)


def parse_quantity(text: str, kind: str | None, key: str = "") -> float:
    parts = text.split()
    if not parts:
        raise ConfigError(f"{key}: empty value")
    try:
        number = float(parts[0])
    except ValueError:
        raise ConfigError(f"{key}: cannot read a number from {text!r}") from None
    if kind is None:
        if len(parts) != 1:
            raise ConfigError(f"{key} is dimensionless and takes no unit (got {text!r})")
        return number
    if len(parts) != 2:
        raise ConfigError(f"{key} needs an explicit unit, one of {sorted(UNITS[kind])} (got {text!r})")
    unit = parts[1]
    if unit not in UNITS[kind]:
        raise ConfigError(f"{key}: unit {unit!r} not allowed, use one of {sorted(UNITS[kind])}")
    return number * UNITS[kind][unit]


def format_quantity(value: float, kind: str | None) -> str:
    return repr(float(value)) if kind is None else f"{float(value)!r} {SI_UNIT[kind]}"


def _bool(text: str, key: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def _int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


@dataclass
class OptimizeSettings:
    scheme: str = "second_harmonic"
    budget: int = 150
    n_initial: int | None = None
    include_chi: bool = False
    bounds: dict = field(default_factory=dict)  # name -> (lo, hi, scale)


@dataclass
class StabilitySettings:
    scheme: str | None = None
    lower: float = 1e-4
    upper: float = 0.1


@dataclass
class LinearSettings:
    power: float | None = None
    optimize_coupling: bool = True


@dataclass
class RunConfig:
    preset: str | None = None
    model: dict = field(default_factory=dict)
    seed: int = 0
    jobs: int = 1
    out: str | None = None
    convention: str = "input_referred"
    n_random: int = 16
    sweep: list = field(default_factory=list)  # list[Axis]
    optimize: OptimizeSettings = field(default_factory=OptimizeSettings)
    stability: StabilitySettings = field(default_factory=StabilitySettings)
    linear: LinearSettings = field(default_factory=LinearSettings)

    def params(self) -> ModelParams:
        base = REFERENCE_DESIGNS[self.preset]() if self.preset else ModelParams()
        return base.updated(**self.model)

    def strategy(self) -> SolverStrategy:
        return SolverStrategy(n_random=self.n_random, seed=self.seed)

    def search_space(self) -> SearchSpace:
        opt = self.optimize
        space = default_space(opt.scheme, self.params(), opt.include_chi,
                              {k: v[:2] for k, v in opt.bounds.items()})
        if opt.bounds:
            unknown = set(opt.bounds) - set(space.names)
            if unknown:
                raise ConfigError(f"bounds given for parameters not searched: {sorted(unknown)}")
            dims = tuple(Dimension(d.name, d.lower, d.upper, opt.bounds.get(d.name, (0, 0, d.scale))[2])
                         for d in space.dimensions)
            space = SearchSpace(dims, space.base, space.scheme)
        return space


_SECTION_KEYS = {
    "model": {"preset", *PARAMETER_NAMES},
    "run": {"seed", "jobs", "out", "convention", "n_random"},
    "optimize": {"scheme", "budget", "n_initial", "include_chi"},
    "stability": {"scheme", "min", "max"},
    "linear_baseline": {"power", "optimize_coupling"},
}


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case-sensitive (P1, Qc1, ...)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    cfg = RunConfig()
    sweep_sections = []
    for name in cp.sections():
        sec = cp[name]
        if name.startswith("sweep."):
            sweep_sections.append(name)
            continue
        if name.startswith("optimize."):
            pname = name.split(".", 1)[1]
            if pname not in DEFAULT_BOUNDS:
                raise ConfigError(f"[{name}]: {pname} cannot be optimized")
            _check_keys(name, sec, {"min", "max", "scale"})
            kind = PARAMETER_KIND[pname]
            scale = sec.get("scale", "linear" if pname == "chi" else "log")
            cfg.optimize.bounds[pname] = (parse_quantity(sec["min"], kind, f"{name}.min"),
                                          parse_quantity(sec["max"], kind, f"{name}.max"), scale)
            continue
        if name not in _SECTION_KEYS:
            raise ConfigError(f"unknown section [{name}]")
        _check_keys(name, sec, _SECTION_KEYS[name])
        if name == "model":
            for key, value in sec.items():
                if key == "preset":
                    v = value.strip()
                    if v not in REFERENCE_DESIGNS and v != "none":
                        raise ConfigError(f"unknown preset {v!r}; choose from {sorted(REFERENCE_DESIGNS)} or none")
                    cfg.preset = None if v == "none" else v
                else:
                    cfg.model[key] = parse_quantity(value, PARAMETER_KIND[key], key)
        elif name == "run":
            if "seed" in sec:
                cfg.seed = _int(sec["seed"], "seed")
            if "jobs" in sec:
                cfg.jobs = _int(sec["jobs"], "jobs")
            if "n_random" in sec:
                cfg.n_random = _int(sec["n_random"], "n_random")
            if "out" in sec:
                cfg.out = sec["out"].strip()
            if "convention" in sec:
                cfg.convention = sec["convention"].strip()
                if cfg.convention not in CONVENTIONS:
                    raise ConfigError(f"convention must be one of {CONVENTIONS}")
        elif name == "optimize":
            if "scheme" in sec:
                cfg.optimize.scheme = _scheme(sec["scheme"])
            if "budget" in sec:
                cfg.optimize.budget = _int(sec["budget"], "budget")
            if "n_initial" in sec:
                cfg.optimize.n_initial = _int(sec["n_initial"], "n_initial")
            if "include_chi" in sec:
                cfg.optimize.include_chi = _bool(sec["include_chi"], "include_chi")
        elif name == "stability":
            if "scheme" in sec:
                cfg.stability.scheme = _scheme(sec["scheme"])
            if "min" in sec:
                cfg.stability.lower = parse_quantity(sec["min"], "power", "stability.min")
            if "max" in sec:
                cfg.stability.upper = parse_quantity(sec["max"], "power", "stability.max")
        elif name == "linear_baseline":
            if "power" in sec:
                cfg.linear.power = parse_quantity(sec["power"], "power", "linear_baseline.power")
            if "optimize_coupling" in sec:
                cfg.linear.optimize_coupling = _bool(sec["optimize_coupling"], "optimize_coupling")
    for name in sorted(sweep_sections, key=_sweep_order):
        sec = cp[name]
        _check_keys(name, sec, {"parameter", "min", "max", "count", "scale"})
        for required in ("parameter", "min", "max", "count"):
            if required not in sec:
                raise ConfigError(f"[{name}] is missing {required!r}")
        pname = sec["parameter"].strip()
        if pname not in PARAMETER_KIND:
            raise ConfigError(f"[{name}]: unknown parameter {pname!r}")
        kind = PARAMETER_KIND[pname]
        try:
            cfg.sweep.append(Axis(pname, parse_quantity(sec["min"], kind, f"{name}.min"),
                                  parse_quantity(sec["max"], kind, f"{name}.max"),
                                  _int(sec["count"], f"{name}.count"), sec.get("scale", "linear").strip()))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"[{name}]: {exc}") from None
    if len(cfg.sweep) > 2:
        raise ConfigError("at most two sweep axes")
    return cfg


def _sweep_order(name: str):
    suffix = name.split(".", 1)[1]
    return (0, int(suffix), "") if suffix.isdigit() else (1, 0, suffix)


def _scheme(text: str) -> str:
    v = text.strip()
    if v not in SCHEMES:
        raise ConfigError(f"scheme must be one of {SCHEMES}")
    return v


def _check_keys(section: str, sec, allowed: set):
    unknown = [k for k in sec.keys() if k not in allowed]
    if unknown:
        raise ConfigError(f"[{section}]: unknown key(s) {unknown}")


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


def format_config(cfg: RunConfig) -> str:
    """Canonical text of a config; every quantity in SI units."""
    lines = ["[model]", f"preset = {cfg.preset or 'none'}"]
    for key in PARAMETER_NAMES:
        if key in cfg.model:
            lines.append(f"{key} = {format_quantity(cfg.model[key], PARAMETER_KIND[key])}")
    lines += ["", "[run]", f"seed = {cfg.seed}", f"jobs = {cfg.jobs}", f"convention = {cfg.convention}",
              f"n_random = {cfg.n_random}"]
    if cfg.out is not None:
        lines.append(f"out = {cfg.out}")
    for i, ax in enumerate(cfg.sweep, start=1):
        kind = PARAMETER_KIND[ax.name]
        lines += ["", f"[sweep.{i}]", f"parameter = {ax.name}", f"min = {format_quantity(ax.lower, kind)}",
                  f"max = {format_quantity(ax.upper, kind)}", f"count = {ax.count}", f"scale = {ax.scale}"]
    opt = cfg.optimize
    lines += ["", "[optimize]", f"scheme = {opt.scheme}", f"budget = {opt.budget}",
              f"include_chi = {str(opt.include_chi).lower()}"]
    if opt.n_initial is not None:
        lines.append(f"n_initial = {opt.n_initial}")
    for pname, (lo, hi, scale) in sorted(opt.bounds.items()):
        kind = PARAMETER_KIND[pname]
        lines += ["", f"[optimize.{pname}]", f"min = {format_quantity(lo, kind)}",
                  f"max = {format_quantity(hi, kind)}", f"scale = {scale}"]
    st = cfg.stability
    lines += ["", "[stability]"]
    if st.scheme:
        lines.append(f"scheme = {st.scheme}")
    lines += [f"min = {format_quantity(st.lower, 'power')}", f"max = {format_quantity(st.upper, 'power')}"]
    lines += ["", "[linear_baseline]", f"optimize_coupling = {str(cfg.linear.optimize_coupling).lower()}"]
    if cfg.linear.power is not None:
        lines.append(f"power = {format_quantity(cfg.linear.power, 'power')}")
    return "\n".join(lines) + "\n"


def evaluate_config_text(params: ModelParams, seed: int = 0, convention: str = "input_referred") -> str:
    """A ready-to-run config pinning every model parameter of ``params``."""
    cfg = RunConfig(preset=None, model=params.flat(), seed=seed, convention=convention)
    return format_config(cfg)


# --------------------------------------------------------------------------
# records

def _version() -> str:
    from . import __version__

    return __version__


def timestamp() -> str:
    """UTC time of the run; ``SOURCE_DATE_EPOCH`` pins it for reproducible output."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch is not None else time.time()
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def steady_summary(steady) -> dict:
    return {
        "stability": steady.stability.value,
        "residual_norm": steady.residual_norm,
        "tolerance": steady.tolerance,
        "max_growth_rate": steady.max_growth_rate,
        "cavity": [[complex(a).real, complex(a).imag] for a in steady.cavity],
        "outputs": [[complex(b).real, complex(b).imag] for b in steady.output_amplitudes],
        "newton_iterations": steady.iterations,
    }


def result_record(report, seed: int, command: str = "evaluate") -> dict:
    """Self-contained JSON-ready record of one evaluation."""
    rec = {
        "format_version": FORMAT_VERSION,
        "version": _version(),
        "command": command,
        "seed": seed,
        "timestamp": timestamp(),
        "params": report.params.flat(),
        "feasible": bool(report.feasible),
    }
    if not report.feasible:
        rec.update(reason=report.reason, stage=report.stage, detail=report.detail)
        if report.steady is not None:
            rec["steady"] = steady_summary(report.steady)
        return _clean(rec)
    sq = {label: vars(m) for label, m in report.squeezing.modes.items()}
    rec.update(
        convention=report.convention,
        mdr_deg_per_hour=report.omega_min_deg_per_hour,
        omega_min_rad_s=report.omega_min_rad_s,
        delta_min=report.delta_min,
        fisher=report.fisher,
        covariance_regularized=report.regularized,
        mean_currents_A=report.mean_currents,
        classical_currents_A=report.classical_currents,
        current_gradient_A_s=report.current_gradient,
        gradient_step=report.gradient_step,
        covariance_A2=report.covariance,
        squeezing=sq,
        squeezing_db_fund_phase=report.squeezing.fundamental.phase_db,
        squeezing_db_sh_amp=report.squeezing.second_harmonic.amplitude_db,
        steady=steady_summary(report.steady),
    )
    return _clean(rec)


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return "nan" if math.isnan(v) else format(v, ".17g")
    return str(value)


def sweep_csv(grid) -> str:
    names = [a.name for a in grid.axes]
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names + list(SUMMARY_COLUMNS))
    for row in grid.rows:
        w.writerow([fmt(row[n]) for n in names] + [fmt(row[c]) for c in SUMMARY_COLUMNS])
    return buf.getvalue()


def sweep_manifest(grid, base: ModelParams, seed: int, convention: str, strategy: SolverStrategy) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "version": _version(),
        "command": "sweep",
        "seed": seed,
        "convention": convention,
        "strategy": vars(strategy),
        "axes": [{"parameter": a.name, "min": a.lower, "max": a.upper, "count": a.count, "scale": a.scale}
                 for a in grid.axes],
        "fixed": base.flat(),
        "rows": len(grid.rows),
        "infeasible": [{"index": i, "reason": r["reason"]} for i, r in enumerate(grid.rows) if not r["feasible"]],
    }


def trace_csv(trace) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "phase"] + trace.names + ["objective", "feasible", "best_so_far", "reason"])
    for e in trace.entries:
        w.writerow([e.iteration, e.phase] + [fmt(e.point[n]) for n in trace.names]
                   + [fmt(e.objective), fmt(e.feasible), fmt(e.best_so_far), e.reason])
    return buf.getvalue()
