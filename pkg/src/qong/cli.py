"""Command-line entry point: ``qong evaluate|sweep|optimize|stability|linear-baseline``.

Exit codes: 0 feasible result, 2 infeasible result, 1 error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import io
from .optimize import AllInfeasible, bayes_optimize, sweep_grid
from .sensitivity import evaluate_point, linear_baseline, linear_engine_mdr, linear_mdr_closed_form
from .steady import NoBracket, critical_power

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2


def _write(out: Path | None, name: str, text: str) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def cmd_evaluate(cfg: io.RunConfig, out: Path | None) -> int:
    report = evaluate_point(cfg.params(), cfg.strategy(), cfg.convention)
    text = io.dumps(io.result_record(report, cfg.seed))
    sys.stdout.write(text)
    _write(out, "evaluate.json", text)
    return EXIT_OK if report.feasible else EXIT_INFEASIBLE


def cmd_sweep(cfg: io.RunConfig, out: Path | None) -> int:
    if not cfg.sweep:
        raise io.ConfigError("sweep needs at least one [sweep.N] section")
    base = cfg.params()
    strategy = cfg.strategy()
    grid = sweep_grid(base, cfg.sweep, jobs=cfg.jobs, strategy=strategy, convention=cfg.convention)
    csv_text = io.sweep_csv(grid)
    manifest = io.dumps(io.sweep_manifest(grid, base, cfg.seed, cfg.convention, strategy))
    out = out or Path(".")
    _write(out, "sweep.csv", csv_text)
    _write(out, "sweep_manifest.json", manifest)
    n_ok = sum(r["feasible"] for r in grid.rows)
    print(f"{len(grid.rows)} points ({n_ok} feasible) -> {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_optimize(cfg: io.RunConfig, out: Path | None) -> int:
    space = cfg.search_space()
    out = out or Path(".")
    try:
        trace = bayes_optimize(space, cfg.optimize.budget, cfg.seed, n_initial=cfg.optimize.n_initial,
                               strategy=cfg.strategy(), convention=cfg.convention)
    except AllInfeasible as exc:
        print(f"no feasible design: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    best = trace.best
    best_params = space.params(best.point)
    report = evaluate_point(best_params, cfg.strategy(), cfg.convention)
    manifest = {
        "format_version": io.FORMAT_VERSION,
        "version": io._version(),
        "command": "optimize",
        "seed": cfg.seed,
        "scheme": space.scheme,
        "budget": cfg.optimize.budget,
        "dimensions": [vars(d) for d in space.dimensions],
        "fixed": space.base.flat(),
        "gp_hyperparameters": trace.hyperparameters,
    }
    _write(out, "trace.csv", io.trace_csv(trace))
    _write(out, "trace_manifest.json", io.dumps(manifest))
    record = io.result_record(report, cfg.seed, command="optimize")
    record.pop("timestamp", None)  # keep optimization outputs byte-reproducible
    _write(out, "best.json", io.dumps(record))
    _write(out, "best_config.ini", io.evaluate_config_text(best_params, cfg.seed, cfg.convention))
    print(f"best MDR {trace.best_mdr:.6g} deg/h at {best.point} (iteration {best.iteration})")
    return EXIT_OK


def cmd_stability(cfg: io.RunConfig, out: Path | None) -> int:
    params = cfg.params()
    scheme = cfg.stability.scheme or params.drive.scheme
    bracket = (cfg.stability.lower, cfg.stability.upper)
    try:
        res = critical_power(params, scheme, bracket, cfg.strategy())
    except NoBracket as exc:
        text = io.dumps({"format_version": io.FORMAT_VERSION, "command": "stability", "scheme": scheme,
                         "found": False, "bracket_W": list(bracket), "detail": str(exc)})
        sys.stdout.write(text)
        _write(out, "stability.json", text)
        return EXIT_INFEASIBLE
    text = io.dumps({
        "format_version": io.FORMAT_VERSION,
        "version": io._version(),
        "command": "stability",
        "scheme": scheme,
        "found": True,
        "Pc_W": res.Pc,
        "Pc_mW": res.Pc * 1e3,
        "bracket_W": list(res.bracket),
        "max_growth_rate_below": float(res.eigs_below.real.max()),
        "max_growth_rate_above": float(res.eigs_above.real.max()),
        "eigenvalues_above": [[e.real, e.imag] for e in res.eigs_above],
        "evaluations": res.evaluations,
    })
    sys.stdout.write(text)
    _write(out, "stability.json", text)
    return EXIT_OK


def cmd_linear_baseline(cfg: io.RunConfig, out: Path | None) -> int:
    params = cfg.params()
    P = cfg.linear.power if cfg.linear.power is not None else params.drive.total_power
    lin = params.updated(chi=0.0, P1=P, P2=0.0, Omega=0.0)
    closed = linear_mdr_closed_form(lin)[1]
    closed_critical = linear_mdr_closed_form(lin.updated(Qc1=lin.resonator.Qi1))[1]
    engine = linear_engine_mdr(lin, cfg.strategy())
    engine_nobeta = linear_engine_mdr(lin.updated(beta1=0.0, beta2=0.0), cfg.strategy())
    rec = {
        "format_version": io.FORMAT_VERSION,
        "version": io._version(),
        "command": "linear-baseline",
        "seed": cfg.seed,
        "power_W": P,
        "Qc1": lin.coupling.Qc1,
        "closed_form_deg_per_hour": closed,
        "closed_form_critical_coupling_deg_per_hour": closed_critical,
        "engine_deg_per_hour": engine,
        "engine_no_backscatter_deg_per_hour": engine_nobeta,
        "engine_over_closed_form": engine / closed,
        "engine_no_backscatter_over_closed_form": engine_nobeta / closed,
    }
    if cfg.linear.optimize_coupling:
        best = linear_baseline(params, P, strategy=cfg.strategy())
        rec["optimized"] = {"Qc1": best.Qc1, "engine_deg_per_hour": best.mdr_engine,
                            "closed_form_deg_per_hour": best.mdr_closed_form}
    text = io.dumps(rec)
    sys.stdout.write(text)
    _write(out, "linear_baseline.json", text)
    return EXIT_OK


COMMANDS = {
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "optimize": cmd_optimize,
    "stability": cmd_stability,
    "linear-baseline": cmd_linear_baseline,
}


class _Parser(argparse.ArgumentParser):
    # usage mistakes are errors (1); argparse would use 2, which here means "infeasible"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qong", description="Quantum-noise-limited sensitivity of a "
                                     "doubly resonant chi(2) ring gyroscope.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="INI run configuration")
    parser.add_argument("--jobs", type=int, default=None, help="worker processes for sweeps")
    parser.add_argument("--seed", type=int, default=None, help="overrides [run] seed")
    parser.add_argument("--out", default=None, help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = io.load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.jobs is not None:
            if args.jobs < 1:
                raise io.ConfigError("--jobs must be >= 1")
            cfg.jobs = args.jobs
        out = args.out if args.out is not None else cfg.out
        return COMMANDS[args.command](cfg, Path(out) if out else None)
    except (io.ConfigError, OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"qong {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
