"""Command-line entry point: ``pelastica <command> [options]``.

Exit status: 0 success, 1 check failure, 2 solver failure, 3 config error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import suites
from .curve import dumps_curve
from .diagnostics import DiagnosticsReport, trace_checks
from .energy import EnergyBreakdown, evaluate_energy
from .errors import ConfigError, PelasticaError
from .flow import format_metadata, run, run_continuation
from .generators import generate_initial
from .io import COMMANDS, RunConfig, atomic_write, build_config, parse_key_values

EXIT_OK, EXIT_CHECK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    """Argument errors are config errors (exit 3), not argparse's usual 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: config error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pelastica", description="Regularized p-elastic flow of closed curves.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry (repeatable, wins over --config)")
    parser.add_argument("--out", help="output directory (default: print to stdout only)")
    parser.add_argument("--seed", type=int, help="64-bit seed for random curves and fields")
    parser.add_argument("--quiet", action="store_true", help="suppress console output")
    return parser


def load_run_config(args) -> RunConfig:
    raw = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}", key="config") from exc
        raw.update(parse_key_values(text, args.config))
    raw.update(parse_key_values("\n".join(args.set), "--set"))
    if args.seed is not None:
        raw["seed"] = str(args.seed)
    return build_config(args.command, raw, args.out)


def _context(cfg: RunConfig) -> dict:
    p = cfg.params
    return {"command": cfg.command, "p": p.p, "delta": p.delta, "epsilon": p.epsilon, "lambda": p.lam,
            "N": cfg.N, "n": cfg.n, "initial": cfg.initial, "seed": cfg.seed}


class Console:
    def __init__(self, quiet: bool):
        self.quiet = quiet

    def __call__(self, text=""):
        if not self.quiet:
            print(text)


def cmd_energy(cfg: RunConfig, out: Console) -> int:
    curve = generate_initial(cfg.initial, cfg.N, cfg.n, cfg.seed)
    energy = evaluate_energy(curve, cfg.params)
    text = EnergyBreakdown.CSV_HEADER + "\n" + energy.csv_row(0.0) + "\n"
    out(text.rstrip())
    if cfg.output_dir:
        atomic_write(cfg.output_dir / "energy.csv", text)
    return EXIT_OK


def _write_trace(directory: Path, trace, prefix: str = ""):
    atomic_write(directory / f"{prefix}trace.csv", trace.trace_csv())
    for k, snap in enumerate(trace.snapshots):
        atomic_write(directory / f"{prefix}snapshot_{k:06d}.txt", dumps_curve(snap.curve))


def cmd_flow(cfg: RunConfig, out: Console) -> int:
    curve = generate_initial(cfg.initial, cfg.N, cfg.n, cfg.seed)
    trace = run(curve, cfg.params, cfg.horizon, cfg.controls)
    report = DiagnosticsReport(trace_checks(trace), _context(cfg))
    meta = trace.metadata({"seed": cfg.seed, "initial": cfg.initial, "N": cfg.N, "n": cfg.n})
    if cfg.output_dir:
        _write_trace(cfg.output_dir, trace)
        atomic_write(cfg.output_dir / "diagnostics.csv", report.to_csv())
        atomic_write(cfg.output_dir / "metadata.txt", format_metadata(meta))
    out(format_metadata(meta).rstrip())
    for row in report.failures():
        out(f"check failed: {row.name} lhs={row.lhs:.6g} rhs={row.rhs:.6g}")
    if trace.termination == "failure":
        return EXIT_SOLVER
    return EXIT_OK if report.passed else EXIT_CHECK


def cmd_continuation(cfg: RunConfig, out: Console) -> int:
    curve = generate_initial(cfg.initial, cfg.N, cfg.n, cfg.seed)
    result = run_continuation(curve, cfg.params, cfg.schedule, cfg.controls)
    report = DiagnosticsReport(context=_context(cfg))
    lines = ["stage,epsilon,delta,final_time,termination,total,grad_norm,bending_ratio,stage_distance"]
    for k, trace in enumerate(result.traces):
        rows = trace_checks(trace)
        report.extend([type(r)(f"stage{k}_{r.name}", r.lhs, r.rhs, r.tol) for r in rows])
        dist = result.comparisons[k - 1].distance if k > 0 else float("nan")
        st = trace.final_state
        lines.append(f"{k},{trace.params.epsilon:.17g},{trace.params.delta:.17g},{trace.final_time:.17g},"
                     f"{trace.termination},{st.energy.total:.17g},{st.grad_norm:.17g},"
                     f"{result.bending_ratios[k]:.17g},{dist:.17g}")
        if cfg.output_dir:
            _write_trace(cfg.output_dir, trace, prefix=f"stage{k}_")
    summary = "\n".join(lines) + "\n"
    stages = ",".join(f"{e:g}:{d:g}" for e, d in cfg.schedule.stages)
    meta = {**_context(cfg), "stages": stages, "per_stage_time": cfg.schedule.per_stage_time,
            "mode": "experimental" if cfg.schedule.degenerate else "regularized",
            "failed_stage": result.failed_stage if result.failed_stage is not None else "none"}
    if cfg.output_dir:
        atomic_write(cfg.output_dir / "continuation.csv", summary)
        atomic_write(cfg.output_dir / "diagnostics.csv", report.to_csv())
        atomic_write(cfg.output_dir / "metadata.txt", format_metadata(meta))
    out(summary.rstrip())
    if result.failed_stage is not None:
        out(f"stage {result.failed_stage} failed: {result.traces[-1].failure}")
        return EXIT_SOLVER
    return EXIT_OK if report.passed else EXIT_CHECK


def cmd_gradcheck(cfg: RunConfig, out: Console) -> int:
    o = cfg.options
    rows = suites.gradcheck_sweep(o["gradcheck_curves"], o["gradcheck_fields"], o["gradcheck_N"], cfg.seed,
                                  cfg.params.lam)
    text = suites.gradcheck_csv(rows)
    if cfg.output_dir:
        atomic_write(cfg.output_dir / "gradcheck.csv", text)
    out(text.rstrip())
    tol = {"gradient": o["gradcheck_tol"], "variation": o["variation_tol"]}
    bad = [r for r in rows if not r.rel_err <= tol[r.kind]]
    for kind in ("gradient", "variation"):
        worst = max(r.rel_err for r in rows if r.kind == kind)
        out(f"worst {kind} relative error {worst:.3e} (tolerance {tol[kind]:g})")
    return EXIT_CHECK if bad else EXIT_OK


def cmd_check(cfg: RunConfig, out: Console) -> int:
    o = cfg.options
    curve = generate_initial(cfg.initial, cfg.N, cfg.n, cfg.seed)
    rows = suites.check_suites(curve, cfg.params, cfg.seed, o["monotonicity_trials"], o["check_curves"],
                               o["regularity_cap"], o["interpolation_cap"], o["workers"])
    report = DiagnosticsReport(rows, _context(cfg))
    text = report.to_csv()
    if cfg.output_dir:
        atomic_write(cfg.output_dir / "diagnostics.csv", text)
    out(text.rstrip())
    return EXIT_OK if report.passed else EXIT_CHECK


HANDLERS = {"energy": cmd_energy, "flow": cmd_flow, "continuation": cmd_continuation,
            "gradcheck": cmd_gradcheck, "check": cmd_check}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Console(args.quiet)
    try:
        cfg = load_run_config(args)
    except ConfigError as exc:
        print(f"config error [{exc.key}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        status = HANDLERS[cfg.command](cfg, out)
    except ConfigError as exc:
        print(f"config error [{exc.key}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PelasticaError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return status


if __name__ == "__main__":
    sys.exit(main())
