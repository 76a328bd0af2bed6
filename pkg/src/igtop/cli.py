"""Command-line entry point.

Verbs: ``run`` drives an optimization and writes its artifacts,
``check-gradients`` compares analytic and finite-difference sensitivities,
``export`` re-analyzes a stored design and writes geometry files,
``list-problems`` shows the built-in problem definitions.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import OutputConfig, RunConfig, load_config
from .driver import (BUILTIN_PROBLEMS, analyze, check_gradients, get_problem,
                     run)
from .errors import ConfigError, NumericalError
from .output import (read_design, write_contour, write_design, write_history,
                     write_vtk)


def _problem_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", nargs="?", default=None,
                        help="run configuration file (INI)")
    parser.add_argument("--problem", metavar="NAME",
                        help="built-in problem name instead of a config file")
    parser.add_argument("--budget", type=int, default=None,
                        help="override the iteration budget")
    parser.add_argument("--move-limit", type=float, default=None,
                        help="override the per-step design move limit")


def _resolve(args) -> RunConfig:
    if (args.config is None) == (args.problem is None):
        raise ConfigError("give either a config file or --problem, not both")
    if args.config is not None:
        cfg = load_config(args.config)
    else:
        cfg = RunConfig(problem=get_problem(args.problem),
                        output=OutputConfig())
    overrides = {}
    if args.budget is not None:
        overrides["budget"] = args.budget
    if args.move_limit is not None:
        overrides["move_limit"] = args.move_limit
    if overrides:
        cfg.problem = cfg.problem.with_overrides(**overrides)
    return cfg


def _cmd_run(args) -> int:
    cfg = _resolve(args)
    out = cfg.output
    outdir = Path(args.output_dir) if args.output_dir else out.directory
    outdir.mkdir(parents=True, exist_ok=True)
    every = out.snapshot_every

    def observer(state):
        if state.u is None:
            write_design(outdir / "design_failed.txt", state.design)
            print(f"solver failed at iteration {state.iteration}; "
                  f"design saved to {outdir / 'design_failed.txt'}",
                  file=sys.stderr)
            return
        if every and state.iteration % every == 0:
            write_design(outdir / f"design_{state.iteration:04d}.txt",
                         state.design)
        if state.iteration % 10 == 0:
            print(f"iter {state.iteration:4d}  compliance "
                  f"{state.compliance:14.6g}  volume fraction "
                  f"{state.volume_fraction:.4f}")

    result = run(cfg.problem, observer=observer)

    write_history(outdir / out.history, result.history)
    write_design(outdir / "design_final.txt", result.design)
    if out.vtk:
        write_vtk(outdir / "design.vtk", result.model,
                  title=f"{cfg.problem.name} final design")
    if out.contour:
        write_contour(outdir / "contour.txt", result.model)
    last = result.history[-1]
    print(f"done: {len(result.history)} iterations, final compliance "
          f"{last.compliance:.6g}, volume fraction "
          f"{last.volume_fraction:.4f}")
    print(f"artifacts in {outdir}")
    if out.gradient_check:
        print("gradient check on the final design:")
        rows = check_gradients(cfg.problem, design=result.design)
        if not _report_gradient_rows(rows, 1e-3):
            print("gradient check FAILED", file=sys.stderr)
            return 3
    return 0


def _report_gradient_rows(rows, tolerance: float) -> bool:
    print(f"{'var':>6} {'analytic':>24} {'finite diff':>24} "
          f"{'rel err':>10}  note")
    for r in rows:
        note = "topology event" if r.topology_event else ""
        print(f"{r.index:>6} {r.analytic:>24.16e} {r.fd:>24.16e} "
              f"{r.rel_err:>10.2e}  {note}")
    clean = [r for r in rows if not r.topology_event]
    ok = [r for r in clean if r.rel_err <= tolerance]
    flagged = len(rows) - len(clean)
    print(f"{len(ok)}/{len(clean)} within {tolerance:g}"
          + (f" ({flagged} topology events excluded)" if flagged else ""))
    return bool(clean) and len(ok) >= 0.95 * len(clean)


def _cmd_check_gradients(args) -> int:
    cfg = _resolve(args)
    rows = check_gradients(cfg.problem, n_sample=args.samples,
                           h=args.step, seed=args.seed,
                           quantity=args.quantity)
    if not _report_gradient_rows(rows, args.tolerance):
        print("gradient check FAILED", file=sys.stderr)
        return 3
    return 0


def _cmd_export(args) -> int:
    if args.vtk is None and args.contour is None:
        raise ConfigError("nothing to export: pass --vtk and/or --contour")
    if args.design and args.iteration is not None:
        raise ConfigError("pass --design or --iteration, not both")
    cfg = _resolve(args)
    if args.iteration is not None:
        snap = cfg.output.directory / f"design_{args.iteration:04d}.txt"
        if not snap.exists():
            raise ConfigError(f"no snapshot {snap} (was the run saved with "
                              "snapshot_every > 0?)")
        design = read_design(snap)
    else:
        design = read_design(args.design) if args.design else None
    model, u, f, c, vol = analyze(cfg.problem, design)
    domain = cfg.problem.width * cfg.problem.height
    if args.vtk:
        write_vtk(args.vtk, model, title=f"{cfg.problem.name} design")
        print(f"wrote {args.vtk}")
    if args.contour:
        write_contour(args.contour, model)
        print(f"wrote {args.contour}")
    print(f"compliance {c:.6g}, volume fraction {vol / domain:.4f}, "
          f"{model.n_enriched} enriched nodes")
    return 0


def _cmd_list_problems(_args) -> int:
    for name in sorted(BUILTIN_PROBLEMS):
        p = BUILTIN_PROBLEMS[name]()
        doc = (BUILTIN_PROBLEMS[name].__doc__ or "").strip().split("\n")[0]
        print(f"{name}: {doc}")
        print(f"    domain {p.width:g} x {p.height:g}, mesh {p.nx} x {p.ny}, "
              f"kernels {p.rbf_nx} x {p.rbf_ny}, volume fraction "
              f"{p.volume_fraction:g}, budget {p.budget}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="igtop",
        description="Levelset topology optimization with interface-enriched "
                    "finite elements.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="optimize a problem and write results")
    _problem_args(p_run)
    p_run.add_argument("--output-dir", default=None,
                       help="directory for artifacts (overrides config)")
    p_run.set_defaults(func=_cmd_run)

    p_chk = sub.add_parser("check-gradients",
                           help="compare analytic sensitivities with "
                                "finite differences")
    _problem_args(p_chk)
    p_chk.add_argument("--samples", type=int, default=50)
    p_chk.add_argument("--step", type=float, default=1e-6)
    p_chk.add_argument("--seed", type=int, default=0)
    p_chk.add_argument("--tolerance", type=float, default=1e-3)
    p_chk.add_argument("--quantity", choices=("compliance", "volume"),
                       default="compliance")
    p_chk.set_defaults(func=_cmd_check_gradients)

    p_exp = sub.add_parser("export",
                           help="re-analyze a stored design and export "
                                "geometry")
    _problem_args(p_exp)
    p_exp.add_argument("--design", default=None,
                       help="design file (defaults to the initial design)")
    p_exp.add_argument("--iteration", type=int, default=None, metavar="K",
                       help="use snapshot K from the configured output "
                            "directory")
    p_exp.add_argument("--vtk", default=None, metavar="FILE",
                       help="write the resolved geometry as legacy VTK")
    p_exp.add_argument("--contour", default=None, metavar="FILE",
                       help="write interface polyline segments")
    p_exp.set_defaults(func=_cmd_export)

    p_ls = sub.add_parser("list-problems", help="show built-in problems")
    p_ls.set_defaults(func=_cmd_list_problems)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
