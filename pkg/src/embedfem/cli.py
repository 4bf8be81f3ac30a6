"""Command-line driver.

    embedfem run <config.json> [--out DIR]
    embedfem sweep-convergence <case> [--levels N] [--fiber-points 2,4] [--out DIR]
    embedfem sweep-stability [--h-ratios ...] [--stiffness-ratios ...] [--out DIR]
    embedfem rve [--fv ...] [--orientation ...] [--realizations N] [--seed S]
                 [--full-study] [--out DIR]
    embedfem demo-instability [--h-solid H] [--h-shell H] [--fix-plate] [--out DIR]

Metrics go to stdout with 17 significant digits and, when --out is
given, to CSV files next to any exported VTK fields.  Exit codes:
0 success, 1 configuration error, 2 solver failure, 3 I/O failure.
EMBEDFEM_THREADS caps the worker count of parallel studies.
"""

from __future__ import annotations

import argparse
import os
import sys
from importlib import resources

from .config import ConfigError, load_config, parse_config
from .saddle import SingularSystemError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3


def _write(out_dir: str | None, name: str, text: str):
    if out_dir is None:
        return
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _resolve_config(arg: str):
    """A path, or the name of a bundled benchmark configuration."""
    if os.path.exists(arg):
        return load_config(arg)
    bundled = resources.files("embedfem").joinpath("configs", arg)
    if bundled.is_file():
        return parse_config(bundled.read_text(encoding="utf-8"))
    bundled = resources.files("embedfem").joinpath("configs", arg + ".json")
    if bundled.is_file():
        return parse_config(bundled.read_text(encoding="utf-8"))
    raise FileNotFoundError(f"no such config file or bundled benchmark: {arg}")


def _cmd_run(args) -> int:
    from . import benchmarks
    from .driver import build_problem, run_config
    from .vtk_io import export_fields

    cfg = _resolve_config(args.config)
    prob, sol, table = run_config(cfg)
    if cfg.benchmark:
        bench = benchmarks.benchmark_metrics(cfg.benchmark, prob, sol)
        for name, value, unit in bench.rows:
            if not any(r[0] == name for r in table.rows):
                table.add(name, value, unit)
    print(table.format())
    out_dir = args.out or cfg.get("outputs", {}).get("out_dir")
    if out_dir:
        _write(out_dir, "metrics.csv", table.to_csv())
        if cfg.get("outputs", {}).get("fields", True):
            export_fields(sol, prob.mesh, [es.model for es in prob.structures], out_dir)
    return EXIT_OK


def _cmd_sweep_convergence(args) -> int:
    from .benchmarks import sweep_convergence

    fiber_counts = tuple(int(v) for v in args.fiber_points.split(","))
    rows = sweep_convergence(args.case, levels=args.levels, fiber_counts=fiber_counts)
    header = "case,level,h_solid,n_fiber,h1_mismatch"
    lines = [header]
    for r in rows:
        lines.append(
            f"{r['case']},{r['level']},{r['h_solid']:.17g},{r['n_fiber']},{r['h1_mismatch']:.17g}"
        )
    text = "\n".join(lines) + "\n"
    print(text, end="")
    _write(args.out, "convergence.csv", text)
    return EXIT_OK


def _cmd_sweep_stability(args) -> int:
    from .stability import stability_sweep, sweep_csv

    h_ratios = [float(v) for v in args.h_ratios.split(",")]
    s_ratios = [float(v) for v in args.stiffness_ratios.split(",")]
    reports = stability_sweep(h_ratios, s_ratios, h_solid=args.h_solid)
    text = sweep_csv(reports)
    print(text, end="")
    _write(args.out, "stability.csv", text)
    return EXIT_OK


def _cmd_rve(args) -> int:
    from .rve import run_rve_study, study_csv

    if args.full_study:
        fractions = [0.005, 0.01, 0.02, 0.04, 0.08, 0.16]
        realizations = 20
    else:
        fractions = [float(v) for v in args.fv.split(",")]
        realizations = args.realizations
    orientations = ("aligned", "random") if args.orientation == "both" else (args.orientation,)
    rows = run_rve_study(
        fractions, realizations=realizations, seed=args.seed, orientations=orientations
    )
    text = study_csv(rows)
    print(text, end="")
    _write(args.out, "rve.csv", text)
    return EXIT_OK


def _cmd_demo_instability(args) -> int:
    from .stability import traction_demo

    report = traction_demo(
        args.h_solid, args.h_shell, plate_dirichlet=args.fix_plate,
        stiffness_ratio=args.stiffness_ratio,
    )
    for key, value in report.row().items():
        if isinstance(value, float):
            print(f"{key} = {value:.17g}")
        else:
            print(f"{key} = {value}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="embedfem", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve a configured problem")
    run.add_argument("config", help="config path or bundled benchmark name")
    run.add_argument("--out", help="directory for CSV metrics and VTK fields")
    run.set_defaults(fn=_cmd_run)

    sc = sub.add_parser("sweep-convergence", help="mismatch vs mesh refinement")
    sc.add_argument("case", choices=["bending", "shell_bending"])
    sc.add_argument("--levels", type=int, default=3)
    sc.add_argument("--fiber-points", default="2,4")
    sc.add_argument("--out")
    sc.set_defaults(fn=_cmd_sweep_convergence)

    ss = sub.add_parser("sweep-stability", help="mesh/stiffness stability map")
    ss.add_argument("--h-ratios", default="0.5,1.0,1.5")
    ss.add_argument("--stiffness-ratios", default="1,16,64")
    ss.add_argument("--h-solid", type=float, default=1.0 / 3.0)
    ss.add_argument("--out")
    ss.set_defaults(fn=_cmd_sweep_stability)

    rv = sub.add_parser("rve", help="fiber-reinforced periodic cell study")
    rv.add_argument("--fv", default="0.01,0.04,0.16")
    rv.add_argument("--orientation", choices=["aligned", "random", "both"], default="both")
    rv.add_argument("--realizations", type=int, default=5)
    rv.add_argument("--seed", type=int, default=0)
    rv.add_argument("--full-study", action="store_true",
                    help="all six volume fractions with 20 realizations")
    rv.add_argument("--out")
    rv.set_defaults(fn=_cmd_rve)

    di = sub.add_parser("demo-instability", help="stretched cube with mid-plane plate")
    di.add_argument("--h-solid", type=float, default=1.0 / 3.0)
    di.add_argument("--h-shell", type=float, default=0.5)
    di.add_argument("--stiffness-ratio", type=float, default=64.0)
    di.add_argument("--fix-plate", action="store_true")
    di.add_argument("--out")
    di.set_defaults(fn=_cmd_demo_instability)
    return p


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SingularSystemError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
