"""Command-line front end: run scenarios, emit reports, grids, and figures.

Exit codes: 0 all checks passed, 1 at least one check failed, 2 the input
could not be read or validated, 3 a pipeline precondition failed while
building (geometry, margins, conditioning).

Heavy imports happen inside functions so the DIFFEOGLUE_THREADS environment
variable can cap BLAS thread pools before numpy initializes them.
"""
from __future__ import annotations

import argparse
import os
import sys

EXIT_PASS = 0
EXIT_CHECK_FAILURE = 1
EXIT_SCHEMA = 2
EXIT_PIPELINE = 3

_PIPELINE_COMMANDS = ("extend", "linearize", "glue", "insert")


def _configure_threads() -> None:
    value = os.environ.get("DIFFEOGLUE_THREADS")
    if not value:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, value)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--report", metavar="PATH", help="write the verification report (JSON)")
    p.add_argument("--grid", metavar="PATH", help="write sampled lattice points and images (CSV)")
    p.add_argument("--figure", metavar="PATH", help="write a deformation figure (SVG, dimension 2 only)")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffeoglue",
        description="Explicit global diffeomorphisms: extension, linearization, "
        "gluing, insertion -- with numerical verification of every claim.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "extend": "extend a ball diffeomorphism to all of R^n",
        "linearize": "flatten a map to the identity near its fixed point",
        "glue": "realize prescribed maps on disjoint regions in one diffeomorphism",
        "insert": "replace what a global map does on one region",
        "verify": "run any scenario's pipeline and checks",
    }
    for cmd in _PIPELINE_COMMANDS + ("verify",):
        p = sub.add_parser(cmd, help=descriptions[cmd])
        p.add_argument("--scenario", metavar="PATH", required=True, help="scenario file (JSON)")
        _add_common(p)
    demo = sub.add_parser("demo", help="run bundled demonstration scenarios")
    demo.add_argument("--name", help="run one demo by name (default: all)")
    demo.add_argument("--list", action="store_true", help="list bundled demo names and exit")
    _add_common(demo)
    return parser


def write_grid_csv(path, mapping, region, target: int = 2000) -> int:
    """Write a full lattice over the region's box: inputs, outputs, det J.

    Returns the row count (always the complete lattice, per_axis^n rows).
    """
    import numpy as np

    lo, hi = region.bounds()
    n = lo.shape[0]
    per_axis = max(2, int(round(target ** (1.0 / n))))
    axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    out = mapping(pts)
    dets = np.linalg.det(mapping.jacobian(pts))
    cols = [f"x{i}" for i in range(n)] + [f"y{i}" for i in range(n)] + ["det_jacobian"]
    data = np.column_stack([pts, out, dets])
    np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")
    return pts.shape[0]


def write_figure_svg(path, bundle) -> None:
    """Deformed coordinate grid, region outlines before/after, identity zone."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    subject = bundle.subject
    lo, hi = bundle.plot_region.bounds()
    fig, ax = plt.subplots(figsize=(7.5, 7.5))
    n_lines, per = 25, 181
    for x in np.linspace(lo[0], hi[0], n_lines):
        pts = np.stack([np.full(per, x), np.linspace(lo[1], hi[1], per)], axis=1)
        img = subject(pts)
        ax.plot(img[:, 0], img[:, 1], color="#6889b0", lw=0.55)
    for y in np.linspace(lo[1], hi[1], n_lines):
        pts = np.stack([np.linspace(lo[0], hi[0], per), np.full(per, y)], axis=1)
        img = subject(pts)
        ax.plot(img[:, 0], img[:, 1], color="#6889b0", lw=0.55)
    ang = np.linspace(0.0, 2.0 * np.pi, 257)
    ring = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    for center, radius in bundle.outlines:
        circ = np.asarray(center) + radius * ring
        ax.plot(circ[:, 0], circ[:, 1], color="#777777", lw=1.0, ls="--")
        img = subject(circ)
        ax.plot(img[:, 0], img[:, 1], color="#b3412f", lw=1.4)
    if bundle.support_outline is not None:
        center, radius = bundle.support_outline
        circ = np.asarray(center) + radius * ring
        ax.plot(circ[:, 0], circ[:, 1], color="#3a7d44", lw=1.0, ls=":")
    ax.set_aspect("equal")
    ax.set_xlabel("x0")
    ax.set_ylabel("x1")
    ax.set_title(bundle.scenario.name)
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)


def _emit_artifacts(report, bundle, *, report_path=None, grid_path=None, figure_path=None) -> None:
    from .serialize import dump_json

    if report_path:
        dump_json(report.to_dict(), report_path)
        print(f"report written to {report_path}")
    if grid_path:
        rows = write_grid_csv(grid_path, bundle.subject, bundle.plot_region)
        print(f"grid written to {grid_path} ({rows} rows)")
    if figure_path:
        if bundle.scenario.dimension != 2:
            print(
                f"figure skipped: deformation figures need dimension 2, scenario is {bundle.scenario.dimension}-dimensional",
                file=sys.stderr,
            )
        else:
            write_figure_svg(figure_path, bundle)
            print(f"figure written to {figure_path}")


def _run_one(scenario, args, *, report_path=None, grid_path=None, figure_path=None):
    from .scenario import run_scenario

    report, bundle = run_scenario(scenario, seed=args.seed)
    for line in report.summary_lines():
        print(line)
    n_pass = sum(1 for c in report.checks if c.passed)
    verdict = "PASS" if report.passed else "FAIL"
    print(f"{verdict}: {scenario.name} ({n_pass}/{len(report.checks)} checks)")
    _emit_artifacts(report, bundle, report_path=report_path, grid_path=grid_path, figure_path=figure_path)
    return report


def _run_scenario_command(args) -> int:
    from .errors import SchemaError
    from .scenario import load_scenario

    scenario = load_scenario(args.scenario)
    if args.command in _PIPELINE_COMMANDS and scenario.kind != args.command:
        raise SchemaError(
            [f"$.kind: scenario '{scenario.name}' is a '{scenario.kind}' task; "
             f"run `diffeoglue {scenario.kind}` or `diffeoglue verify`"]
        )
    report = _run_one(
        scenario, args, report_path=args.report, grid_path=args.grid, figure_path=args.figure
    )
    return EXIT_PASS if report.passed else EXIT_CHECK_FAILURE


def _run_demo(args) -> int:
    from .errors import SchemaError
    from .fixtures import demo_scenarios
    from .scenario import parse_scenario

    table = demo_scenarios()
    if args.list:
        for name in sorted(table):
            print(name)
        return EXIT_PASS
    if args.name is not None and args.name not in table:
        raise SchemaError(
            [f"unknown demo '{args.name}'; available: {', '.join(sorted(table))}"]
        )
    names = [args.name] if args.name else sorted(table)
    multi = len(names) > 1

    def _slot(base, name, suffix):
        if base is None:
            return None
        if not multi:
            return base
        os.makedirs(base, exist_ok=True)
        return os.path.join(base, f"{name}.{suffix}")

    all_passed = True
    for name in names:
        scenario = parse_scenario(table[name])
        report = _run_one(
            scenario,
            args,
            report_path=_slot(args.report, name, "json"),
            grid_path=_slot(args.grid, name, "csv"),
            figure_path=_slot(args.figure, name, "svg"),
        )
        all_passed = all_passed and report.passed
    return EXIT_PASS if all_passed else EXIT_CHECK_FAILURE


def main(argv=None) -> int:
    _configure_threads()
    args = build_parser().parse_args(argv)
    from .errors import DiffeoError, SchemaError

    try:
        if args.command == "demo":
            return _run_demo(args)
        return _run_scenario_command(args)
    except SchemaError as exc:
        for problem in exc.problems:
            print(f"schema error: {problem}", file=sys.stderr)
        return EXIT_SCHEMA
    except FileNotFoundError as exc:
        print(f"schema error: cannot read {exc.filename or exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except DiffeoError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    raise SystemExit(main())
