"""Command-line entry point.

Subcommands map one-to-one onto the analysis modules: ``singular``,
``check-conditions``, ``isoclines``, ``rotation``, ``portrait``,
``cycles``, ``loop``, ``scenario``, ``sweep``.  Numeric output is
locale-independent (floats printed with up to 17 significant digits);
output files are written atomically.  Exit codes: 0 success, 1 domain
error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile

from . import scenario as scenario_mod
from .cycles import displacement_scan, find_cycles
from .errors import QlcError
from .flow import DEFAULT_CONFIG, IntegratorConfig, Section, integrate
from .isocline import classify_conic, nullcline_conics
from .rotation import RotationParam, delta
from .separatrix import find_loop_parameter
from .singular import (ConditionUndefinedError, finite_singular_points,
                       gamma_window_holds, parameter_sum_window_holds)
from .vectorfield import CanonicalParamsII, QuadraticCoefficients, canonical_to_general

__all__ = ["main"]


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _write_atomic(path: str, data: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".qlc-tmp-")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        _write_atomic(path, text)


def _add_system_args(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("system")
    group.add_argument("--system", metavar="FILE",
                       help="JSON file with canonical parameters or raw coefficients")
    group.add_argument("--nu", type=int, choices=(0, 1), default=None)
    group.add_argument("--lambda", dest="lam", type=float, default=None)
    group.add_argument("--beta", type=float, default=None)
    group.add_argument("--gamma", type=float, default=None)
    group.add_argument("--a", type=float, default=None)
    group.add_argument("--c", type=float, default=None)


def _add_integrator_args(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("integrator")
    group.add_argument("--rtol", type=float, default=None)
    group.add_argument("--atol", type=float, default=None)
    group.add_argument("--max-step", type=float, default=None)
    group.add_argument("--max-time", type=float, default=None)
    group.add_argument("--box", type=float, nargs=4, default=None,
                       metavar=("XMIN", "XMAX", "YMIN", "YMAX"))


def _integrator_config(args) -> IntegratorConfig:
    cfg = DEFAULT_CONFIG
    domain = cfg.domain
    if getattr(args, "box", None) is not None:
        x0, x1, y0, y1 = args.box
        domain = ((x0, x1), (y0, y1))
    return IntegratorConfig(
        rtol=args.rtol if getattr(args, "rtol", None) is not None else cfg.rtol,
        atol=args.atol if getattr(args, "atol", None) is not None else cfg.atol,
        max_step=(args.max_step if getattr(args, "max_step", None) is not None
                  else cfg.max_step),
        max_time=(args.max_time if getattr(args, "max_time", None) is not None
                  else cfg.max_time),
        domain=domain,
    )


def _system_from_args(parser: argparse.ArgumentParser, args):
    """Resolve the system spec: file or inline flags, never both."""
    inline = {name: getattr(args, name)
              for name in ("nu", "lam", "beta", "gamma", "a", "c")}
    inline_given = any(v is not None for v in inline.values())
    if args.system is not None and inline_given:
        parser.error("give either --system or inline parameters, not both")
    if args.system is not None:
        with open(args.system) as handle:
            data = json.load(handle)
        if "a00" in data:
            coeffs = QuadraticCoefficients.from_json_dict(data)
            return None, coeffs
        params = CanonicalParamsII.from_json_dict(data)
        return params, canonical_to_general(params)
    params = CanonicalParamsII(
        nu=inline["nu"] if inline["nu"] is not None else 1,
        lam=inline["lam"] if inline["lam"] is not None else 0.0,
        beta=inline["beta"] if inline["beta"] is not None else 0.0,
        gamma=inline["gamma"] if inline["gamma"] is not None else 0.0,
        a=inline["a"] if inline["a"] is not None else 1.0,
        c=inline["c"] if inline["c"] is not None else 2.0,
    )
    return params, canonical_to_general(params)


def _require_params(parser, params):
    if params is None:
        parser.error("this subcommand needs canonical parameters, not raw coefficients")
    return params


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _cmd_singular(parser, args) -> int:
    params, _ = _system_from_args(parser, args)
    points = finite_singular_points(_require_params(parser, params))
    _emit(json.dumps([sp.to_json_dict() for sp in points], indent=2), args.out)
    return 0


def _cmd_check_conditions(parser, args) -> int:
    def window(check):
        try:
            return check()
        except ConditionUndefinedError:
            return None

    result = {
        "gamma_window": window(lambda: gamma_window_holds(args.c, args.gamma)),
        "parameter_sum_window": window(
            lambda: parameter_sum_window_holds(args.c, args.gamma, args.beta,
                                               args.lam)),
    }
    _emit(json.dumps(result), args.out)
    return 0


def _cmd_isoclines(parser, args) -> int:
    _, system = _system_from_args(parser, args)
    vertical, horizontal = nullcline_conics(system)
    out = {
        "vertical": classify_conic(vertical).to_json_dict(),
        "horizontal": classify_conic(horizontal).to_json_dict(),
    }
    _emit(json.dumps(out, indent=2), args.out)
    return 0


def _cmd_rotation(parser, args) -> int:
    params, _ = _system_from_args(parser, args)
    params = _require_params(parser, params)
    (x_lo, x_hi), (y_lo, y_hi) = _integrator_config(args).domain
    n = args.grid_n
    rows = []
    for i in range(n):
        x = x_lo + (x_hi - x_lo) * i / (n - 1)
        for j in range(n):
            y = y_lo + (y_hi - y_lo) * j / (n - 1)
            rows.append((x, y,
                         delta(RotationParam.LAMBDA, params, (x, y)),
                         delta(RotationParam.BETA, params, (x, y)),
                         delta(RotationParam.GAMMA, params, (x, y))))
    _emit(_csv_text(("x", "y", "delta_lambda", "delta_beta", "delta_gamma"),
                    rows), args.out)
    return 0


def _svg_portrait(orbits, lines, points, domain) -> str:
    (x_lo, x_hi), (y_lo, y_hi) = domain
    width, height = 640, 640

    def tx(x):
        return (x - x_lo) / (x_hi - x_lo) * width

    def ty(y):
        return height - (y - y_lo) / (y_hi - y_lo) * height

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for line in lines:
        # Draw nx*x + ny*y + offset = 0 clipped to the box, dashed.
        if abs(line.ny) >= abs(line.nx):
            p0 = (x_lo, -(line.offset + line.nx * x_lo) / line.ny)
            p1 = (x_hi, -(line.offset + line.nx * x_hi) / line.ny)
        else:
            p0 = (-(line.offset + line.ny * y_lo) / line.nx, y_lo)
            p1 = (-(line.offset + line.ny * y_hi) / line.nx, y_hi)
        parts.append(
            f'<line x1="{tx(p0[0]):.2f}" y1="{ty(p0[1]):.2f}" '
            f'x2="{tx(p1[0]):.2f}" y2="{ty(p1[1]):.2f}" '
            'stroke="#888888" stroke-dasharray="6 4" stroke-width="1"/>')
    for orbit_points in orbits:
        coords = " ".join(f"{tx(x):.2f},{ty(y):.2f}" for x, y in orbit_points)
        parts.append(f'<polyline points="{coords}" fill="none" '
                     'stroke="#1f77b4" stroke-width="1"/>')
    for sp in points:
        x, y = sp.location
        color = "#d62728" if sp.kind.value == "Saddle" else "#2ca02c"
        parts.append(f'<circle cx="{tx(x):.2f}" cy="{ty(y):.2f}" r="4" '
                     f'fill="{color}"><title>{sp.kind.value}</title></circle>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _cmd_portrait(parser, args) -> int:
    params, system = _system_from_args(parser, args)
    config = _integrator_config(args)
    (x_lo, x_hi), (y_lo, y_hi) = config.domain
    rows = []
    orbits = []
    orbit_id = 0
    for i in range(args.nx):
        for j in range(args.ny):
            x = x_lo + (x_hi - x_lo) * (i + 0.5) / args.nx
            y = y_lo + (y_hi - y_lo) * (j + 0.5) / args.ny
            traj = integrate(system, (x, y), args.duration, config)
            orbits.append(traj.points)
            for t, (px, py) in zip(traj.times, traj.points):
                rows.append((t, px, py, orbit_id))
            orbit_id += 1
    csv_text = _csv_text(("t", "x", "y", "orbit_id"), rows)
    _emit(csv_text, args.out_csv)
    vertical, horizontal = nullcline_conics(system)
    lines = classify_conic(vertical).lines + classify_conic(horizontal).lines
    singular_points = finite_singular_points(params) if params is not None else []
    svg = _svg_portrait(orbits, lines, singular_points, config.domain)
    if args.out_svg is not None:
        _write_atomic(args.out_svg, svg)
    return 0


def _cmd_cycles(parser, args) -> int:
    params, _ = _system_from_args(parser, args)
    params = _require_params(parser, params)
    config = _integrator_config(args)
    section = Section(x_min=args.x_min, x_max=args.x_max)
    samples = displacement_scan(params, section, args.n, config)
    result = find_cycles(params, section, config, samples=samples)
    rows = [(s.x, s.return_coordinate, s.displacement)
            for s in samples.samples if s.present]
    _emit(_csv_text(("x", "Px", "dx"), rows), args.out_csv)
    payload = {
        "annotation": result.annotation,
        "records": [r.summary_dict() for r in result.records],
    }
    _emit(json.dumps(payload, indent=2), args.out_json)
    return 0


def _cmd_loop(parser, args) -> int:
    params, _ = _system_from_args(parser, args)
    params = _require_params(parser, params)
    config = _integrator_config(args)
    param = RotationParam(args.param)
    result = find_loop_parameter(params, param, (args.lo, args.hi),
                                 tol=args.tol, config=config)
    _emit(json.dumps(result.to_json_dict()), args.out)
    return 0


def _cmd_scenario(parser, args) -> int:
    config = _integrator_config(args)
    report = scenario_mod.run_two_cycle_construction(args.c, config,
                                                     order=args.order)
    _emit(json.dumps(report.to_json_dict(), indent=2), args.out)
    return 0


def _cmd_sweep(parser, args) -> int:
    config = _integrator_config(args)
    if args.grid is not None:
        with open(args.grid) as handle:
            grid = scenario_mod.SweepGrid.from_json_dict(json.load(handle))
    else:
        grid = scenario_mod.SweepGrid()
    summary = scenario_mod.sweep_max_cycles(grid, config)
    if args.out is not None:
        lines = [json.dumps(r.to_json_dict()) for r in summary.results]
        _write_atomic(args.out, "\n".join(lines) + ("\n" if lines else ""))
    sys.stdout.write(json.dumps(summary.to_json_dict(), indent=2) + "\n")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qlc",
        description="Limit cycle laboratory for quadratic systems with two "
                    "parallel straight line-isoclines.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("singular", help="list finite singular points as JSON")
    _add_system_args(p)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_singular)

    p = sub.add_parser("check-conditions",
                       help="evaluate the two-singularity window conditions")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_check_conditions)

    p = sub.add_parser("isoclines", help="classify the nullcline conics")
    _add_system_args(p)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_isoclines)

    p = sub.add_parser("rotation",
                       help="rotation determinants on a grid as CSV")
    _add_system_args(p)
    _add_integrator_args(p)
    p.add_argument("--grid-n", type=int, default=21)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_rotation)

    p = sub.add_parser("portrait", help="integrate a seed grid; CSV and SVG")
    _add_system_args(p)
    _add_integrator_args(p)
    p.add_argument("--nx", type=int, default=8)
    p.add_argument("--ny", type=int, default=8)
    p.add_argument("--duration", type=float, default=30.0)
    p.add_argument("--out-csv")
    p.add_argument("--out-svg")
    p.set_defaults(func=_cmd_portrait)

    p = sub.add_parser("cycles",
                       help="displacement scan (CSV) and cycle records (JSON)")
    _add_system_args(p)
    _add_integrator_args(p)
    p.add_argument("--n", type=int, default=48)
    p.add_argument("--x-min", type=float, default=1e-3)
    p.add_argument("--x-max", type=float, default=0.95)
    p.add_argument("--out-csv")
    p.add_argument("--out-json")
    p.set_defaults(func=_cmd_cycles)

    p = sub.add_parser("loop",
                       help="bisect a separatrix-loop bifurcation value")
    _add_system_args(p)
    _add_integrator_args(p)
    p.add_argument("--param", choices=[rp.value for rp in RotationParam],
                   required=True)
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_loop)

    p = sub.add_parser("scenario",
                       help="run the staged two-cycle construction")
    _add_integrator_args(p)
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--order", choices=scenario_mod.SCENARIO_ORDERS,
                   default="gamma-first")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_scenario)

    p = sub.add_parser("sweep", help="cycle-count sweep over a parameter grid")
    _add_integrator_args(p)
    p.add_argument("--grid", metavar="FILE",
                   help="JSON grid spec (defaults documented in the README)")
    p.add_argument("--out", metavar="FILE", help="JSONL per-point results")
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(parser, args)
    except QlcError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
