"""Command-line front end.

Exit codes: 0 success, 1 validation mismatch, 2 usage or configuration
error, 3 solver or capacity error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

from . import analysis, fcfs_chain, reference, simulator
from .errors import BcmError, InvalidConfig, ParameterError, StateSpaceCapExceeded
from .model import Discipline, Exponential, ModelParams, format_service, parse_service

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2
EXIT_SOLVER = 3


def fmt(x) -> str:
    """Shortest repr that round-trips the float exactly."""
    if x is None or x == "":
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


class UsageError(Exception):
    pass


# -- RunRecord -------------------------------------------------------------


@dataclass(frozen=True)
class RunRecord:
    discipline: str
    method: str
    N: int
    think_rate: float
    mu1: float
    mu2: float
    p: float
    anbc: float
    anpec: float
    utilization: float
    ci_halfwidth: float | None = None
    seed: int | None = None

    HEADER = ("discipline", "method", "N", "lambda", "mu1", "mu2", "p", "anbc", "anpec",
              "utilization", "ci_halfwidth", "seed")

    def row(self):
        return [fmt(getattr(self, f.name)) for f in fields(self)]


def write_csv(stream, header, rows):
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)


# -- config files ----------------------------------------------------------


def load_config(path, parser: argparse.ArgumentParser) -> dict:
    """Read ``key = value`` lines into parser defaults.

    Keys are long flag names with or without leading dashes; ``-`` and
    ``_`` are interchangeable. ``#`` starts a comment.
    """
    by_name = {}
    for action in parser._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                by_name[opt[2:].replace("-", "_")] = action
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        name = key.lstrip("-").replace("-", "_")
        action = by_name.get(name)
        if action is None or name in ("config", "help"):
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        if action.nargs == 0:
            lowered = value.lower()
            if lowered not in ("true", "false", "1", "0", "yes", "no"):
                raise UsageError(f"{path}:{lineno}: {key} expects a boolean, got {value!r}")
            values[action.dest] = lowered in ("true", "1", "yes")
            continue
        try:
            converted = action.type(value) if action.type else value
        except (ValueError, TypeError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
        if action.choices is not None and converted not in action.choices:
            raise UsageError(f"{path}:{lineno}: {key} must be one of {sorted(action.choices)}")
        values[action.dest] = converted
    return values


# -- argument types --------------------------------------------------------


def float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def service_arg(text: str):
    try:
        return parse_service(text)
    except ParameterError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def default_threads() -> int:
    env = os.environ.get("BCM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def pmap(fn, items):
    """Map in a thread pool capped by BCM_THREADS; results keep input order."""
    items = list(items)
    threads = default_threads()
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(fn, items))


def add_model_flags(p: argparse.ArgumentParser):
    p.add_argument("--n", type=int, default=4, help="number of processors N")
    p.add_argument("--lambda", dest="lam", type=float, default=0.001, help="think rate [1/t.u.]")
    p.add_argument("--mu1", type=float, default=0.1, help="blocking service rate [1/t.u.]")
    p.add_argument("--mu2", type=float, default=0.01, help="write-back service rate [1/t.u.]")
    p.add_argument("--p", type=float, default=0.8, help="probability of no write-back")


def model_params(args, f1=None, f2=None) -> ModelParams:
    try:
        return ModelParams(
            args.n,
            args.lam,
            args.p,
            f1 if f1 is not None else Exponential(args.mu1),
            f2 if f2 is not None else Exponential(args.mu2),
        )
    except ParameterError as exc:
        raise UsageError(str(exc)) from None


# -- commands --------------------------------------------------------------


def cmd_solve(args) -> int:
    if args.discipline is None:
        raise UsageError("--discipline is required (fcfs or priority)")
    params = model_params(args)
    discipline = Discipline(args.discipline)
    res = analysis.solve(params, discipline, args.method)
    rec = RunRecord(
        str(discipline), "analytic", params.n_processors, params.think_rate,
        args.mu1, args.mu2, params.resume_prob, res.anbc, res.anpec, res.utilization,
    )
    write_csv(sys.stdout, RunRecord.HEADER, [rec.row()])
    return EXIT_OK


VALIDATE_HEADER = ("table", "N", "mu2", "lambda", "quantity", "reference", "computed",
                   "abs_error", "rel_error", "ok")


def cmd_validate_tables(args) -> int:
    if not (args.tolerance > 0 and args.pct_tolerance > 0):
        raise UsageError("tolerances must be > 0")
    rows = reference.load()

    def work(ref):
        params = ModelParams.exponential(ref.n, ref.think_rate, reference.MU1, ref.mu2,
                                         reference.RESUME_PROB)
        return analysis.compare(params, args.method)

    computed = pmap(work, rows)
    report = []
    worst_rel = 0.0
    worst_pct = 0.0
    failures = 0
    for ref, got in zip(rows, computed):
        for name, want, have in (
            ("fcfs", ref.anbc_fcfs, got.anbc_fcfs),
            ("priority", ref.anbc_priority, got.anbc_priority),
        ):
            abs_err = abs(have - want)
            rel = abs_err / abs(want)
            ok = rel <= args.tolerance
            worst_rel = max(worst_rel, rel)
            failures += not ok
            report.append([ref.table, ref.n, fmt(ref.mu2), fmt(ref.think_rate), name,
                           fmt(want), fmt(have), fmt(abs_err), fmt(rel), int(ok)])
        abs_err = abs(got.pct_difference - ref.pct_difference)
        ok = abs_err <= args.pct_tolerance
        worst_pct = max(worst_pct, abs_err)
        failures += not ok
        report.append([ref.table, ref.n, fmt(ref.mu2), fmt(ref.think_rate), "pct_difference",
                       fmt(ref.pct_difference), fmt(got.pct_difference), fmt(abs_err),
                       fmt(abs_err / abs(ref.pct_difference)), int(ok)])

    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        out.write("# reference: Table 1.a-1.h, mu1=0.1, p=0.8\n")
        out.write("# mu2 captions 0.006667 (1.b,1.d,1.h) and 0.006666 (1.f) are both read as 1/150\n")
        write_csv(out, VALIDATE_HEADER, report)
    finally:
        if args.output:
            out.close()
    n_anbc = 2 * len(rows)
    print(
        f"validated {n_anbc} ANBC cells (max relative error {worst_rel:.3e}, tolerance "
        f"{args.tolerance:g}) and {len(rows)} pct cells (max abs error {worst_pct:.3e} "
        f"points, tolerance {args.pct_tolerance:g}); {failures} outside tolerance",
        file=sys.stderr,
    )
    return EXIT_OK if failures == 0 else EXIT_MISMATCH


FIGURE_HEADER = ("discipline", "p", "mu2", "N", "lambda", "anpec", "anbc")


def _svg(path: Path, title: str, curves: dict, n_max: int):
    width, height, pad = 640, 420, 50
    y_max = max((v for pts in curves.values() for _, v in pts), default=1.0) or 1.0

    def sx(n):
        return pad + (n - 1) / max(n_max - 1, 1) * (width - 2 * pad)

    def sy(v):
        return height - pad - v / y_max * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle">N</text>',
        f'<text x="15" y="{height / 2}" transform="rotate(-90 15 {height / 2})" '
        'text-anchor="middle">ANPEC</text>',
    ]
    for n in range(1, n_max + 1):
        parts.append(f'<text x="{sx(n):.1f}" y="{height - pad + 15}" text-anchor="middle" '
                     f'font-size="10">{n}</text>')
    for i, (lam, pts) in enumerate(sorted(curves.items())):
        coords = " ".join(f"{sx(n):.1f},{sy(v):.1f}" for n, v in pts)
        hue = int(300 * i / max(len(curves) - 1, 1))
        parts.append(f'<polyline fill="none" stroke="hsl({hue},70%,40%)" points="{coords}"/>')
        n_last, v_last = pts[-1]
        parts.append(f'<text x="{sx(n_last) + 4:.1f}" y="{sy(v_last):.1f}" font-size="9">'
                     f'λ={lam:g}</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")


def cmd_figure_data(args) -> int:
    if not args.p_list or not args.mu2_list or not args.lambda_list:
        raise UsageError("parameter lists must not be empty")
    if any(not (0 <= p <= 1) for p in args.p_list):
        raise UsageError("every p must lie in [0, 1]")
    if any(not (m > 0) for m in args.mu2_list + args.lambda_list) or args.mu1 <= 0:
        raise UsageError("every rate (lambda, mu1, mu2) must be > 0")
    if args.n_max < 2:
        raise UsageError("--n-max must be >= 2")
    discipline = Discipline(args.discipline)
    if discipline is Discipline.FCFS and args.n_max > fcfs_chain.N_CAP:
        raise StateSpaceCapExceeded(
            f"the FCFS chain is capped at N={fcfs_chain.N_CAP}; lower --n-max", reached=0
        )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(p, mu2, lam) for p in args.p_list for mu2 in args.mu2_list for lam in args.lambda_list]
    curves = pmap(
        lambda job: analysis.anpec_curve(job[2], job[0], job[1], discipline, args.n_max, mu1=args.mu1),
        jobs,
    )
    by_panel: dict = {}
    for (p, mu2, lam), curve in zip(jobs, curves):
        by_panel.setdefault((p, mu2), {})[lam] = curve.points
    for (p, mu2), panel in by_panel.items():
        stem = f"fig2_{discipline}_p{p:g}_mu2{mu2:g}"
        path = out_dir / f"{stem}.csv"
        rows = []
        for lam in sorted(panel):
            for n, value in panel[lam]:
                rows.append([str(discipline), fmt(p), fmt(mu2), n, fmt(lam), fmt(value), fmt(n - value)])
        with open(path, "w", newline="") as fh:
            write_csv(fh, FIGURE_HEADER, rows)
        print(path)
        if args.svg:
            svg_path = out_dir / f"{stem}.svg"
            _svg(svg_path, f"{discipline}: p={p:g}, mu2={mu2:g}", panel, args.n_max)
            print(svg_path)
    return EXIT_OK


SIM_HEADER = ("discipline", "metric", "mean", "ci_halfwidth", "ci_level", "replications",
              "N", "lambda", "p", "dist1", "dist2", "horizon", "warmup", "seed")


def _sim_config(args, discipline) -> simulator.SimConfig:
    params = model_params(args, args.dist1, args.dist2)
    try:
        return simulator.SimConfig(params, discipline, args.horizon, args.warmup, args.reps,
                                   args.seed, args.ci)
    except InvalidConfig as exc:
        raise UsageError(str(exc)) from None


def _sim_rows(agg: simulator.SimAggregate):
    c = agg.config
    rows = []
    for metric in simulator.METRICS:
        est = agg[metric]
        rows.append([str(c.discipline), metric, fmt(est.mean), fmt(est.half_width), fmt(c.ci_level),
                     est.n, c.params.n_processors, fmt(c.params.think_rate),
                     fmt(c.params.resume_prob), format_service(c.params.blocking_service),
                     format_service(c.params.writeback_service), fmt(c.horizon), fmt(c.warmup),
                     c.base_seed])
    return rows


def cmd_simulate(args) -> int:
    if args.discipline == "both":
        disciplines = [Discipline.FCFS, Discipline.PRIORITY]
    else:
        disciplines = [Discipline(args.discipline)]
    rows = []
    for d in disciplines:
        agg = simulator.run(_sim_config(args, d), workers=default_threads())
        rows.extend(_sim_rows(agg))
    write_csv(sys.stdout, SIM_HEADER, rows)
    return EXIT_OK


CONSERVATION_HEADER = ("metric", "fcfs_mean", "fcfs_ci_halfwidth", "priority_mean",
                       "priority_ci_halfwidth", "difference", "ci_level")


def cmd_conservation(args) -> int:
    fcfs = simulator.run(_sim_config(args, Discipline.FCFS), workers=default_threads())
    prio = simulator.run(_sim_config(args, Discipline.PRIORITY), workers=default_threads())
    rep = analysis.conservation_report(fcfs, prio)
    rows = [[ln.metric, fmt(ln.fcfs_mean), fmt(ln.fcfs_half_width), fmt(ln.priority_mean),
             fmt(ln.priority_half_width), fmt(ln.difference), fmt(rep.ci_level)] for ln in rep.lines]
    write_csv(sys.stdout, CONSERVATION_HEADER, rows)
    return EXIT_OK


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bcm",
        description="Shared-bus multiprocessor model: FCFS vs. priority write-back service.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one analytic chain")
    p.add_argument("--config")
    p.add_argument("--discipline", choices=["fcfs", "priority"], help="required")
    add_model_flags(p)
    p.add_argument("--method", choices=["auto", "direct", "iterative"], default="auto")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("validate-tables", help="compare both solvers against Table 1")
    p.add_argument("--config")
    p.add_argument("--tolerance", type=float, default=1e-4, help="relative ANBC tolerance")
    p.add_argument("--pct-tolerance", type=float, default=1e-3,
                   help="absolute tolerance on the %% difference column, in points")
    p.add_argument("--method", choices=["auto", "direct", "iterative"], default="auto")
    p.add_argument("--output", help="write the per-cell CSV here instead of stdout")
    p.set_defaults(func=cmd_validate_tables)

    p = sub.add_parser("figure-data", help="ANPEC against N, one CSV per (p, mu2)")
    p.add_argument("--config")
    p.add_argument("--p-list", type=float_list, default=[0.8, 0.9])
    p.add_argument("--mu2-list", type=float_list, default=[0.01, 0.0066666667])
    p.add_argument("--lambda-list", type=float_list,
                   default=[round(0.001 * i, 3) for i in range(1, 11)])
    p.add_argument("--mu1", type=float, default=0.1)
    p.add_argument("--n-max", type=int, default=12)
    p.add_argument("--discipline", choices=["fcfs", "priority"], default="priority")
    p.add_argument("--out-dir", default="figure_data")
    p.add_argument("--svg", action="store_true", help="also write one SVG chart per panel")
    p.set_defaults(func=cmd_figure_data)

    for name, func, help_text in (
        ("simulate", cmd_simulate, "discrete-event simulation with confidence intervals"),
        ("conservation", cmd_conservation, "side-by-side mean waits of both disciplines"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config")
        if name == "simulate":
            p.add_argument("--discipline", choices=["fcfs", "priority", "both"], default="priority")
        add_model_flags(p)
        p.add_argument("--dist1", type=service_arg, default=None,
                       help="blocking service, e.g. exp:0.1, det:10, erlang:2:0.2, hyper:0.5,0.5:0.2,0.05")
        p.add_argument("--dist2", type=service_arg, default=None, help="write-back service")
        p.add_argument("--horizon", type=float, default=simulator.DEFAULT_HORIZON)
        p.add_argument("--warmup", type=float, default=simulator.DEFAULT_WARMUP)
        p.add_argument("--reps", type=int, default=simulator.DEFAULT_REPLICATIONS)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--ci", type=float, default=simulator.DEFAULT_CI)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if getattr(args, "config", None):
            sub = parser._subparsers._group_actions[0].choices[args.command]
            sub.set_defaults(**load_config(args.config, sub))
            # flags given on the command line still win over file values
            args = parser.parse_args(argv)
        return args.func(args)
    except (UsageError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BcmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, StateSpaceCapExceeded):
            print("hint: lower --n-max (or --n) for the FCFS discipline", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
