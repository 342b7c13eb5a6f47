"""Command-line entry point: ``fwdgrad <subcommand> [flags]``.

Subcommands: list, run, grid, profile, validate, trajectory. Exit status is
0 on success, 1 when a validation claim fails and 2 on a usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from . import bench
from . import svg
from .estimators import GradientOracle
from .optimizers import KINDS as OPTIMIZER_KINDS
from .optimizers import OptimizerConfig
from .problems import FAMILIES, catalog, linear_objective, make_problem
from .rng import SeededRng, stream_index
from .tangents import KINDS as TANGENT_KINDS
from .tangents import check_tangent_law_properties
from .theory import ValidationConfig, reports_to_json, run_all_validations

ORACLES = ("true",) + tuple(f"forward-{k}" for k in TANGENT_KINDS)
TRAJECTORY_PROBLEMS = ("linear",) + tuple(FAMILIES)


class UsageError(Exception):
    """A flag value that parses but makes no sense; names the flag."""

    def __init__(self, flag: str, message: str):
        super().__init__(f"{flag}: {message}")
        self.flag = flag


# ---------------------------------------------------------------------------
# flag parsing helpers
# ---------------------------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in str(text).split(",") if x.strip()]


def parse_oracle(label: str) -> GradientOracle:
    if label == "true":
        return GradientOracle.true()
    if label.startswith("forward-") and label[len("forward-"):] in TANGENT_KINDS:
        return GradientOracle.forward(label[len("forward-"):])
    raise UsageError("--oracle", f"unknown oracle {label!r}; expected one of {', '.join(ORACLES)}")


def _optimizer(kind: str, args) -> OptimizerConfig:
    if kind not in OPTIMIZER_KINDS:
        raise UsageError("--optimizer", f"unknown optimizer {kind!r}; expected one of {', '.join(OPTIMIZER_KINDS)}")
    try:
        return OptimizerConfig(kind, lr=args.lr, beta1=args.beta1, beta2=args.beta2, eps=args.eps, clip=args.clip)
    except ValueError as e:
        raise UsageError("--lr/--beta1/--beta2/--eps/--clip", str(e)) from None


def _check_common(args):
    if getattr(args, "budget", 1) < 1:
        raise UsageError("--budget", "must be >= 1")
    if getattr(args, "epsilon", 1.0) <= 0:
        raise UsageError("--epsilon", "must be positive")
    if getattr(args, "starts", 1) < 1:
        raise UsageError("--starts", "must be >= 1")
    if getattr(args, "jobs", 1) < 1:
        raise UsageError("--jobs", "must be >= 1")


def read_config(path: str) -> dict[str, str]:
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError("--config", f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _write(path: Optional[str], text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_list(args) -> int:
    problems = catalog(args.dims)
    rows = [
        {
            "name": p.name,
            "family": p.family,
            "dimension": p.dimension,
            "f_star": p.f_star,
            "lower": float(p.lower[0]),
            "upper": float(p.upper[0]),
            "tags": sorted(p.tags),
        }
        for p in problems
    ]
    if args.json:
        sys.stdout.write(json.dumps(rows, indent=2) + "\n")
        return 0
    width = max(len(r["name"]) for r in rows)
    for r in rows:
        box = f"[{r['lower']:g}, {r['upper']:g}]"
        sys.stdout.write(f"{r['name']:<{width}}  f*={r['f_star']:<20.15g} box={box:<20} {','.join(r['tags'])}\n")
    return 0


def _problem(args):
    if args.problem is None:
        raise UsageError("--problem", "required")
    dim = args.dim
    if dim is None:
        fam = FAMILIES.get(args.problem)
        dim = fam.fixed_dim if fam is not None and fam.fixed_dim else 2
    if args.problem == "linear":
        return linear_objective(np.ones(dim))
    try:
        return make_problem(args.problem, dim)
    except ValueError as e:
        flag = "--dim" if args.problem in FAMILIES else "--problem"
        raise UsageError(flag, str(e)) from None


def cmd_run(args) -> int:
    _check_common(args)
    problem = _problem(args)
    if problem.family == "linear":
        raise UsageError("--problem", "linear has no minimum; use the trajectory subcommand")
    x0 = bench.start_points(problem, args.seed, args.start_index + 1)[args.start_index]
    if args.dump_tape:
        tape, _ = ad.record(problem.program, x0)
        sys.stderr.write(tape.dump() + "\n")
    spec = bench.TrialSpec(
        problem, _optimizer(args.optimizer, args), parse_oracle(args.oracle), args.seed, x0,
        args.budget, args.epsilon, args.start_index,
    )
    record = bench.run_trial(spec)
    _write(args.out, bench.trace_to_csv(record))
    if args.svg:
        _write(args.svg, svg.convergence_plot({spec.solver_label: record.trace}, problem.f_star, problem.name))
    status = "converged" if record.converged else ("diverged" if record.diverged else "not converged")
    t = record.t_evals if record.converged else "-"
    sys.stderr.write(f"{record.name} {spec.solver_label}: {status}, t={t}, final_f={record.final_f!r}\n")
    return 0


def _solvers(args) -> list[bench.Solver]:
    kinds = args.optimizer or list(OPTIMIZER_KINDS)
    oracles = args.oracle or ["true", "forward-rademacher"]
    solvers = [bench.Solver(_optimizer(k, args), parse_oracle(o)) for k in kinds for o in oracles]
    if not solvers:
        raise UsageError("--optimizer", "no solvers selected")
    labels = [s.label for s in solvers]
    if len(set(labels)) != len(labels):
        raise UsageError("--optimizer/--oracle", "duplicate solver")
    return sorted(solvers, key=lambda s: s.label)


def _write_profiles(profiles, out: Path, emit_svg: bool):
    for dim, prof in profiles.items():
        (out / f"profile-{dim}.json").write_text(prof.to_json())
        if emit_svg:
            (out / f"profile-{dim}.svg").write_text(svg.profile_plot(prof, f"performance profile, n = {dim}"))


def cmd_grid(args) -> int:
    _check_common(args)
    families = args.problem or None
    try:
        problems = catalog(args.dims, families)
    except ValueError as e:
        raise UsageError("--problem/--dims", str(e)) from None
    if len(problems) == 0:
        raise UsageError("--dims", "no problem is defined at the requested dimensions")
    solvers = _solvers(args)
    specs = bench.build_trials(problems, solvers, [args.seed], args.starts, args.budget, args.epsilon)
    records = bench.run_trials(specs, args.jobs)
    labels = [s.label for s in solvers]
    profiles = bench.profiles_by_dimension(records, labels)
    out = Path(args.out or "results")
    out.mkdir(parents=True, exist_ok=True)
    (out / "records.csv").write_text(bench.records_to_csv(records))
    _write_profiles(profiles, out, args.svg is not None)
    if args.svg is not None:
        curves = out / "curves"
        curves.mkdir(exist_ok=True)
        for p in problems:
            traces = {
                r.solver: r.trace for r in records if r.name == p.name and r.start_index == 0
            }
            (curves / f"{p.name}.svg").write_text(svg.convergence_plot(traces, p.f_star, p.name))
    for dim, prof in profiles.items():
        best = ", ".join(f"{s}={prof.rho_at(s, 1.0):.2f}" for s in prof.solvers)
        sys.stderr.write(f"n={dim}: rho(1): {best}\n")
    return 0


def cmd_profile(args) -> int:
    if args.records is None:
        raise UsageError("records", "path to a records CSV is required")
    try:
        rows = bench.records_from_csv(Path(args.records).read_text())
    except (OSError, ValueError) as e:
        raise UsageError("records", str(e)) from None
    if not rows:
        raise UsageError("records", "no trials in file")
    labels = sorted({f"{r['optimizer']}/{r['oracle']}" for r in rows})
    out = Path(args.out or Path(args.records).parent)
    out.mkdir(parents=True, exist_ok=True)
    _write_profiles(bench.profiles_by_dimension(rows, labels), out, args.svg is not None)
    return 0


def cmd_validate(args) -> int:
    if args.target == "tangent-law":
        return _validate_tangent_law(args)
    cfg = ValidationConfig(seed=args.seed, claims=tuple(args.claims or ()))
    if args.samples is not None:
        cfg.mc_samples = args.samples
    reports = run_all_validations(cfg)
    if not reports:
        raise UsageError("--claims", "no claim matches")
    _write(args.out, reports_to_json(reports))
    failed = [r.claim_id for r in reports if not r.passed]
    sys.stderr.write(f"{len(reports) - len(failed)}/{len(reports)} claims pass\n")
    for cid in failed:
        sys.stderr.write(f"FAIL {cid}\n")
    return 1 if failed else 0


def _validate_tangent_law(args) -> int:
    labels = args.oracle or [f"forward-{k}" for k in TANGENT_KINDS]
    n = args.dim or 10
    samples = args.samples or 100_000
    out = []
    for label in labels:
        oracle = parse_oracle(label)
        if not oracle.is_forward:
            raise UsageError("--oracle", "tangent-law validation needs a forward-* oracle")
        rng = SeededRng(args.seed, stream_index("tangent-law", label, n))
        sampler = oracle.sampler
        if sampler.kind == "rotated":
            sampler = bench.trial_oracle(oracle, n, rng).sampler
        report = check_tangent_law_properties(sampler, n, samples, rng)
        out.append({"oracle": label, "n": n, "samples": samples, **report.to_dict()})
    _write(args.out, json.dumps(out, indent=2) + "\n")
    return 0


def cmd_trajectory(args) -> int:
    _check_common(args)
    problem = _problem(args)
    kinds = args.optimizer or ["sgd"]
    oracles = args.oracle or ["true", "forward-rademacher"]
    steps = args.budget
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n = problem.dimension
    w.writerow(["optimizer", "oracle", "start_index", "step", "f"] + [f"theta_{i}" for i in range(n)])
    curves = {}
    for k, x0 in enumerate(bench.start_points(problem, args.seed, args.starts)):
        for kind in kinds:
            opt = _optimizer(kind, args)
            for label in oracles:
                oracle = parse_oracle(label)
                rng = SeededRng(args.seed, stream_index("trajectory", problem.name, kind, label, k))
                values, thetas = bench.run_path(problem, opt, oracle, x0, steps, rng)
                for step_i, (fv, th) in enumerate(zip(values, thetas)):
                    w.writerow([kind, label, k, step_i, repr(float(fv))] + [repr(float(x)) for x in th])
                if k == 0:
                    curves[f"{kind}/{label}"] = values
    _write(args.out, buf.getvalue())
    if args.svg:
        shift = 0.0 if math.isfinite(problem.f_star) else None
        series = [
            svg.Series(label, list(range(len(v))), list(v - (problem.f_star if shift is not None else 0.0)),
                       dashed="forward" in label)
            for label, v in curves.items()
        ]
        ylabel = "f - f*" if shift is not None else "f"
        _write(args.svg, svg.line_plot(series, problem.name, "step", ylabel, logy=shift is not None))
    return 0


COMMANDS = {
    "list": cmd_list,
    "run": cmd_run,
    "grid": cmd_grid,
    "profile": cmd_profile,
    "validate": cmd_validate,
    "trajectory": cmd_trajectory,
}


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_optimizer_flags(p, multi: bool):
    if multi:
        p.add_argument("--optimizer", type=_str_list, default=None, help="comma list of " + ",".join(OPTIMIZER_KINDS))
        p.add_argument("--oracle", type=_str_list, default=None, help="comma list of " + ",".join(ORACLES))
    else:
        p.add_argument("--optimizer", default="sgd", help=" | ".join(OPTIMIZER_KINDS))
        p.add_argument("--oracle", default="true", help=" | ".join(ORACLES))
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--beta1", type=float, default=0.9)
    p.add_argument("--beta2", type=float, default=0.999)
    p.add_argument("--eps", type=float, default=1e-8)
    p.add_argument("--clip", type=float, default=1.0)


def _add_common(p):
    p.add_argument("--seed", type=int, default=42, help="master seed")
    p.add_argument("--config", default=None, help="key=value file; explicit flags win")
    p.add_argument("--out", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fwdgrad", description="Forward-gradient optimization lab")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = {}

    p = parser.subcommands["list"] = sub.add_parser("list", help="print the problem catalog")
    _add_common(p)
    p.add_argument("--dims", type=_int_list, default=[2, 10, 100])
    p.add_argument("--json", action="store_true")

    p = parser.subcommands["run"] = sub.add_parser("run", help="one trial; writes a trace CSV")
    _add_common(p)
    p.add_argument("--problem", default=None)
    p.add_argument("--dim", type=int, default=None)
    _add_optimizer_flags(p, multi=False)
    p.add_argument("--budget", type=int, default=bench.DEFAULT_BUDGET)
    p.add_argument("--epsilon", type=float, default=bench.DEFAULT_EPSILON)
    p.add_argument("--start-index", type=int, default=0)
    p.add_argument("--svg", default=None, help="convergence plot path")
    p.add_argument("--dump-tape", action="store_true", help="print the Wengert list at the start point to stderr")

    p = parser.subcommands["grid"] = sub.add_parser("grid", help="benchmark grid; writes records CSV, profile JSON and SVGs")
    _add_common(p)
    p.add_argument("--problem", type=_str_list, default=None, help="comma list of families (default: all)")
    p.add_argument("--dims", type=_int_list, default=[2, 10, 100])
    _add_optimizer_flags(p, multi=True)
    p.add_argument("--budget", type=int, default=bench.DEFAULT_BUDGET)
    p.add_argument("--epsilon", type=float, default=bench.DEFAULT_EPSILON)
    p.add_argument("--starts", type=int, default=5)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--svg", nargs="?", const="", default=None, help="also emit SVG plots")

    p = parser.subcommands["profile"] = sub.add_parser("profile", help="recompute profiles from a records CSV")
    _add_common(p)
    p.add_argument("records", nargs="?", default=None)
    p.add_argument("--svg", nargs="?", const="", default=None)

    p = parser.subcommands["validate"] = sub.add_parser("validate", help="check the theoretical claims; exit 1 on any failure")
    _add_common(p)
    p.add_argument("target", nargs="?", choices=["claims", "tangent-law"], default="claims")
    p.add_argument("--claims", type=_str_list, default=None, help="comma list of claim-id prefixes")
    p.add_argument("--samples", type=int, default=None, help="Monte Carlo draws")
    p.add_argument("--oracle", type=_str_list, default=None)
    p.add_argument("--dim", type=int, default=None)

    p = parser.subcommands["trajectory"] = sub.add_parser("trajectory", help="objective and iterates per step, forward vs true")
    _add_common(p)
    p.add_argument("--problem", default="linear", help=" | ".join(TRAJECTORY_PROBLEMS))
    p.add_argument("--dim", type=int, default=None)
    _add_optimizer_flags(p, multi=True)
    p.add_argument("--budget", type=int, default=100, help="number of steps")
    p.add_argument("--starts", type=int, default=1)
    p.add_argument("--svg", default=None)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]):
    """Parse once to find ``--config``, then reparse with its values as defaults."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        values = read_config(args.config)
    except OSError as e:
        raise UsageError("--config", str(e)) from None
    sub = parser.subcommands[args.command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        action = known.get(key)
        if action is None or key in ("config", "help"):
            raise UsageError("--config", f"unknown key {key!r} for {args.command}")
        if action.const is True or action.const is False:
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            try:
                defaults[key] = action.type(raw)
            except (ValueError, argparse.ArgumentTypeError) as e:
                raise UsageError("--config", f"{key}: {e}") from None
        else:
            defaults[key] = raw
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
        return COMMANDS[args.command](args)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else 2
    except UsageError as e:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"error: {e}\n")
        return 2


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
