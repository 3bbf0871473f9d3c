"""Command-line interface: ``retrial-osa {solve,simulate,sweep,figure,validate}``.

Exit status 0 on success, 1 on a computational failure, 2 on a usage or
configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import experiments as ex
from .estimator import RetrialSpectrumModel
from .generator import closed_form_blocks, validate_generator
from .metrics import erlang_loss_distribution, level_marginal
from .model import ModelParams, ParameterError
from .simulation import SimConfig

COMPUTE_ERRORS = (RuntimeError, ArithmeticError, np.linalg.LinAlgError)


def _add_model_flags(p: argparse.ArgumentParser, required=True):
    d = ex.BASELINE
    for flag, dest, typ in [("--M", "M", int), ("--N", "N", int), ("--L", "L", int),
                            ("--lambda-p", "lambda_p", float), ("--lambda-s", "lambda_s", float),
                            ("--mu-p", "mu_p", float), ("--mu-s", "mu_s", float),
                            ("--theta", "theta", float)]:
        kw = dict(required=True) if required else dict(default=d[dest])
        p.add_argument(flag, dest=dest, type=typ, **kw)
    p.add_argument("--solver", choices=("direct", "ldqbd", "both"), default="direct")


def _add_sim_flags(p: argparse.ArgumentParser):
    p.add_argument("--horizon", type=float, default=1e4)
    p.add_argument("--warmup", type=float, default=None, help="default: 10%% of the horizon")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="retrial-osa",
        description="Overlay spectrum access with a finite SU retrial orbit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="stationary solve and metrics at one point")
    _add_model_flags(p)
    p.add_argument("--dump-q", metavar="PATH", help="write the generator as 'row col rate' text")

    p = sub.add_parser("simulate", help="analytic metrics plus simulation estimates")
    _add_model_flags(p)
    _add_sim_flags(p)

    p = sub.add_parser("sweep", help="run a sweep described by a config file")
    p.add_argument("config")
    p.add_argument("--output", "-o", help="CSV path (overrides 'output' in the config)")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("figure", help="regenerate the data behind a figure preset")
    p.add_argument("--id", dest="fig_id", type=int, choices=(2, 3, 4), required=True)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--solver", choices=("direct", "ldqbd", "both"), default="direct")
    p.add_argument("--simulate", action="store_true", help="add simulation columns")
    _add_sim_flags(p)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("validate", help="generator and solver self-checks")
    _add_model_flags(p, required=False)
    return parser


def _params(parser, args) -> ModelParams:
    try:
        return ModelParams(**{n: getattr(args, n) for n in ModelParams.field_names()})
    except ParameterError as exc:
        parser.error(str(exc))


def _sim_settings(parser, args) -> ex.SimSettings:
    settings = ex.SimSettings(args.horizon, args.warmup, args.reps, args.seed)
    try:
        SimConfig(ModelParams(**ex.BASELINE), settings.horizon, settings.warmup,
                  settings.reps, settings.seed)
    except ValueError as exc:
        parser.error(str(exc))
    return settings


def cmd_solve(parser, args, out) -> int:
    params = _params(parser, args)
    row = ex.evaluate_point(params.as_dict(), args.solver)
    if args.dump_q:
        RetrialSpectrumModel(**params.as_dict()).fit().generator_.dump(args.dump_q)
    cols = ex.SOLVE_COLUMNS + (("solver_disagreement",) if args.solver == "both" else ())
    out.write(ex.to_csv([row], cols))
    return 0


def cmd_simulate(parser, args, out) -> int:
    params = _params(parser, args)
    settings = _sim_settings(parser, args)
    row = ex.evaluate_point(params.as_dict(), args.solver, settings)
    cols = ex.SOLVE_COLUMNS + (("solver_disagreement",) if args.solver == "both" else ())
    out.write(ex.to_csv([row], cols + ex.SIM_COLUMNS))
    return 0


def cmd_sweep(parser, args, out) -> int:
    try:
        with open(args.config) as fh:
            spec = ex.parse_sweep_config(fh.read())
    except OSError as exc:
        parser.error(f"cannot read config: {exc}")
    except ex.ConfigError as exc:
        parser.error(f"{args.config}: {exc}")
    text = ex.sweep_csv(spec, args.workers)
    target = args.output or spec.output
    if target:
        with open(target, "w", newline="\n") as fh:
            fh.write(text)
    else:
        out.write(text)
    return 0


def cmd_figure(parser, args, out) -> int:
    sim = _sim_settings(parser, args) if args.simulate else None
    os.makedirs(args.out_dir, exist_ok=True)
    for name, spec in ex.figure_presets(args.fig_id, args.solver, sim).items():
        path = os.path.join(args.out_dir, name)
        with open(path, "w", newline="\n") as fh:
            fh.write(ex.sweep_csv(spec, args.workers))
        out.write(f"{path}\n")
    return 0


def self_checks(params: ModelParams) -> list[tuple[str, bool, str]]:
    """Named pass/fail checks used by the ``validate`` subcommand."""
    results = []

    hand = RetrialSpectrumModel(M=1, N=1, L=0, lambda_p=0.1, lambda_s=1.5, mu_p=0.2, mu_s=0.4,
                                theta=2.0, solver="both").fit()
    err = max(np.max(np.abs(pi.probabilities - [1 / 6, 1 / 2, 1 / 3]))
              for pi in (hand.stationary_, hand.stationary_ldqbd_))
    results.append(("hand-solved 3-state chain", err < 1e-12, f"max error {err:.3g}"))

    model = RetrialSpectrumModel(**params.as_dict(), solver="both").fit()
    report = validate_generator(model.generator_)
    results.append(("generator conservative and nonnegative", report.ok,
                    f"max |row sum| {report.max_abs_row_sum:.3g}, "
                    f"{len(report.negative_entries)} negative entries"))
    results.append(("generator irreducible", report.irreducible, "; ".join(report.warnings) or "ok"))

    literal = closed_form_blocks(params)
    same = all(np.array_equal(a, b) for a, b in zip(model.blocks_.A, literal.A)) and all(
        np.array_equal(a, b) for a, b in zip(model.blocks_.C[1:] + model.blocks_.D[1:],
                                             literal.C[1:] + literal.D[1:]))
    results.append(("closed-form blocks match rule-based blocks", same, ""))

    dis = model.solver_disagreement_
    results.append(("direct and LDQBD solvers agree", dis < 1e-10, f"max difference {dis:.3g}"))
    results.append(("balance residual", model.residual_ < 1e-10, f"{model.residual_:.3g}"))

    marg = level_marginal(model.stationary_, model.state_space_)
    erl = erlang_loss_distribution(params.M, params.lambda_p / params.mu_p)
    gap = float(np.max(np.abs(marg - erl)))
    results.append(("PU-level marginal is Erlang loss", gap < 1e-10, f"max difference {gap:.3g}"))
    return results


def cmd_validate(parser, args, out) -> int:
    params = _params(parser, args)
    results = self_checks(params)
    for name, ok, detail in results:
        out.write(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "") + "\n")
    return 0 if all(ok for _, ok, _ in results) else 1


COMMANDS = {"solve": cmd_solve, "simulate": cmd_simulate, "sweep": cmd_sweep,
            "figure": cmd_figure, "validate": cmd_validate}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](parser, args, out)
    except COMPUTE_ERRORS as exc:
        print(f"retrial-osa: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
