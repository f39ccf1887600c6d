"""Command-line entry point.

Subcommands: simulate, train, eval, plan, bound, experiment,
check-assumptions.  Exit codes: 0 success, 1 usage error, 2 runtime
error; failures are printed to stderr with an "error:" prefix.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import harness, theory, trainer
from .csvio import VERSION_LINE, format_value
from .dgp import (
    DgpSpec,
    check_stationarity,
    embed,
    read_pairs_csv,
    simulate,
    write_pairs_csv,
    write_trajectory_csv,
)
from .errors import (
    DivergenceError,
    InsufficientDataError,
    InvalidSpecError,
    ShapeError,
    TooSmallNError,
)
from .harness import ExperimentConfig, parse_error_token
from .losses import LossSpec, loss_spec_from_string
from .mlp import NetworkArchitecture, NetworkParams
from .theory import TheoryInputs
from .trainer import TrainConfig

PLAN_HEADER = ["n", "n_alpha", "L", "N", "S", "B", "bound_thm1", "bound_thm2"]


class _Parser(argparse.ArgumentParser):
    """Argument parser reporting usage problems with exit code 1."""

    def error(self, message):
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_theory_flags(parser):
    group = parser.add_argument_group("theory inputs")
    group.add_argument("--s", type=float, default=2.5, help="smoothness of the target")
    group.add_argument("--d", type=int, default=1, help="input dimension")
    group.add_argument("--r", type=_float_or_inf, default=math.inf,
                       help="moment order of the output; 'inf' allowed")
    group.add_argument("--kl", type=float, default=1.0, help="loss Lipschitz constant")
    group.add_argument("--c", type=float, default=8.0, help="mixing decay rate")
    group.add_argument("--gamma", type=float, default=3.0, help="mixing decay exponent")
    group.add_argument("--alpha-bar", type=float, default=1.0,
                       help="mixing coefficient scale")
    group.add_argument("--mu", type=float, default=0.0,
                       help="factorial power of the dependence sums")
    group.add_argument("--dep-l1", type=float, default=1.0,
                       help="scale of the weighted dependence sums")
    group.add_argument("--dep-l2", type=float, default=1.0,
                       help="geometric growth of the dependence sums")
    group.add_argument("--moment-bound", type=float, default=1.0,
                       help="bound on the r-th output moment")
    group.add_argument("--nu", type=float, default=3.1,
                       help="log exponent of the mixing bound (must exceed 3)")
    group.add_argument("--l0", type=float, default=1.0, help="depth schedule scale")
    group.add_argument("--n0", type=float, default=1.0, help="width schedule scale")
    group.add_argument("--s0", type=float, default=1.0, help="sparsity schedule scale")
    group.add_argument("--b0", type=float, default=1.0, help="magnitude schedule scale")
    group.add_argument("--psi", choices=theory.PSI_KINDS, default="theta",
                       help="weak-dependence combinator")
    group.add_argument("--f", type=float, default=None,
                       help="output cap for the mixing schedule")


def _float_or_inf(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    return float(text)


def _theory_inputs(args) -> TheoryInputs:
    return TheoryInputs(
        smoothness=args.s,
        input_dim=args.d,
        moment_order=args.r,
        loss_lipschitz=args.kl,
        mixing_scale=args.alpha_bar,
        mixing_rate=args.c,
        mixing_exponent=args.gamma,
        dep_sum_scale=args.dep_l1,
        dep_sum_growth=args.dep_l2,
        dep_factorial_power=args.mu,
        moment_bound=args.moment_bound,
        log_exponent=args.nu,
        depth_scale=args.l0,
        width_scale=args.n0,
        sparsity_scale=args.s0,
        magnitude_scale=args.b0,
        psi_kind=args.psi,
        output_bound=args.f,
    )


def _dgp_spec(args, seed=None) -> DgpSpec:
    law, df = parse_error_token(args.error, getattr(args, "df", None))
    order = {"dgp1": 3, "dgp2": 2}[args.dgp]
    return DgpSpec(order=order, function=args.dgp, error=law, df=df,
                   burnin=args.burnin, seed=seed if seed is not None else args.seed)


def _parse_hidden(text: str) -> tuple[int, ...]:
    if not text.strip():
        return ()
    return tuple(int(tok) for tok in text.split(","))


def build_parser() -> _Parser:
    parser = _Parser(prog="robust-wdep-dnn",
                     description="Robust network regression lab for dependent data")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="print progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate an autoregressive trajectory")
    sim.add_argument("--dgp", choices=("dgp1", "dgp2"), required=True,
                     help="regression function")
    sim.add_argument("--error", default="gaussian",
                     help="innovation law: gauss, t2, t, cauchy, none")
    sim.add_argument("--df", type=float, default=None,
                     help="degrees of freedom when --error t")
    sim.add_argument("--n", type=int, required=True, help="trajectory length")
    sim.add_argument("--seed", type=int, default=0, help="rng seed")
    sim.add_argument("--burnin", type=int, default=500, help="discarded prefix length")
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.add_argument("--pairs", action="store_true",
                     help="write embedded supervised pairs instead of the raw series")

    tr = sub.add_parser("train", help="fit a network on supervised pairs")
    tr.add_argument("--data", required=True, help="pairs CSV with columns x1..xp,y")
    tr.add_argument("--loss", choices=("l1", "huber", "l2"), default="l1",
                    help="training loss")
    tr.add_argument("--delta", type=float, default=None, help="huber parameter")
    tr.add_argument("--hidden", type=_parse_hidden, default=(100, 100),
                    help="comma-separated hidden widths, e.g. 100,100")
    tr.add_argument("--lr", type=float, default=1e-3, help="learning rate")
    tr.add_argument("--batch", type=int, default=32, help="minibatch size")
    tr.add_argument("--patience", type=int, default=30,
                    help="epochs without improvement before stopping")
    tr.add_argument("--max-epochs", type=int, default=1000, help="epoch cap")
    tr.add_argument("--seed", type=int, default=0, help="rng seed")
    tr.add_argument("--out", required=True, help="output params JSON path")
    tr.add_argument("--history", default=None, help="optional risk history CSV path")

    ev = sub.add_parser("eval", help="evaluate a trained network")
    ev.add_argument("--params", required=True, help="params JSON path")
    ev.add_argument("--data", required=True, help="test pairs CSV")
    ev.add_argument("--delta", type=float, default=None,
                    help="huber parameter of the excess-risk metric")
    ev.add_argument("--dgp", choices=("dgp1", "dgp2"), default=None,
                    help="also compute excess risks on a fresh trajectory")
    ev.add_argument("--error", default="gaussian", help="innovation law for --dgp")
    ev.add_argument("--df", type=float, default=None, help="degrees of freedom for t")
    ev.add_argument("--burnin", type=int, default=500, help="burn-in for --dgp")
    ev.add_argument("--m", type=int, default=10_000,
                    help="evaluation trajectory length for --dgp")
    ev.add_argument("--seed", type=int, default=0, help="rng seed for --dgp")
    ev.add_argument("--out", default=None, help="optional metrics CSV path")

    plan = sub.add_parser("plan", help="architecture schedule at one sample size")
    plan.add_argument("--theorem", type=int, choices=(1, 2), default=1,
                      help="1: strong mixing, 2: weak dependence")
    plan.add_argument("--n", type=int, required=True, help="sample size")
    plan.add_argument("--out", default=None, help="output CSV path (default stdout)")
    _add_theory_flags(plan)

    bnd = sub.add_parser("bound", help="bound curves over a sample-size grid")
    bnd.add_argument("--theorem", type=int, choices=(1, 2), default=1,
                     help="1: strong mixing, 2: weak dependence")
    bnd.add_argument("--n-min", type=int, default=1000, help="grid start")
    bnd.add_argument("--n-max", type=int, default=100_000_000, help="grid end")
    bnd.add_argument("--points", type=int, default=11, help="grid size (log-spaced)")
    bnd.add_argument("--out", default=None, help="output CSV path (default stdout)")
    _add_theory_flags(bnd)

    chk = sub.add_parser("check-assumptions",
                         help="arithmetic feasibility report for theory inputs")
    _add_theory_flags(chk)

    exp = sub.add_parser("experiment", help="Monte Carlo replication sweeps")
    exp_sub = exp.add_subparsers(dest="action", required=True)
    run = exp_sub.add_parser("run", help="run a sweep from a config file")
    run.add_argument("--config", required=True, help="experiment config (JSON or TOML)")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--threads", type=int, default=os.cpu_count(),
                     help="worker processes")

    return parser


def _cmd_simulate(args) -> int:
    spec = _dgp_spec(args)
    traj = simulate(spec, args.n)
    if args.pairs:
        x, y = embed(traj, spec.order)
        write_pairs_csv(x, y, args.out)
    else:
        write_trajectory_csv(traj.values, args.out)
    if args.verbose:
        check = check_stationarity(spec)
        print(f"stationarity margin: {check.margin:.4f}", file=sys.stderr)
    return 0


def _cmd_train(args) -> int:
    x, y = read_pairs_csv(args.data)
    loss_spec = loss_spec_from_string(args.loss, args.delta)
    arch = NetworkArchitecture.from_hidden(x.shape[1], args.hidden)
    cfg = TrainConfig(learning_rate=args.lr, batch_size=args.batch,
                      patience=args.patience, max_epochs=args.max_epochs,
                      seed=args.seed)
    report = trainer.fit(x, y, arch, loss_spec, cfg)
    report.params.save(args.out)
    if args.history:
        with open(args.history, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(VERSION_LINE + "\n")
            fh.write("epoch,risk\n")
            for epoch, risk in enumerate(report.risk_history, start=1):
                fh.write(f"{epoch},{format_value(risk)}\n")
    if args.verbose:
        print(f"best risk {report.best_risk!r} after {report.epochs_run} epochs",
              file=sys.stderr)
    return 0


def _cmd_eval(args) -> int:
    params = NetworkParams.load(args.params)
    x, y = read_pairs_csv(args.data)
    metrics = [("mape", harness.mape(params, x, y)),
               ("rmspe", harness.rmspe(params, x, y))]
    if args.dgp is not None:
        spec = _dgp_spec(args)
        delta = args.delta if args.delta is not None else 1.345
        for family in ("l1", "huber", "l2"):
            metric_spec = LossSpec(family, delta=delta) if family == "huber" \
                else LossSpec(family)
            rng = np.random.default_rng(np.random.SeedSequence(args.seed))
            value = harness.excess_risk_empirical(params, spec, metric_spec,
                                                  args.m, rng)
            metrics.append((f"excess_{family}", value))
    for name, value in metrics:
        print(f"{name}={format_value(value)}")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(VERSION_LINE + "\n")
            fh.write(",".join(name for name, _ in metrics) + "\n")
            fh.write(",".join(format_value(v) for _, v in metrics) + "\n")
    return 0


def _plan_rows(inputs: TheoryInputs, theorem: int, grid) -> list[list]:
    rows = []
    for n in grid:
        if theorem == 1:
            sched = theory.schedule_thm1(inputs, n)
        else:
            sched = theory.schedule_thm2(inputs, n)
        m = theory.effective_sample_size(n, inputs.mixing_rate, inputs.mixing_exponent)
        rows.append([
            n, m, sched.depth, sched.width, sched.sparsity, sched.magnitude,
            theory.bound_thm1(inputs, n), theory.bound_thm2(inputs, n),
        ])
    return rows


def _emit_csv(header, rows, out_path) -> None:
    lines = [VERSION_LINE, ",".join(header)]
    lines += [",".join(format_value(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _cmd_plan(args) -> int:
    rows = _plan_rows(_theory_inputs(args), args.theorem, [args.n])
    _emit_csv(PLAN_HEADER, rows, args.out)
    return 0


def _cmd_bound(args) -> int:
    if args.n_min < 3 or args.n_max < args.n_min or args.points < 2:
        raise InvalidSpecError("need 3 <= n-min <= n-max and at least 2 points")
    grid = np.unique(np.geomspace(args.n_min, args.n_max, args.points).astype(int))
    rows = _plan_rows(_theory_inputs(args), args.theorem, [int(n) for n in grid])
    _emit_csv(PLAN_HEADER, rows, args.out)
    return 0


def _cmd_check_assumptions(args) -> int:
    report = theory.check_assumptions(_theory_inputs(args))
    for check in report.checks:
        status = "ok" if check.ok else "VIOLATED"
        print(f"{status} {check.name}: {check.detail}")
    print(f"all assumptions hold: {report.all_ok}")
    return 0


def _cmd_experiment_run(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    os.makedirs(args.out, exist_ok=True)
    records = harness.run_experiment(cfg, threads=args.threads,
                                     progress=args.verbose)
    harness.write_records_csv(records, os.path.join(args.out, "records.csv"))
    harness.write_summary_csv(harness.summarize(records),
                              os.path.join(args.out, "summary.csv"))
    harness.write_boxplot_json(records, os.path.join(args.out, "boxplot.json"))
    harness.write_timings_csv(records, os.path.join(args.out, "timings.csv"))
    diverged = sum(rec.diverged for rec in records)
    print(f"wrote {len(records)} records to {args.out} ({diverged} diverged)")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "plan": _cmd_plan,
    "bound": _cmd_bound,
    "check-assumptions": _cmd_check_assumptions,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "experiment":
            return _cmd_experiment_run(args)
        return _COMMANDS[args.command](args)
    except (InvalidSpecError, InsufficientDataError, TooSmallNError, ShapeError,
            DivergenceError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
