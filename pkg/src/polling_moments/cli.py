"""Command-line interface.

Exit codes: 0 success, 2 config/validation error, 3 numeric non-convergence,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .analysis import (
    NonConvergenceError,
    solve_first_order,
    solve_second_order,
    write_first_csv,
    write_second_csv,
)
from .config import ConfigError, load_config, parse_policy
from .experiment import ExperimentSpec, compare_policies, run_experiment, write_compare_csv
from .fluid import FluidDivergenceError, fluid_pe, write_pe_csv
from .model import BEP, ValidationError, validate
from .pgf import evaluate_pgf
from .sim import estimate_moments, initial_state, run_replications

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class UsageError(Exception):
    """Invalid argument combination; reported with exit code 2."""


def _csv_list(text: str, cast=float) -> list:
    text = text.strip()
    if not text:
        return []
    try:
        return [cast(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list, got {text!r}") from None


def _int_list(text):
    return _csv_list(text, int)


def _scale_list(text):
    return [int(v) if float(v).is_integer() else float(v) for v in _csv_list(text, float)]


def _open_out(out, name):
    """File handle for ``out/name``, or stdout when no directory was given."""
    if out is None:
        return None
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    return open(d / name, "w", newline="")


def _emit(out, name, writer):
    fh = _open_out(out, name)
    if fh is None:
        writer(sys.stdout)
        return
    with fh:
        writer(fh)


def cmd_validate(args) -> int:
    model, policy = load_config(args.config)
    report = validate(model, policy)
    if report:
        for v in report:
            print(f"{v.code}: {v.message}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"ok: K={model.K} I={model.I} rho={model.rho:.15g} s={model.s_total:.15g} policy={policy.kind}")
    return EXIT_OK


def cmd_solve(args) -> int:
    model, policy = load_config(args.config)
    if args.order not in (1, 2):
        raise UsageError(f"order {args.order} is not supported: the buffer-occupancy solvers are "
                         "limited to second order (orders 1 and 2)")
    if not isinstance(policy, BEP):
        raise UsageError(f"solve needs a bep policy, got {policy.kind}; "
                         "use `fluid pe` for bgp/bsp first-order values")
    first = solve_first_order(model, policy.r)
    _emit(args.out, "first_order.csv", lambda fh: write_first_csv(first, fh))
    if args.order == 2:
        second = solve_second_order(model, policy.r, first)
        _emit(args.out, "second_order.csv", lambda fh: write_second_csv(second, fh))
    return EXIT_OK


def cmd_pgf_eval(args) -> int:
    model, policy = load_config(args.config)
    if not isinstance(policy, BEP):
        raise UsageError("pgf eval needs a bep policy")
    z = _csv_list(args.z)
    if len(z) != model.K:
        raise UsageError(f"--z needs {model.K} values, got {len(z)}")
    if not 1 <= args.stage <= model.I:
        raise UsageError(f"--stage must lie in 1..{model.I}")
    try:
        value = evaluate_pgf(model, policy.r, args.stage - 1, z)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(f"{value:.15g}")
    return EXIT_OK


def cmd_fluid_pe(args) -> int:
    model, policy = load_config(args.config)
    pe = fluid_pe(model.scaled(args.scale), policy.scaled(args.scale))
    _emit(args.out, "fluid_pe.csv", lambda fh: write_pe_csv(model, pe, fh))
    return EXIT_OK


def cmd_sim_run(args) -> int:
    model, policy = load_config(args.config)
    n = args.scale
    scaled, pol = model.scaled(n), policy.scaled(n)
    start = initial_state(model, policy, n) if args.init == "fluid" else None
    sets = run_replications(scaled, pol, args.reps, args.cycles, args.warmup, args.seed,
                            initial=start, method=args.method)

    def samples(fh):
        fh.write("replication,cycle,stage,queue,q_at_poll,busy_time\n")
        for rep, s in enumerate(sets):
            for c in range(s.observations):
                for i in range(model.I):
                    for k in range(model.K):
                        fh.write(f"{rep},{s.warmup + c + 1},{i + 1},{k + 1},{s.queue[c, i, k]},"
                                 f"{s.busy[c, i]:.15g}\n")

    def summary(fh):
        fh.write("stage,queue,p,estimate,ci_halfwidth\n")
        for p in args.orders:
            est = estimate_moments(sets, p)
            for i in range(model.I):
                for k in range(model.K):
                    e = est.queue[i][k]
                    fh.write(f"{i + 1},{k + 1},{p},{e.point:.15g},{e.ci_halfwidth:.15g}\n")
                e = est.busy[i]
                fh.write(f"{i + 1},busy,{p},{e.point:.15g},{e.ci_halfwidth:.15g}\n")

    if args.out is not None:
        _emit(args.out, "samples.csv", samples)
    _emit(args.out, "summary.csv", summary)
    return EXIT_OK


def cmd_experiment(args) -> int:
    spec = ExperimentSpec(config=args.config, scales=tuple(args.scales), orders=tuple(args.orders),
                          cycles=args.cycles, warmup=args.warmup, reps=args.reps, seed=args.seed,
                          out=args.out, method=args.method, workers=args.workers)
    table = run_experiment(spec)
    if args.out is None:
        table.to_csv(sys.stdout)
    else:
        print(f"wrote {len(table.rows)} rows to {Path(args.out) / 'comparison.csv'}")
    return EXIT_OK


def _policy_arg(text: str):
    kind, _, vals = text.partition(":")
    key = "y" if kind.strip().lower() == "bsp" else "r"
    return parse_policy({"kind": kind.strip(), key: _csv_list(vals, float if key == "r" else int)})


def cmd_compare(args) -> int:
    model, policy = load_config(args.config)
    policies = [_policy_arg(t) for t in args.policy] if args.policy else [policy]
    blocks = compare_policies(model, policies, args.scale)
    _emit(args.out, "compare.csv", lambda fh: write_compare_csv(model, blocks, fh))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polling-moments",
                                     description="Moments of polling-system queue lengths and busy times.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_, parent=sub):
        p = parent.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="model/policy YAML or JSON file")
        p.set_defaults(func=func)
        return p

    def sim_flags(p, scales):
        p.add_argument("--seed", type=int, default=12345)
        p.add_argument("--cycles", type=int, default=2000)
        p.add_argument("--warmup", type=int, default=None,
                       help="discarded cycles (default 0 from the fluid start, else 10%%)")
        p.add_argument("--reps", type=int, default=1)
        p.add_argument("--orders", type=_int_list, default=[1, 2, 3])
        p.add_argument("--method", choices=("stage", "event"), default="stage")
        p.add_argument("--out", default=None, help="output directory (default: stdout)")
        if scales:
            p.add_argument("--scales", type=_scale_list, default=[1, 10])
            p.add_argument("--workers", type=int, default=1)
        else:
            p.add_argument("--scale", type=float, default=1.0)

    add("validate", cmd_validate, "check stability and policy admissibility")

    p = add("solve", cmd_solve, "exact BEP moments at polling epochs")
    p.add_argument("--order", type=int, default=1, help="1 (means) or 2 (adds second-order matrices)")
    p.add_argument("--out", default=None)

    pgf = sub.add_parser("pgf", help="joint PGF at polling epochs").add_subparsers(dest="pgf_cmd", required=True)
    p = add("eval", cmd_pgf_eval, "evaluate F_i(z)", pgf)
    p.add_argument("--stage", type=int, default=1, help="1-based stage index")
    p.add_argument("--z", required=True, help="comma-separated point in [0,1]^K")

    fl = sub.add_parser("fluid", help="fluid periodic equilibrium").add_subparsers(dest="fluid_cmd", required=True)
    p = add("pe", cmd_fluid_pe, "PE trajectory and summary", fl)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--out", default=None)

    sm = sub.add_parser("sim", help="simulation").add_subparsers(dest="sim_cmd", required=True)
    p = add("run", cmd_sim_run, "simulate and estimate moments", sm)
    sim_flags(p, scales=False)
    p.add_argument("--init", choices=("fluid", "empty"), default="fluid")

    p = add("experiment", cmd_experiment, "exact vs asymptotic vs simulated comparison")
    sim_flags(p, scales=True)

    p = add("compare", cmd_compare, "fluid PE side by side for several policies")
    p.add_argument("--policy", action="append", default=None,
                   help="kind:values, e.g. bep:1,0.6,1,1,0.4 or bsp:0,6,0,0,4 (repeatable)")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--out", default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValidationError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonConvergenceError, FluidDivergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
