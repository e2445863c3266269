"""Command-line entry point: ``wflalloc <subcommand> ...``.

Exit status is 0 on success, 1 on a usage error and 2 on a numeric failure
(or a failed self-check).
"""
from __future__ import annotations

import argparse
import json
import sys

from .baselines import SCHEMES
from .core import InfeasibleDelayError
from .harness import (MONTECARLO_HEADER, SWEEP_HEADER, SWEEP_PARAMS, Scenario, assign,
                      generate_realization, load_scenario, montecarlo, rows_to_csv, run_sweep)
from .kernel import NumericalError

USAGE_ERROR = 1
NUMERIC_ERROR = 2
FLSIM_SCHEMES = tuple(SCHEMES) + ("async_oma",)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _scheme_list(name, valid):
    if name == "all":
        return tuple(valid)
    if name not in valid:
        raise UsageError(f"unknown scheme {name!r}; valid: all, {', '.join(valid)}")
    return (name,)


def _scenario(args, require=True):
    if args.config is None:
        if require:
            raise UsageError("missing required flag --config <path> (JSON scenario)")
        scenario = Scenario()
    else:
        try:
            scenario = load_scenario(args.config)
        except OSError as exc:
            raise UsageError(f"--config: cannot read {args.config}: {exc.strerror}") from None
        except (ValueError, TypeError) as exc:
            raise UsageError(f"--config: invalid scenario: {exc}") from None
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        if args.trials < 1:
            raise UsageError("--trials must be >= 1")
        changes["num_trials"] = args.trials
    return scenario.replace(**changes) if changes else scenario


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _cmd_allocate(args):
    scenario = _scenario(args)
    (scheme,) = _scheme_list(args.scheme, tuple(SCHEMES))
    users, gains = generate_realization(scenario, args.trial_index)
    assignment = assign(scenario, gains, args.trial_index)
    result = SCHEMES[scheme](assignment, gains, users, scenario.config)
    payload = result.to_dict()
    payload["assignment"] = [list(s) for s in assignment.subchannels]
    _emit(json.dumps(payload, indent=2) + "\n", args.out)


def _cmd_sweep(args):
    scenario = _scenario(args)
    schemes = _scheme_list(args.scheme, scenario.schemes)
    try:
        values = [float(v) for v in args.values.split(",")]
    except ValueError:
        raise UsageError("--values must be a comma-separated list of numbers") from None
    if args.param in ("users", "subchannels"):
        if any(v != int(v) for v in values):
            raise UsageError(f"--values for {args.param} must be integers")
        values = [int(v) for v in values]
    rows = run_sweep(scenario, args.param, sorted(values), schemes)
    _emit(rows_to_csv(rows, SWEEP_HEADER), args.out)


def _cmd_montecarlo(args):
    scenario = _scenario(args)
    schemes = _scheme_list(args.scheme, scenario.schemes)
    _emit(rows_to_csv(montecarlo(scenario, schemes), MONTECARLO_HEADER), args.out)


def _cmd_flsim(args):
    from . import flsim

    scenario = _scenario(args, require=False)
    (scheme,) = _scheme_list(args.scheme, FLSIM_SCHEMES)
    seed = scenario.seed
    setup = flsim.ToySetup(num_users=args.users, dimension=args.dimension,
                           num_subchannels=args.subchannels)
    trace = flsim.run_toy(setup, scheme, args.rounds, seed)
    _emit(trace.to_csv_text(), args.out)


def _cmd_selftest(args):
    from .selftest import run_selftest

    if not run_selftest(trials=args.trials or 50):
        return NUMERIC_ERROR
    return 0


def build_parser():
    parser = _Parser(prog="wflalloc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, trials=True, scheme_default=None):
        p.add_argument("--config", help="JSON scenario file")
        p.add_argument("--seed", type=int, help="override the scenario's master seed")
        if trials:
            p.add_argument("--trials", type=int, help="override the number of trials")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--scheme", default=scheme_default, required=scheme_default is None,
                       help="scheme name or 'all'")

    p = sub.add_parser("allocate", help="solve one realization with one scheme, print JSON")
    common(p, trials=False)
    p.add_argument("--trial-index", type=int, default=0, help="which realization to draw")
    p.set_defaults(func=_cmd_allocate)

    p = sub.add_parser("sweep", help="mean WGPTM per scheme over a parameter sweep (CSV)")
    common(p, scheme_default="all")
    p.add_argument("--param", choices=SWEEP_PARAMS, default="duration")
    p.add_argument("--values", default="5,10,15,20,25,30",
                   help="comma-separated values of the swept parameter")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("montecarlo", help="per-trial WGPTM of every scheme (CSV)")
    common(p, scheme_default="all")
    p.set_defaults(func=_cmd_montecarlo)

    p = sub.add_parser("flsim", help="toy federated training trace (CSV)")
    common(p, trials=False, scheme_default="joint")
    p.add_argument("--rounds", type=int, default=40)
    p.add_argument("--users", type=int, default=8)
    p.add_argument("--subchannels", type=int, default=4)
    p.add_argument("--dimension", type=int, default=10)
    p.set_defaults(func=_cmd_flsim)

    p = sub.add_parser("selftest", help="quick oracle and property checks")
    p.add_argument("--trials", type=int, help="trials for the Monte-Carlo checks (default 50)")
    p.set_defaults(func=_cmd_selftest)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand; valid: allocate, sweep, montecarlo, flsim, selftest")
        return args.func(args) or 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (NumericalError, InfeasibleDelayError, FloatingPointError, ZeroDivisionError) as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return NUMERIC_ERROR


if __name__ == "__main__":
    sys.exit(main())
