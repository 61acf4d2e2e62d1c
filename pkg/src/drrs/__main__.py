"""Command line entry point: experiments, suites, verification and testbeds"""

import argparse
import asyncio
import contextlib
import logging
import sys
from typing import List, Optional

import drrs

logger = logging.getLogger("drrs")

options = argparse.ArgumentParser(add_help=False)
options.add_argument(
    "--seed",
    type=int,
    default=None,
    help="master seed, overrides the config [default: config value]",
)
options.add_argument(
    "--reps",
    type=int,
    default=None,
    help="macro-replications per budget, overrides the config [default: config value]",
)
options.add_argument(
    "--workers",
    type=int,
    default=None,
    help="worker processes [default: config value]",
)
options.add_argument(
    "--out",
    metavar="DIRECTORY",
    default=None,
    help="output directory [default: config value]",
)
options.add_argument(
    "--plots",
    action="store_true",
    help="also write SVG figures (needs matplotlib)",
)
verbosity = options.add_mutually_exclusive_group()
verbosity.add_argument(
    "-q",
    "--quiet",
    action="store_true",
    help="set logging level to 'WARNING' instead of 'INFO'",
)
verbosity.add_argument(
    "-v",
    "--verbose",
    action="store_true",
    help="set logging level to 'DEBUG' instead of 'INFO'",
)

parser = argparse.ArgumentParser(
    prog="drrs",
    usage="%(prog)s command [options] config",
    description="Additive distributionally robust ranking and selection experiments.",
)
commands = parser.add_subparsers(dest="command", required=True, metavar="command")

run = commands.add_parser("run", parents=[options], help="run every configured procedure over the budget grid")
run.add_argument("config", help="experiment config (JSON)")

suite = commands.add_parser("suite", parents=[options], help="run one of the experiment suites")
suite.add_argument("name", choices=tuple(drrs.SUITES), help="suite to run")
suite.add_argument("config", help="experiment config (JSON)")

verify = commands.add_parser("verify", parents=[options], help="check the probability bounds of AA")
verify.add_argument("check", choices=("bounds", "lemma1"), help="check to run")
verify.add_argument("config", help="experiment config (JSON)")

testbed = commands.add_parser("testbed", parents=[options], help="estimate testbed ground truth")
testbed.add_argument("kind", choices=("inventory", "queue"), help="testbed")
testbed.add_argument("config", help="experiment config (JSON)")


async def dispatch(args: argparse.Namespace) -> None:
    config = drrs.load_config(args.config).with_overrides(
        seed=args.seed,
        replications=args.reps,
        workers=args.workers,
        directory=args.out,
        plots=True if args.plots else None,
    )
    if args.command == "run":
        await drrs.run_experiment(config)
    elif args.command == "suite":
        await drrs.SUITES[args.name](config)
    elif args.command == "verify" and args.check == "bounds":
        await drrs.verify_bounds(config)
    elif args.command == "verify":
        drrs.verify_lemma1(config)
    else:
        drrs.run_testbed(config, args.kind)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Exit codes: 0 on success, 1 on config and other errors, 2 when a
    verification check fails.
    """
    args = parser.parse_args(argv)
    if args.quiet:
        level = logging.WARNING
    elif args.verbose:
        level = logging.DEBUG
    else:
        level = logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s [%(name)s] %(message)s",
        datefmt="[%H:%M:%S]:",
    )
    if not args.quiet:
        print(f"drrs v{drrs.__version__}")
    try:
        with contextlib.suppress(KeyboardInterrupt):
            asyncio.run(dispatch(args))
    except drrs.ConfigError as exc:
        for problem in exc.errors:
            print(f"config error: {problem}", file=sys.stderr)
        return 1
    except drrs.VerificationFailure as exc:
        print(f"verification failed: {', '.join(exc.failed)}", file=sys.stderr)
        return 2
    except drrs.DRRSException as exc:
        logger.error("%s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
