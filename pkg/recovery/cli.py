"""
Command-line entry point: `python -m recovery.cli <subcommand> [options]`.

Runs the generate/solve/experiment/check management commands and returns
their exit status: 0 on success, 1 on usage or configuration errors, 2 on
numerical failures.
"""

import os
import sys
from typing import List, Optional

USAGE = """usage: python -m recovery.cli <subcommand> [options]

subcommands:
  generate                          write a sensing dataset directory
  solve --dataset DIR               recover factors, write u.lrmx, v.lrmx, trace.csv
  experiment convergence|phase|staterr   run an experiment, write <kind>.csv
  check rip|gradcheck|lemmas|rho    run a diagnostic, print its JSON report

global options: --config PATH.json  --seed N  --out DIR  --threads N
run `python -m recovery.cli <subcommand> --help` for the options of a subcommand
"""

SUBCOMMANDS = ("generate", "solve", "experiment", "check")

# `check` is taken by the Django system-check command.
COMMAND_NAMES = {"check": "diagnose"}


def cli_main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        stream = sys.stdout if argv else sys.stderr
        stream.write(USAGE)
        return 0 if argv else 1
    if argv[0] not in SUBCOMMANDS:
        sys.stderr.write(f"unknown subcommand: {argv[0]}\n\n{USAGE}")
        return 1

    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "matsense.settings")
    import django
    from django.core.management import load_command_class
    from django.core.management.base import CommandError

    django.setup()
    name = argv[0]
    command = load_command_class("recovery", COMMAND_NAMES.get(name, name))
    parser = command.create_parser("recovery.cli", name)
    try:
        options = parser.parse_args(argv[1:])
        cmd_options = vars(options)
        args = cmd_options.pop("args", ())
        command.execute(*args, **cmd_options)
    except CommandError as exc:
        sys.stderr.write(f"{exc}\n")
        return exc.returncode
    except SystemExit as exc:
        # argparse exits after --help
        return 0 if exc.code in (0, None) else 1
    return 0


if __name__ == "__main__":
    sys.exit(cli_main())
