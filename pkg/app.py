"""
Dephasing Simulator - Command Line Application
Sub-commands registered from commands/, library errors mapped to exit codes
"""

import argparse
import logging
import sys

from config import LOG_LEVEL
from services.errors import ConfigurationError, DephasingError, SizeCapError, ToleranceFailure

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_TOLERANCE = 2
EXIT_SIZE_CAP = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='dephase',
        description='Decoherence of a system dephased by a bosonic reservoir',
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    # Import and register commands
    from commands import compare, preset, simulate, sweep, times

    for command in (simulate, preset, sweep, times, compare):
        command.register(subparsers)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=getattr(logging, LOG_LEVEL, logging.INFO),
        format='%(asctime)s - %(levelname)s - %(message)s',
    )
    args = build_parser().parse_args(argv)

    try:
        return args.handler(args)
    except ToleranceFailure as e:
        if e.table:
            print(e.table)
        print(f"❌ {e}")
        for failure in e.failures:
            print(f"  - {failure}")
        return EXIT_TOLERANCE
    except SizeCapError as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return EXIT_SIZE_CAP
    except ConfigurationError as e:
        print("❌ Invalid configuration:", file=sys.stderr)
        for problem in e.problems:
            print(f"  - {problem}", file=sys.stderr)
        return EXIT_VALIDATION
    except DephasingError as e:
        print(f"❌ Error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == '__main__':
    sys.exit(main())
