"""
Compare Command
Tabulate analytic, fitted and caption values of saved reports
"""

from services.errors import ConfigurationError
from services.report_service import check_reports, load_report


def register(subparsers):
    parser = subparsers.add_parser('compare', help='Compare saved run reports')
    parser.add_argument('reports', nargs='+', help='<name>.report.json files')
    parser.add_argument('--tolerance', type=float, default=None,
                        help='Tolerance in percent, overriding declared tolerances')
    parser.add_argument('--csv', default=None, help='Also write the table as CSV')
    parser.set_defaults(handler=handle)


def handle(args) -> int:
    tolerance = None
    if args.tolerance is not None:
        if args.tolerance <= 0:
            raise ConfigurationError([f"--tolerance must be > 0, got {args.tolerance}"])
        tolerance = args.tolerance / 100.0
    reports = [load_report(path) for path in args.reports]
    table = check_reports(reports, tolerance)
    if args.csv:
        table.to_csv(args.csv, index=False, float_format='%.17g')
    print(table.to_string(index=False))
    print(f"✅ {len(reports)} report(s) within tolerance")
    return 0
