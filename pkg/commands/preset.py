"""
Preset Command
Reproduce the curves of a built-in figure preset
"""

from config import OUTPUT_DIR
from services.presets import PRESETS
from services.report_service import check_reports
from services.scenario_service import run_preset


def register(subparsers):
    parser = subparsers.add_parser('preset', help='Run a figure-reproduction preset')
    parser.add_argument('name', choices=sorted(PRESETS))
    parser.add_argument('--out', default=OUTPUT_DIR, help='Output directory')
    parser.set_defaults(handler=handle)


def handle(args) -> int:
    print(f"🚀 Running preset {args.name}...")
    reports = run_preset(args.name, args.out)
    for report in reports:
        print(f"   📄 {report.csv}")
    table = check_reports(reports)
    print(table.to_string(index=False))
    print(f"✅ {len(reports)} curves written to {args.out}")
    return 0
