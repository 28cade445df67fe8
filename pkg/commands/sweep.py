"""
Sweep Command
Evaluate a scenario over its sweep grid in a worker pool
"""

from config import OUTPUT_DIR, resolve_jobs
from services.scenario_config import load_scenario
from services.scenario_service import run_sweep


def register(subparsers):
    parser = subparsers.add_parser('sweep', help='Run a scenario over its sweep grid')
    parser.add_argument('--config', required=True, help='Scenario JSON file with a sweep block')
    parser.add_argument('--jobs', type=int, default=None,
                        help='Worker processes (overrides DEPHASE_JOBS)')
    parser.add_argument('--out', default=OUTPUT_DIR, help='Output directory')
    parser.add_argument('--curves', action='store_true',
                        help="Also write every point's curve CSV and report")
    parser.set_defaults(handler=handle)


def handle(args) -> int:
    config = load_scenario(args.config)
    jobs = resolve_jobs(args.jobs)
    rows, summary_path = run_sweep(config, jobs, args.out, write_curves=args.curves)
    print(f"📄 {summary_path}")
    return 0
