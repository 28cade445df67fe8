"""
Simulate Command
Run one scenario config and write its curve CSV and report
"""

from config import OUTPUT_DIR
from services.scenario_config import load_scenario
from services.scenario_service import run_scenario


def register(subparsers):
    parser = subparsers.add_parser('simulate', help='Run one scenario config')
    parser.add_argument('--config', required=True, help='Scenario JSON file')
    parser.add_argument('--oracle', action='store_true', default=None,
                        help='Also evaluate the full density-matrix oracle')
    parser.add_argument('--out', default=OUTPUT_DIR, help='Output directory')
    parser.set_defaults(handler=handle)


def handle(args) -> int:
    config = load_scenario(args.config)
    if config.sweep:
        print(f"⚠️  {args.config} declares a sweep grid; running the base point only (use 'sweep')")
        config = config.with_overrides({})
    report = run_scenario(config, args.out, include_oracle=args.oracle)

    print(f"✅ {report.name}")
    print(f"   lambda*t_D = {report.lambda_t_D}")
    if report.fitted_t_D is not None:
        print(f"   fitted lambda*t_D = {report.reference_coupling * report.fitted_t_D}")
    print(f"   Hs = {report.Hs}")
    if report.max_discrepancy is not None:
        print(f"   max oracle discrepancy = {report.max_discrepancy:.3g} (D={report.oracle_dimension})")
    print(f"   CSV: {report.csv}")
    return 0
