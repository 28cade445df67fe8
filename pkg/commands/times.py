"""
Times Command
Print the characteristic times of a scenario as JSON
"""

import json
import math

from services.analytic_engine import characteristic_times, effective_hilbert_size, reservoir_delta2
from services.errors import PreconditionError
from services.scenario_config import load_scenario
from services.scenario_service import reference_coupling, scenario_recurrence


def register(subparsers):
    parser = subparsers.add_parser('times', help='Print t_D, t_R, tau_R, t_r and Hs as JSON')
    parser.add_argument('--config', required=True, help='Scenario JSON file')
    parser.set_defaults(handler=handle)


def _finite(value):
    if value is None or math.isfinite(value):
        return value
    return str(value)


def scenario_times(config) -> dict:
    model, sys, res, _ = config.build()
    try:
        result = characteristic_times(model, sys, res).as_dict()
    except PreconditionError as e:
        result = {'t_D': None, 't_R': None, 'tau_R': None, 'Lambda': None, 'k_l': [], 'error': str(e)}
    recurrence = scenario_recurrence(model)
    delta2 = reservoir_delta2(model, res)
    result.update({
        't_r': recurrence.time,
        'recurrence_reason': recurrence.reason,
        'Hs': effective_hilbert_size(delta2),
        'delta2': delta2,
        'reference_coupling': reference_coupling(model),
    })
    return {key: _finite(value) if isinstance(value, float) else value for key, value in result.items()}


def handle(args) -> int:
    config = load_scenario(args.config)
    if config.sweep:
        config = config.with_overrides({})
    print(json.dumps(scenario_times(config), indent=2, sort_keys=True))
    return 0
