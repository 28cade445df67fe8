"""
Figure-reproduction presets

Every preset is a list of scenario documents in the same schema a user
config file uses, so presets run through the normal validation path.
"""

import math
from typing import Any, Dict, List

from services.analytic_engine import equivalent_reservoir
from services.errors import ConfigurationError

COUPLING = 0.1
KERR = 1.0
LAMBDA_T_MAX = 7.0
N_SAMPLES = 2001

# Window around the first revival at lambda t = 2 pi
INSERT_HALF_WIDTH = 0.3
INSERT_SAMPLES = 601

CAPTION_TOLERANCE = 0.02
FIG4_CAPTION_TOLERANCE = 0.03

# (M, per-mode Delta_2, caption lambda t_D)
THERMAL_ROWS = [
    (201, 3.16, 0.032),
    (1, 44.83, 0.032),
    (1, 6.61, 0.214),
    (15, 1.71, 0.214),
]

# (r, M, caption lambda t_D) for y = 1/2
HALF_POWER_ROWS = [
    (10, 20, 0.49),
    (289, 1, 0.49),
    (2, 2, 2.37),
    (8, 1, 2.37),
]


def _base(name: str, reservoir: Dict[str, Any], y=1) -> Dict[str, Any]:
    return {
        'name': name,
        'model': {'hbar': 1, 'x': 1, 'y': y, 'omega': 0, 'g': KERR, 'Omega': 1},
        'system': {'kind': 'superposition'},
        'reservoir': [reservoir],
        'time_grid': {'t_max': LAMBDA_T_MAX, 'n_samples': N_SAMPLES, 'scale': 'lambda_t'},
        'outputs': {'include_oracle': False, 'revival_threshold': 1e-3},
    }


def _insert() -> Dict[str, Any]:
    return {
        't_min': 2 * math.pi - INSERT_HALF_WIDTH,
        't_max': 2 * math.pi + INSERT_HALF_WIDTH,
        'n_samples': INSERT_SAMPLES,
        'scale': 'lambda_t',
    }


def fig1() -> List[Dict[str, Any]]:
    """Thermal reservoirs at the four Delta_2 targets"""
    documents = []
    for index, (count, delta2, caption) in enumerate(THERMAL_ROWS, start=1):
        document = _base(f"fig1_{index}_thermal_M{count}",
                         {'kind': 'thermal', 'delta2': delta2, 'coupling': COUPLING, 'count': count})
        document['insert'] = _insert()
        document['caption'] = {'lambda_t_D': caption, 'tolerance': CAPTION_TOLERANCE, 'scale': 1}
        documents.append(document)
    return documents


def fig2() -> List[Dict[str, Any]]:
    """Phase-state reservoirs (m = 0) with r derived from the fig1 Delta_2 targets"""
    documents = []
    for index, (count, delta2, caption) in enumerate(THERMAL_ROWS, start=1):
        r = equivalent_reservoir(delta2).r_trunc
        document = _base(f"fig2_{index}_phase_r{r}_M{count}",
                         {'kind': 'phase', 'delta2': delta2, 'm': 0, 'coupling': COUPLING,
                          'count': count})
        document['insert'] = _insert()
        document['caption'] = {'lambda_t_D': caption, 'tolerance': CAPTION_TOLERANCE, 'scale': 1}
        documents.append(document)
    return documents


def fig4() -> List[Dict[str, Any]]:
    """Phase-state reservoirs with y = 1/2; caption values carry an extra sqrt(2)"""
    documents = []
    for index, (r, count, caption) in enumerate(HALF_POWER_ROWS, start=1):
        document = _base(f"fig4_{index}_phase_r{r}_M{count}",
                         {'kind': 'phase', 'r': r, 'm': 0, 'coupling': COUPLING, 'count': count},
                         y='1/2')
        document['caption'] = {'lambda_t_D': caption, 'tolerance': FIG4_CAPTION_TOLERANCE,
                               'scale': math.sqrt(2)}
        documents.append(document)
    return documents


PRESETS = {
    'fig1': fig1,
    'fig2': fig2,
    'fig4': fig4,
}


def preset_documents(name: str) -> List[Dict[str, Any]]:
    """Scenario documents of a named preset"""
    if name not in PRESETS:
        raise ConfigurationError([f"unknown preset {name!r}; choose one of {sorted(PRESETS)}"])
    return PRESETS[name]()
