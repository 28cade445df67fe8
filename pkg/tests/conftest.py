import json
import math

import pytest

from services.analytic_engine import equivalent_reservoir
from services.model_spec import (
    ModelSpec,
    ReservoirSpec,
    make_phase_state_mode,
    make_superposition_system,
    make_thermal_mode,
)

FIG1_DELTA2 = 44.83


@pytest.fixture
def superposition():
    return make_superposition_system()


@pytest.fixture
def thermal_fig1():
    """Single thermal mode with Delta_2 = 44.83 at lambda = 0.1"""
    model = ModelSpec(couplings=(0.1,))
    mode = make_thermal_mode(equivalent_reservoir(FIG1_DELTA2).beta_homega)
    return model, ReservoirSpec.from_model(model, [mode])


@pytest.fixture
def half_power_phase():
    """y = 1/2, twenty phase-state modes with r = 10"""
    model = ModelSpec(couplings=(0.1,) * 20, y='1/2', g=1.0)
    modes = [make_phase_state_mode(10)] * 20
    return model, ReservoirSpec.from_model(model, modes)


def scenario_document(name='thermal_m1', delta2=FIG1_DELTA2, count=1, n_samples=401,
                      t_max=7.0, **outputs):
    return {
        'name': name,
        'model': {'hbar': 1, 'x': 1, 'y': 1, 'g': 1},
        'system': {'kind': 'superposition'},
        'reservoir': [{'kind': 'thermal', 'delta2': delta2, 'coupling': 0.1, 'count': count}],
        'time_grid': {'t_max': t_max, 'n_samples': n_samples, 'scale': 'lambda_t'},
        'outputs': dict(outputs),
    }


@pytest.fixture
def write_config(tmp_path):
    """Write a scenario document to a JSON file and return its path"""

    def write(document, name='scenario.json'):
        path = tmp_path / name
        path.write_text(json.dumps(document))
        return path

    return write


def lambda_t_D(delta1, delta2_total):
    return 1.0 / (delta1 * math.sqrt(2.0) * delta2_total)
