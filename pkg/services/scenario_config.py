"""
Scenario Configuration
Parse and validate declarative JSON scenario documents

A scenario document mirrors ScenarioConfig field for field:

    {
      "name": "thermal_m1",
      "model": {"hbar": 1, "x": 1, "y": "1/2", "omega": 0, "g": 1, "Omega": 1},
      "system": {"kind": "superposition"},
      "reservoir": [{"kind": "thermal", "delta2": 44.83, "coupling": 0.1, "count": 1}],
      "time_grid": {"t_max": 7, "n_samples": 2001, "scale": "lambda_t"},
      "outputs": {"csv": "thermal_m1.csv", "include_oracle": false,
                  "coarse_grain_resolution": null},
      "caption": {"lambda_t_D": 0.032, "tolerance": 0.02, "scale": 1},
      "sweep": {"reservoir.0.delta2": [1, 2, 4, 8]}
    }
"""

import copy
import itertools
import json
import math
import re
from dataclasses import dataclass, field
from numbers import Real
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from config import TAIL_EPSILON
from services.analytic_engine import equivalent_phase_truncation, equivalent_thermal_temperature
from services.errors import ConfigurationError, DephasingError
from services.model_spec import (
    ModeDistribution,
    ModelSpec,
    ReservoirSpec,
    SystemState,
    as_exact,
    make_custom_mode,
    make_custom_system,
    make_fock_system,
    make_phase_state_mode,
    make_superposition_system,
    make_thermal_mode,
)

SYSTEM_KINDS = ('superposition', 'fock', 'custom')
RESERVOIR_KINDS = ('thermal', 'phase', 'custom')
TIME_SCALES = ('raw', 'lambda_t')
NAME_PATTERN = re.compile(r'^[A-Za-z0-9_.-]+$')


def _is_number(value) -> bool:
    return isinstance(value, Real) and not isinstance(value, bool) and math.isfinite(value)


def _is_rational(value) -> bool:
    return (_is_number(value) or isinstance(value, str)) and as_exact(value) is not None


@dataclass(frozen=True)
class TimeGrid:
    t_max: float
    n_samples: int
    scale: str = 'lambda_t'
    t_min: float = 0.0

    def axis(self) -> np.ndarray:
        """Sample points in the grid's own units"""
        return np.linspace(self.t_min, self.t_max, self.n_samples)


@dataclass(frozen=True)
class Outputs:
    csv: Optional[str] = None
    include_oracle: bool = False
    coarse_grain_resolution: Optional[float] = None
    revival_threshold: float = 1e-3


@dataclass(frozen=True)
class Caption:
    """Published lambda*t_D value; the check compares lambda_t_D/scale with the computed value"""

    lambda_t_D: float
    tolerance: float = 0.02
    scale: float = 1.0


@dataclass(frozen=True)
class ReservoirEntry:
    kind: str
    coupling: Any
    count: int = 1
    beta_homega: Optional[float] = None
    delta2: Optional[float] = None
    tail_epsilon: float = TAIL_EPSILON
    r: Optional[int] = None
    m: int = 0
    probs: Optional[Tuple[float, ...]] = None

    def distribution(self, y) -> Tuple[ModeDistribution, Dict[str, Any]]:
        """Mode distribution plus the parameters derived on the way"""
        derived = {}
        if self.kind == 'thermal':
            beta = self.beta_homega
            if beta is None:
                beta = equivalent_thermal_temperature(self.delta2, y, self.tail_epsilon)
                nbar = 1.0 / math.expm1(beta) if math.isfinite(beta) else 0.0
                derived = {'nbar': nbar, 'beta_homega': beta}
            return make_thermal_mode(beta, self.tail_epsilon), derived
        if self.kind == 'phase':
            r = self.r
            if r is None:
                r = equivalent_phase_truncation(self.delta2, y)
                derived = {'r_trunc': r}
            return make_phase_state_mode(r, self.m), derived
        return make_custom_mode(self.probs), derived


@dataclass(frozen=True)
class ScenarioConfig:
    """One run: model, states, time grid and outputs, plus an optional sweep grid"""

    name: str
    model: Dict[str, Any]
    system: Dict[str, Any]
    reservoir: Tuple[ReservoirEntry, ...]
    time_grid: TimeGrid
    outputs: Outputs = field(default_factory=Outputs)
    caption: Optional[Caption] = None
    sweep: Dict[str, List[Any]] = field(default_factory=dict)
    insert: Optional[TimeGrid] = None
    document: Dict[str, Any] = field(default_factory=dict, compare=False)

    def build(self) -> Tuple[ModelSpec, SystemState, ReservoirSpec, Dict[str, Any]]:
        """Model, system state and reservoir, plus derived reservoir parameters"""
        couplings = []
        distributions = []
        derived = []
        y = self.model.get('y', 1)
        for entry in self.reservoir:
            dist, params = entry.distribution(y)
            derived.append(params)
            couplings.extend([entry.coupling] * entry.count)
            distributions.extend([dist] * entry.count)
        model = ModelSpec(couplings=tuple(couplings), **self.model)
        reservoir = ReservoirSpec.from_model(model, distributions)
        return model, self._system_state(), reservoir, {'reservoir': derived}

    def _system_state(self) -> SystemState:
        kind = self.system['kind']
        if kind == 'superposition':
            return make_superposition_system()
        if kind == 'fock':
            return make_fock_system(self.system['n'], self.system.get('dim'))
        return make_custom_system(self.system['matrix'])

    def grid_points(self) -> List[Dict[str, Any]]:
        """Cartesian product of the sweep grid, in declaration order"""
        if not self.sweep:
            return [{}]
        keys = list(self.sweep)
        return [dict(zip(keys, combo)) for combo in itertools.product(*(self.sweep[k] for k in keys))]

    def with_overrides(self, overrides: Dict[str, Any], suffix: str = '') -> 'ScenarioConfig':
        """Re-parse the document with dotted-path overrides applied and the sweep removed"""
        document = copy.deepcopy(self.document)
        document.pop('sweep', None)
        for path, value in overrides.items():
            _set_path(document, path, value)
        if suffix:
            document['name'] = f"{self.name}{suffix}"
        return parse_scenario(document)


# ----------------------------------------------------------------------------
# Dotted paths
# ----------------------------------------------------------------------------

def _walk(document, parts):
    node = document
    for part in parts:
        if isinstance(node, list):
            if not part.isdigit() or int(part) >= len(node):
                raise KeyError(part)
            node = node[int(part)]
        elif isinstance(node, dict):
            node = node[part]
        else:
            raise KeyError(part)
    return node


def _path_exists(document, path: str) -> bool:
    try:
        _walk(document, path.split('.'))
        return True
    except KeyError:
        return False


def _set_path(document, path: str, value):
    parts = path.split('.')
    parent = _walk(document, parts[:-1])
    last = parts[-1]
    if isinstance(parent, list):
        parent[int(last)] = value
    else:
        parent[last] = value


# ----------------------------------------------------------------------------
# Validation
# ----------------------------------------------------------------------------

def _validate_model(raw, problems) -> Dict[str, Any]:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        problems.append('model: must be an object')
        return {}
    model = {}
    allowed = {'hbar', 'x', 'y', 'omega', 'g', 'Omega'}
    for key in raw:
        if key not in allowed:
            problems.append(f"model.{key}: unknown field")
    if 'hbar' in raw:
        if not (_is_number(raw['hbar']) and raw['hbar'] > 0):
            problems.append(f"model.hbar: must be a number > 0, got {raw['hbar']!r}")
        else:
            model['hbar'] = float(raw['hbar'])
    for key in ('x', 'y'):
        if key in raw:
            value = raw[key]
            if not _is_rational(value) or as_exact(value) <= 0:
                problems.append(f"model.{key}: must be a positive rational (number or 'p/q'), got {value!r}")
            else:
                model[key] = as_exact(value)
    for key in ('omega', 'g', 'Omega'):
        if key in raw:
            if not _is_number(raw[key]):
                problems.append(f"model.{key}: must be a finite number, got {raw[key]!r}")
            else:
                model[key] = float(raw[key])
    return model


def _validate_system(raw, problems) -> Dict[str, Any]:
    if raw is None:
        raw = {'kind': 'superposition'}
    if not isinstance(raw, dict):
        problems.append('system: must be an object')
        return {'kind': 'superposition'}
    kind = raw.get('kind', 'superposition')
    if kind not in SYSTEM_KINDS:
        problems.append(f"system.kind: must be one of {SYSTEM_KINDS}, got {kind!r}")
        return {'kind': 'superposition'}
    system = {'kind': kind}
    if kind == 'fock':
        n = raw.get('n')
        if not isinstance(n, int) or isinstance(n, bool) or n < 0:
            problems.append(f"system.n: must be an integer >= 0, got {n!r}")
        else:
            system['n'] = n
        dim = raw.get('dim')
        if dim is not None:
            if not isinstance(dim, int) or isinstance(dim, bool) or (isinstance(n, int) and dim <= n):
                problems.append(f"system.dim: must be an integer > n, got {dim!r}")
            else:
                system['dim'] = dim
    elif kind == 'custom':
        matrix = raw.get('matrix')
        try:
            system['matrix'] = _complex_matrix(matrix)
        except (TypeError, ValueError) as e:
            problems.append(f"system.matrix: {e}")
    return system


def _complex_matrix(raw) -> np.ndarray:
    """Square matrix of numbers or [re, im] pairs"""
    if not isinstance(raw, list) or not raw:
        raise ValueError('must be a non-empty list of rows')
    rows = []
    for row in raw:
        if not isinstance(row, list) or len(row) != len(raw):
            raise ValueError('must be square')
        entries = []
        for entry in row:
            if isinstance(entry, list) and len(entry) == 2 and all(_is_number(e) for e in entry):
                entries.append(complex(entry[0], entry[1]))
            elif _is_number(entry):
                entries.append(complex(entry))
            else:
                raise ValueError(f"entries must be numbers or [re, im] pairs, got {entry!r}")
        rows.append(entries)
    return np.array(rows, dtype=complex)


def _validate_reservoir(raw, problems) -> Tuple[ReservoirEntry, ...]:
    if not isinstance(raw, list) or not raw:
        problems.append('reservoir: must be a non-empty list of modes')
        return ()
    entries = []
    for index, item in enumerate(raw):
        where = f"reservoir[{index}]"
        if not isinstance(item, dict):
            problems.append(f"{where}: must be an object")
            continue
        before = len(problems)
        kind = item.get('kind')
        if kind not in RESERVOIR_KINDS:
            problems.append(f"{where}.kind: must be one of {RESERVOIR_KINDS}, got {kind!r}")
        coupling = item.get('coupling')
        if not _is_rational(coupling) and not _is_number(coupling):
            problems.append(f"{where}.coupling: must be a finite number or 'p/q', got {coupling!r}")
        count = item.get('count', 1)
        if not isinstance(count, int) or isinstance(count, bool) or count < 1:
            problems.append(f"{where}.count: must be an integer >= 1, got {count!r}")
        fields = {'kind': kind, 'coupling': coupling, 'count': count}

        if kind == 'thermal':
            beta, delta2 = item.get('beta_homega'), item.get('delta2')
            if (beta is None) == (delta2 is None):
                problems.append(f"{where}: thermal mode needs exactly one of beta_homega or delta2")
            elif beta is not None and not (_is_number(beta) and beta > 0):
                problems.append(f"{where}.beta_homega: must be a number > 0, got {beta!r}")
            elif delta2 is not None and not (_is_number(delta2) and delta2 > 0):
                problems.append(f"{where}.delta2: must be a number > 0 for a thermal mode, got {delta2!r}")
            tail = item.get('tail_epsilon', TAIL_EPSILON)
            if not (_is_number(tail) and 0 < tail < 1):
                problems.append(f"{where}.tail_epsilon: must lie in (0, 1), got {tail!r}")
            fields.update(beta_homega=beta, delta2=delta2, tail_epsilon=tail)
        elif kind == 'phase':
            r, delta2 = item.get('r'), item.get('delta2')
            if (r is None) == (delta2 is None):
                problems.append(f"{where}: phase mode needs exactly one of r or delta2")
            elif r is not None and (not isinstance(r, int) or isinstance(r, bool) or r < 0):
                problems.append(f"{where}.r: must be an integer >= 0, got {r!r}")
            elif delta2 is not None and not (_is_number(delta2) and delta2 >= 0):
                problems.append(f"{where}.delta2: must be a number >= 0, got {delta2!r}")
            m = item.get('m', 0)
            if not isinstance(m, int) or isinstance(m, bool) or m < 0:
                problems.append(f"{where}.m: must be an integer >= 0, got {m!r}")
            elif isinstance(r, int) and not isinstance(r, bool) and m > r:
                problems.append(f"{where}.m: phase index {m} outside 0..{r}")
            fields.update(r=r, delta2=delta2, m=m)
        elif kind == 'custom':
            probs = item.get('probs')
            if (not isinstance(probs, list) or not probs
                    or not all(_is_number(p) and p >= 0 for p in probs)):
                problems.append(f"{where}.probs: must be a non-empty list of non-negative numbers")
            elif abs(sum(probs) - 1.0) > 1e-12:
                problems.append(f"{where}.probs: must sum to 1, got {sum(probs)!r}")
            else:
                fields['probs'] = tuple(float(p) for p in probs)

        if len(problems) == before:
            entries.append(ReservoirEntry(**fields))
    return tuple(entries)


def _validate_grid(raw, where, problems) -> Optional[TimeGrid]:
    if not isinstance(raw, dict):
        problems.append(f"{where}: must be an object")
        return None
    before = len(problems)
    t_min = raw.get('t_min', 0.0)
    t_max = raw.get('t_max')
    n_samples = raw.get('n_samples')
    scale = raw.get('scale', 'lambda_t')
    if not _is_number(t_min) or t_min < 0:
        problems.append(f"{where}.t_min: must be a number >= 0, got {t_min!r}")
    if not _is_number(t_max) or (_is_number(t_min) and t_max <= t_min):
        problems.append(f"{where}.t_max: must be a number > t_min, got {t_max!r}")
    if not isinstance(n_samples, int) or isinstance(n_samples, bool) or n_samples < 2:
        problems.append(f"{where}.n_samples: must be an integer >= 2, got {n_samples!r}")
    if scale not in TIME_SCALES:
        problems.append(f"{where}.scale: must be one of {TIME_SCALES}, got {scale!r}")
    if len(problems) > before:
        return None
    return TimeGrid(float(t_max), n_samples, scale, float(t_min))


def _validate_outputs(raw, problems) -> Outputs:
    if raw is None:
        return Outputs()
    if not isinstance(raw, dict):
        problems.append('outputs: must be an object')
        return Outputs()
    csv_name = raw.get('csv')
    if csv_name is not None and not isinstance(csv_name, str):
        problems.append(f"outputs.csv: must be a file name, got {csv_name!r}")
    include_oracle = raw.get('include_oracle', False)
    if not isinstance(include_oracle, bool):
        problems.append(f"outputs.include_oracle: must be true or false, got {include_oracle!r}")
    resolution = raw.get('coarse_grain_resolution')
    if resolution is not None and not (_is_number(resolution) and resolution >= 0):
        problems.append(f"outputs.coarse_grain_resolution: must be a number >= 0, got {resolution!r}")
    threshold = raw.get('revival_threshold', 1e-3)
    if not (_is_number(threshold) and 0 < threshold < 1):
        problems.append(f"outputs.revival_threshold: must lie in (0, 1), got {threshold!r}")
    return Outputs(csv_name if isinstance(csv_name, str) else None,
                   include_oracle is True,
                   float(resolution) if _is_number(resolution) else None,
                   float(threshold) if _is_number(threshold) else 1e-3)


def _validate_caption(raw, problems) -> Optional[Caption]:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        problems.append('caption: must be an object')
        return None
    before = len(problems)
    target = raw.get('lambda_t_D')
    tolerance = raw.get('tolerance', 0.02)
    scale = raw.get('scale', 1.0)
    if not (_is_number(target) and target > 0):
        problems.append(f"caption.lambda_t_D: must be a number > 0, got {target!r}")
    if not (_is_number(tolerance) and tolerance > 0):
        problems.append(f"caption.tolerance: must be a number > 0, got {tolerance!r}")
    if not (_is_number(scale) and scale > 0):
        problems.append(f"caption.scale: must be a number > 0, got {scale!r}")
    if len(problems) > before:
        return None
    return Caption(float(target), float(tolerance), float(scale))


def _validate_sweep(raw, document, problems) -> Dict[str, List[Any]]:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        problems.append('sweep: must be an object mapping field paths to value lists')
        return {}
    sweep = {}
    for path, values in raw.items():
        if not isinstance(values, list) or not values:
            problems.append(f"sweep.{path}: grid must be a non-empty list")
            continue
        if not all(_is_number(v) or isinstance(v, str) for v in values):
            problems.append(f"sweep.{path}: grid values must be numbers")
            continue
        if path.startswith('sweep') or not _path_exists(document, path):
            problems.append(f"sweep.{path}: field does not exist in the scenario")
            continue
        sweep[path] = list(values)
    return sweep


def parse_scenario(document: Dict[str, Any]) -> ScenarioConfig:
    """
    Validate a scenario document

    Raises:
        ConfigurationError listing every offending field
    """
    if not isinstance(document, dict):
        raise ConfigurationError(['scenario must be a JSON object'])
    problems: List[str] = []
    known = {'name', 'model', 'system', 'reservoir', 'time_grid', 'outputs', 'caption', 'sweep', 'insert'}
    for key in document:
        if key not in known:
            problems.append(f"{key}: unknown field")

    name = document.get('name', 'scenario')
    if not isinstance(name, str) or not NAME_PATTERN.match(name):
        problems.append(f"name: must match {NAME_PATTERN.pattern}, got {name!r}")
        name = 'scenario'

    model = _validate_model(document.get('model'), problems)
    system = _validate_system(document.get('system'), problems)
    reservoir = _validate_reservoir(document.get('reservoir'), problems)
    time_grid = _validate_grid(document.get('time_grid'), 'time_grid', problems)
    insert = None
    if document.get('insert') is not None:
        insert = _validate_grid(document['insert'], 'insert', problems)
    outputs = _validate_outputs(document.get('outputs'), problems)
    caption = _validate_caption(document.get('caption'), problems)
    sweep = _validate_sweep(document.get('sweep'), document, problems)

    if problems:
        raise ConfigurationError(problems)

    config = ScenarioConfig(name=name, model=model, system=system, reservoir=reservoir,
                            time_grid=time_grid, outputs=outputs, caption=caption,
                            sweep=sweep, insert=insert, document=copy.deepcopy(document))
    if not sweep:
        # Build once so state-level invariants surface as validation errors too
        try:
            config.build()
        except ConfigurationError:
            raise
        except DephasingError as e:
            raise ConfigurationError([str(e)])
    return config


def load_scenario(path) -> ScenarioConfig:
    """Read and validate a scenario JSON file"""
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            document = json.load(f)
    except FileNotFoundError:
        raise ConfigurationError([f"config file not found: {path}"])
    except json.JSONDecodeError as e:
        raise ConfigurationError([f"{path}: invalid JSON ({e})"])
    return parse_scenario(document)
