"""
Report Service
Run reports, CSV emission and the analytic/fitted/caption comparison table
"""

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from services.errors import ConfigurationError, ToleranceFailure

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '.17g'

# Fitted t_D must reproduce the closed form within this fraction
FIT_TOLERANCE = 0.01


@dataclass
class RunReport:
    """Everything one scenario run produced, in JSON-friendly form"""

    name: str
    config_digest: str
    csv: Optional[str] = None
    insert_csv: Optional[str] = None
    reference_coupling: Optional[float] = None
    t_D: Optional[float] = None
    t_R: Optional[float] = None
    tau_R: Optional[float] = None
    lambda_t_D: Optional[float] = None
    Lambda: Optional[str] = None
    k_l: List[Optional[str]] = field(default_factory=list)
    Hs: Optional[float] = None
    delta2: Optional[float] = None
    visibility: Optional[float] = None
    recurrence_time: Optional[float] = None
    recurrence_reason: Optional[str] = None
    fitted_t_D: Optional[float] = None
    fitted_delta1: Optional[float] = None
    fit_window: Optional[float] = None
    fitted_tau_R: Optional[float] = None
    fit_error: Optional[str] = None
    revivals: List[Dict[str, float]] = field(default_factory=list)
    revival_offset: Optional[float] = None
    include_oracle: bool = False
    oracle_dimension: Optional[int] = None
    max_discrepancy: Optional[float] = None
    coarse_grain_resolution: Optional[float] = None
    caption: Optional[Dict[str, Any]] = None
    derived: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {key: _json_safe(value) for key, value in asdict(self).items()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunReport':
        known = {f.name for f in fields(cls)}
        missing = [key for key in ('name', 'config_digest') if key not in data]
        if missing:
            raise ConfigurationError([f"report is missing {key!r}" for key in missing])
        return cls(**{key: value for key, value in data.items() if key in known})

    def save(self, path) -> Path:
        path = Path(path)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write('\n')
        return path


def _json_safe(value):
    """inf/nan become strings so the report stays strict JSON"""
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, np.generic):
        return _json_safe(value.item())
    return value


def _as_float(value) -> Optional[float]:
    if value is None:
        return None
    try:
        return float(value)
    except (TypeError, ValueError):
        return None


def load_report(path) -> RunReport:
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return RunReport.from_dict(json.load(f))
    except FileNotFoundError:
        raise ConfigurationError([f"report file not found: {path}"])
    except json.JSONDecodeError as e:
        raise ConfigurationError([f"{path}: invalid JSON ({e})"])


# ----------------------------------------------------------------------------
# CSV
# ----------------------------------------------------------------------------

def write_series_csv(path, columns: Dict[str, Sequence[float]]) -> Path:
    """
    Write equally long columns with a header row, floats at 17 significant digits

    Column order follows the dict order.
    """
    path = Path(path)
    names = list(columns)
    arrays = [np.asarray(columns[name], dtype=float) for name in names]
    lengths = {array.size for array in arrays}
    if len(lengths) > 1:
        raise ValueError(f"column lengths differ: {sorted(lengths)}")
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(names)
        for row in zip(*arrays):
            writer.writerow([format(float(value), FLOAT_FORMAT) for value in row])
    return path


def write_table_csv(path, rows: List[Dict[str, Any]], columns: List[str]) -> Path:
    """Mixed-type summary table; floats at 17 significant digits, missing cells empty"""
    path = Path(path)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            cells = []
            for column in columns:
                value = row.get(column)
                if value is None:
                    cells.append('')
                elif isinstance(value, float):
                    cells.append(format(value, FLOAT_FORMAT))
                else:
                    cells.append(value)
            writer.writerow(cells)
    return path


def read_series_csv(path) -> pd.DataFrame:
    return pd.read_csv(path, float_precision='round_trip')


# ----------------------------------------------------------------------------
# Comparison
# ----------------------------------------------------------------------------

def _relative_error(value: Optional[float], reference: Optional[float]) -> Optional[float]:
    if value is None or reference is None or reference == 0 or not math.isfinite(reference):
        return None
    return abs(value - reference) / abs(reference)


def compare_report(reports: Sequence[RunReport],
                   tolerance: Optional[float] = None) -> Tuple[pd.DataFrame, List[str]]:
    """
    Tabulate analytic vs fitted vs caption lambda*t_D with relative errors

    Args:
        reports: at least one report
        tolerance: fraction overriding every declared tolerance

    Returns:
        (table, failures); failures is empty when every declared check passes
    """
    if not reports:
        raise ConfigurationError(['compare needs at least one report'])
    rows = []
    failures = []
    for report in reports:
        reference = _as_float(report.reference_coupling) or 1.0
        analytic = _as_float(report.lambda_t_D)
        fitted_t_D = _as_float(report.fitted_t_D)
        fitted = None if fitted_t_D is None else reference * fitted_t_D
        fit_tolerance = FIT_TOLERANCE if tolerance is None else tolerance
        fit_error = _relative_error(fitted, analytic)

        row = {
            'name': report.name,
            'analytic_lambda_t_D': analytic,
            'fitted_lambda_t_D': fitted,
            'fit_rel_error': fit_error,
            'fit_tolerance': fit_tolerance,
            'caption_lambda_t_D': None,
            'caption_rel_error': None,
            'caption_tolerance': None,
            'max_discrepancy': _as_float(report.max_discrepancy),
        }
        status = 'pass'
        if fit_error is not None and fit_error > fit_tolerance:
            status = 'fail'
            failures.append(f"{report.name}: fitted t_D off by {fit_error:.2%} (tolerance {fit_tolerance:.2%})")

        if report.caption:
            target = report.caption['lambda_t_D'] / report.caption.get('scale', 1.0)
            caption_tolerance = report.caption.get('tolerance', FIT_TOLERANCE) if tolerance is None else tolerance
            caption_error = _relative_error(analytic, target)
            row.update(caption_lambda_t_D=target, caption_rel_error=caption_error,
                       caption_tolerance=caption_tolerance)
            if caption_error is None or caption_error > caption_tolerance:
                status = 'fail'
                shown = 'n/a' if caption_error is None else f"{caption_error:.2%}"
                failures.append(f"{report.name}: caption lambda*t_D off by {shown} "
                                f"(tolerance {caption_tolerance:.2%})")

        if report.include_oracle and report.max_discrepancy is None:
            status = 'fail'
            failures.append(f"{report.name}: oracle requested but no discrepancy recorded")

        row['status'] = status
        rows.append(row)

    table = pd.DataFrame(rows)
    logger.info("compared %d report(s), %d failure(s)", len(rows), len(failures))
    return table, failures


def check_reports(reports: Sequence[RunReport], tolerance: Optional[float] = None) -> pd.DataFrame:
    """compare_report that raises ToleranceFailure on any failing row"""
    table, failures = compare_report(reports, tolerance)
    if failures:
        raise ToleranceFailure(failures, table.to_string(index=False))
    return table
