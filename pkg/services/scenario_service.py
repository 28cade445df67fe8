"""
Scenario Service
Run single scenarios, figure presets and parallel parameter sweeps
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from config import ORACLE_SIZE_CAP, OUTPUT_DIR
from services.analytic_engine import (
    RecurrenceTime,
    characteristic_times,
    effective_hilbert_size,
    least_multiple_frequency,
    linear_entropy,
    recurrence_time,
    reservoir_delta2,
    revival_visibility,
)
from services.errors import DephasingError, PreconditionError
from services.model_spec import ModelSpec, ReservoirSpec, SystemState
from services.numeric_oracle import (
    build_energy_table,
    build_full_initial_state,
    coarse_grain,
    detect_revivals,
    evolve_linear_entropy,
    fit_decoherence_time,
    mode_density_matrix,
)
from services.presets import preset_documents
from services.report_service import RunReport, write_series_csv, write_table_csv
from services.scenario_config import ScenarioConfig, TimeGrid, parse_scenario
from services.series import TimeSeries, config_digest

logger = logging.getLogger(__name__)

# Short-time fits sample [0, FIT_SPAN * t_D]
FIT_SPAN = 0.05
FIT_SAMPLES = 129

PROGRESS_EVERY = 10


def reference_coupling(model: ModelSpec) -> float:
    """Coupling used for the lambda*t axis: Lambda when it exists, else the largest |lambda_l|"""
    Lambda = least_multiple_frequency(model)
    return float(Lambda) if Lambda is not None else model.reference_coupling


def scenario_recurrence(model: ModelSpec) -> RecurrenceTime:
    """Recurrence of the reduced state, closing every coupling phase through Lambda"""
    couplings = {abs(c) for c in model.coupling_array}
    Lambda = least_multiple_frequency(model)
    if len(couplings) > 1 and Lambda is None:
        return RecurrenceTime(None, 'incommensurate')
    coupling = float(Lambda) if Lambda is not None else couplings.pop()
    return recurrence_time(model.g, coupling, model.hbar)


def grid_times(grid: TimeGrid, reference: float) -> np.ndarray:
    """Physical sample times of a grid"""
    axis = grid.axis()
    if grid.scale == 'lambda_t':
        if reference == 0:
            raise PreconditionError('lambda_t axis needs a non-zero coupling')
        return axis / reference
    return axis


def _short_time_series(model: ModelSpec, sys: SystemState, res: ReservoirSpec,
                       t_D: float, origin: float = 0.0) -> TimeSeries:
    offsets = np.linspace(0.0, FIT_SPAN * t_D, FIT_SAMPLES)
    values = linear_entropy(model, sys, res, origin + offsets)
    return TimeSeries(offsets, values, {'source': 'analytic', 'origin': origin})


def _fit(report: RunReport, model: ModelSpec, sys: SystemState, res: ReservoirSpec):
    """Short-time fits at t = 0 and at the first revival"""
    if report.t_D is None or not math.isfinite(report.t_D):
        return
    try:
        fit = fit_decoherence_time(_short_time_series(model, sys, res, report.t_D))
        report.fitted_t_D = fit.t_D
        report.fitted_delta1 = fit.delta1
        report.fit_window = fit.window
    except DephasingError as e:
        logger.warning("%s: short-time fit failed: %s", report.name, e)
        report.fit_error = str(e)
        return
    if report.t_R is None:
        return
    try:
        revival = fit_decoherence_time(_short_time_series(model, sys, res, report.t_D, report.t_R))
        report.fitted_tau_R = 2.0 * revival.t_D
    except DephasingError as e:
        logger.warning("%s: revival fit failed: %s", report.name, e)


def _oracle_series(model: ModelSpec, sys: SystemState, res: ReservoirSpec,
                   times: np.ndarray) -> TimeSeries:
    modes = [mode_density_matrix(dist) for dist in res.distributions]
    state = build_full_initial_state(sys, modes, cap=ORACLE_SIZE_CAP)
    table = build_energy_table(model, (sys.dim, [dist.dim for dist in res.distributions]))
    return evolve_linear_entropy(state, table, times)


def run_scenario(config: ScenarioConfig, out_dir=None, include_oracle: Optional[bool] = None,
                 write_csv: bool = True) -> RunReport:
    """
    Evaluate one scenario and write `<name>.csv` plus `<name>.report.json`

    Args:
        config: validated scenario
        out_dir: output directory (DEPHASE_OUTPUT_DIR when None)
        include_oracle: overrides outputs.include_oracle when not None
        write_csv: skip every file when False (sweep points)

    Raises:
        SizeCapError: oracle requested beyond the dimension cap
    """
    out_dir = Path(OUTPUT_DIR if out_dir is None else out_dir)
    with_oracle = config.outputs.include_oracle if include_oracle is None else include_oracle
    model, sys, res, derived = config.build()
    reference = reference_coupling(model)

    report = RunReport(name=config.name, config_digest=config_digest(config.document),
                       reference_coupling=reference, include_oracle=with_oracle,
                       derived=derived, coarse_grain_resolution=config.outputs.coarse_grain_resolution)

    try:
        times_bundle = characteristic_times(model, sys, res)
        report.t_D = times_bundle.t_D
        report.t_R = times_bundle.t_R
        report.tau_R = times_bundle.tau_R
        report.lambda_t_D = reference * times_bundle.t_D
        summary = times_bundle.as_dict()
        report.Lambda = summary['Lambda']
        report.k_l = summary['k_l']
        if math.isfinite(times_bundle.t_D):
            report.visibility = revival_visibility(model, sys, res)
    except PreconditionError as e:
        logger.warning("%s: characteristic times unavailable: %s", config.name, e)
        report.fit_error = str(e)

    report.delta2 = reservoir_delta2(model, res)
    report.Hs = effective_hilbert_size(report.delta2)
    recurrence = scenario_recurrence(model)
    report.recurrence_time = recurrence.time
    report.recurrence_reason = recurrence.reason

    _fit(report, model, sys, res)

    times = grid_times(config.time_grid, reference)
    analytic = TimeSeries(times, linear_entropy(model, sys, res, times), {'source': 'analytic'})
    report.revivals = [
        {'t': event.time, 'lambda_t': reference * event.time,
         'depth': event.depth, 'full_width': event.full_width}
        for event in detect_revivals(analytic, config.outputs.revival_threshold)
    ]
    if report.revivals and report.t_R is not None:
        # first detected dip against the analytic t_R
        report.revival_offset = report.revivals[0]['t'] - report.t_R
        logger.info("%s: first revival %.6g from t_R", config.name, report.revival_offset)

    columns = {'t': times, 'lambda_t': reference * times, 'delta_analytic': analytic.values}
    if with_oracle:
        oracle = _oracle_series(model, sys, res, times)
        report.oracle_dimension = int(oracle.meta['D'])
        report.max_discrepancy = float(np.max(np.abs(oracle.values - analytic.values)))
        columns['delta_oracle'] = oracle.values
        logger.info("%s: oracle D=%d, max discrepancy %.3g", config.name,
                    report.oracle_dimension, report.max_discrepancy)

    resolution = config.outputs.coarse_grain_resolution
    if resolution is not None:
        if config.time_grid.scale == 'lambda_t':
            resolution = resolution / reference
        columns['delta_coarse'] = coarse_grain(analytic, resolution).values

    if config.caption is not None and report.lambda_t_D is not None:
        target = config.caption.lambda_t_D / config.caption.scale
        error = abs(target - report.lambda_t_D) / target
        report.caption = {
            'lambda_t_D': config.caption.lambda_t_D,
            'scale': config.caption.scale,
            'tolerance': config.caption.tolerance,
            'computed': report.lambda_t_D,
            'rel_error': error,
            'passed': error <= config.caption.tolerance,
        }

    if write_csv:
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / (config.outputs.csv or f"{config.name}.csv")
        write_series_csv(csv_path, columns)
        report.csv = str(csv_path)
        if config.insert is not None:
            insert_times = grid_times(config.insert, reference)
            insert_path = out_dir / f"{config.name}_insert.csv"
            write_series_csv(insert_path, {
                't': insert_times,
                'lambda_t': reference * insert_times,
                'delta_analytic': linear_entropy(model, sys, res, insert_times),
            })
            report.insert_csv = str(insert_path)
        report.save(out_dir / f"{config.name}.report.json")

    logger.info("%s: lambda*t_D=%s, Hs=%.6g", config.name, report.lambda_t_D, report.Hs)
    return report


def run_preset(name: str, out_dir=None) -> List[RunReport]:
    """Run every row of a figure preset"""
    reports = []
    for document in preset_documents(name):
        reports.append(run_scenario(parse_scenario(document), out_dir))
    return reports


# ----------------------------------------------------------------------------
# Sweeps
# ----------------------------------------------------------------------------

SWEEP_COLUMNS = ['index', 't_D', 'lambda_t_D', 't_R', 'tau_R', 'Hs', 'delta2',
                 'fitted_t_D', 'max_discrepancy', 'error']


def _run_point(config: ScenarioConfig, index: int, overrides: Dict[str, Any],
               out_dir: Optional[str], write_curves: bool) -> Dict[str, Any]:
    """One sweep point; failures are recorded on the row"""
    row = {'index': index}
    row.update(overrides)
    try:
        point = config.with_overrides(overrides, suffix=f"_{index:05d}")
        report = run_scenario(point, out_dir, write_csv=write_curves)
        for column in SWEEP_COLUMNS[1:-1]:
            value = getattr(report, column)
            row[column] = None if value is None else float(value)
        row['error'] = None
    except DephasingError as e:
        row['error'] = str(e)
    return row


def run_sweep(config: ScenarioConfig, jobs: int = 1, out_dir=None,
              write_curves: bool = False) -> Tuple[List[Dict[str, Any]], Path]:
    """
    Evaluate every grid point and write `<name>_sweep.csv`

    Rows come back ordered by grid index regardless of completion order.

    Args:
        config: scenario with a sweep grid (an empty grid runs once)
        jobs: worker processes
        out_dir: output directory
        write_curves: also write each point's curve CSV and report
    """
    out_dir = Path(OUTPUT_DIR if out_dir is None else out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    points = config.grid_points()
    total = len(points)
    print(f"Found {total} sweep points")
    print(f"Using {jobs} worker processes")

    stats = {'total': total, 'successful': 0, 'failed': 0, 'errors': []}
    rows: List[Optional[Dict[str, Any]]] = [None] * total

    def record(row):
        rows[row['index']] = row
        if row['error'] is None:
            stats['successful'] += 1
        else:
            stats['failed'] += 1
            if len(stats['errors']) < 10:
                stats['errors'].append(f"point {row['index']}: {row['error']}")
        completed = stats['successful'] + stats['failed']
        if completed % PROGRESS_EVERY == 0 or completed == total:
            logger.info("Progress: %d/%d (%d successful, %d failed)",
                        completed, total, stats['successful'], stats['failed'])

    directory = str(out_dir)
    if jobs <= 1 or total == 1:
        for index, overrides in enumerate(points):
            record(_run_point(config, index, overrides, directory, write_curves))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as executor:
            futures = {
                executor.submit(_run_point, config, index, overrides, directory, write_curves): index
                for index, overrides in enumerate(points)
            }
            for future in as_completed(futures):
                record(future.result())

    columns = ['index'] + list(config.sweep) + SWEEP_COLUMNS[1:]
    summary_path = write_table_csv(out_dir / f"{config.name}_sweep.csv", rows, columns)

    print(f"\n{'='*60}")
    print(f"Sweep Summary:")
    print(f"  Total: {stats['total']}")
    print(f"  Successful: {stats['successful']}")
    print(f"  Failed: {stats['failed']}")
    if stats['errors']:
        print(f"\nFirst errors:")
        for error in stats['errors'][:5]:
            print(f"  - {error}")
    print(f"{'='*60}\n")

    return rows, summary_path
