import json
import math

import numpy as np
import pandas as pd
import pytest

from services.analytic_engine import linear_entropy
from services.errors import SizeCapError
from services.report_service import read_series_csv
from services.scenario_config import parse_scenario
from services.scenario_service import run_preset, run_scenario, run_sweep
from tests.conftest import lambda_t_D, scenario_document


class TestRunScenario:

    def test_fig1_single_mode(self, tmp_path):
        report = run_scenario(parse_scenario(scenario_document()), tmp_path)
        assert report.lambda_t_D == pytest.approx(0.0316, abs=1e-4)
        assert report.fitted_t_D == pytest.approx(report.t_D, rel=0.01)
        assert abs(report.fitted_delta1) * report.fitted_t_D < 1e-6
        assert report.Hs == pytest.approx(155.3, abs=0.05)
        assert report.tau_R == pytest.approx(2 * report.t_D)
        assert report.fitted_tau_R == pytest.approx(report.tau_R, rel=0.01)
        assert 0.1 * report.t_R == pytest.approx(2 * math.pi)
        assert report.recurrence_reason == 'commensurate'
        assert report.max_discrepancy is None

    def test_files_written(self, tmp_path):
        report = run_scenario(parse_scenario(scenario_document()), tmp_path)
        frame = read_series_csv(report.csv)
        assert list(frame.columns) == ['t', 'lambda_t', 'delta_analytic']
        assert len(frame) == 401
        saved = json.loads((tmp_path / 'thermal_m1.report.json').read_text())
        assert saved['name'] == 'thermal_m1'
        assert saved['Hs'] == report.Hs

    def test_revival_reported(self, tmp_path):
        # lambda t = 2 pi falls on sample 200
        document = scenario_document(n_samples=401, t_max=4 * math.pi)
        report = run_scenario(parse_scenario(document), tmp_path)
        assert len(report.revivals) == 1
        assert report.revivals[0]['lambda_t'] == pytest.approx(2 * math.pi, abs=5e-3)
        assert report.revival_offset == pytest.approx(0.0, abs=1e-9)

    def test_no_offset_without_revival_time(self, tmp_path):
        document = scenario_document(n_samples=401, t_max=4 * math.pi)
        document['model']['y'] = '1/2'
        document['reservoir'] = [{'kind': 'phase', 'r': 8, 'coupling': 0.1}]
        report = run_scenario(parse_scenario(document), tmp_path)
        assert report.t_R is None
        assert report.revival_offset is None

    def test_oracle_discrepancy(self, tmp_path):
        document = scenario_document(n_samples=201, include_oracle=True)
        report = run_scenario(parse_scenario(document), tmp_path)
        assert report.oracle_dimension <= 4096
        assert report.max_discrepancy <= 1e-10
        assert 'delta_oracle' in read_series_csv(report.csv).columns

    def test_oracle_flag_overrides_document(self, tmp_path):
        document = scenario_document(delta2=2.0, n_samples=51)
        report = run_scenario(parse_scenario(document), tmp_path, include_oracle=True)
        assert report.max_discrepancy is not None

    def test_oracle_size_cap(self, tmp_path):
        document = scenario_document(count=2, n_samples=51, include_oracle=True)
        with pytest.raises(SizeCapError) as excinfo:
            run_scenario(parse_scenario(document), tmp_path)
        assert excinfo.value.dimension > 4096

    def test_coarse_column(self, tmp_path):
        document = scenario_document(n_samples=2001, coarse_grain_resolution=1.26)
        report = run_scenario(parse_scenario(document), tmp_path)
        frame = read_series_csv(report.csv)
        assert list(frame.columns)[-1] == 'delta_coarse'
        assert frame['delta_coarse'].min() > 0.4

    def test_deterministic_output(self, tmp_path):
        config = parse_scenario(scenario_document())
        first = run_scenario(config, tmp_path / 'a')
        second = run_scenario(config, tmp_path / 'b')
        with open(first.csv, 'rb') as a, open(second.csv, 'rb') as b:
            assert a.read() == b.read()

    def test_csv_round_trip(self, tmp_path):
        config = parse_scenario(scenario_document())
        report = run_scenario(config, tmp_path)
        model, sys, res, _ = config.build()
        frame = read_series_csv(report.csv)
        expected = linear_entropy(model, sys, res, frame['t'].to_numpy())
        assert np.array_equal(frame['delta_analytic'].to_numpy(), expected)

    def test_caption_check(self, tmp_path):
        document = scenario_document()
        document['caption'] = {'lambda_t_D': 0.032, 'tolerance': 0.02}
        report = run_scenario(parse_scenario(document), tmp_path)
        assert report.caption['passed']
        assert report.caption['rel_error'] < 0.02


class TestPresets:

    def test_fig1(self, tmp_path):
        reports = run_preset('fig1', tmp_path)
        assert len(reports) == 4
        assert len(list(tmp_path.glob('fig1_*_thermal_M*[0-9].csv'))) == 4
        assert all(report.caption['passed'] for report in reports)
        assert all(report.insert_csv for report in reports)
        expected = [lambda_t_D(0.5, math.sqrt(201) * 3.16), lambda_t_D(0.5, 44.83),
                    lambda_t_D(0.5, 6.61), lambda_t_D(0.5, math.sqrt(15) * 1.71)]
        for report, value in zip(reports, expected):
            assert report.lambda_t_D == pytest.approx(value, rel=1e-6)

    def test_fig2(self, tmp_path):
        reports = run_preset('fig2', tmp_path)
        assert [r.derived['reservoir'][0] for r in reports] == [
            {'r_trunc': 10}, {'r_trunc': 154}, {'r_trunc': 22}, {'r_trunc': 5}]
        assert [r.name for r in reports] == [
            'fig2_1_phase_r10_M201', 'fig2_2_phase_r154_M1', 'fig2_3_phase_r22_M1', 'fig2_4_phase_r5_M15']
        assert all(report.caption['passed'] for report in reports)

    def test_fig4(self, tmp_path):
        reports = run_preset('fig4', tmp_path)
        assert len(reports) == 4
        assert all(report.revivals == [] for report in reports)
        assert all(report.t_R is None for report in reports)
        assert all(report.caption['passed'] for report in reports)
        computed = [report.lambda_t_D for report in reports]
        assert computed[0] == pytest.approx(0.3476, abs=5e-4)
        assert computed[2] == pytest.approx(1.6846, abs=5e-4)
        assert computed[3] == pytest.approx(1.6697, abs=5e-4)


class TestSweep:

    def _sweep_document(self, key, values, **kwargs):
        document = scenario_document(n_samples=101, **kwargs)
        document['sweep'] = {key: values}
        return document

    def test_decoherence_time_halves(self, tmp_path):
        config = parse_scenario(self._sweep_document('reservoir.0.delta2', [1, 2, 4, 8]))
        rows, path = run_sweep(config, jobs=1, out_dir=tmp_path)
        t_D = [row['t_D'] for row in rows]
        for previous, current in zip(t_D, t_D[1:]):
            assert current == pytest.approx(previous / 2, rel=1e-6)
        assert path.name == 'thermal_m1_sweep.csv'

    def test_inverse_square_root_of_modes(self, tmp_path):
        config = parse_scenario(self._sweep_document('reservoir.0.count', [1, 4, 16], delta2=3.0))
        rows, _ = run_sweep(config, jobs=1, out_dir=tmp_path)
        assert rows[1]['t_D'] == pytest.approx(rows[0]['t_D'] / 2, rel=1e-9)
        assert rows[2]['t_D'] == pytest.approx(rows[0]['t_D'] / 4, rel=1e-9)

    def test_failures_are_recorded(self, tmp_path):
        config = parse_scenario(self._sweep_document('reservoir.0.delta2', [1, -1, 2]))
        rows, path = run_sweep(config, jobs=1, out_dir=tmp_path)
        assert rows[0]['error'] is None and rows[2]['error'] is None
        assert 'delta2' in rows[1]['error']
        frame = pd.read_csv(path)
        assert list(frame['index']) == [0, 1, 2]

    def test_single_point_without_grid(self, tmp_path):
        rows, _ = run_sweep(parse_scenario(scenario_document(n_samples=101)), jobs=1, out_dir=tmp_path)
        assert len(rows) == 1

    def test_identical_across_worker_counts(self, tmp_path):
        config = parse_scenario(self._sweep_document('reservoir.0.delta2', [1, 2, 3, 4, 5, 6]))
        _, serial = run_sweep(config, jobs=1, out_dir=tmp_path / 'serial')
        _, parallel = run_sweep(config, jobs=3, out_dir=tmp_path / 'parallel')
        assert serial.read_bytes() == parallel.read_bytes()

    def test_curves_written_on_request(self, tmp_path):
        config = parse_scenario(self._sweep_document('reservoir.0.delta2', [1, 2]))
        run_sweep(config, jobs=1, out_dir=tmp_path, write_curves=True)
        assert (tmp_path / 'thermal_m1_00000.csv').exists()
        assert (tmp_path / 'thermal_m1_00001.report.json').exists()

    @pytest.mark.slow
    def test_large_analytic_sweep(self, tmp_path):
        import time
        document = scenario_document(n_samples=1000, count=200, delta2=2.0)
        document['sweep'] = {'reservoir.0.delta2': [1 + i / 1000 for i in range(100)],
                             'reservoir.0.coupling': [0.1 + i / 1000 for i in range(100)]}
        started = time.perf_counter()
        rows, _ = run_sweep(parse_scenario(document), jobs=4, out_dir=tmp_path)
        assert len(rows) == 10_000
        assert all(row['error'] is None for row in rows)
        assert time.perf_counter() - started < 60
