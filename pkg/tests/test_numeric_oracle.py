import math

import numpy as np
import pytest

from services.analytic_engine import decoherence_time, linear_entropy, thermal_linear_entropy
from services.errors import FitError, InvalidStateError, NoDecoherenceError, PreconditionError, SizeCapError
from services.model_spec import (
    ModelSpec,
    ReservoirSpec,
    make_custom_mode,
    make_fock_system,
    make_phase_state_mode,
    make_thermal_mode,
)
from services.numeric_oracle import (
    FullState,
    build_energy_table,
    build_full_initial_state,
    coarse_grain,
    detect_revivals,
    diagonal_projection,
    evolve_full_state,
    evolve_linear_entropy,
    fit_decoherence_time,
    mode_density_matrix,
    recurrence_distance,
    reduced_state,
)
from services.series import TimeSeries


def _oracle(model, sys, res, times):
    modes = [mode_density_matrix(dist) for dist in res.distributions]
    state = build_full_initial_state(sys, modes)
    table = build_energy_table(model, (sys.dim, [dist.dim for dist in res.distributions]))
    return evolve_linear_entropy(state, table, times)


def _analytic(model, sys, res, times):
    return TimeSeries(times, linear_entropy(model, sys, res, times))


class TestInitialState:

    def test_vacuum_product(self):
        state = build_full_initial_state(make_fock_system(0, dim=2),
                                         [mode_density_matrix(make_custom_mode([1.0, 0.0]))])
        assert np.allclose(state.rho, np.diag([1.0, 0, 0, 0]))

    def test_phase_state_entries(self, superposition):
        mode = mode_density_matrix(make_phase_state_mode(2))
        assert np.allclose(np.abs(mode), 1 / 3)
        state = build_full_initial_state(superposition, [mode])
        assert state.D == 6
        assert np.allclose(np.abs(state.rho), 1 / 6)

    def test_trace_and_purity(self, superposition):
        state = build_full_initial_state(superposition, [mode_density_matrix(make_thermal_mode(1.0))])
        assert abs(np.trace(state.rho) - 1.0) <= 1e-12
        assert state.is_positive()

    def test_size_cap(self, superposition):
        mode = mode_density_matrix(make_phase_state_mode(20))
        with pytest.raises(SizeCapError) as excinfo:
            build_full_initial_state(superposition, [mode, mode], cap=100)
        assert excinfo.value.dimension == 2 * 21 * 21

    def test_invalid_mode(self, superposition):
        with pytest.raises(InvalidStateError):
            build_full_initial_state(superposition, [np.diag([0.8, 0.8])])

    def test_full_state_rejects_shape(self):
        with pytest.raises(InvalidStateError):
            FullState((2, (3,)), np.eye(4) / 4)

    def test_full_state_rejects_negative_eigenvalue(self):
        rho = np.diag([0.6, 0.6, -0.2, 0.0]).astype(complex)
        with pytest.raises(InvalidStateError) as excinfo:
            FullState((2, (2,)), rho)
        assert 'positive semidefinite' in str(excinfo.value)


ORACLE_CASES = [
    ('thermal', 1, 1, 0.7),
    ('thermal', 1, 2, 1.5),
    ('thermal', 1, 3, 4.0),
    ('phase', 1, 3, 3),
    ('phase', '1/2', 1, 10),
    ('phase', '1/2', 2, 6),
    ('thermal', '1/2', 2, 1.5),
]


class TestOracleEquivalence:

    @pytest.mark.parametrize('kind,y,M,param', ORACLE_CASES)
    def test_matches_engine(self, superposition, kind, y, M, param):
        model = ModelSpec(couplings=(0.1, 0.2, 0.3)[:M], y=y, g=1.0, omega=0.5)
        mode = make_thermal_mode(param) if kind == 'thermal' else make_phase_state_mode(param, 1)
        res = ReservoirSpec.from_model(model, [mode] * M)
        times = np.linspace(0, 100, 200)
        oracle = _oracle(model, superposition, res, times)
        analytic = linear_entropy(model, superposition, res, times)
        assert np.max(np.abs(oracle.values - analytic)) <= 1e-10

    def test_thermal_closed_form(self, superposition):
        model = ModelSpec(couplings=(0.1,))
        res = ReservoirSpec.from_model(model, [make_thermal_mode(0.7)])
        times = np.linspace(0, 100, 200)
        oracle = _oracle(model, superposition, res, times)
        closed = thermal_linear_entropy(1, 0.7, 0.1, 1.0, times)
        assert np.max(np.abs(oracle.values - closed)) <= 1e-10

    def test_phase_index_is_irrelevant(self, superposition):
        model = ModelSpec(couplings=(0.1,), g=1.0)
        times = np.linspace(0, 100, 200)
        series = [
            _oracle(model, superposition, ReservoirSpec.from_model(model, [make_phase_state_mode(6, m)]), times)
            for m in (0, 3)
        ]
        assert np.max(np.abs(series[0].values - series[1].values)) <= 1e-12

    def test_free_and_kerr_terms_drop_out(self, superposition):
        res_modes = [mode_density_matrix(make_phase_state_mode(2))]
        times = np.linspace(0, 5, 11)
        entropies = []
        reduced = []
        for omega, g, Omega in ((0.0, 0.0, 1.0), (0.7, 1.3, 2.1)):
            model = ModelSpec(couplings=(0.3,), omega=omega, g=g, Omega=Omega)
            state = build_full_initial_state(superposition, res_modes)
            table = build_energy_table(model, (2, [3]))
            entropies.append(evolve_linear_entropy(state, table, times).values)
            reduced.append(reduced_state(state, table, 1.0))
        assert np.allclose(entropies[0], entropies[1], atol=1e-12)
        assert not np.allclose(reduced[0], reduced[1], atol=1e-3)

    def test_reservoir_coherences_drop_out(self, superposition):
        model = ModelSpec(couplings=(0.2,), g=1.0)
        full = mode_density_matrix(make_phase_state_mode(3, 1))
        table = build_energy_table(model, (2, [4]))
        times = np.linspace(0, 40, 25)
        with_coherences = evolve_linear_entropy(build_full_initial_state(superposition, [full]), table, times)
        diagonal = evolve_linear_entropy(
            build_full_initial_state(superposition, [diagonal_projection(full)]), table, times)
        assert np.max(np.abs(with_coherences.values - diagonal.values)) <= 1e-12

    def test_decoupled_stays_constant(self, superposition):
        model = ModelSpec(couplings=(0.0, 0.0), g=1.0, omega=0.3)
        res = ReservoirSpec.from_model(model, [make_thermal_mode(1.0), make_phase_state_mode(3)])
        oracle = _oracle(model, superposition, res, np.linspace(0, 50, 40))
        assert np.max(np.abs(oracle.values - oracle.values[0])) <= 1e-12


class TestEvolution:

    def test_reduced_state_starts_at_system_state(self, superposition):
        model = ModelSpec(couplings=(0.1,))
        modes = [mode_density_matrix(make_thermal_mode(1.0))]
        state = build_full_initial_state(superposition, modes)
        table = build_energy_table(model, (2, [modes[0].shape[0]]))
        assert np.allclose(reduced_state(state, table, 0.0), superposition.B, atol=1e-12)

    def test_full_evolution_is_unitary(self, superposition):
        model = ModelSpec(couplings=(0.1,), g=1.0)
        modes = [mode_density_matrix(make_phase_state_mode(4))]
        state = build_full_initial_state(superposition, modes)
        table = build_energy_table(model, (2, [5]))
        evolved = evolve_full_state(state, table, 17.0)
        assert evolved.purity == pytest.approx(1.0, abs=1e-12)
        assert np.trace(evolved.rho) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize('t', [0.5, 3.0, 17.0])
    def test_mixed_state_purity_conserved(self, superposition, t):
        model = ModelSpec(couplings=(0.1, 0.2), g=1.0, omega=0.4)
        modes = [mode_density_matrix(make_thermal_mode(1.0)), mode_density_matrix(make_phase_state_mode(2))]
        state = build_full_initial_state(superposition, modes)
        table = build_energy_table(model, (2, [m.shape[0] for m in modes]))
        assert state.purity < 1.0
        assert evolve_full_state(state, table, t).purity == pytest.approx(state.purity, abs=1e-12)

    def test_full_and_diagonal_paths_agree(self, superposition):
        model = ModelSpec(couplings=(0.1, 0.2), g=1.0)
        modes = [mode_density_matrix(make_phase_state_mode(2)), mode_density_matrix(make_thermal_mode(2.0))]
        state = build_full_initial_state(superposition, modes)
        table = build_energy_table(model, (2, [m.shape[0] for m in modes]))
        full = evolve_full_state(state, table, 9.0).rho.reshape(2, state.reservoir_dim, 2, state.reservoir_dim)
        traced = np.einsum('arbr->ab', full)
        assert np.allclose(traced, reduced_state(state, table, 9.0), atol=1e-12)

    def test_kerr_recurrence_with_coupling(self, superposition):
        # Number-state reservoir: the coupling phase closes together with the Kerr phase
        model = ModelSpec(couplings=(0.1,), g=1.0, omega=1.0)
        state = build_full_initial_state(superposition, [mode_density_matrix(make_custom_mode([1.0]))])
        table = build_energy_table(model, (2, [1]))
        assert recurrence_distance(state, table, math.pi) < 1e-10

    def test_kerr_recurrence_without_coupling(self, superposition):
        model = ModelSpec(couplings=(0.0,), g=1.0, omega=1.0)
        modes = [mode_density_matrix(make_phase_state_mode(2))]
        state = build_full_initial_state(superposition, modes)
        table = build_energy_table(model, (2, [3]))
        assert recurrence_distance(state, table, math.pi) < 1e-10
        assert recurrence_distance(state, table, math.pi / 2) > 0.1


class TestDecoherenceFit:

    def test_fig1_fit(self, superposition, thermal_fig1):
        model, res = thermal_fig1
        t_D = decoherence_time(model, superposition, res)
        fit = fit_decoherence_time(_analytic(model, superposition, res, np.linspace(0, 0.05 * t_D, 129)))
        assert 0.1 * fit.t_D == pytest.approx(0.0316, abs=1e-4)
        assert fit.t_D == pytest.approx(t_D, rel=0.01)
        assert abs(fit.delta1) * fit.t_D < 1e-6

    def test_half_power_fit(self, superposition, half_power_phase):
        model, res = half_power_phase
        t_D = decoherence_time(model, superposition, res)
        fit = fit_decoherence_time(_analytic(model, superposition, res, np.linspace(0, 0.05 * t_D, 129)))
        assert 0.1 * fit.t_D == pytest.approx(0.347, rel=0.01)
        assert abs(fit.delta1) * fit.t_D < 1e-6

    def test_wide_window_shrinks(self, superposition, thermal_fig1):
        model, res = thermal_fig1
        t_D = decoherence_time(model, superposition, res)
        fit = fit_decoherence_time(_analytic(model, superposition, res, np.linspace(0, 2 * t_D, 2049)))
        assert fit.window < 2 * t_D
        assert fit.t_D == pytest.approx(t_D, rel=0.01)

    def test_full_curve_without_window_hint(self, superposition, thermal_fig1):
        # lambda t in [0, 7] covers the decay plateau and the first revival
        model, res = thermal_fig1
        fit = fit_decoherence_time(_analytic(model, superposition, res, np.linspace(0, 70, 40001)))
        assert 0.1 * fit.t_D == pytest.approx(0.0316, abs=1e-4)
        assert fit.t_D == pytest.approx(decoherence_time(model, superposition, res), rel=0.01)
        assert fit.window < fit.t_D

    def test_decaying_onset_needs_narrow_window(self):
        times = np.linspace(0, 10, 2001)
        values = 0.5 * (1.0 - np.exp(-times ** 2)) * np.exp(-times)
        fit = fit_decoherence_time(TimeSeries(times, values))
        assert fit.delta2 == pytest.approx(0.5, rel=0.01)

    def test_oracle_fit(self, superposition):
        model = ModelSpec(couplings=(0.1, 0.2))
        res = ReservoirSpec.from_model(model, [make_phase_state_mode(3)] * 2)
        t_D = decoherence_time(model, superposition, res)
        fit = fit_decoherence_time(_oracle(model, superposition, res, np.linspace(0, 0.05 * t_D, 129)))
        assert fit.t_D == pytest.approx(t_D, rel=0.01)

    def test_revival_curvature_matches_onset(self, superposition, thermal_fig1):
        model, res = thermal_fig1
        t_D = decoherence_time(model, superposition, res)
        t_R = 2 * math.pi / 0.1
        offsets = np.linspace(0, 0.05 * t_D, 129)
        revival = TimeSeries(offsets, linear_entropy(model, superposition, res, t_R + offsets))
        onset = _analytic(model, superposition, res, offsets)
        assert fit_decoherence_time(revival).delta2 == pytest.approx(fit_decoherence_time(onset).delta2, rel=0.01)

    def test_flat_series(self):
        with pytest.raises(NoDecoherenceError):
            fit_decoherence_time(TimeSeries(np.linspace(0, 1, 50), np.zeros(50)))

    def test_too_few_samples(self):
        times = np.linspace(0, 1, 5)
        with pytest.raises(FitError):
            fit_decoherence_time(TimeSeries(times, times ** 2))

    def test_must_start_at_zero(self):
        times = np.linspace(1, 2, 20)
        with pytest.raises(PreconditionError):
            fit_decoherence_time(TimeSeries(times, times ** 2))


class TestRevivalDetection:

    def test_revival_found(self, superposition, thermal_fig1):
        model, res = thermal_fig1
        series = _analytic(model, superposition, res, np.linspace(0, 4 * math.pi / 0.1, 401))
        events = detect_revivals(series, 1e-3)
        assert len(events) == 1
        assert 0.1 * events[0].time == pytest.approx(2 * math.pi)
        assert events[0].depth < 1e-12
        assert events[0].full_width > 0

    def test_half_power_has_none(self, superposition):
        model = ModelSpec(couplings=(0.1,), y='1/2')
        res = ReservoirSpec.from_model(model, [make_phase_state_mode(8)])
        series = _analytic(model, superposition, res, np.linspace(0, 13 / 0.1, 2001))
        assert detect_revivals(series, 1e-3) == []

    def test_decoupled_has_none(self, superposition):
        model = ModelSpec(couplings=(0.0,))
        res = ReservoirSpec.from_model(model, [make_thermal_mode(0.5)])
        series = _analytic(model, superposition, res, np.linspace(0, 100, 300))
        assert detect_revivals(series, 1e-3) == []

    def test_threshold_range(self):
        with pytest.raises(PreconditionError):
            detect_revivals(TimeSeries([0, 1, 2], [0, 1, 0]), 1.5)


class TestCoarseGrain:

    def test_zero_resolution_is_identity(self):
        series = TimeSeries(np.linspace(0, 1, 11), np.linspace(0, 1, 11) ** 2)
        assert np.array_equal(coarse_grain(series, 0.0).values, series.values)

    def test_constant_unchanged(self):
        series = TimeSeries(np.linspace(0, 10, 101), np.full(101, 0.5))
        assert np.allclose(coarse_grain(series, 2.0).values, 0.5, atol=1e-15)

    def test_undersampled(self):
        series = TimeSeries(np.linspace(0, 10, 11), np.zeros(11))
        with pytest.raises(PreconditionError):
            coarse_grain(series, 2.0)

    def test_revival_dip_washed_out(self, superposition, thermal_fig1):
        model, res = thermal_fig1
        lambda_t = np.linspace(0, 7, 2001)
        series = _analytic(model, superposition, res, lambda_t / 0.1)
        tau_R = 2 * decoherence_time(model, superposition, res)
        coarse = coarse_grain(series, 20 * tau_R)

        near = np.abs(lambda_t - 2 * math.pi) < 0.2
        plateau = int(np.argmin(np.abs(lambda_t - 5.0)))

        def dip(values):
            return values[plateau] - values[near].min()

        assert dip(coarse.values) * 5 <= dip(series.values)
