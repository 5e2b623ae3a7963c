"""Experiment runners: pump, Ramsey, echo, relaxation, ensembles."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

import donorspin as d
from donorspin.sequences import readout_photon_signal
from conftest import pulse_for_angle, spike_bath

TWO_PI = 2.0 * math.pi


@pytest.fixture(scope="module")
def ramsey_delays(half_pi_pulse):
    # three sparse delays: too few for a fringe fit, ideal for
    # point-by-point comparison against brute-force evolution
    w = half_pi_pulse.half_window
    return np.array([2.0 * w, 2.0 * w + 3.1e-11, 2.0 * w + 7.3e-11])


def brute_force_ramsey(tau, levels, pulse, dissipators, detuning=0.0):
    """Reference route: full master-equation evolution of both pulses."""
    w = pulse.half_window
    second = replace(pulse, arrival_time=float(tau))
    result = d.evolve(d.DensityMatrix.pure(d.GROUND_DOWN), levels,
                      [pulse, second], dissipators, t_span=(-w, tau + w),
                      spin_detuning=detuning)
    return result.final.p_up


class TestSegmentsAndTraces:
    def test_sequence_spec_duration(self, half_pi_pulse):
        spec = d.SequenceSpec((d.PumpSegment(1e-6, 1e8),
                               d.ControlPulseSegment(half_pi_pulse),
                               d.WaitSegment(2e-9),
                               d.ReadoutSegment()))
        expected = 1e-6 + 2.0 * half_pi_pulse.half_window + 2e-9
        assert spec.total_duration == pytest.approx(expected, rel=1e-12)
        kinds = [entry["kind"] for entry in spec.describe()]
        assert kinds == ["pump", "control_pulse", "wait", "readout"]

    def test_sequence_spec_validation(self):
        with pytest.raises(d.ValidationError):
            d.SequenceSpec((d.WaitSegment(-1e-9),))
        with pytest.raises(d.ValidationError):
            d.SequenceSpec(("wait",))

    def test_trace_validation_catches_population_sum(self):
        with pytest.raises(d.ValidationError):
            d.ExperimentTrace(abscissa=np.array([0.0, 1.0]),
                              abscissa_name="t_s",
                              p_up=np.array([0.7, 0.7]),
                              p_down=np.array([0.7, 0.2])).validate()

    def test_trace_rows_carry_units_and_stderr(self):
        trace = d.ExperimentTrace(
            abscissa=np.array([1e-9]), abscissa_name="tau_s",
            p_up=np.array([0.4]), p_down=np.array([0.6]),
            p_up_stderr=np.array([0.01]), p_down_stderr=np.array([0.01]))
        header, rows = trace.as_rows()
        assert header == ["tau_s", "p_up", "p_up_stderr", "p_down",
                          "p_down_stderr"]
        assert len(rows) == 1 and len(rows[0]) == 5

    def test_scramble(self):
        rho = d.scramble(d.DensityMatrix.pure(d.GROUND_UP))
        assert rho.p_up == pytest.approx(0.5)
        assert rho.p_down == pytest.approx(0.5)
        assert rho.purity() == pytest.approx(0.5)


class TestInjectedDecoherence:
    def test_envelope_and_ratio_compose(self):
        inj = d.InjectedDecoherence(50e-6, 3.0)
        t0, t1 = 20e-6, 70e-6
        assert inj.ratio(t0, t1) == pytest.approx(
            inj.envelope(t1) / inj.envelope(t0), rel=1e-12)
        assert inj.ratio(0.0, t0) * inj.ratio(t0, t1) == pytest.approx(
            float(inj.envelope(t1)), rel=1e-12)

    def test_validation(self):
        with pytest.raises(d.ValidationError):
            d.InjectedDecoherence(0.0)
        with pytest.raises(d.ValidationError):
            d.InjectedDecoherence(1e-6, exponent=0.5)


class TestOpticalPump:
    def test_strong_pump_initializes_spin_down(self, levels_5t, lossy):
        result = d.optical_pump(d.DensityMatrix.scrambled(), levels_5t,
                                rabi=TWO_PI * 20e6, duration=10e-6,
                                dissipators=lossy, samples=400)
        assert result.fidelity > 0.95
        assert result.final.trace_error() < 1e-9
        assert np.all(result.emission_rate >= -1e-12)

    def test_no_drive_means_no_initialization(self, levels_5t, lossy):
        result = d.optical_pump(d.DensityMatrix.scrambled(), levels_5t,
                                rabi=0.0, duration=1e-6, dissipators=lossy)
        assert result.fidelity == pytest.approx(0.5, abs=1e-6)

    def test_readout_signal_tracks_spin_up(self, levels_5t, lossy):
        up, _ = readout_photon_signal(d.DensityMatrix.pure(d.GROUND_UP),
                                      levels_5t, TWO_PI * 20e6, 5e-6, lossy)
        down, _ = readout_photon_signal(d.DensityMatrix.pure(d.GROUND_DOWN),
                                        levels_5t, TWO_PI * 20e6, 5e-6, lossy)
        assert up > 10.0 * max(down, 1e-12)

    def test_validation(self, levels_5t, lossy):
        with pytest.raises(d.ValidationError):
            d.optical_pump(None, levels_5t, 1e8, 0.0, lossy)
        with pytest.raises(d.ValidationError):
            d.optical_pump(None, levels_5t, -1e8, 1e-6, lossy)
        with pytest.raises(d.ValidationError):
            d.PumpSettings(rabi=1e8, duration=1e-6, samples=0)


class TestRotationAngle:
    def test_high_field_value_frozen(self, levels_5t, half_pi_pulse):
        # at 5 T the spin precesses appreciably within the pulse window,
        # so the realized angle falls short of the impulsive-limit pi/2
        angle = d.extracted_rotation_angle(levels_5t, half_pi_pulse)
        assert angle == pytest.approx(1.1661922368640243, rel=1e-9)

    def test_coherence_consistent_with_angle(self, levels_5t, quiet,
                                             half_pi_pulse):
        angle = d.extracted_rotation_angle(levels_5t, half_pi_pulse)
        w = half_pi_pulse.half_window
        final = d.evolve(d.DensityMatrix.pure(d.GROUND_DOWN), levels_5t,
                         [half_pi_pulse], quiet, t_span=(-w, w)).final
        assert abs(final.matrix[d.GROUND_DOWN, d.GROUND_UP]) == \
            pytest.approx(math.sin(angle) / 2.0, abs=1e-5)

    def test_low_field_approaches_impulsive_limit(self, levels_low_field):
        pulse = pulse_for_angle(levels_low_field, math.pi / 2)
        angle = d.extracted_rotation_angle(levels_low_field, pulse)
        assert angle == pytest.approx(math.pi / 2, rel=0.03)

    def test_rabi_populations_match_extracted_angle(self, levels_low_field,
                                                    quiet):
        pulse = pulse_for_angle(levels_low_field, math.pi / 2)
        energies = [d.energy_for_rotation_angle(pulse, levels_low_field, a)
                    for a in (0.4, math.pi / 2, 2.5)]
        pops = d.rabi_populations(energies, levels_low_field, pulse, quiet,
                                  expm_steps=1024)
        for energy, p_up in zip(energies, pops):
            theta = d.extracted_rotation_angle(
                levels_low_field, replace(pulse, energy=energy))
            assert p_up == pytest.approx(math.sin(theta / 2.0) ** 2,
                                         abs=1e-9)

    def test_rabi_sweep_trace(self, levels_low_field, quiet):
        pulse = pulse_for_angle(levels_low_field, math.pi / 2)
        e_pi = d.energy_for_rotation_angle(pulse, levels_low_field, math.pi)
        energies = np.linspace(0.0, e_pi, 9)
        trace = d.run_rabi_sweep(energies, levels_low_field, pulse, quiet)
        assert trace.abscissa_name == "pulse_energy_J"
        assert trace.p_up[0] == pytest.approx(0.0, abs=1e-9)
        assert trace.p_up[-1] > 0.99
        assert np.all(np.diff(trace.p_up) > 0)  # rising toward inversion

    def test_fringe_visibility_matches_angle(self, levels_low_field, quiet):
        pulse = pulse_for_angle(levels_low_field, math.pi / 2)
        theta = d.extracted_rotation_angle(levels_low_field, pulse,
                                           expm_steps=256)
        vis = d.fringe_visibilities([pulse.energy], levels_low_field, pulse,
                                    quiet)
        assert vis[0] == pytest.approx(math.sin(theta) ** 2 / 2.0, rel=1e-3)


class TestRamseyDualRoute:
    def test_matches_brute_force_no_bath(self, levels_5t, lossy,
                                         half_pi_pulse, ramsey_delays):
        result = d.run_ramsey(ramsey_delays, levels_5t, half_pi_pulse, lossy)
        for k, tau in enumerate(ramsey_delays):
            brute = brute_force_ramsey(tau, levels_5t, half_pi_pulse, lossy)
            assert result.trace.p_up[k] == pytest.approx(brute, abs=5e-5)

    def test_zero_delay_composes_windows(self, levels_5t, lossy,
                                         half_pi_pulse):
        result = d.run_ramsey(np.array([0.0]), levels_5t, half_pi_pulse,
                              lossy)
        w = d.pulse_window_propagator(levels_5t, half_pi_pulse, lossy)
        v = (w @ w) @ d.DensityMatrix.pure(d.GROUND_DOWN).matrix.reshape(16)
        expected = float(np.real(v.reshape(4, 4)[d.GROUND_UP, d.GROUND_UP]))
        assert result.trace.p_up[0] == pytest.approx(expected, abs=1e-12)

    def test_detuned_matches_brute_force_within_window_bound(
            self, levels_5t, quiet, half_pi_pulse, ramsey_delays):
        # the factorized path applies the frozen detuning only during
        # the silences, so the two routes may differ by up to the phase
        # accrued across one pulse window
        delta = TWO_PI * 30e6
        bath = spike_bath(delta, 1.97)
        result = d.run_ramsey(ramsey_delays, levels_5t, half_pi_pulse,
                              quiet, bath=bath, ensemble_mode="exact")
        bound = delta * 2.0 * half_pi_pulse.half_window + 1e-4
        for k, tau in enumerate(ramsey_delays):
            brute = brute_force_ramsey(tau, levels_5t, half_pi_pulse, quiet,
                                       detuning=delta)
            assert abs(result.trace.p_up[k] - brute) < bound

    def test_injected_channel_scales_fringe(self, levels_5t, quiet,
                                            half_pi_pulse, ramsey_delays):
        plain = d.run_ramsey(ramsey_delays, levels_5t, half_pi_pulse, quiet)
        injected = d.InjectedDecoherence(1e-10, 1.0)
        damped = d.run_ramsey(ramsey_delays, levels_5t, half_pi_pulse, quiet,
                              injected=injected)
        # the channel damps only the coherence pathway, so solving
        # damped = base + envelope * (plain - base) at each delay must
        # recover one common population baseline
        factors = injected.envelope(ramsey_delays)
        baselines = (damped.trace.p_up - factors * plain.trace.p_up) \
            / (1.0 - factors)
        assert np.ptp(baselines) < 1e-9
        # and the damped signal stays strictly between baseline and plain
        shrink = np.abs(damped.trace.p_up - baselines) \
            / np.abs(plain.trace.p_up - baselines)
        assert np.allclose(shrink, factors, rtol=1e-6)


class TestRamseyEnsembles:
    def test_mc_agrees_with_exact(self, levels_5t, quiet, half_pi_pulse):
        bath = d.BathModel.gaussian(17e-9, 1.97)
        window = d.ramsey_window_plan([8e-9],
                                      levels_5t.electron_splitting)[0]
        exact = d.run_ramsey(window, levels_5t, half_pi_pulse, quiet,
                             bath=bath, ensemble_mode="exact")
        mc = d.run_ramsey(window, levels_5t, half_pi_pulse, quiet, bath=bath,
                          ensemble_mode="mc", bath_samples=600, seed=2)
        assert mc.trace.p_up_stderr is not None
        assert np.all(mc.trace.p_up_stderr > 0)
        pull = (mc.visibilities[0] - exact.visibilities[0]) \
            / mc.visibility_stderr[0]
        assert abs(pull) < 5.0

    def test_generic_average_equals_factorized_mc(self, levels_5t, quiet,
                                                  half_pi_pulse):
        bath = d.BathModel.gaussian(17e-9, 1.97)
        window = d.ramsey_window_plan([6e-9],
                                      levels_5t.electron_splitting)[0]

        def per_donor(detuning):
            one = spike_bath(detuning, bath.electron_g)
            return d.run_ramsey(window, levels_5t, half_pi_pulse, quiet,
                                bath=one, ensemble_mode="exact").trace

        generic = d.ensemble_average(per_donor, bath, n=150, seed=5)
        factorized = d.run_ramsey(window, levels_5t, half_pi_pulse, quiet,
                                  bath=bath, ensemble_mode="mc",
                                  bath_samples=150, seed=5)
        assert np.allclose(generic.p_up, factorized.trace.p_up, atol=1e-9)
        assert np.allclose(generic.p_up_stderr,
                           factorized.trace.p_up_stderr, atol=1e-9)

    def test_visibility_tracks_bath_envelope(self, levels_5t, quiet,
                                             half_pi_pulse):
        bath = d.BathModel.gaussian(17e-9, 1.97)
        centers = np.array([4e-9, 12e-9, 20e-9])
        windows = d.ramsey_window_plan(centers,
                                       levels_5t.electron_splitting)
        result = d.run_ramsey(windows, levels_5t, half_pi_pulse, quiet,
                              bath=bath, ensemble_mode="exact")
        reference = d.run_ramsey(windows, levels_5t, half_pi_pulse, quiet)
        ratio = result.visibilities / reference.visibilities
        # the frozen detuning acts over the silence between the pulse
        # windows, hence the 2w offset in the envelope argument
        silence = centers - 2.0 * half_pi_pulse.half_window
        assert np.allclose(ratio, bath.envelope(silence), rtol=1e-4)


class TestEcho:
    def test_long_time_amplitude_refocuses_static_bath(self, levels_5t,
                                                       quiet, half_pi_pulse):
        larmor = levels_5t.electron_splitting
        amplitudes = []
        for tau1 in (2e-7, 2e-6):
            for t2_star in (5e-9, 17e-9, 50e-9):
                scan = d.ramsey_window_plan([tau1], larmor)[0]
                bath = d.BathModel.gaussian(t2_star, 1.97)
                amplitudes.append(d.run_echo(tau1, scan, levels_5t,
                                             half_pi_pulse, quiet,
                                             bath=bath).amplitude)
        assert np.ptp(amplitudes) < 1e-5
        assert amplitudes[0] == pytest.approx(0.128096, abs=2e-4)

    def test_amplitude_matches_three_pulse_pathway(self, levels_5t, quiet,
                                                   half_pi_pulse):
        # surviving pathway for three identical theta pulses:
        # sin^2(theta) sin^2(theta/2) / 2
        theta = d.extracted_rotation_angle(levels_5t, half_pi_pulse)
        expected = math.sin(theta) ** 2 * math.sin(theta / 2.0) ** 2 / 2.0
        scan = d.ramsey_window_plan([5e-7],
                                    levels_5t.electron_splitting)[0]
        bath = d.BathModel.gaussian(17e-9, 1.97)
        amplitude = d.run_echo(5e-7, scan, levels_5t, half_pi_pulse, quiet,
                               bath=bath).amplitude
        assert amplitude == pytest.approx(expected, rel=1e-3)

    def test_injected_exponential_roundtrip(self, levels_5t, quiet,
                                            half_pi_pulse):
        # the nanosecond-scale bath isolates the refocused pathway at
        # microsecond delays, leaving the injected channel as the only
        # decay of the echo amplitude
        bath = d.BathModel.gaussian(17e-9, 1.97)
        injected = d.InjectedDecoherence(50e-6, 1.0)
        tau1_values = np.linspace(5e-6, 80e-6, 6)
        decay = d.run_echo_decay(tau1_values, levels_5t, half_pi_pulse,
                                 quiet, bath=bath, injected=injected)
        fit = d.fit_curve("exp_decay", decay.total_times, decay.amplitudes)
        assert fit.converged
        assert fit.parameters["t_decay"] == pytest.approx(50e-6, rel=1e-6)

    def test_injected_cubic_roundtrip(self, levels_5t, quiet,
                                      half_pi_pulse):
        bath = d.BathModel.gaussian(17e-9, 1.97)
        injected = d.InjectedDecoherence(60e-6, 3.0)
        tau1_values = np.linspace(10e-6, 60e-6, 6)
        decay = d.run_echo_decay(tau1_values, levels_5t, half_pi_pulse,
                                 quiet, bath=bath, injected=injected)
        fit = d.fit_curve("cubed_exp_decay", decay.total_times,
                          decay.amplitudes)
        assert fit.converged
        assert fit.parameters["t_decay"] == pytest.approx(60e-6, rel=1e-6)

    def test_rows_and_metadata(self, levels_5t, quiet, half_pi_pulse):
        decay = d.run_echo_decay(np.array([5e-6, 10e-6]), levels_5t,
                                 half_pi_pulse, quiet)
        header, rows = decay.as_rows()
        assert header == ["echo_total_s", "amplitude", "amplitude_stderr"]
        assert len(rows) == 2
        assert decay.metadata["experiment"] == "echo_decay"
        assert decay.total_times[0] == pytest.approx(10e-6, rel=1e-3)


class TestT1Recovery:
    def test_roundtrips_relaxation_time(self, levels_5t):
        diss = d.DissipatorSet(radiative_rate=1e9, t1_rate=10.0)
        pump = d.PumpSettings(rabi=TWO_PI * 20e6, duration=10e-6,
                              samples=200)
        waits = np.linspace(0.0, 0.5, 12)
        result = d.run_t1_recovery(waits, levels_5t, diss, pump)
        assert result.pump.fidelity > 0.95
        assert result.fitted_t1 == pytest.approx(0.1, rel=1e-6)
        assert result.trace.p_up[0] < 0.05
        assert result.trace.p_up[-1] == pytest.approx(0.5, abs=0.01)
        assert result.trace.metadata["t1_rate_per_s"] == 10.0

    def test_fit_can_be_skipped(self, levels_5t):
        diss = d.DissipatorSet(radiative_rate=1e9, t1_rate=10.0)
        pump = d.PumpSettings(rabi=TWO_PI * 20e6, duration=5e-6, samples=64)
        result = d.run_t1_recovery(np.array([0.0, 0.1]), levels_5t, diss,
                                   pump, fit_recovery=False)
        assert result.fit is None
        assert math.isnan(result.fitted_t1)


class TestValidation:
    def test_short_nonzero_delay_rejected(self, levels_5t, quiet,
                                          half_pi_pulse):
        w = half_pi_pulse.half_window
        with pytest.raises(d.ValidationError):
            d.run_ramsey(np.array([0.5 * w]), levels_5t, half_pi_pulse,
                         quiet)

    def test_aliased_window_rejected(self, levels_5t, quiet, half_pi_pulse):
        period = TWO_PI / levels_5t.electron_splitting
        window = 2e-9 + np.arange(5) * period  # stride of a full period
        with pytest.raises(d.ValidationError):
            d.run_ramsey(window, levels_5t, half_pi_pulse, quiet)

    def test_unordered_delays_rejected(self, levels_5t, quiet,
                                       half_pi_pulse):
        with pytest.raises(d.ValidationError):
            d.run_ramsey(np.array([3e-9, 2e-9]), levels_5t, half_pi_pulse,
                         quiet)

    def test_echo_tau1_inside_pulse_window_rejected(self, levels_5t, quiet,
                                                    half_pi_pulse):
        w = half_pi_pulse.half_window
        scan = d.ramsey_window_plan([2e-9],
                                    levels_5t.electron_splitting)[0]
        with pytest.raises(d.ValidationError):
            d.run_echo(w, scan, levels_5t, half_pi_pulse, quiet)

    def test_unknown_ensemble_mode_rejected(self, levels_5t, quiet,
                                            half_pi_pulse):
        bath = d.BathModel.gaussian(17e-9, 1.97)
        with pytest.raises(d.ValidationError):
            d.run_ramsey(np.array([2e-9]), levels_5t, half_pi_pulse, quiet,
                         bath=bath, ensemble_mode="sampled")

    def test_window_plan_rejects_sparse_sampling(self, levels_5t):
        with pytest.raises(d.ValidationError):
            d.ramsey_window_plan([2e-9], levels_5t.electron_splitting,
                                 points_per_period=4)
