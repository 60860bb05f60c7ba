# -*- coding: utf-8 -*-
"""Tests for `OM_Lib` package."""

import os
from dataclasses import replace

import matplotlib

matplotlib.use("Agg")

import numpy as np
import pytest
from scipy import integrate

from OM_Lib.cli import (
    UsageError,
    main,
    parse_frequency,
    parse_mass,
    parse_ratio,
    parse_temperature,
)
from OM_Lib.config import dump_config, load_config
from OM_Lib.exceptions import (
    DegenerateFitError,
    FitConvergenceError,
    InstabilityError,
    InsufficientDataError,
    NoPeakError,
    ParameterError,
)
from OM_Lib.models import (
    C_LIGHT,
    BackgroundModel,
    FeedbackConfig,
    OscillatorParams,
    ReadoutParams,
    background_variance,
    closed_loop_psd,
    closed_loop_susceptibility,
    cooling_factor_with_background,
    effective_q,
    effective_temperature,
    filter_response,
    from_db,
    in_loop_variance,
    langevin_force_psd,
    mode_variance,
    noise_reduction_r,
    offres_suppression,
    optimal_gain,
    per_rad_to_single_sided_hz,
    required_power,
    susceptibility,
    thermal_displacement_psd,
    thermal_variance,
    to_db,
    to_single_sided_hz,
)
from OM_Lib.Simulation import (
    ActuatorModel,
    BandpassFilter,
    LangevinSimulator,
    SimConfig,
    convergence_order,
    load_trajectory,
    ring_down_estimate,
    save_trajectory,
    simulate,
)
from OM_Lib.Spectral import (
    FitResult,
    ScanAverager,
    Spectrum,
    analytic_spectrum,
    band_variance,
    calibrate_gain,
    damping_line_scale,
    denormalize,
    extract_metrics,
    fit_damping_line,
    load_fit,
    load_spectrum,
    lorentzian_fit,
    lorentzian_psd,
    normalize_to_shot_noise,
    save_fit,
    save_spectrum,
    welch_psd,
    window_kernel,
)
from OM_Lib.Scenarios import (
    SCENARIOS,
    CoolingSpectra,
    GainSweep,
    Heating,
    OffResonanceCooling,
    OracleCheck,
    dip_depth,
)


def light_config(q=100.0, n_samples=2 ** 16, n_scans=32, **analysis):
    """
    Scaled mode (M = 1, Omega_M = 1) with a low Q so that scenarios run in seconds
    """
    cfg = load_config("scaled")
    p = OscillatorParams.from_q(1.0, 1.0, q)
    return replace(
        cfg,
        oscillator=p,
        readout=ReadoutParams.with_floor_below_peak(p, 40.0),
        feedback=replace(cfg.feedback, filter_center=p.omega_m),
        simulation=replace(cfg.simulation, n_samples=n_samples, n_scans=n_scans),
        background=BackgroundModel.from_peak_fraction(p, 0.01),
        analysis=replace(cfg.analysis, **analysis),
    )


def viscous_loop(p, g_over_gamma):
    return FeedbackConfig.from_ratio(p, g_over_gamma, filtered=False)


#
#   MODEL TESTS
#


def test_oscillator_params():
    p = OscillatorParams.from_hz(1e-5, 1858.9e3, 45.0)
    assert p.q == pytest.approx(41308.9, rel=1e-5)
    assert p.stiffness == pytest.approx(1e-5 * (2 * np.pi * 1858.9e3) ** 2)

    with pytest.raises(ParameterError):
        OscillatorParams(-1.0, 1.0, 0.01)
    with pytest.raises(ParameterError):
        OscillatorParams.from_q(1.0, 1.0, 0.0)


def test_susceptibility():
    p = OscillatorParams.from_q(2.0, 1.0, 100.0)
    assert susceptibility(p, 0.0) == pytest.approx(1.0 / p.stiffness)
    assert susceptibility(p, p.omega_m) == pytest.approx(1j / (p.mass_eff * p.gamma * p.omega_m))
    with pytest.raises(ParameterError):
        susceptibility(p, -1.0)


def test_fluctuation_dissipation():
    p = OscillatorParams.from_q(1.0, 1.0, 100.0)
    w = np.linspace(0.0, 5.0, 10001)
    assert np.allclose(
        thermal_displacement_psd(p, w),
        np.abs(susceptibility(p, w)) ** 2 * langevin_force_psd(p),
        rtol=1e-12,
        atol=0.0,
    )


def test_equipartition():
    p = OscillatorParams.from_q(1.0, 1.0, 100.0)

    def psd(w):
        return float(thermal_displacement_psd(p, w))

    peak, _ = integrate.quad(psd, 0.0, 2.0, points=[1.0], limit=1000, epsabs=0.0, epsrel=1e-10)
    tail, _ = integrate.quad(psd, 2.0, np.inf, limit=1000, epsabs=0.0, epsrel=1e-10)
    assert (peak + tail) / np.pi == pytest.approx(thermal_variance(p), rel=1e-6)


def test_noise_reduction():
    p = OscillatorParams.from_hz(1e-5, 1858.9e3, 45.0)
    gain = 19 * p.gamma
    assert noise_reduction_r(p.gamma, gain) == pytest.approx(20.0)
    assert effective_temperature(p, gain) == pytest.approx(15.0)
    assert effective_q(p, gain) == pytest.approx(p.q / 20.0)
    assert required_power(p, 0.0) == 0.0

    for g in (-1.0, -1.5):
        with pytest.raises(InstabilityError):
            noise_reduction_r(p.gamma, g * p.gamma)


def test_closed_loop_psd():
    p = OscillatorParams.from_q(1.0, 1.0, 1000.0)
    fb = FeedbackConfig.from_ratio(p, 9.0)
    ratio = closed_loop_psd(p, fb, p.omega_m) / thermal_displacement_psd(p, p.omega_m)
    assert ratio == pytest.approx(1.0 / 100.0, rel=1e-9)

    # the loop adds no fluctuations: the cooled variance follows T_fb
    value, _ = integrate.quad(
        lambda w: float(closed_loop_psd(p, fb, w)), 0.0, 10.0, points=[1.0], limit=500
    )
    assert value / np.pi == pytest.approx(thermal_variance(p) / 10.0, rel=1e-3)

    w = np.linspace(0.0, 5.0, 2001)
    assert np.allclose(
        closed_loop_psd(p, fb, w),
        np.abs(closed_loop_susceptibility(p, fb, w)) ** 2 * langevin_force_psd(p),
        rtol=1e-12,
        atol=0.0,
    )


def test_effective_temperature_falls_with_gain():
    p = OscillatorParams.from_hz(1e-5, 1858.9e3, 45.0)
    temperatures = [effective_temperature(p, g * p.gamma) for g in np.linspace(-0.9, 50.0, 200)]
    assert temperatures[0] == pytest.approx(10 * p.temperature)
    assert np.all(np.diff(temperatures) < 0)



def test_filter_response():
    fb = FeedbackConfig(gain=1.0, filter_center=2.0, filter_q=50.0)
    assert filter_response(fb, 2.0) == pytest.approx(1.0)
    edge = 2.0 * (1.0 + 0.5 / 50.0)
    assert abs(filter_response(fb, edge)) == pytest.approx(1 / np.sqrt(2), rel=2e-2)


def test_offres_suppression():
    p = OscillatorParams.from_q(1.0, 1.0, 1000.0)
    center = 800.0 / 1858.9
    strength = 1.2
    gain = strength * (1.0 - center ** 2) / center
    fb = FeedbackConfig(gain=gain, filter_center=center, filter_q=20.0)
    assert 1.0 / offres_suppression(p, fb, center) == pytest.approx(1 + strength ** 2, rel=1e-2)
    assert to_db(dip_depth(strength)) == pytest.approx(4.94, abs=0.01)

    omega = np.linspace(0.3, 0.6, 3001)
    deepest = np.max(1.0 / offres_suppression(p, fb, omega))
    assert 1 + strength ** 2 - 0.01 < deepest < 1.1 * dip_depth(strength)


def test_optimal_gain():
    p = OscillatorParams.from_q(1.0, 1.0, 1000.0)
    floor = ReadoutParams.with_floor_below_peak(p, 40.0).shot_noise_floor
    g = optimal_gain(p, floor)
    best = in_loop_variance(p, g, floor)
    assert best < in_loop_variance(p, 0.5 * g, floor)
    assert best < in_loop_variance(p, 2.0 * g, floor)
    assert optimal_gain(p, 0.0) == np.inf


def test_readout():
    p = OscillatorParams.from_q(1.0, 1.0, 1000.0)
    r = ReadoutParams.with_floor_below_peak(p, 40.0)
    assert r.shot_noise_floor / thermal_displacement_psd(p, p.omega_m) == pytest.approx(1e-4)
    assert r.phase_gain == pytest.approx(8 * 37000 / 810e-9)
    with pytest.raises(ParameterError):
        ReadoutParams(finesse=0.0)


def test_units():
    assert to_single_sided_hz(1.0) == 2.0
    assert per_rad_to_single_sided_hz(1.0) == pytest.approx(4 * np.pi)
    assert to_db(from_db(3.0)) == pytest.approx(3.0)


def test_background_saturation():
    p = OscillatorParams.from_q(1.0, 1.0, 1000.0)
    bg = BackgroundModel.from_peak_fraction(p, 0.01)
    band = 400 * p.gamma
    limit = 1.0 + mode_variance(p, 0.0, band) / background_variance(p, bg, 0.0, band)

    factors = [
        cooling_factor_with_background(p, bg, g * p.gamma, band, band_limited=True)
        for g in (0.0, 4.0, 39.0, 1e4)
    ]
    assert factors[0] == pytest.approx(1.0)
    assert np.all(np.diff(factors) > 0)
    assert factors[-1] == pytest.approx(limit, rel=1e-2)
    assert cooling_factor_with_background(
        p, BackgroundModel(), 19 * p.gamma, band
    ) == pytest.approx(20.0)


def test_background_band_clipped_at_zero():
    p = OscillatorParams.from_q(1.0, 1.0, 100.0)
    bg = BackgroundModel(2.0)
    # Omega_M +/- 2 rad/s reaches below 0: only [0, 3] rad/s is integrated
    assert background_variance(p, bg, 0.0, 4.0) == pytest.approx(3 * bg.level / np.pi)
    assert background_variance(p, bg, 0.0, 1.0) == pytest.approx(bg.level / np.pi)
    inside = replace(bg, affected_by_feedback=True)
    assert background_variance(p, inside, 0.0, 4.0) == pytest.approx(3 * bg.level / np.pi)
    assert background_variance(p, inside, 9 * p.gamma, 4.0) < background_variance(p, bg, 0.0, 4.0)



#
#   SIMULATION TESTS
#


def test_reproducible_runs():
    p = OscillatorParams.from_q(1.0, 1.0, 100.0)
    r = ReadoutParams.with_floor_below_peak(p, 40.0)
    cfg = SimConfig.for_oscillator(p, 4096, 4, seed=7)
    first = simulate(p, r, viscous_loop(p, 2.0), None, cfg)
    second = simulate(p, r, viscous_loop(p, 2.0), None, cfg)
    assert np.array_equal(first.x_series, second.x_series)
    assert np.array_equal(first.phase_series, second.phase_series)

    other = simulate(p, r, viscous_loop(p, 2.0), None, replace(cfg, seed=8))
    assert not np.array_equal(first.x_series, other.x_series)


def test_thermal_stream_independent_of_floor():
    p = OscillatorParams.from_q(1.0, 1.0, 100.0)
    cfg = SimConfig.for_oscillator(p, 2 ** 14, 2, seed=3)
    fb = FeedbackConfig(filter_center=p.omega_m, enabled=False)
    quiet = simulate(p, ReadoutParams(), fb, None, cfg)
    noisy = simulate(p, ReadoutParams.with_floor_below_peak(p, 20.0), fb, None, cfg)
    assert np.array_equal(quiet.x_series, noisy.x_series)
    assert not np.array_equal(quiet.phase_series, noisy.phase_series)


def test_open_loop_equipartition():
    p = OscillatorParams.from_q(1.0, 1.0, 20.0)
    cfg = SimConfig.for_oscillator(p, 2 ** 16, 16, seed=1)
    traj = simulate(p, None, None, None, cfg)
    assert np.var(traj.x_series) == pytest.approx(thermal_variance(p), rel=0.1)
    assert traj.metadata["integration"] == "linear"


def test_cold_damping_variance():
    p = OscillatorParams.from_q(1.0, 1.0, 20.0)
    cfg = SimConfig.for_oscillator(p, 2 ** 16, 16, seed=1)
    open_var = np.var(simulate(p, None, None, None, cfg).x_series)
    closed_var = np.var(simulate(p, None, viscous_loop(p, 4.0), None, cfg).x_series)
    assert open_var / closed_var == pytest.approx(5.0, rel=0.1)


def test_unstable_loop():
    p = OscillatorParams.from_q(1.0, 1.0, 100.0)
    cfg = SimConfig.for_oscillator(p, 1024, 2)
    with pytest.raises(InstabilityError):
        simulate(p, None, viscous_loop(p, -1.5), None, cfg)


def test_coarse_step():
    p = OscillatorParams.from_q(1.0, 1.0, 100.0)
    with pytest.raises(ParameterError):
        simulate(p, None, None, None, SimConfig(dt=0.2, n_samples=1024))
    with pytest.raises(ParameterError):
        SimConfig(dt=0.01, n_samples=1024, sensing="magic")


def test_actuator():
    act = ActuatorModel(max_power=0.5)
    lo, hi = act.force_limits
    assert act.bias_power == 0.25
    assert lo == pytest.approx(-hi)
    assert act.max_force == pytest.approx(2 * 0.25 / C_LIGHT)
    assert act.clips(np.array([0.0, 2 * hi]))
    assert not act.clips(np.array([0.5 * lo, 0.5 * hi]))
    assert act.apply(2 * hi) == pytest.approx(hi)
    assert ActuatorModel(saturate=False).apply(2 * hi) == 2 * hi


def test_saturating_actuator():
    p = OscillatorParams.from_q(1.0, 1.0, 100.0)
    cfg = SimConfig.for_oscillator(p, 2048, 2, burn_in=0, record_force=True)
    fb = viscous_loop(p, 4.0)
    act = ActuatorModel(max_power=1e-19, saturate=True)
    traj = simulate(p, None, fb, act, cfg)
    assert traj.metadata["integration"].startswith("stepwise")
    lo, hi = act.force_limits
    assert np.all(traj.force_series >= lo) and np.all(traj.force_series <= hi)


def test_controller_force_linear_in_gain():
    p = OscillatorParams.from_q(1.0, 1.0, 100.0)
    cfg = SimConfig.for_oscillator(p, 1024)
    sensed = 1e-10 * np.random.default_rng(0).standard_normal(1024)
    single = LangevinSimulator(p, feedback=viscous_loop(p, 2.0), config=cfg)
    double = LangevinSimulator(p, feedback=viscous_loop(p, 4.0), config=cfg)
    assert np.allclose(double.controller_force(sensed), 2 * single.controller_force(sensed))


def test_bandpass_filter():
    filt = BandpassFilter(1.0, 10.0, 0.05)
    assert filt.response(1.0)[0] == pytest.approx(1.0, abs=1e-9)
    assert filt.bandwidth == pytest.approx(0.1)

    x = np.random.default_rng(1).standard_normal(256)
    stepped = np.array([filt.update(v) for v in x])
    y, _ = filt.apply(x)
    assert np.allclose(stepped, y)

    with pytest.raises(ParameterError):
        BandpassFilter(100.0, 10.0, 0.05)


def test_ring_down():
    p = OscillatorParams.from_q(1.0, 1.0, 100.0).with_temperature(0.0)
    for g in (0.0, 4.0):
        gamma_fb = p.gamma * (1.0 + g)
        dt = SimConfig.for_oscillator(p, 2).dt
        n = int(6.0 / (gamma_fb * dt))
        cfg = SimConfig(dt=dt, n_samples=n, x0=1e-9, burn_in=0, sensing="ideal")
        traj = simulate(p, None, viscous_loop(p, g), None, cfg)
        assert ring_down_estimate(traj) == pytest.approx(gamma_fb, rel=0.03)


def test_convergence_order():
    p = OscillatorParams.from_q(1.0, 1.0, 100.0)
    dt = SimConfig.for_oscillator(p, 2).dt
    order, errors = convergence_order(p, [dt, dt / 2, dt / 4])
    print(order, errors)
    assert errors[0] > errors[1] > errors[2]
    assert 0.8 <= order <= 1.3


def test_trajectory_io(tmp_path):
    p = OscillatorParams.from_q(1.0, 1.0, 100.0)
    r = ReadoutParams.with_floor_below_peak(p, 40.0)
    cfg = SimConfig.for_oscillator(p, 8192, 2, record_force=True)
    traj = simulate(p, r, viscous_loop(p, 1.0), None, cfg)

    for name in ("trajectory.txt", "trajectory.npz"):
        path = save_trajectory(traj, str(tmp_path / name))
        loaded = load_trajectory(path)
        assert loaded.dt == traj.dt
        assert np.array_equal(loaded.x_series, traj.x_series)
        assert np.array_equal(loaded.force_series, traj.force_series)
        assert loaded.metadata["simulation"]["seed"] == 0
        assert loaded.metadata["readout"]["shot_noise_floor"] == r.shot_noise_floor


def test_background_inside_loop():
    p = OscillatorParams.from_q(1.0, 1.0, 100.0).with_temperature(0.0)
    r = ReadoutParams()
    fb = viscous_loop(p, 19.0)
    cfg = SimConfig.for_oscillator(p, 2 ** 14, 8, seed=5, sensing="ideal")
    outside = simulate(p, r, fb, None, cfg, background=BackgroundModel(1e-20))
    inside = simulate(p, r, fb, None, cfg, background=BackgroundModel(1e-20, True))

    # the loop only sees the background it acts on
    assert not np.any(outside.x_series)
    assert np.any(inside.x_series)

    recorded = [
        welch_psd(traj.measured_displacement(r), cfg.dt, n_scans=8) for traj in (outside, inside)
    ]
    freq = recorded[0].freq
    f_m = p.omega_m / (2 * np.pi)
    near = np.abs(freq - f_m) < 0.005
    ratio = np.mean(recorded[1].psd[near]) / np.mean(recorded[0].psd[near])
    expected = np.mean(offres_suppression(p, fb, 2 * np.pi * freq[near], use_filter=False))
    assert ratio == pytest.approx(expected, rel=0.1)
    assert ratio < 0.01


def test_record_covers_closed_loop_decay():
    p = OscillatorParams.from_q(1.0, 1.0, 100.0)
    cfg = SimConfig.for_oscillator(p, 1024, 2)
    assert not cfg.resolves(p.gamma)
    with pytest.raises(ParameterError):
        simulate(p, None, None, None, cfg)

    assert cfg.resolves(p.gamma * 50.0)
    traj = simulate(p, None, viscous_loop(p, 49.0), None, cfg)
    assert len(traj.x_series) == 2048

    coherent = simulate(p.with_temperature(0.0), None, None, None, replace(cfg, x0=1e-9, burn_in=0))
    assert coherent.x_series[0] == pytest.approx(1e-9, rel=1e-2)



#
#   SPECTRAL TESTS
#


def test_white_noise_level():
    dt, sigma = 0.01, 2.0
    series = sigma * np.random.default_rng(0).standard_normal(2 ** 18)
    s = welch_psd(series, dt, nperseg=1024)
    assert np.mean(s.psd[1:-1]) == pytest.approx(2 * sigma ** 2 * dt, rel=0.02)
    assert s.rbw == pytest.approx(1.5 / (1024 * dt))
    assert np.sum(s.psd) * s.df == pytest.approx(np.var(series), rel=0.02)

    by_rbw = welch_psd(series, dt, rbw=s.rbw)
    assert by_rbw.rbw == pytest.approx(s.rbw, rel=1e-2)

    # segments are not rounded to a power of two
    requested = 1.5 / (1000 * dt)
    assert welch_psd(series, dt, rbw=requested).rbw == pytest.approx(requested, rel=2e-3)


def test_insufficient_data():
    with pytest.raises(InsufficientDataError):
        welch_psd(np.zeros(100), 1.0, nperseg=128)
    with pytest.raises(InsufficientDataError):
        welch_psd(np.zeros(100), 1.0, n_scans=1)
    with pytest.raises(ParameterError):
        welch_psd(np.zeros(100), 1.0)


def test_scan_averager():
    dt = 0.1
    series = np.random.default_rng(2).standard_normal(8 * 1024)
    averager = ScanAverager(dt)
    for block in np.split(series, 8):
        averager.add(block)
    averaged = averager.spectrum()
    reference = welch_psd(series, dt, n_scans=8)
    assert averaged.n_averages == reference.n_averages == 8
    assert np.allclose(averaged.psd, reference.psd)
    assert averaged.rbw == pytest.approx(reference.rbw)

    with pytest.raises(InsufficientDataError):
        single = ScanAverager(dt)
        single.add(series[:1024])
        single.spectrum()


def test_normalization():
    s = Spectrum(np.linspace(0.0, 1.0, 11), np.full(11, 3.0), rbw=0.1)
    normalized = normalize_to_shot_noise(s, 1.0, floor_included=False)
    assert np.allclose(normalized.psd, 4.0)
    assert normalized.unit_label == "shot-noise units"
    assert np.allclose(denormalize(normalized).psd, s.psd)
    with pytest.raises(ParameterError):
        normalize_to_shot_noise(normalized, 1.0)


def test_window_kernel():
    assert np.allclose(window_kernel("hann", 1024), np.array([0.25, 1.0, 0.25]) / 1.5)


def test_lorentzian_fit():
    freq = np.linspace(0.9, 1.1, 2001)
    s = Spectrum(freq, lorentzian_psd(freq, 1.0, 0.01, 2.0, 0.1), rbw=1e-4)
    fit = lorentzian_fit(s)
    assert fit.converged
    assert fit.center == pytest.approx(1.0, rel=1e-5)
    assert fit.width == pytest.approx(0.01, rel=1e-5)
    assert fit.area == pytest.approx(2.0, rel=1e-5)
    assert fit.background == pytest.approx(0.1, rel=1e-5)
    assert fit.quality_factor == pytest.approx(100.0, rel=1e-5)

    narrow = lorentzian_fit(s, (0.95, 1.05))
    assert narrow.width == pytest.approx(0.01, rel=1e-5)


def test_no_peak():
    freq = np.linspace(0.9, 1.1, 201)
    with pytest.raises(NoPeakError):
        lorentzian_fit(Spectrum(freq, np.ones(201), rbw=1e-3))
    with pytest.raises(NoPeakError):
        peak = Spectrum(freq, lorentzian_psd(freq, 1.0, 0.01, 2.0), rbw=1e-3)
        lorentzian_fit(peak, (0.99, 0.9901))
    with pytest.raises(ParameterError):
        lorentzian_fit(Spectrum(freq, np.ones(201), rbw=1e-3), (1.0, 0.9))


def test_extract_metrics():
    open_fit = FitResult(1.0, 1.0, 2.0, 0.0, 0.0, True, peak=4.0)
    closed_fit = FitResult(1.0, 5.0, 0.4, 0.0, 0.0, True, peak=0.16)
    metrics = extract_metrics(open_fit, closed_fit)
    assert metrics["gamma_ratio"] == pytest.approx(5.0)
    assert metrics["r_amplitude"] == pytest.approx(5.0)
    assert metrics["cooling_factor"] == pytest.approx(5.0)

    with pytest.raises(FitConvergenceError):
        extract_metrics(open_fit, replace(closed_fit, converged=False))


def test_band_variance():
    freq = np.arange(101) / 10.0
    s = Spectrum(freq, np.full(len(freq), 2.0), rbw=0.1, floor=1.0)
    assert band_variance(s, (1.0, 3.0)) == pytest.approx(4.0)
    assert band_variance(s, (1.0, 3.0), subtract_floor=True) == pytest.approx(2.0)
    with pytest.raises(ParameterError):
        band_variance(s, (1.01, 1.02))


def test_gain_calibration():
    line = [(g, 1.0 + 0.5 * g) for g in (0.0, 2.0, 4.0, 8.0)]
    assert damping_line_scale(line) == pytest.approx(0.5)
    measured = calibrate_gain(4.0, 1.0, line)
    assert measured.g_raw == pytest.approx(2.0)
    assert measured.g_normalized == pytest.approx(1.0)
    assert calibrate_gain(4.0, 1.0, line, sign=-1.0).g_normalized == pytest.approx(-1.0)

    assert fit_damping_line([0.0, 1.0, 2.0], [1.0, 2.0, 3.0]) == pytest.approx((1.0, 1.0))
    with pytest.raises(DegenerateFitError):
        damping_line_scale([(1.0, 2.0)])
    with pytest.raises(DegenerateFitError):
        fit_damping_line([1.0, 1.0], [2.0, 2.0])


def test_sine_power():
    dt, f0, amplitude = 0.01, 12.3, 3.0
    t = dt * np.arange(2 ** 16)
    s = welch_psd(amplitude * np.sin(2 * np.pi * f0 * t), dt, nperseg=1024)
    assert np.sum(s.psd) * s.df == pytest.approx(amplitude ** 2 / 2, rel=1e-2)
    assert abs(s.freq[np.argmax(s.psd)] - f0) <= s.df


def test_gain_calibration_negative_gains():
    line = [(g, 1.0 + 0.5 * g) for g in (-1.6, -0.8, 0.0, 2.0, 4.0)]
    assert damping_line_scale(line) == pytest.approx(0.5)
    heated = calibrate_gain(4.0, 1.0, line, sign=-1.0)
    assert heated.g_raw == pytest.approx(-2.0)
    assert heated.g_normalized == pytest.approx(-1.0)

    g = np.array([-0.9, 0.0, 4.0, 19.0])
    assert fit_damping_line(g, 1.2 + 0.9 * g) == pytest.approx((0.9, 1.2))


def test_weak_broad_peak():
    freq = np.linspace(0.0, 1.0, 4001)
    width = 0.1
    # peak height 4 area/Gamma: a tenth of the flat level
    area = 0.1 * (2 * np.pi * width) / 4
    noise = 1.0 + 0.1 * np.random.default_rng(3).standard_normal(len(freq))
    s = Spectrum(freq, noise + lorentzian_psd(freq, 0.5, width, area), rbw=1e-3)
    fit = lorentzian_fit(s)
    assert fit.center == pytest.approx(0.5, abs=0.03)
    assert fit.width == pytest.approx(width, rel=0.3)
    assert fit.background == pytest.approx(1.0, rel=0.02)



def test_analytic_spectrum():
    p = OscillatorParams.from_q(1.0, 1.0, 1000.0)
    r = ReadoutParams.with_floor_below_peak(p, 40.0)
    f_m = p.omega_m / (2 * np.pi)
    freq = np.linspace(0.9 * f_m, 1.1 * f_m, 501)
    open_fb = FeedbackConfig.from_ratio(p, 0.0)

    sensor = analytic_spectrum(p, open_fb, freq, r, sensing="sensor")
    ideal = analytic_spectrum(p, open_fb, freq, r, sensing="ideal")
    assert np.allclose(sensor.psd, ideal.psd)
    assert sensor.floor == pytest.approx(2 * r.shot_noise_floor)

    closed = analytic_spectrum(p, FeedbackConfig.from_ratio(p, 4.0), [f_m])
    opened = analytic_spectrum(p, open_fb, [f_m])
    assert opened.psd[0] / closed.psd[0] == pytest.approx(25.0)


def test_spectrum_io(tmp_path):
    freq = np.linspace(0.9, 1.1, 201)
    s = Spectrum(freq, lorentzian_psd(freq, 1.0, 0.01, 2.0, 0.1), rbw=1e-3, n_averages=16,
                 floor=0.2)
    loaded = load_spectrum(save_spectrum(s, str(tmp_path / "spectrum.txt")))
    assert np.array_equal(loaded.freq, s.freq)
    assert np.array_equal(loaded.psd, s.psd)
    assert (loaded.rbw, loaded.n_averages, loaded.floor) == (s.rbw, 16, 0.2)

    fit = lorentzian_fit(s)
    assert load_fit(save_fit(fit, str(tmp_path / "fit.txt"))) == fit


#
#   CONFIG TESTS
#


def test_profiles():
    scaled = load_config("scaled")
    assert scaled.oscillator.q == pytest.approx(1000.0)
    assert scaled.simulation.dt * scaled.oscillator.omega_m < 0.1
    physical = load_config("physical")
    assert physical.oscillator.q == pytest.approx(41309.0, rel=1e-4)
    assert physical.oscillator.mass_eff == 1e-4
    assert load_config("defaults").oscillator == scaled.oscillator


def test_config_round_trip(tmp_path):
    cfg = light_config(heating_scans=8).with_seed(42)
    path = str(tmp_path / "experiment.ini")
    dump_config(cfg, path)
    loaded = load_config(path)
    assert loaded.oscillator == cfg.oscillator
    assert loaded.readout == cfg.readout
    assert loaded.simulation == cfg.simulation
    assert loaded.background == cfg.background
    assert loaded.analysis == cfg.analysis
    assert loaded.feedback.filter_center == cfg.feedback.filter_center


def test_bad_config(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[oscillator]\nmass_eff = -1\nomega_m = 1\nq = 10\n")
    with pytest.raises(ParameterError):
        load_config(str(path))
    path.write_text("[analysis]\nheating_gain = 0.5\n")
    with pytest.raises(ParameterError):
        load_config(str(path))
    with pytest.raises(ParameterError):
        load_config("no_such_profile")


def test_config_overrides():
    cfg = load_config("scaled")
    assert cfg.with_rbw(1e-3).simulation.n_samples == int(round(1.5 / (1e-3 * cfg.simulation.dt)))
    assert cfg.with_scans(3).simulation.n_scans == 3
    assert cfg.with_filter(0.5, 20.0).feedback.filter_bandwidth == pytest.approx(0.025)


#
#   SCENARIO TESTS
#


def test_scenario_registry():
    assert sorted(SCENARIOS) == [
        "cooling_spectra",
        "gain_sweep",
        "heating",
        "offres_cooling",
        "oracle_check",
    ]


def test_cooling_spectra(tmp_path):
    report = CoolingSpectra(light_config()).run()
    df = report.to_dataframe()
    print(df)
    assert list(df["g_over_gamma"]) == [0.0, 2.0, 6.0, 19.0]
    assert np.allclose(df["gamma_ratio"], 1.0 + df["g_over_gamma"], rtol=0.1)
    assert df["r_amplitude"].iloc[-1] > 15.0
    assert report.summary["peak_to_floor_db"] == pytest.approx(40.0, abs=1.0)

    paths = report.save(str(tmp_path / "cooling"), plot=True)
    names = {os.path.basename(path) for path in paths}
    assert {"metrics.csv", "summary.json", "manifest.json", "spectra.png"} <= names

    with pytest.raises(ParameterError):
        CoolingSpectra(light_config(), gains=[2.0, 6.0]).run()


def test_cooling_noise_reduction():
    report = CoolingSpectra(light_config(n_scans=64), gains=[0.0, 19.0]).run()
    closed = report.to_dataframe().iloc[-1]
    print(closed)
    assert closed["r_model"] == pytest.approx(20.0)
    assert closed["r_amplitude"] == pytest.approx(20.0, rel=0.05)
    assert closed["gamma_ratio"] == pytest.approx(20.0, rel=0.05)


def test_seeded_tables_identical(tmp_path):
    cfg = light_config(n_scans=16)
    tables = []
    for name, config in (("serial", cfg), ("threaded", cfg.with_threads(2))):
        report = CoolingSpectra(config, gains=[0.0, 6.0]).run()
        paths = report.save(str(tmp_path / name))
        (metrics,) = [path for path in paths if os.path.basename(path) == "metrics.csv"]
        with open(metrics, "rb") as f:
            tables.append(f.read())
    assert tables[0] == tables[1]



def test_heating():
    cfg = light_config(heating_scans=32)
    report = Heating(cfg, gains=[-0.9]).run()
    print(report.to_dataframe())
    assert report.summary["q_eff_over_q"] == pytest.approx(10.0, rel=0.15)
    assert report.summary["ring_down_gamma_fb_over_gamma"] == pytest.approx(0.1, rel=0.05)

    with pytest.raises(InstabilityError):
        Heating(cfg, gains=[-1.0]).run()
    with pytest.raises(ParameterError):
        Heating(cfg, gains=[0.5]).run()


def test_heating_high_q_ring_down():
    scenario = Heating(light_config(q=1000.0))
    assert scenario.gains == [-0.98]
    p = scenario.oscillator
    rate = scenario.ring_down(scenario.feedback_for(-0.98))
    assert rate / p.gamma == pytest.approx(0.02, rel=0.05)
    assert effective_q(p, -0.98 * p.gamma) == pytest.approx(50 * p.q)



def test_gain_sweep():
    sweep = GainSweep(light_config(), gains=[0.0, 2.0, 4.0, 9.0], background=BackgroundModel())
    report = sweep.run()
    df = report.to_dataframe()
    print(df)
    assert report.summary["damping_slope"] == pytest.approx(1.0, rel=0.1)
    assert report.summary["cooling_factor_saturation"] == float("inf")
    assert np.allclose(df["cooling_factor_fit"], df["r_model"], rtol=0.15)
    closed = df[df["g_over_gamma"] > 0]
    assert np.allclose(closed["g_measured_over_gamma"], closed["g_over_gamma"], rtol=0.05)
    assert len(report.curves["model"]) == 200


def test_gain_sweep_with_background():
    cfg = light_config()
    sweep = GainSweep(cfg, gains=[0.0, 4.0, 19.0, 39.0])
    report = sweep.run()
    df = report.to_dataframe()
    print(df)
    p, bg = cfg.oscillator, cfg.background
    band = cfg.analysis.band_width * p.gamma
    saturation = 1.0 + mode_variance(p, 0.0, band) / background_variance(p, bg, 0.0, band)
    assert report.summary["cooling_factor_saturation"] == pytest.approx(saturation)

    assert np.allclose(df["cooling_factor"], df["cooling_factor_model"], rtol=0.08)
    strongest = df.iloc[-1]
    assert strongest["cooling_factor"] < saturation * 1.08
    assert strongest["cooling_factor"] < 0.1 * strongest["r_model"]

    assert report.summary["lost_fits"] == int(df["gamma_ratio"].isna().sum())
    assert df["gamma_ratio"].iloc[0] == pytest.approx(1.0)
    assert df["gamma_ratio"].iloc[1] == pytest.approx(5.0, rel=0.15)



def test_offres_cooling():
    report = OffResonanceCooling(light_config()).run()
    summary = report.summary
    print(summary)
    assert summary["stiffness_ratio"] == pytest.approx(1.2)
    assert summary["dip_depth_db"] > 3.0
    assert summary["dip_depth_db"] <= summary["dip_depth_limit_db"] + 0.5
    assert summary["dip_width_ratio"] == pytest.approx(1.0, rel=0.2)
    assert summary["fitted_gain_ratio"] == pytest.approx(1.0, rel=0.2)


def test_oracle_check():
    cfg = light_config(oracle_scans=800, oracle_groups=4)
    report = OracleCheck(cfg, gains=[0.0, 4.0], temperatures=[300.0]).run()
    df = report.to_dataframe()
    print(df)
    assert report.oracle_deviation["n_points"] == 2
    assert report.oracle_deviation["max_deviation"] < 0.06
    assert np.all(df["deviation"] >= df["mean_group_deviation"])


def test_oracle_strong_cooling():
    cfg = light_config(oracle_scans=800, oracle_groups=4)
    report = OracleCheck(cfg, gains=[19.0], temperatures=[300.0]).run()
    row = report.to_dataframe().iloc[0]
    print(row)
    assert row["deviation"] < 0.06
    assert bool(row["within_tolerance"]) == (row["deviation"] <= cfg.analysis.oracle_tolerance)



#
#   CLI TESTS
#


def test_parse_frequency():
    assert parse_frequency("45") == 45.0
    assert parse_frequency("45hz") == 45.0
    assert parse_frequency("1858.9k") == pytest.approx(1858.9e3)
    assert parse_frequency("1858.9 kHz") == pytest.approx(1858.9e3)
    assert parse_frequency("1858.9", default_scale=1e3) == pytest.approx(1858.9e3)
    assert parse_frequency("2M") == 2e6
    assert parse_ratio("19gamma") == 19.0
    for text in ("3m", "fast", "4 parsecs"):
        with pytest.raises(UsageError):
            parse_frequency(text)


def test_cli_oracle(capsys):
    code = main(["oracle", "--gamma-hz", "45", "--fm-khz", "1858.9", "--g-over-gamma", "19"])
    out = capsys.readouterr().out
    assert code == 0
    assert "R = 20" in out
    assert "T_fb_K = 15" in out

    code = main(["oracle", "--gamma-hz", "45", "--fm-khz", "1858.9", "--g-over-gamma", "-1"])
    assert code == 1


def test_parse_temperature_and_mass():
    assert parse_temperature("300") == 300.0
    assert parse_temperature("300K") == 300.0
    assert parse_temperature("20 mK") == pytest.approx(0.02)
    assert parse_mass("1e-4") == 1e-4
    assert parse_mass("0.1g") == pytest.approx(1e-4)
    assert parse_mass("100 mg") == pytest.approx(1e-4)
    for parse, text in ((parse_temperature, "-5"), (parse_temperature, "5 parsecs"),
                        (parse_mass, "0"), (parse_mass, "heavy")):
        with pytest.raises(UsageError):
            parse(text)


def test_cli_oracle_units(capsys):
    code = main(["oracle", "--gamma-hz", "45", "--fm-khz", "1858.9", "--g-over-gamma", "19",
                 "--temperature", "300K", "--mass", "0.1g"])
    out = capsys.readouterr().out
    assert code == 0
    assert "T_fb_K = 15" in out



def test_cli_errors(tmp_path):
    assert main(["bogus"]) == 1
    assert main(["oracle", "--gamma-hz", "fast", "--fm-khz", "1", "--g-over-gamma", "1"]) == 1

    freq = np.linspace(0.9, 1.1, 201)
    path = save_spectrum(Spectrum(freq, np.ones(201), rbw=1e-3), str(tmp_path / "flat.txt"))
    assert main(["fit", path]) == 2


def test_cli_pipeline(tmp_path):
    config = str(tmp_path / "light.ini")
    dump_config(light_config(n_samples=4096, n_scans=4), config)
    out = str(tmp_path / "run")
    assert main(["simulate", "--config", config, "--gain-over-gamma", "2", "--format", "txt",
                 "--out", out]) == 0
    trajectory = os.path.join(out, "trajectory.txt")
    assert os.path.isfile(os.path.join(out, "manifest.json"))

    spectrum = str(tmp_path / "spectrum.txt")
    assert main(["spectrum", trajectory, "--normalize", "--out", spectrum]) == 0
    s = load_spectrum(spectrum)
    assert s.normalized and s.n_averages == 4
