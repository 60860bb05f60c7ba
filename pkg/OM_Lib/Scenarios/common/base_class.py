from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from OM_Lib.config import load_config
from OM_Lib.exceptions import ParameterError
from OM_Lib.models import BackgroundModel, phase_to_displacement, to_single_sided_hz
from OM_Lib.Simulation import LangevinSimulator
from OM_Lib.Spectral import ScanAverager, analytic_spectrum, lorentzian_fit
from .report import RunManifest, ScenarioReport


@dataclass
class Measurement:
    """
    Averaged spectra of one simulated point

    :param spectrum (Spectrum): Measured displacement (sensor record / cavity gain)
    :param force (Spectrum): Actuator force, when recorded
    :param loop_input (Spectrum): Displacement record seen by the loop, when recorded
    :param cross (np.ndarray): Cross spectrum of loop input and force, when recorded
    """

    spectrum: object
    force: object = None
    loop_input: object = None
    cross: np.ndarray = None


class BaseScenario:
    """
    Basic implementation of an experiment run on the virtual mirror: simulate points,
    measure their spectra like an analyzer, fit and compare with the closed-loop model

    :param config (ExperimentConfig): Parameter bundles; the scaled profile when None
    :param gains (list): g/Gamma of the points, scenario default when None
    :param background (BackgroundModel): Background of the sensor record; none when None
    :param verbose (bool): True to print progress
    :param log (bool): True if logging required
    :param logdir (str): Directory for storing logs
    """

    name = None

    def __init__(
        self,
        config=None,
        gains=None,
        background=None,
        verbose=False,
        log=False,
        logdir="./Experiments",
    ):
        self.config = config if config is not None else load_config("scaled")
        self.gains = list(gains) if gains is not None else list(self.default_gains())
        self.background = background if background is not None else BackgroundModel()
        self.verbose = verbose
        self.log = log
        self.logdir = logdir
        self.manifest = RunManifest.create(self.name, self.config)

        if self.log:
            from torch.utils.tensorboard import SummaryWriter

            self.writer = SummaryWriter(logdir)

    @property
    def oscillator(self):
        return self.config.oscillator

    def default_gains(self):
        return ()

    def run(self):
        """
        Function that runs the scenario and returns a ScenarioReport
        """

        raise NotImplementedError

    def new_report(self):
        return ScenarioReport(self.name, manifest=self.manifest)

    def feedback_for(self, g_over_gamma, **kwargs):
        """
        Loop template of the configuration with gain g = g_over_gamma x Gamma
        """
        return replace(
            self.config.feedback, gain=g_over_gamma * self.oscillator.gamma, **kwargs
        )

    def measure(
        self,
        feedback,
        oscillator=None,
        simulation=None,
        background=None,
        record_force=False,
        band=None,
    ):
        """
        Simulate one point and average its spectra scan by scan

        :param feedback (FeedbackConfig): Loop of the point
        :param oscillator (OscillatorParams): Mode, the configured one when None
        :param simulation (SimConfig): Time grid, the configured one when None
        :param background (BackgroundModel): Background, the scenario's when None
        :param record_force (bool): Also average the force and loop-input spectra
        :param band (tuple): (f_lo, f_hi) in Hz kept in the returned spectra
        :returns: Measurement
        """
        p = oscillator if oscillator is not None else self.oscillator
        sim = simulation if simulation is not None else self.config.simulation
        sim = replace(sim, record_force=record_force)
        readout = self.config.readout
        simulator = LangevinSimulator(
            p,
            readout,
            feedback,
            self.config.actuator,
            sim,
            background if background is not None else self.background,
        )

        displacement = ScanAverager(sim.dt)
        force = ScanAverager(sim.dt, units="N^2/Hz")
        loop_input = ScanAverager(sim.dt)
        for _, phase, f, sensed in simulator.simulate_scans():
            displacement.add(phase_to_displacement(readout, phase))
            if record_force:
                force.add(f)
                loop_input.add(sensed)
                force.add_cross("loop_force", sensed, f)

        spectrum = replace(
            displacement.spectrum(),
            floor=float(to_single_sided_hz(readout.shot_noise_floor)),
        )
        if not record_force:
            return Measurement(_trim(spectrum, band))
        cross = force.cross_spectrum("loop_force")
        if band is not None:
            cross = cross[(force.freq >= band[0]) & (force.freq <= band[1])]
        return Measurement(
            _trim(spectrum, band),
            _trim(force.spectrum(), band),
            _trim(loop_input.spectrum(), band),
            cross,
        )

    def measure_all(self, feedbacks, simulations=None, **kwargs):
        """
        Measure several points, `threads` at a time, in order

        :param feedbacks (list): Loop of each point
        :param simulations (list): Time grid of each point, the configured one when None
        """
        if simulations is None:
            simulations = [None] * len(feedbacks)
        points = list(zip(feedbacks, simulations))
        threads = int(self.config.simulation.threads)
        if threads == 1 or len(points) < 2:
            return [self.measure(fb, simulation=sim, **kwargs) for fb, sim in points]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(
                pool.map(lambda point: self.measure(point[0], simulation=point[1], **kwargs), points)
            )

    def scan_config(self, g_over_gamma, n_scans=None, shorten=False):
        """
        Time grid resolving the closed-loop line of gain g/Gamma: scans shorter than
        heating_decay_times closed-loop decay times are lengthened

        :param g_over_gamma (float): Gain of the point
        :param n_scans (int): Number of scans, the configured one when None
        :param shorten (bool): Also cut longer scans down to heating_decay_times
        """
        sim, analysis = self.config.simulation, self.config.analysis
        p = self.oscillator
        if n_scans is not None:
            sim = replace(sim, n_scans=int(n_scans))
        needed = analysis.heating_decay_times / (p.gamma * (1.0 + g_over_gamma))
        if sim.n_samples * sim.dt >= needed:
            if not shorten:
                return sim
            return replace(sim, n_samples=max(int(np.ceil(needed / sim.dt)), 64))
        return replace(sim, n_samples=int(np.ceil(needed / sim.dt)))

    def analysis_band(self, g_over_gamma_max=0.0):
        """
        Band around the resonance holding the fit windows of every point, in Hz
        """
        p, analysis = self.oscillator, self.config.analysis
        f_m = p.omega_m / (2 * np.pi)
        width = p.gamma * max(1.0 + g_over_gamma_max, 1.0) / (2 * np.pi)
        half = max(analysis.fit_half_width * width, 0.5 * analysis.band_width * p.gamma / (2 * np.pi))
        return max(f_m - half, 0.0), f_m + half

    def fit(self, spectrum, g_over_gamma, strict=True):
        """
        Lorentzian fit over the resonance +/- fit_half_width expected linewidths, the
        half-width capped at fit_max_fraction of the resonance frequency
        """
        p, analysis = self.oscillator, self.config.analysis
        f_m = p.omega_m / (2 * np.pi)
        half = analysis.fit_half_width * p.gamma * (1.0 + g_over_gamma) / (2 * np.pi)
        half = min(half, analysis.fit_max_fraction * f_m)
        return lorentzian_fit(spectrum, (f_m - half, f_m + half), strict=strict)

    def overlay(self, feedback, spectrum, background=None, oscillator=None, use_filter=True):
        """
        Closed-loop model on the frequency grid of a measured spectrum
        """
        return analytic_spectrum(
            oscillator if oscillator is not None else self.oscillator,
            feedback,
            spectrum.freq,
            self.config.readout,
            background if background is not None else self.background,
            sensing=self.config.simulation.sensing,
            use_filter=use_filter,
            rbw=spectrum.rbw,
            n_averages=spectrum.n_averages,
        )

    def check_gains(self):
        for g in self.gains:
            if not g > -1.0:
                raise ParameterError(f"g/Gamma = {g} is at or beyond the instability boundary -1")

    def post_point_call(self, index, row):
        """
        Called after every point with its metrics row

        :param index (int): Index of the point
        :param row (dict): Metrics of the point
        """

        if self.verbose:
            print(" | ".join(f"{k}: {v:.4g}" if isinstance(v, float) else f"{k}: {v}" for k, v in row.items()))
        if self.log:
            for key, value in row.items():
                if isinstance(value, (int, float)) and key != "g_over_gamma":
                    self.writer.add_scalar(f"Metrics/{key}", value, index)


def _trim(spectrum, band):
    if band is None:
        return spectrum
    return spectrum.band(*band)
