from dataclasses import replace

import numpy as np
import pandas as pd
from scipy.optimize import least_squares

from OM_Lib.exceptions import FitConvergenceError, ParameterError
from OM_Lib.models import (
    FeedbackConfig,
    offres_suppression,
    thermal_displacement_psd,
    to_db,
)
from OM_Lib.Scenarios.common import BaseScenario, RunManifest


def dip_depth(x):
    """
    Largest open/closed ratio of a stiffness-dominated loop of strength x,
    max over u of (1 + (u + x)^2)/(1 + u^2)
    """
    return 0.5 * (x ** 2 + 2.0 + abs(x) * np.sqrt(x ** 2 + 4.0))


class OffResonanceCooling(BaseScenario):
    """
    Feedback filtered far below the resonance, where the mode responds as a spring:
    the loop force, in quadrature with the stiffness M Omega_M^2, carves a dip in the
    off-resonant tail whose width follows the filter bandwidth. A loop force in phase
    with the stiffness destabilizes the band-pass loop already at loop strengths of
    order one.

    The gain is set by the loop strength X = g Omega_c/|Omega_M^2 - Omega_c^2|
    (analysis.offres_depth). Open and closed runs share their seed, so their ratio is
    free of most of the averaging noise; the dip is read from a fit of that ratio.
    The readout floor keeps the distance to the local tail level that the configured
    floor has to the resonance peak.

    :param config (ExperimentConfig): Parameter bundles; the scaled profile when None
    :param gains (list): Unused, the gain follows from the loop strength
    :param background (BackgroundModel): Background of the record; none when None
    :param verbose (bool): True to print progress
    :param log (bool): True if logging required
    :param logdir (str): Directory for storing logs
    """

    name = "offres_cooling"

    def __init__(
        self,
        config=None,
        gains=None,
        background=None,
        verbose=False,
        log=False,
        logdir="./Experiments",
    ):
        super(OffResonanceCooling, self).__init__(
            config, gains, background, verbose, log, logdir
        )
        analysis = self.config.analysis
        p = self.oscillator
        center = analysis.offres_center_ratio * p.omega_m
        floor_ratio = self.config.readout.shot_noise_floor / thermal_displacement_psd(
            p, p.omega_m
        )
        readout = self.config.readout.with_floor(
            float(floor_ratio * thermal_displacement_psd(p, center))
        )
        feedback = replace(
            self.config.feedback,
            filter_center=center,
            filter_q=analysis.offres_filter_q,
            loop_phase=0.0,
            filtered=True,
        )
        self.config = replace(self.config, readout=readout, feedback=feedback)
        self.manifest = RunManifest.create(self.name, self.config)

    @property
    def filter_center(self):
        return self.config.feedback.filter_center

    @property
    def filter_bandwidth(self):
        return self.config.feedback.filter_bandwidth

    def offres_gain(self):
        """
        Gain g in rad/s giving the configured loop strength at the filter center
        """
        p, wc = self.oscillator, self.filter_center
        return self.config.analysis.offres_depth * abs(p.omega_m ** 2 - wc ** 2) / wc

    def band(self, widths=5.0):
        """
        Omega_c +/- `widths` filter bandwidths, in Hz
        """
        half = widths * self.filter_bandwidth
        return (
            max(self.filter_center - half, 0.0) / (2 * np.pi),
            (self.filter_center + half) / (2 * np.pi),
        )

    def fit_ratio(self, freq, ratio, gain):
        """
        Fit the closed/open ratio with the suppression of a filtered loop of free
        gain, center and bandwidth

        :returns: (gain, center, bandwidth) in rad/s
        """
        p = self.oscillator
        omega = 2 * np.pi * freq
        keep = ratio > 0
        if np.count_nonzero(keep) < 4:
            raise FitConvergenceError("closed/open ratio has too few positive bins")
        omega, log_ratio = omega[keep], np.log(ratio[keep])
        wc, bw = self.filter_center, self.filter_bandwidth
        x0 = np.array([np.log(gain), wc, np.log(bw)])
        lower = [-np.inf, wc - 2.0 * bw, -np.inf]
        upper = [np.inf, wc + 2.0 * bw, np.inf]

        def residuals(params):
            fb = FeedbackConfig(
                gain=np.exp(params[0]),
                filter_center=params[1],
                filter_q=params[1] / np.exp(params[2]),
            )
            return np.log(offres_suppression(p, fb, omega)) - log_ratio

        result = least_squares(
            residuals, x0, bounds=(lower, upper), x_scale=[1.0, bw, 1.0], method="trf"
        )
        if not result.success:
            raise FitConvergenceError(f"dip fit did not converge: {result.message}")
        return float(np.exp(result.x[0])), float(result.x[1]), float(np.exp(result.x[2]))

    def run(self):
        p = self.oscillator
        if not self.filter_center < p.omega_m:
            raise ParameterError("the off-resonance filter must sit below the resonance")
        gain = self.offres_gain()

        if self.verbose:
            print(f"Running scenario {self.name}... ")
            print("-" * 80)

        open_fb = self.config.feedback.with_gain(0.0)
        closed_fb = self.config.feedback.with_gain(gain)
        band = self.band()
        open_m, closed_m = self.measure_all([open_fb, closed_fb], band=band)

        floor = open_m.spectrum.floor
        ratio = np.clip(closed_m.spectrum.psd - floor, 0.0, None) / np.clip(
            open_m.spectrum.psd - floor, np.finfo(float).tiny, None
        )
        fit_gain, fit_center, fit_bandwidth = self.fit_ratio(
            open_m.spectrum.freq, ratio, gain
        )
        fitted = FeedbackConfig(
            gain=fit_gain, filter_center=fit_center, filter_q=fit_center / fit_bandwidth
        )
        omega = open_m.spectrum.omega
        model_depth = float(to_db(np.max(1.0 / offres_suppression(p, closed_fb, omega))))
        measured_depth = float(to_db(np.max(1.0 / offres_suppression(p, fitted, omega))))

        open_model = self.overlay(open_fb, open_m.spectrum)
        open_deviation = float(np.sum(open_m.spectrum.psd) / np.sum(open_model.psd) - 1.0)
        strength = gain * self.filter_center / abs(p.omega_m ** 2 - self.filter_center ** 2)

        report = self.new_report()
        rows = []
        for label, fb, m in (("open", open_fb, open_m), ("closed", closed_fb, closed_m)):
            row = {
                "g_over_gamma": fb.gain / p.gamma,
                "band_variance_ratio": float(
                    np.sum(m.spectrum.psd - floor) / np.sum(open_m.spectrum.psd - floor)
                ),
            }
            report.add_run(label, m.spectrum, None, row, self.overlay(fb, m.spectrum))
            rows.append(row)
        for i, row in enumerate(rows):
            self.post_point_call(i, row)

        report.summary.update(
            {
                "filter_center_over_omega_m": self.filter_center / p.omega_m,
                "stiffness_ratio": strength,
                "g_over_gamma": gain / p.gamma,
                "g_over_stiffness": gain * self.filter_center / (p.omega_m ** 2),
                "dip_depth_db": measured_depth,
                "dip_depth_model_db": model_depth,
                "dip_depth_limit_db": float(to_db(dip_depth(strength))),
                "dip_width_hz": fit_bandwidth / (2 * np.pi),
                "filter_bandwidth_hz": self.filter_bandwidth / (2 * np.pi),
                "dip_width_ratio": fit_bandwidth / self.filter_bandwidth,
                "fitted_gain_ratio": fit_gain / gain,
                "open_model_deviation": open_deviation,
            }
        )
        report.curves["suppression"] = self.suppression_curve(
            open_m.spectrum.freq, ratio, closed_fb, fitted
        )
        return report

    def suppression_curve(self, freq, ratio, model_fb, fitted_fb):
        """
        Measured, expected and fitted closed/open ratio across the band
        """
        p = self.oscillator
        omega = 2 * np.pi * freq
        return pd.DataFrame(
            {
                "freq_hz": freq,
                "measured_ratio": ratio,
                "model_ratio": offres_suppression(p, model_fb, omega),
                "fitted_ratio": offres_suppression(p, fitted_fb, omega),
            }
        )


def run_offres_cooling(config=None, verbose=False, log=False, logdir="./Experiments"):
    """
    Off-resonance cooling with the filter at analysis.offres_center_ratio of the
    resonance (default 800/1858.9)

    :param config (ExperimentConfig): Parameter bundles; the scaled profile when None
    :returns: ScenarioReport
    """
    return OffResonanceCooling(config, verbose=verbose, log=log, logdir=logdir).run()
